//! CSV and JSON renderings of curves and maps.

use std::fmt::Write;

use serde_json::{json, Value};

use super::{ExcursionIntervals, ProfileCurve, ProfileMap};

/// Real in 17 significant digits; non-finite values become empty fields.
pub fn write_real(out: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(out, "{v:.16e}");
    }
}

fn header(p: usize, d: usize) -> String {
    let mut cols: Vec<String> = (1..=p).map(|k| if p == 1 { "eta".to_string() } else { format!("eta{k}") }).collect();
    cols.push("sup".into());
    cols.push("inf".into());
    cols.extend((1..=d).map(|i| format!("argmax_x{i}")));
    cols.extend((1..=d).map(|i| format!("argmin_x{i}")));
    cols.join(",")
}

fn row(out: &mut String, eta: &[f64], sup: f64, inf: f64, amax: &[f64], amin: &[f64]) {
    let vals = eta.iter().chain([&sup, &inf]).chain(amax).chain(amin);
    for (k, v) in vals.enumerate() {
        if k > 0 {
            out.push(',');
        }
        write_real(out, *v);
    }
    out.push('\n');
}

/// Columns `eta, sup, inf, argmax_x1.., argmin_x1..`.
pub fn curve_csv(c: &ProfileCurve) -> String {
    let d = c.projection.d();
    let mut out = header(1, d);
    out.push('\n');
    for j in 0..c.eta.len() {
        row(&mut out, &[c.eta[j]], c.sup[j], c.inf[j], &c.argmax[j], &c.argmin[j]);
    }
    out
}

/// Columns `eta1, eta2, sup, inf, argmax_x1.., argmin_x1..`; masked nodes
/// are omitted.
pub fn map_csv(m: &ProfileMap) -> String {
    let d = m.projection.d();
    let mut out = header(2, d);
    out.push('\n');
    for k in 0..m.grid.len() {
        if m.grid.feasible[k] {
            row(&mut out, &m.grid.etas[k], m.sup[k], m.inf[k], &m.argmax[k], &m.argmin[k]);
        }
    }
    out
}

fn finite_or_null(v: &[f64]) -> Vec<Value> {
    v.iter().map(|x| if x.is_finite() { json!(x) } else { Value::Null }).collect()
}

fn psi_json(m: &nalgebra::DMatrix<f64>) -> Value {
    json!((0..m.ncols()).map(|k| m.column(k).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

pub fn curve_json(c: &ProfileCurve, partitions: &[ExcursionIntervals]) -> Value {
    json!({
        "projection": {
            "kind": format!("{:?}", c.projection.kind()),
            "psi": psi_json(c.projection.psi()),
        },
        "grid": { "points": c.eta.len(), "lower": c.eta.first(), "upper": c.eta.last() },
        "provenance": c.provenance,
        "eta": finite_or_null(&c.eta),
        "sup": finite_or_null(&c.sup),
        "inf": finite_or_null(&c.inf),
        "thresholds": partitions,
    })
}

pub fn map_json(m: &ProfileMap) -> Value {
    let (a, b) = m.grid.axes();
    json!({
        "projection": {
            "kind": format!("{:?}", m.projection.kind()),
            "psi": psi_json(m.projection.psi()),
        },
        "grid": { "resolution": m.grid.resolution, "axis1": a, "axis2": b, "feasible": m.grid.feasible },
        "provenance": m.provenance,
        "sup": finite_or_null(&m.sup),
        "inf": finite_or_null(&m.inf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::Projection;
    use crate::profiles::Provenance;

    #[test]
    fn csv_layout() {
        let c = ProfileCurve {
            projection: Projection::coordinate(2, 0).unwrap(),
            eta: vec![0.0, 1.0],
            sup: vec![1.0, 2.0],
            inf: vec![0.5, f64::NAN],
            argmax: vec![vec![0.0, 0.25], vec![1.0, 0.5]],
            argmin: vec![vec![0.0, 0.0], vec![f64::NAN; 2]],
            provenance: Provenance::Exact,
        };
        let s = curve_csv(&c);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "eta,sup,inf,argmax_x1,argmax_x2,argmin_x1,argmin_x2");
        assert_eq!(lines[2], "1.0000000000000000e0,2.0000000000000000e0,,1.0000000000000000e0,5.0000000000000000e-1,,");
        let v: f64 = lines[1].split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(v, 0.25);
    }
}
