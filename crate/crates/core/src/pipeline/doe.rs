//! Design-of-experiments CSV: a header row naming the columns, one
//! response column, every other column an input.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Doe {
    pub input_names: Vec<String>,
    pub response_name: String,
    /// Inputs in the unit hyper-rectangle.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub scaling: Scaling,
}

/// Per-input affine map to `[0, 1]`. Inputs already in the unit interval
/// are left alone (`lower = 0`, `upper = 1`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scaling {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rescaled: Vec<bool>,
}

impl Scaling {
    pub fn identity(d: usize) -> Self {
        Scaling { lower: vec![0.0; d], upper: vec![1.0; d], rescaled: vec![false; d] }
    }

    /// Normalized coordinate `i` back to input units.
    pub fn to_input(&self, i: usize, u: f64) -> f64 {
        self.lower[i] + u * (self.upper[i] - self.lower[i])
    }
}

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { line: line as usize, msg: msg.into() }
}

/// Parses a DoE. `response` names the response column (default: last).
pub fn parse_doe(text: &str, response: Option<&str>) -> Result<Doe> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(e.position().map_or(1, |p| p.line()), e.to_string()))?.clone();
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    if names.len() < 2 {
        return Err(parse_err(1, "need at least one input column and a response column"));
    }
    if let Some(n) = names.iter().find(|n| n.is_empty()) {
        return Err(parse_err(1, format!("empty column name {n:?}")));
    }
    let ycol = match response {
        Some(r) => names.iter().position(|n| n == r).ok_or_else(|| parse_err(1, format!("no column named '{r}'")))?,
        None => names.len() - 1,
    };
    let mut x = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let msg = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            };
            parse_err(line, msg)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(names.len() - 1);
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column '{}': '{field}' is not a number", names[k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column '{}': non-finite value", names[k])));
            }
            if k == ycol {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        x.push(row);
    }
    if x.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }
    let d = names.len() - 1;
    let mut scaling = Scaling::identity(d);
    for i in 0..d {
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r[i]), b.max(r[i])));
        if lo >= 0.0 && hi <= 1.0 {
            continue;
        }
        if !(hi > lo) {
            return Err(Error::invalid("input column has zero range and lies outside [0, 1]"));
        }
        if !(hi - lo).is_finite() {
            return Err(Error::invalid("input column range overflows"));
        }
        scaling.lower[i] = lo;
        scaling.upper[i] = hi;
        scaling.rescaled[i] = true;
        for r in &mut x {
            r[i] = ((r[i] - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
    }
    let mut input_names = names.clone();
    let response_name = input_names.remove(ycol);
    Ok(Doe { input_names, response_name, x, y, scaling })
}

/// Writes a DoE in the format read by [`parse_doe`] (inputs as given).
pub fn write_doe(names: &[String], response: &str, x: &[Vec<f64>], y: &[f64]) -> String {
    let mut out = names.join(",");
    out.push(',');
    out.push_str(response);
    out.push('\n');
    for (r, v) in x.iter().zip(y) {
        for c in r {
            crate::profiles::write_real(&mut out, *c);
            out.push(',');
        }
        crate::profiles::write_real(&mut out, *v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_keeps_unit_inputs() {
        let d = parse_doe("a, b, y\n0.1,0.2,3\n# note\n0.5,1.0,-1\n", None).unwrap();
        assert_eq!(d.input_names, vec!["a", "b"]);
        assert_eq!(d.x, vec![vec![0.1, 0.2], vec![0.5, 1.0]]);
        assert_eq!(d.y, vec![3.0, -1.0]);
        assert_eq!(d.scaling, Scaling::identity(2));
    }

    #[test]
    fn rescales_out_of_range_inputs() {
        let d = parse_doe("y,t\n1,10\n2,30\n3,20\n", Some("y")).unwrap();
        assert_eq!(d.x, vec![vec![0.0], vec![1.0], vec![0.5]]);
        assert_eq!((d.scaling.lower[0], d.scaling.upper[0]), (10.0, 30.0));
        assert_eq!(d.scaling.to_input(0, 0.25), 15.0);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = |t: &str| match parse_doe(t, None) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(bad("a,y\n0.1,1\n0.2,x\n"), 3);
        assert_eq!(bad("a,y\n0.1,1\n0.2,1\n0.3\n"), 4);
        assert_eq!(bad("a,y\n0.1,inf\n"), 2);
        assert_eq!(bad("a\n0.1\n"), 1);
        assert_eq!(bad("a,y\n"), 2);
    }

    #[test]
    fn write_then_parse_round_trips() {
        let x = vec![vec![0.1, 0.7], vec![0.3, 0.2]];
        let y = vec![1.5, -2.0 / 3.0];
        let text = write_doe(&["p".into(), "q".into()], "r", &x, &y);
        let d = parse_doe(&text, None).unwrap();
        assert_eq!((d.x, d.y), (x, y));
    }
}
