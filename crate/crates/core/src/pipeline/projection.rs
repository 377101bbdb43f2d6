//! Textual projection specifications.
//!
//! | text               | projection                         |
//! |--------------------|------------------------------------|
//! | `3`, `x3`          | coordinate 3 (1-based)             |
//! | `pair:1,2`         | coordinates 1 and 2                |
//! | `dir:1,1,0`        | direction `(1,1,0)`, normalized    |
//! | `plane:1,0,0;0,1,1`| the two columns as given            |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optimize::Projection;

#[derive(Clone, Debug, PartialEq)]
pub enum ProjectionSpec {
    Coordinate(usize),
    Pair(usize, usize),
    Direction(Vec<f64>),
    Plane(Vec<f64>, Vec<f64>),
}

fn bad(s: &str, why: &str) -> Error {
    Error::Parse { line: 0, msg: format!("projection '{s}': {why}") }
}

fn index(s: &str, whole: &str) -> Result<usize> {
    let i: usize = s.trim().parse().map_err(|_| bad(whole, "expected a 1-based coordinate index"))?;
    if i == 0 {
        return Err(bad(whole, "coordinates are numbered from 1"));
    }
    Ok(i)
}

fn reals(s: &str, whole: &str) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| bad(whole, "expected comma-separated finite numbers"))?;
    if v.iter().all(|x| *x == 0.0) {
        return Err(bad(whole, "zero direction"));
    }
    Ok(v)
}

impl FromStr for ProjectionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(rest) = t.strip_prefix("pair:") {
            let (a, b) = rest.split_once(',').ok_or_else(|| bad(s, "expected two indices"))?;
            let (i, j) = (index(a, s)?, index(b, s)?);
            if i == j {
                return Err(bad(s, "repeated coordinate"));
            }
            Ok(ProjectionSpec::Pair(i, j))
        } else if let Some(rest) = t.strip_prefix("dir:") {
            Ok(ProjectionSpec::Direction(reals(rest, s)?))
        } else if let Some(rest) = t.strip_prefix("plane:") {
            let (a, b) = rest.split_once(';').ok_or_else(|| bad(s, "expected two ';'-separated columns"))?;
            let (a, b) = (reals(a, s)?, reals(b, s)?);
            if a.len() != b.len() {
                return Err(bad(s, "columns differ in length"));
            }
            Ok(ProjectionSpec::Plane(a, b))
        } else {
            Ok(ProjectionSpec::Coordinate(index(t.strip_prefix('x').unwrap_or(t), s)?))
        }
    }
}

impl fmt::Display for ProjectionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            ProjectionSpec::Coordinate(i) => write!(f, "{i}"),
            ProjectionSpec::Pair(i, j) => write!(f, "pair:{i},{j}"),
            ProjectionSpec::Direction(v) => write!(f, "dir:{}", join(v)),
            ProjectionSpec::Plane(a, b) => write!(f, "plane:{};{}", join(a), join(b)),
        }
    }
}

impl ProjectionSpec {
    pub fn p(&self) -> usize {
        match self {
            ProjectionSpec::Coordinate(_) | ProjectionSpec::Direction(_) => 1,
            _ => 2,
        }
    }

    /// File-name label; `k` disambiguates directions and planes.
    pub fn label(&self, k: usize) -> String {
        match self {
            ProjectionSpec::Coordinate(i) => format!("x{i}"),
            ProjectionSpec::Pair(i, j) => format!("x{i}-x{j}"),
            ProjectionSpec::Direction(_) => format!("dir{k}"),
            ProjectionSpec::Plane(..) => format!("plane{k}"),
        }
    }

    pub fn to_projection(&self, d: usize) -> Result<Projection> {
        let check = |v: &[f64]| {
            if v.len() == d {
                Ok(())
            } else {
                Err(Error::invalid(format!("projection '{self}' has {} components, inputs have {d}", v.len())))
            }
        };
        match self {
            ProjectionSpec::Coordinate(i) => Projection::coordinate(d, i - 1),
            ProjectionSpec::Pair(i, j) => Projection::coordinate_pair(d, i - 1, j - 1),
            ProjectionSpec::Direction(v) => {
                check(v)?;
                Projection::oblique(v)
            }
            ProjectionSpec::Plane(a, b) => {
                check(a)?;
                check(b)?;
                Projection::planar(a, b)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_form() {
        assert_eq!("x2".parse::<ProjectionSpec>().unwrap(), ProjectionSpec::Coordinate(2));
        assert_eq!(" 3 ".parse::<ProjectionSpec>().unwrap(), ProjectionSpec::Coordinate(3));
        assert_eq!("pair:1, 3".parse::<ProjectionSpec>().unwrap(), ProjectionSpec::Pair(1, 3));
        assert_eq!("dir:1,-0.5".parse::<ProjectionSpec>().unwrap(), ProjectionSpec::Direction(vec![1.0, -0.5]));
        let p = "plane:1,0,0;0,1,1".parse::<ProjectionSpec>().unwrap();
        assert_eq!(p.p(), 2);
        assert_eq!(p.to_string().parse::<ProjectionSpec>().unwrap(), p);
    }

    #[test]
    fn rejects_malformed() {
        for s in ["0", "x", "pair:1,1", "pair:2", "dir:", "dir:0,0", "dir:1,nan", "plane:1,0;1", "plane:1,0"] {
            assert!(s.parse::<ProjectionSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn dimension_is_checked() {
        assert!(ProjectionSpec::Coordinate(3).to_projection(2).is_err());
        assert!(ProjectionSpec::Direction(vec![1.0, 1.0]).to_projection(3).is_err());
        let p = ProjectionSpec::Direction(vec![3.0, 4.0]).to_projection(2).unwrap();
        assert!((p.psi()[(0, 0)] - 0.6).abs() < 1e-15);
    }
}
