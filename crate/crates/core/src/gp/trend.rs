//! Polynomial trend bases for universal kriging.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrendTerm {
    Constant,
    /// `x_i`, zero-based coordinate.
    Linear(usize),
    /// `x_i^2`, zero-based coordinate.
    Square(usize),
}

impl TrendTerm {
    #[inline]
    fn eval(self, x: &[f64]) -> f64 {
        match self {
            TrendTerm::Constant => 1.0,
            TrendTerm::Linear(i) => x[i],
            TrendTerm::Square(i) => x[i] * x[i],
        }
    }

    fn coord(self) -> Option<usize> {
        match self {
            TrendTerm::Constant => None,
            TrendTerm::Linear(i) | TrendTerm::Square(i) => Some(i),
        }
    }
}

impl fmt::Display for TrendTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrendTerm::Constant => write!(f, "constant"),
            TrendTerm::Linear(i) => write!(f, "linear:{i}"),
            TrendTerm::Square(i) => write!(f, "square:{i}"),
        }
    }
}

impl std::str::FromStr for TrendTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "constant" {
            return Ok(TrendTerm::Constant);
        }
        let (kind, idx) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("unknown trend term '{s}'")))?;
        let i: usize =
            idx.parse().map_err(|_| Error::invalid(format!("bad coordinate in trend term '{s}'")))?;
        match kind {
            "linear" => Ok(TrendTerm::Linear(i)),
            "square" => Ok(TrendTerm::Square(i)),
            _ => Err(Error::invalid(format!("unknown trend term '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrendBasis {
    terms: Vec<TrendTerm>,
}

impl TrendBasis {
    pub fn new(terms: Vec<TrendTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("trend basis needs at least one term"));
        }
        for (k, t) in terms.iter().enumerate() {
            if terms[..k].contains(t) {
                return Err(Error::invalid(format!("duplicate trend term {t}")));
            }
        }
        Ok(TrendBasis { terms })
    }

    /// Ordinary kriging: constant mean.
    pub fn constant() -> Self {
        TrendBasis { terms: vec![TrendTerm::Constant] }
    }

    /// Constant plus one linear term per coordinate.
    pub fn linear(d: usize) -> Self {
        let mut terms = vec![TrendTerm::Constant];
        terms.extend((0..d).map(TrendTerm::Linear));
        TrendBasis { terms }
    }

    pub fn terms(&self) -> &[TrendTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.terms.iter().filter_map(|t| t.coord()).find(|&i| i >= d) {
            Some(i) => Err(Error::invalid(format!(
                "trend term refers to coordinate {i} but inputs have dimension {d}"
            ))),
            None => Ok(()),
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.eval(x);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.eval(x)).collect()
    }

    /// Jacobian `d h_j / d x_i` as a `d x m` matrix.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(x.len(), self.terms.len());
        for (k, t) in self.terms.iter().enumerate() {
            match *t {
                TrendTerm::Constant => {}
                TrendTerm::Linear(i) => j[(i, k)] = 1.0,
                TrendTerm::Square(i) => j[(i, k)] = 2.0 * x[i],
            }
        }
        j
    }

    /// `n x m` design matrix `H = [h_j(x_i)]`.
    pub fn design_matrix(&self, pts: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(pts.len(), self.terms.len(), |i, k| self.terms[k].eval(&pts[i]))
    }
}

impl fmt::Display for TrendBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl std::str::FromStr for TrendBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let terms = s.split_whitespace().map(str::parse).collect::<Result<Vec<_>>>()?;
        TrendBasis::new(terms)
    }
}
