//! Real-valued integer least-squares problem `min ‖c − G p‖²` over a finite
//! per-coordinate label alphabet.

use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};

#[derive(Debug, Clone, PartialEq)]
pub struct IlsProblem {
    g: RMat,
    c: RVec,
    labels: Vec<f64>,
}

impl IlsProblem {
    /// `g` must be square upper-triangular with a strictly positive diagonal.
    pub fn new(g: RMat, c: RVec, labels: Vec<f64>) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n || c.len() != n || n == 0 {
            return Err(Error::invalid(format!(
                "ILS dimensions mismatch: G is {}x{}, c has {}",
                g.nrows(),
                g.ncols(),
                c.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::invalid("label alphabet is empty"));
        }
        for i in 0..n {
            if !(g[(i, i)] > 0.0) {
                return Err(Error::invalid(format!("G[{i},{i}] is not positive")));
            }
            for j in 0..i {
                if g[(i, j)] != 0.0 {
                    return Err(Error::invalid("G is not upper-triangular"));
                }
            }
        }
        if g.iter().chain(c.iter()).chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ILS problem data"));
        }
        Ok(Self { g, c, labels })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn g(&self) -> &RMat {
        &self.g
    }

    pub fn c(&self) -> &RVec {
        &self.c
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `‖c − G p‖²`.
    pub fn objective(&self, p: &RVec) -> f64 {
        (&self.c - &self.g * p).norm_squared()
    }

    /// Nearest label to `x`, lower index on ties.
    pub fn nearest_label(&self, x: f64) -> f64 {
        let mut best = self.labels[0];
        for &l in &self.labels[1..] {
            if (l - x).abs() < (best - x).abs() {
                best = l;
            }
        }
        best
    }
}
