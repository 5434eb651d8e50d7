use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{Error, Result};

/// A probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

/// Tolerance on `Σ p = 1` for vectors accepted as-is.
pub const SIMPLEX_TOL: f64 = 1e-12;

impl SimplexVector {
    /// Accepts `p` if it already lies on the simplex (within [`SIMPLEX_TOL`]).
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyInput("SimplexVector"));
        }
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidParams(alloc::format!(
                "simplex entries must lie in [0, 1]: {p:?}"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParams(alloc::format!(
                "simplex entries sum to {sum}, not 1"
            )));
        }
        Ok(SimplexVector(p))
    }

    /// Normalizes nonnegative finite weights with a positive total.
    pub fn from_weights(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyInput("SimplexVector"));
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParams(alloc::format!(
                "weights must be nonnegative and finite: {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::DegenerateRow { site: 0 });
        }
        w.iter_mut().for_each(|x| *x /= sum);
        Ok(SimplexVector(w))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform simplex of dimension 0");
        SimplexVector(vec![1.0 / k as f64; k])
    }

    /// Unit mass on `index`.
    pub fn point(k: usize, index: usize) -> Self {
        assert!(index < k, "point index {index} out of range for dimension {k}");
        let mut p = vec![0.0; k];
        p[index] = 1.0;
        SimplexVector(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for SimplexVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AsRef<[f64]> for SimplexVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
