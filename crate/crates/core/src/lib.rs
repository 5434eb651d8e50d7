//! Mean-field variational inference for latent variable models with
//! categorical local latents.
//!
//! The crate covers two models, latent Dirichlet allocation ([`lda`]) and the
//! mixed membership stochastic blockmodel ([`mmsb`]), together with:
//!
//! * coordinate ascent (CAVI) for the full mean-field family of each model,
//!   including the partially grouped family for MMSB;
//! * the collapsed-posterior functionals `F`, `I`, `J`, the conditional map
//!   `T` and the error terms `Δ₁`/`Δ₂` over product distributions
//!   ([`functionals`]);
//! * exact collapsed variational inference, evaluated in polynomial time with
//!   Poisson-binomial count distributions;
//! * brute-force enumeration of tiny posteriors ([`oracle`]) used as ground
//!   truth for every identity above.
//!
//! Everything here is pure computation over `alloc` collections; file formats
//! and the experiment runner live in the `mfvi-bench` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod functionals;
pub mod lda;
pub mod mmsb;
pub mod numerics;
pub mod oracle;

pub use error::{Error, Result};
pub use numerics::{LogReal, RngSeed, SimplexVector};

/// Stopping rule shared by every coordinate-ascent driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative objective change `|Δ|/(1+|obj|)` below which a fit stops.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_sweeps: 1000,
        }
    }
}

impl FitOptions {
    pub fn new(tol: f64, max_sweeps: usize) -> Result<Self> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::InvalidParams(alloc::format!(
                "tolerance must be positive and finite, got {tol}"
            )));
        }
        Ok(FitOptions { tol, max_sweeps })
    }

    pub(crate) fn converged(&self, previous: f64, current: f64) -> bool {
        (current - previous).abs() / (1.0 + current.abs()) < self.tol
    }
}
