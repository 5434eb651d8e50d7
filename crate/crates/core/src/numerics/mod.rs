//! Special functions, log-domain arithmetic, simplex vectors and seeded
//! sampling.
//!
//! Conventions: `0·ln 0 = 0`, `ln 0 = −∞`, `exp(−∞) = 0`.

mod logspace;
mod rng;
mod simplex;
mod special;

pub use logspace::{LogReal, LogSumExp, log_sum_exp, normalize_log_weights, xlogy};
pub use rng::{RngSeed, SeededRng, sample_categorical, sample_dirichlet, sample_uniform};
pub use simplex::SimplexVector;
pub use special::{digamma, log_gamma};

pub(crate) use special::{digamma_pos, log_gamma_pos};

// Float intrinsics routed through libm so the crate stays `no_std`.

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
