use crate::error::{Error, Result};

use super::ln;

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            function: "log_gamma",
            value: x,
        });
    }
    Ok(log_gamma_pos(x))
}

/// Unchecked [`log_gamma`] for callers that already guarantee `x > 0`.
#[inline]
pub(crate) fn log_gamma_pos(x: f64) -> f64 {
    debug_assert!(x > 0.0, "log_gamma_pos({x})");
    libm::lgamma_r(x).0
}

/// Digamma function `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            function: "digamma",
            value: x,
        });
    }
    Ok(digamma_pos(x))
}

const DIGAMMA_SHIFT: f64 = 6.0;

/// Unchecked digamma: recurrence up to `x ≥ 6`, then the asymptotic series.
pub(crate) fn digamma_pos(mut x: f64) -> f64 {
    debug_assert!(x > 0.0, "digamma_pos({x})");
    let mut shift = 0.0;
    while x < DIGAMMA_SHIFT {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k}/(2k) for k = 1..7.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    ln(x) - 0.5 * inv - series - shift
}
