use core::ops::{Add, Mul};

use crate::error::{Error, Result};

use super::{exp, ln, ln_1p};

/// A nonnegative real stored by its natural log; `−∞` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogReal(f64);

impl LogReal {
    pub const ZERO: LogReal = LogReal(f64::NEG_INFINITY);
    pub const ONE: LogReal = LogReal(0.0);

    pub fn from_ln(value: f64) -> Self {
        LogReal(value)
    }

    pub fn from_value(value: f64) -> Self {
        LogReal(ln(value))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn value(self) -> f64 {
        exp(self.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl Add for LogReal {
    type Output = LogReal;

    fn add(self, rhs: LogReal) -> LogReal {
        let (hi, lo) = if self.0 >= rhs.0 {
            (self.0, rhs.0)
        } else {
            (rhs.0, self.0)
        };
        if lo == f64::NEG_INFINITY {
            return LogReal(hi);
        }
        if hi == f64::INFINITY {
            return LogReal(hi);
        }
        LogReal(hi + ln_1p(exp(lo - hi)))
    }
}

impl Mul for LogReal {
    type Output = LogReal;

    fn mul(self, rhs: LogReal) -> LogReal {
        if self.is_zero() || rhs.is_zero() {
            return LogReal::ZERO;
        }
        LogReal(self.0 + rhs.0)
    }
}

/// `log Σ exp(v_i)`, exact `−∞` when every entry is `−∞`.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        // all −∞, or some +∞
        return Ok(max);
    }
    let sum: f64 = v.iter().map(|&x| exp(x - max)).sum();
    Ok(max + ln(sum))
}

/// Streaming log-sum-exp with a running maximum. Accumulation order is the
/// push order, so results are reproducible.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += exp(x - self.max);
        } else {
            self.scaled = self.scaled * exp(self.max - x) + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + ln(self.scaled)
        }
    }
}

/// `x · ln y` with the `0 · ln 0 = 0` convention (any `y` when `x = 0`).
#[inline]
pub fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 { 0.0 } else { x * ln(y) }
}

/// Turns log weights into probabilities in place and returns their
/// log-sum-exp. Returns `None`, leaving `w` untouched, when every weight is
/// `−∞`.
pub fn normalize_log_weights(w: &mut [f64]) -> Option<f64> {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let mut sum = 0.0;
    for x in w.iter_mut() {
        *x = exp(*x - max);
        sum += *x;
    }
    for x in w.iter_mut() {
        *x /= sum;
    }
    Some(max + ln(sum))
}
