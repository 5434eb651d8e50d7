//! Functionals of product distributions over the collapsed posterior.
//!
//! A [`CollapsedInstance`] presents either model as `P(z) ∝ μ(z) exp(f(z))`
//! with `f` a sum of `lnΓ` terms of group counts. `F` extends `f` to product
//! distributions through fractional counts, `I` is the KL divergence from
//! `μ`, and `T` is the coordinate-wise conditional map.

mod energy;
mod instance;
mod poisson;
mod vi;

pub use energy::{delta1, delta2, energy_f, eval_f, eval_f_extended, eval_i, eval_j, gradient, soft_counts, t_map};
pub use instance::{CategoryMap, CollapsedInstance, ProductDistribution, Slot, Source};
pub use poisson::{expected_energy, poisson_binomial};
pub use vi::{CollapsedFit, CollapsedMode, YInit, collapsed_vi, exact_objective, surrogate_objective};
