use alloc::vec::Vec;

use super::poisson::conditional_scores;
use super::{CollapsedInstance, ProductDistribution, eval_f, eval_i, expected_energy, t_map};
use crate::FitOptions;
use crate::error::{Error, Result};
use crate::numerics::{RngSeed, SimplexVector, ln, normalize_log_weights, sample_dirichlet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapsedMode {
    /// Coordinate ascent on `E_{Q_y}[f] − I(y)`.
    Exact,
    /// Fixed-point iteration `y ← T(y)` of the `F − I` surrogate.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum YInit {
    /// Rows drawn from the flat Dirichlet on the support of `μ_s`.
    Random(RngSeed),
    /// Rows uniform on the support of `μ_s`.
    Uniform,
    Explicit(ProductDistribution),
}

impl YInit {
    pub fn build(&self, inst: &CollapsedInstance) -> Result<ProductDistribution> {
        let c = inst.num_categories();
        match self {
            YInit::Explicit(y) => {
                inst.check(y)?;
                Ok(y.clone())
            }
            YInit::Uniform => ProductDistribution::new(
                (0..inst.num_sites())
                    .map(|s| SimplexVector::from_weights(support(inst, s)))
                    .collect::<Result<_>>()?,
            ),
            YInit::Random(seed) => {
                let mut rng = seed.rng();
                let ones = alloc::vec![1.0; c];
                let mut rows = Vec::with_capacity(inst.num_sites());
                for s in 0..inst.num_sites() {
                    let draw = sample_dirichlet(&ones, &mut rng)?;
                    let w: Vec<f64> = draw
                        .as_slice()
                        .iter()
                        .zip(support(inst, s))
                        .map(|(a, b)| a * b)
                        .collect();
                    rows.push(SimplexVector::from_weights(w)?);
                }
                ProductDistribution::new(rows)
            }
        }
    }
}

fn support(inst: &CollapsedInstance, s: usize) -> Vec<f64> {
    inst.mu(s).iter().map(|&m| if m > 0.0 { 1.0 } else { 0.0 }).collect()
}

/// `E_{Q_y}[f] − I(y)`; `KL(Q_y ‖ P) = log S − this`.
pub fn exact_objective(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<f64> {
    Ok(expected_energy(inst, y)? - eval_i(inst, y)?)
}

/// `F(y) − I(y)`.
pub fn surrogate_objective(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<f64> {
    Ok(eval_f(inst, y)? - eval_i(inst, y)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedFit {
    pub y: ProductDistribution,
    /// Objective of the mode after each sweep.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl CollapsedFit {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("a fit runs at least one sweep")
    }
}

/// Sweeps without a new smallest row change before damping switches on.
const STALL_SWEEPS: usize = 10;
const DAMPING: f64 = 0.5;

/// Collapsed variational inference over product distributions.
///
/// Exact mode stops on the relative objective change, surrogate mode on the
/// largest entry change between sweeps; both stop after `opts.max_sweeps`
/// with `converged = false`.
pub fn collapsed_vi(
    inst: &CollapsedInstance,
    mode: CollapsedMode,
    init: &YInit,
    opts: FitOptions,
) -> Result<CollapsedFit> {
    let y = init.build(inst)?;
    match mode {
        CollapsedMode::Exact => exact_ascent(inst, y, opts),
        CollapsedMode::Surrogate => fixed_point(inst, y, opts),
    }
}

fn exact_ascent(inst: &CollapsedInstance, mut y: ProductDistribution, opts: FitOptions) -> Result<CollapsedFit> {
    let members = inst.group_members();
    let mut previous = exact_objective(inst, &y)?;
    let mut objective_trace = Vec::new();
    let mut converged = false;
    for sweep in 1..=opts.max_sweeps.max(1) {
        for s in 0..inst.num_sites() {
            let mut row = conditional_scores(inst, &y, &members, s);
            for (r, &m) in row.iter_mut().zip(inst.mu(s)) {
                *r = if m > 0.0 { *r + ln(m) } else { f64::NEG_INFINITY };
            }
            normalize_log_weights(&mut row).ok_or(Error::DegenerateRow { site: s })?;
            y.set_row(s, SimplexVector::from_weights(row)?);
        }
        let current = exact_objective(inst, &y)?;
        if !current.is_finite() {
            return Err(Error::NonFiniteObjective { sweep, value: current });
        }
        objective_trace.push(current);
        if opts.converged(previous, current) {
            converged = true;
            break;
        }
        previous = current;
    }
    Ok(CollapsedFit {
        y,
        objective_trace,
        converged,
    })
}

fn fixed_point(inst: &CollapsedInstance, mut y: ProductDistribution, opts: FitOptions) -> Result<CollapsedFit> {
    let mut objective_trace = Vec::new();
    let mut converged = false;
    let mut best_change = f64::INFINITY;
    let mut stalled = 0;
    let mut step = 1.0;
    for _ in 0..opts.max_sweeps.max(1) {
        let t = t_map(inst, &y)?;
        let next = if step == 1.0 {
            t
        } else {
            ProductDistribution::from_normalized(
                y.rows()
                    .zip(t.rows())
                    .map(|(a, b)| a.iter().zip(b).map(|(x, t)| x + step * (t - x)).collect())
                    .collect(),
            )?
        };
        let change = next.max_abs_diff(&y);
        y = next;
        objective_trace.push(surrogate_objective(inst, &y)?);
        if change < opts.tol {
            converged = true;
            break;
        }
        if change < best_change {
            best_change = change;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_SWEEPS {
                step = DAMPING;
            }
        }
    }
    Ok(CollapsedFit {
        y,
        objective_trace,
        converged,
    })
}
