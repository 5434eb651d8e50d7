//! Partially grouped coordinate ascent: one `K²` factor per ordered pair.

use alloc::vec;
use alloc::vec::Vec;

use super::{MmsbGraph, MmsbInit, MmsbParams, gamma_rows, pairs};
use crate::error::{Error, Result};
use crate::lda::{dirichlet_log_norm, expected_log_pi};
use crate::numerics::{exp, ln, normalize_log_weights};

/// `y` holds `K²` cells per pair in pair order; `gamma` is `n × K`
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PgState {
    pub k: usize,
    pub y: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl PgState {
    /// Builds `γ` from `init`, then sets `y` by one responsibility update.
    pub fn initialize(params: &MmsbParams, graph: &MmsbGraph, init: &MmsbInit) -> Result<Self> {
        graph.check(params)?;
        let gamma = init.gamma(params)?;
        let k = params.num_groups();
        let y = responsibilities(params, graph, &gamma)?;
        Ok(PgState { k, y, gamma })
    }

    /// Cells of pair `p`.
    pub fn pair(&self, p: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.y[p * kk..(p + 1) * kk]
    }

    pub fn gamma_row(&self, i: usize) -> &[f64] {
        &self.gamma[i * self.k..(i + 1) * self.k]
    }

    /// Product state `y[p][ℓK+ℓ′] = y_out[p][ℓ]·y_in[p][ℓ′]` sharing `γ`.
    pub fn from_product(ff: &super::FfState) -> Self {
        let k = ff.k;
        let y = ff
            .y_out
            .chunks_exact(k)
            .zip(ff.y_in.chunks_exact(k))
            .flat_map(|(o, r)| o.iter().flat_map(move |&a| r.iter().map(move |&b| a * b)))
            .collect();
        PgState {
            k,
            y,
            gamma: ff.gamma.clone(),
        }
    }

    fn check(&self, params: &MmsbParams) -> Result<()> {
        let k = params.num_groups();
        if self.k != k {
            return Err(Error::DimensionMismatch {
                what: "groups",
                expected: k,
                found: self.k,
            });
        }
        if self.y.len() != params.num_pairs() * k * k {
            return Err(Error::DimensionMismatch {
                what: "pair responsibilities",
                expected: params.num_pairs() * k * k,
                found: self.y.len(),
            });
        }
        if self.gamma.len() != params.num_nodes() * k {
            return Err(Error::DimensionMismatch {
                what: "gamma",
                expected: params.num_nodes() * k,
                found: self.gamma.len(),
            });
        }
        Ok(())
    }
}

fn expected_log_pi_table(gamma: &[f64], k: usize) -> Vec<Vec<f64>> {
    gamma_rows(gamma, k).map(expected_log_pi).collect()
}

/// `y[i][j][ℓ,ℓ′] ∝ exp(E ln π_{iℓ} + E ln π_{jℓ′}) B^X (1−B)^{1−X}`.
fn responsibilities(params: &MmsbParams, graph: &MmsbGraph, gamma: &[f64]) -> Result<Vec<f64>> {
    let (n, k) = (params.num_nodes(), params.num_groups());
    let kk = k * k;
    let e = expected_log_pi_table(gamma, k);
    // per-node weights relative to the node's largest entry
    let w: Vec<Vec<f64>> = e
        .iter()
        .map(|row| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().map(|&x| exp(x - max)).collect()
        })
        .collect();
    let lik = [params.likelihood_table(false), params.likelihood_table(true)];
    let log_lik = [params.log_likelihood_table(false), params.log_likelihood_table(true)];
    let mut y = vec![0.0; params.num_pairs() * kk];
    for (p, (i, j)) in pairs(n).enumerate() {
        let x = graph.edge(i, j) as usize;
        let row = &mut y[p * kk..(p + 1) * kk];
        let mut sum = 0.0;
        for l in 0..k {
            for m in 0..k {
                let v = w[i][l] * w[j][m] * lik[x][l * k + m];
                row[l * k + m] = v;
                sum += v;
            }
        }
        if sum > 0.0 && sum.is_finite() {
            row.iter_mut().for_each(|v| *v /= sum);
        } else {
            for l in 0..k {
                for m in 0..k {
                    row[l * k + m] = e[i][l] + e[j][m] + log_lik[x][l * k + m];
                }
            }
            normalize_log_weights(row).ok_or(Error::DegenerateRow { site: p })?;
        }
    }
    Ok(y)
}

fn refresh_gamma(params: &MmsbParams, y: &[f64]) -> Vec<f64> {
    let (n, k) = (params.num_nodes(), params.num_groups());
    let mut gamma: Vec<f64> = (0..n).flat_map(|_| params.alpha().iter().copied()).collect();
    for ((i, j), row) in pairs(n).zip(y.chunks_exact(k * k)) {
        for l in 0..k {
            for m in 0..k {
                let v = row[l * k + m];
                gamma[i * k + l] += v;
                gamma[j * k + m] += v;
            }
        }
    }
    gamma
}

/// One sweep: every pair from the current `γ`, then the `γ` refresh.
pub fn pg_cavi_step(params: &MmsbParams, graph: &MmsbGraph, state: &PgState) -> Result<PgState> {
    graph.check(params)?;
    state.check(params)?;
    let y = responsibilities(params, graph, &state.gamma)?;
    let gamma = refresh_gamma(params, &y);
    Ok(PgState { k: state.k, y, gamma })
}

/// Dirichlet part of the ELBO shared by both families:
/// `Σ_i [ln B(α)⁻¹ − ln B(γ_i)⁻¹ + Σ_ℓ (α_ℓ − γ_iℓ) E ln π_iℓ]`.
pub(crate) fn dirichlet_terms(params: &MmsbParams, gamma: &[f64], e: &[Vec<f64>]) -> f64 {
    let k = params.num_groups();
    let prior_norm = dirichlet_log_norm(params.alpha());
    gamma_rows(gamma, k)
        .zip(e)
        .map(|(g, el)| {
            let mut t = prior_norm - dirichlet_log_norm(g);
            for ((&a, &gl), &x) in params.alpha().iter().zip(g).zip(el) {
                t += (a - gl) * x;
            }
            t
        })
        .sum()
}

pub fn pg_elbo(params: &MmsbParams, graph: &MmsbGraph, state: &PgState) -> Result<f64> {
    graph.check(params)?;
    state.check(params)?;
    let (n, k) = (params.num_nodes(), params.num_groups());
    let e = expected_log_pi_table(&state.gamma, k);
    let log_lik = [params.log_likelihood_table(false), params.log_likelihood_table(true)];
    let mut total = dirichlet_terms(params, &state.gamma, &e);
    for ((i, j), row) in pairs(n).zip(state.y.chunks_exact(k * k)) {
        let x = graph.edge(i, j) as usize;
        for l in 0..k {
            for m in 0..k {
                let v = row[l * k + m];
                if v > 0.0 {
                    total += v * (e[i][l] + e[j][m] + log_lik[x][l * k + m] - ln(v));
                }
            }
        }
    }
    Ok(total)
}
