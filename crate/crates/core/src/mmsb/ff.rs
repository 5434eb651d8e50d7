//! Fully factorized coordinate ascent: separate sender and receiver factors.

use alloc::vec::Vec;

use super::pg::dirichlet_terms;
use super::{MmsbGraph, MmsbInit, MmsbParams, gamma_rows, pairs};
use crate::error::{Error, Result};
use crate::lda::expected_log_pi;
use crate::numerics::{ln, normalize_log_weights};

/// `y_out` and `y_in` hold `K` entries per pair in pair order; `gamma` is
/// `n × K` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FfState {
    pub k: usize,
    pub y_out: Vec<f64>,
    pub y_in: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl FfState {
    /// Builds `γ` from `init`, starts `y_in ∝ exp(E ln π_j)`, then runs one
    /// sender and one receiver update.
    pub fn initialize(params: &MmsbParams, graph: &MmsbGraph, init: &MmsbInit) -> Result<Self> {
        graph.check(params)?;
        let k = params.num_groups();
        let gamma = init.gamma(params)?;
        let e = expected_log_pi_table(&gamma, k);
        let mut y_in = Vec::with_capacity(params.num_pairs() * k);
        for (p, (_, j)) in pairs(params.num_nodes()).enumerate() {
            let mut row = e[j].clone();
            normalize_log_weights(&mut row).ok_or(Error::DegenerateRow { site: p })?;
            y_in.extend_from_slice(&row);
        }
        let (y_out, y_in) = responsibilities(params, graph, &e, &y_in)?;
        Ok(FfState { k, y_out, y_in, gamma })
    }

    pub fn sender(&self, p: usize) -> &[f64] {
        &self.y_out[p * self.k..(p + 1) * self.k]
    }

    pub fn receiver(&self, p: usize) -> &[f64] {
        &self.y_in[p * self.k..(p + 1) * self.k]
    }

    fn check(&self, params: &MmsbParams) -> Result<()> {
        let k = params.num_groups();
        let expected = params.num_pairs() * k;
        if self.k != k {
            return Err(Error::DimensionMismatch {
                what: "groups",
                expected: k,
                found: self.k,
            });
        }
        for (what, v) in [
            ("sender responsibilities", &self.y_out),
            ("receiver responsibilities", &self.y_in),
        ] {
            if v.len() != expected {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found: v.len(),
                });
            }
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

/// `Σ_m w_m t_m` with `0·(−∞) = 0`.
#[inline]
fn weighted(w: impl Iterator<Item = f64>, t: impl Iterator<Item = f64>) -> f64 {
    w.zip(t).filter(|&(w, _)| w != 0.0).map(|(w, t)| w * t).sum()
}

/// Sender update from `y_in`, then receiver update from the new `y_out`.
fn responsibilities(
    params: &MmsbParams,
    graph: &MmsbGraph,
    e: &[Vec<f64>],
    y_in: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, k) = (params.num_nodes(), params.num_groups());
    let log_lik = [params.log_likelihood_table(false), params.log_likelihood_table(true)];
    let mut y_out = Vec::with_capacity(y_in.len());
    let mut y_in_new = Vec::with_capacity(y_in.len());
    let mut row = alloc::vec![0.0; k];
    for (p, (i, j)) in pairs(n).enumerate() {
        let ll = &log_lik[graph.edge(i, j) as usize];
        let r_in = &y_in[p * k..(p + 1) * k];
        for l in 0..k {
            row[l] = e[i][l] + weighted(r_in.iter().copied(), ll[l * k..(l + 1) * k].iter().copied());
        }
        normalize_log_weights(&mut row).ok_or(Error::DegenerateRow { site: p })?;
        y_out.extend_from_slice(&row);
        let r_out = &y_out[p * k..(p + 1) * k];
        for m in 0..k {
            row[m] = e[j][m] + weighted(r_out.iter().copied(), (0..k).map(|l| ll[l * k + m]));
        }
        normalize_log_weights(&mut row).ok_or(Error::DegenerateRow { site: p })?;
        y_in_new.extend_from_slice(&row);
    }
    Ok((y_out, y_in_new))
}

fn refresh_gamma(params: &MmsbParams, y_out: &[f64], y_in: &[f64]) -> Vec<f64> {
    let (n, k) = (params.num_nodes(), params.num_groups());
    let mut gamma: Vec<f64> = (0..n).flat_map(|_| params.alpha().iter().copied()).collect();
    for (((i, j), o), r) in pairs(n).zip(y_out.chunks_exact(k)).zip(y_in.chunks_exact(k)) {
        for l in 0..k {
            gamma[i * k + l] += o[l];
            gamma[j * k + l] += r[l];
        }
    }
    gamma
}

/// One sweep: all senders, all receivers, then the `γ` refresh.
pub fn ff_cavi_step(params: &MmsbParams, graph: &MmsbGraph, state: &FfState) -> Result<FfState> {
    graph.check(params)?;
    state.check(params)?;
    let e = expected_log_pi_table(&state.gamma, state.k);
    let (y_out, y_in) = responsibilities(params, graph, &e, &state.y_in)?;
    let gamma = refresh_gamma(params, &y_out, &y_in);
    Ok(FfState {
        k: state.k,
        y_out,
        y_in,
        gamma,
    })
}

pub fn ff_elbo(params: &MmsbParams, graph: &MmsbGraph, state: &FfState) -> Result<f64> {
    graph.check(params)?;
    state.check(params)?;
    let (n, k) = (params.num_nodes(), params.num_groups());
    let e = expected_log_pi_table(&state.gamma, k);
    let log_lik = [params.log_likelihood_table(false), params.log_likelihood_table(true)];
    let mut total = dirichlet_terms(params, &state.gamma, &e);
    for (((i, j), o), r) in pairs(n)
        .zip(state.y_out.chunks_exact(k))
        .zip(state.y_in.chunks_exact(k))
    {
        let ll = &log_lik[graph.edge(i, j) as usize];
        for l in 0..k {
            if o[l] > 0.0 {
                total += o[l] * (e[i][l] - ln(o[l]));
            }
            if r[l] > 0.0 {
                total += r[l] * (e[j][l] - ln(r[l]));
            }
            for m in 0..k {
                let w = o[l] * r[m];
                if w > 0.0 {
                    total += w * ll[l * k + m];
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FitOptions;
    use crate::mmsb::tests::assortative;
    use crate::mmsb::{MmsbMethod, PgState, fit_once, pg_elbo, sample};
    use crate::numerics::RngSeed;

    #[test]
    fn symmetric_start_stays_uniform() {
        let p = assortative(3);
        let g = MmsbGraph::from_rows(&alloc::vec![alloc::vec![true; 3]; 3]).unwrap();
        let s = FfState::initialize(&p, &g, &MmsbInit::Symmetric).unwrap();
        assert!(s.y_out.iter().chain(&s.y_in).all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn single_group() {
        let p = MmsbParams::new(5, alloc::vec![2.0], alloc::vec![alloc::vec![0.6]]).unwrap();
        let (g, _) = sample(&p, RngSeed(9)).unwrap();
        let s = FfState::initialize(&p, &g, &MmsbInit::Jittered(RngSeed(0))).unwrap();
        let s = ff_cavi_step(&p, &g, &s).unwrap();
        assert!(s.y_out.iter().chain(&s.y_in).all(|&v| v == 1.0));
        assert!(s.gamma.iter().all(|&x| (x - 10.0).abs() < 1e-12));
    }

    #[test]
    fn product_state_elbos_agree() {
        let p = assortative(6);
        let (g, _) = sample(&p, RngSeed(21)).unwrap();
        let mut s = FfState::initialize(&p, &g, &MmsbInit::Jittered(RngSeed(3))).unwrap();
        for _ in 0..5 {
            let pg = PgState::from_product(&s);
            let a = ff_elbo(&p, &g, &s).unwrap();
            let b = pg_elbo(&p, &g, &pg).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            s = ff_cavi_step(&p, &g, &s).unwrap();
        }
    }

    #[test]
    fn two_nodes_single_group_elbo() {
        let b = 0.8;
        let p = MmsbParams::new(2, alloc::vec![0.5], alloc::vec![alloc::vec![b]]).unwrap();
        let g = MmsbGraph::from_rows(&[alloc::vec![false, true], alloc::vec![true, false]]).unwrap();
        let run = fit_once(
            &p,
            &g,
            MmsbMethod::FullyFactorized,
            &MmsbInit::Symmetric,
            FitOptions::default(),
        )
        .unwrap();
        assert!((run.final_elbo() - 2.0 * ln(b)).abs() < 1e-12);
    }

    #[test]
    fn invariants_hold_every_sweep() {
        let p = MmsbParams::new(
            6,
            alloc::vec![0.5, 0.9, 1.4],
            alloc::vec![
                alloc::vec![0.9, 0.0, 0.2],
                alloc::vec![0.1, 0.7, 0.3],
                alloc::vec![0.2, 0.4, 1.0]
            ],
        )
        .unwrap();
        let (g, _) = sample(&p, RngSeed(17)).unwrap();
        let mut s = FfState::initialize(&p, &g, &MmsbInit::Jittered(RngSeed(2))).unwrap();
        let mut prev = ff_elbo(&p, &g, &s).unwrap();
        for _ in 0..60 {
            s = ff_cavi_step(&p, &g, &s).unwrap();
            for row in s.y_out.chunks_exact(3).chain(s.y_in.chunks_exact(3)) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for row in s.gamma.chunks_exact(3) {
                assert!((row.iter().sum::<f64>() - (10.0 + 2.8)).abs() < 1e-10);
            }
            let cur = ff_elbo(&p, &g, &s).unwrap();
            assert!(cur - prev >= -1e-9, "{prev} -> {cur}");
            prev = cur;
        }
    }
}
