//! Brute-force enumeration of collapsed posteriors on tiny instances.
//!
//! Assignments are visited in lexicographic order with the last site varying
//! fastest. Log weights are the engines' collapsed energies `Υ(z)`; their
//! log-sum-exp is `log𝒮`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::functionals::{CollapsedInstance, ProductDistribution};
use crate::lda::dirichlet_log_norm;
use crate::numerics::{LogSumExp, compensated_sum, digamma_pos, exp};

/// Largest enumerable state space.
pub const STATE_CAP: f64 = 1e7;
/// Largest state space whose log weights are kept in memory.
pub const STORE_CAP: f64 = 1e6;

/// Odometer over `categories^sites` assignments.
#[derive(Debug, Clone)]
pub struct Assignments {
    current: Vec<usize>,
    categories: usize,
    done: bool,
}

impl Assignments {
    pub fn new(sites: usize, categories: usize) -> Self {
        Assignments {
            current: vec![0; sites],
            categories,
            done: categories == 0,
        }
    }

    /// Advances to the next assignment; `false` once exhausted.
    fn advance(&mut self) -> bool {
        for c in self.current.iter_mut().rev() {
            *c += 1;
            if *c < self.categories {
                return true;
            }
            *c = 0;
        }
        false
    }

    /// Calls `visit` on every assignment in order.
    pub fn for_each(mut self, mut visit: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
        if self.done {
            return Ok(());
        }
        loop {
            visit(&self.current)?;
            if !self.advance() {
                self.done = true;
                return Ok(());
            }
        }
    }
}

/// Enumerated collapsed posterior of one instance.
#[derive(Debug, Clone)]
pub struct PosteriorTable<'a> {
    inst: &'a CollapsedInstance,
    states: usize,
    /// `Υ(z)` in enumeration order, when the table is small enough to keep.
    log_weights: Option<Vec<f64>>,
    log_partition: f64,
}

impl<'a> PosteriorTable<'a> {
    pub fn instance(&self) -> &'a CollapsedInstance {
        self.inst
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn log_weights(&self) -> Option<&[f64]> {
        self.log_weights.as_deref()
    }

    /// `log𝒮 = ln Σ_z exp(Υ(z))`.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// `log S = ln Σ_z μ(z) exp(f(z)) = log𝒮 − Σ_s ln c_s`.
    pub fn log_partition_mu(&self) -> f64 {
        self.log_partition - self.inst.log_norm_total()
    }

    /// Visits `(z, ln P(z | X))` in enumeration order, recomputing weights
    /// when they were not stored.
    pub fn for_each(&self, mut visit: impl FnMut(&[usize], f64) -> Result<()>) -> Result<()> {
        let mut index = 0;
        Assignments::new(self.inst.num_sites(), self.inst.num_categories()).for_each(|z| {
            let w = match &self.log_weights {
                Some(w) => w[index],
                None => self.inst.energy(z)?,
            };
            index += 1;
            visit(z, w - self.log_partition)
        })
    }
}

fn state_count(inst: &CollapsedInstance) -> f64 {
    libm::pow(inst.num_categories() as f64, inst.num_sites() as f64)
}

pub fn enumerate_posterior(inst: &CollapsedInstance) -> Result<PosteriorTable<'_>> {
    let size = state_count(inst);
    if size > STATE_CAP {
        return Err(Error::StateSpaceTooLarge { size, cap: STATE_CAP });
    }
    let states = size as usize;
    let mut stored = (size <= STORE_CAP).then(|| Vec::with_capacity(states));
    let mut lse = LogSumExp::default();
    Assignments::new(inst.num_sites(), inst.num_categories()).for_each(|z| {
        let w = inst.energy(z)?;
        lse.push(w);
        if let Some(v) = stored.as_mut() {
            v.push(w);
        }
        Ok(())
    })?;
    let log_partition = lse.value();
    if log_partition == f64::NEG_INFINITY {
        return Err(Error::AllImpossible);
    }
    Ok(PosteriorTable {
        inst,
        states,
        log_weights: stored,
        log_partition,
    })
}

/// `ln p(X) = log𝒮 + G·(lnΓ(Σα) − Σ lnΓ(α))` over the `G` Dirichlet groups.
pub fn log_evidence(table: &PosteriorTable<'_>) -> f64 {
    let inst = table.instance();
    table.log_partition() + inst.num_groups() as f64 * inst.dirichlet_constant()
}

fn check_dims(table: &PosteriorTable<'_>, y: &ProductDistribution) -> Result<()> {
    let inst = table.instance();
    if y.num_sites() != inst.num_sites() {
        return Err(Error::DimensionMismatch {
            what: "product distribution sites",
            expected: inst.num_sites(),
            found: y.num_sites(),
        });
    }
    if let Some(row) = y.rows().find(|r| r.len() != inst.num_categories()) {
        return Err(Error::DimensionMismatch {
            what: "product distribution categories",
            expected: inst.num_categories(),
            found: row.len(),
        });
    }
    Ok(())
}

/// `KL(Q_y ‖ P(· | X))`, `+∞` when `Q_y` charges an impossible assignment.
pub fn exact_kl(y: &ProductDistribution, table: &PosteriorTable<'_>) -> Result<f64> {
    check_dims(table, y)?;
    let mut terms = Vec::new();
    let mut infinite = false;
    table.for_each(|z, log_p| {
        let log_q = y.log_prob(z);
        if log_q > f64::NEG_INFINITY {
            if log_p == f64::NEG_INFINITY {
                infinite = true;
            } else {
                terms.push(exp(log_q) * (log_q - log_p));
            }
        }
        Ok(())
    })?;
    Ok(if infinite {
        f64::INFINITY
    } else {
        compensated_sum(terms)
    })
}

/// `KL(Dir(a) ‖ Dir(b))`.
pub fn dirichlet_kl(a: &[f64], b: &[f64]) -> f64 {
    let psi_sum = digamma_pos(a.iter().sum());
    let cross: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (digamma_pos(x) - psi_sum))
        .sum();
    dirichlet_log_norm(a) - dirichlet_log_norm(b) + cross
}

/// Integer counts `N[g][m](z)`.
pub fn group_counts(inst: &CollapsedInstance, z: &[usize]) -> Vec<Vec<usize>> {
    let k = inst.num_topics();
    let mut counts = vec![vec![0; k]; inst.num_groups()];
    for (s, &c) in z.iter().enumerate() {
        for slot in inst.slots(s) {
            counts[slot.group][slot.map.apply(c, k)] += 1;
        }
    }
    counts
}

/// `KL(q ‖ p(π, Z | X))` for a full mean-field state `q(Z) q(π)` with
/// `q(Z) = Q_y` and `q(π_g) = Dir(γ_g)`:
/// `KL(Q_y ‖ P(Z | X)) + E_{Q_y}[Σ_g KL(Dir(γ_g) ‖ Dir(α + N_g(Z)))]`.
pub fn full_model_kl(y: &ProductDistribution, gamma: &[Vec<f64>], table: &PosteriorTable<'_>) -> Result<f64> {
    let inst = table.instance();
    if gamma.len() != inst.num_groups() || gamma.iter().any(|g| g.len() != inst.num_topics()) {
        return Err(Error::DimensionMismatch {
            what: "gamma",
            expected: inst.num_groups() * inst.num_topics(),
            found: gamma.iter().map(Vec::len).sum(),
        });
    }
    let collapsed = exact_kl(y, table)?;
    let mut terms = Vec::new();
    let mut posterior = vec![0.0; inst.num_topics()];
    table.for_each(|z, _| {
        let log_q = y.log_prob(z);
        if log_q > f64::NEG_INFINITY {
            let mut kl = 0.0;
            for (g, counts) in gamma.iter().zip(group_counts(inst, z)) {
                for ((p, &a), &n) in posterior.iter_mut().zip(inst.alpha()).zip(&counts) {
                    *p = a + n as f64;
                }
                kl += dirichlet_kl(g, &posterior);
            }
            terms.push(exp(log_q) * kl);
        }
        Ok(())
    })?;
    Ok(collapsed + compensated_sum(terms))
}

/// Exact site marginals `P(Z_s = c | X)`; MMSB sites give the joint
/// sender/receiver tables.
pub fn exact_marginals(table: &PosteriorTable<'_>) -> Result<ProductDistribution> {
    let inst = table.instance();
    let mut rows = vec![vec![0.0; inst.num_categories()]; inst.num_sites()];
    table.for_each(|z, log_p| {
        let p = exp(log_p);
        for (row, &c) in rows.iter_mut().zip(z) {
            row[c] += p;
        }
        Ok(())
    })?;
    ProductDistribution::new(
        rows.into_iter()
            .map(crate::numerics::SimplexVector::from_weights)
            .collect::<Result<_>>()?,
    )
}

/// Total posterior mass; `1` up to rounding.
pub fn total_probability(table: &PosteriorTable<'_>) -> Result<f64> {
    let mut terms = Vec::with_capacity(table.num_states());
    table.for_each(|_, log_p| {
        terms.push(exp(log_p));
        Ok(())
    })?;
    Ok(compensated_sum(terms))
}

/// `ln` of a per-document partition, for checking factorization.
pub fn log_partition_of(inst: &CollapsedInstance) -> Result<f64> {
    Ok(enumerate_posterior(inst)?.log_partition())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FitOptions;
    use crate::functionals::{CollapsedMode, YInit, collapsed_vi, eval_i, exact_objective, expected_energy};
    use crate::lda::{self, LdaCorpus, LdaInit, LdaParams};
    use crate::mmsb::{self, MmsbGraph, MmsbInit, MmsbMethod, MmsbParams, indicator_correlation};
    use crate::numerics::{RngSeed, ln, log_gamma_pos, sample_dirichlet};

    fn uniform_lda(n: usize) -> (LdaParams, LdaCorpus) {
        let p = LdaParams::new(vec![1.0, 1.0], vec![vec![0.5, 0.5]; 2], vec![n]).unwrap();
        let words = vec![(0..n).map(|i| i % 2).collect()];
        let c = LdaCorpus::new(&p, words).unwrap();
        (p, c)
    }

    #[test]
    fn hand_partition() {
        let (p, c) = uniform_lda(2);
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let t = enumerate_posterior(&inst).unwrap();
        assert_eq!(t.num_states(), 4);
        assert!((t.log_partition() + ln(4.0)).abs() < 1e-14);
        assert!((log_evidence(&t) + ln(4.0)).abs() < 1e-14);
        assert!((total_probability(&t).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_topic_evidence() {
        let eta = vec![vec![0.2, 0.5, 0.3]];
        let p = LdaParams::new(vec![0.6], eta.clone(), vec![3, 2]).unwrap();
        let c = LdaCorpus::new(&p, vec![vec![0, 2, 2], vec![1, 0]]).unwrap();
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let t = enumerate_posterior(&inst).unwrap();
        assert_eq!(t.num_states(), 1);
        let expected: f64 = c.words.iter().flatten().map(|&x| ln(eta[0][x])).sum();
        assert!((log_evidence(&t) - expected).abs() < 1e-13);
        let m = exact_marginals(&t).unwrap();
        assert!(m.rows().all(|r| r == [1.0]));
    }

    #[test]
    fn mmsb_two_nodes_has_sixteen_states() {
        let p = MmsbParams::new(2, vec![1.0, 1.0], vec![vec![0.9, 0.3], vec![0.3, 0.9]]).unwrap();
        let g = MmsbGraph::from_rows(&[vec![false, true], vec![false, false]]).unwrap();
        let inst = CollapsedInstance::mmsb(&p, &g).unwrap();
        assert_eq!(enumerate_posterior(&inst).unwrap().num_states(), 16);
    }

    #[test]
    fn oversized_space_is_rejected() {
        let (p, c) = uniform_lda(24);
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        assert!(matches!(
            enumerate_posterior(&inst),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn streaming_matches_stored() {
        // 2^21 states exceeds the store cap
        let (p, c) = uniform_lda(21);
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let t = enumerate_posterior(&inst).unwrap();
        assert!(t.log_weights().is_none());
        assert!((log_evidence(&t) - 21.0 * ln(0.5)).abs() < 1e-9);
    }

    #[test]
    fn evidence_matches_quadrature() {
        let alpha = [2.0, 3.0];
        let eta = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]];
        let p = LdaParams::new(alpha.to_vec(), eta.clone(), vec![3]).unwrap();
        let words = vec![0, 2, 1];
        let c = LdaCorpus::new(&p, vec![words.clone()]).unwrap();
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let exact = log_evidence(&enumerate_posterior(&inst).unwrap());
        // composite Simpson over π₁ ∈ [0, 1]
        let log_beta = log_gamma_pos(alpha[0]) + log_gamma_pos(alpha[1]) - log_gamma_pos(alpha[0] + alpha[1]);
        let integrand = |t: f64| {
            let density = exp((alpha[0] - 1.0) * ln(t) + (alpha[1] - 1.0) * ln(1.0 - t) - log_beta);
            words
                .iter()
                .map(|&x| t * eta[0][x] + (1.0 - t) * eta[1][x])
                .product::<f64>()
                * density
        };
        let m = 2000;
        let h = 1.0 / m as f64;
        let mut s = 0.0;
        for i in 1..m {
            s += integrand(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = s * h / 3.0;
        assert!((exact - ln(quad)).abs() < 1e-6);
    }

    #[test]
    fn partition_factorizes_over_documents() {
        let mut rng = RngSeed(7).rng();
        let eta: Vec<Vec<f64>> = (0..2)
            .map(|_| sample_dirichlet(&[1.0; 3], &mut rng).unwrap().into_vec())
            .collect();
        let p = LdaParams::new(vec![0.5, 1.5], eta, vec![4, 5]).unwrap();
        let (c, _) = lda::sample(&p, RngSeed(8)).unwrap();
        let whole = log_partition_of(&CollapsedInstance::lda(&p, &c).unwrap()).unwrap();
        let parts: f64 = (0..2)
            .map(|d| {
                let pd = p.select_docs(&[d]).unwrap();
                log_partition_of(&CollapsedInstance::lda(&pd, &c.select_docs(&[d])).unwrap()).unwrap()
            })
            .sum();
        assert!((whole - parts).abs() < 1e-10);
    }

    #[test]
    fn kl_identity_and_nonnegativity() {
        let p = LdaParams::new(vec![0.4, 0.9], vec![vec![0.6, 0.1, 0.3], vec![0.2, 0.5, 0.3]], vec![4]).unwrap();
        let (c, _) = lda::sample(&p, RngSeed(3)).unwrap();
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let t = enumerate_posterior(&inst).unwrap();
        for s in 0..20 {
            let y = YInit::Random(RngSeed(s)).build(&inst).unwrap();
            let kl = exact_kl(&y, &t).unwrap();
            assert!(kl >= -1e-12);
            let rhs = t.log_partition_mu() - exact_objective(&inst, &y).unwrap();
            assert!((kl - rhs).abs() < 1e-8, "{kl} vs {rhs}");
        }
    }

    #[test]
    fn single_site_posterior_is_recovered() {
        let p = LdaParams::new(vec![0.4, 0.9], vec![vec![0.6, 0.4], vec![0.2, 0.8]], vec![1]).unwrap();
        let c = LdaCorpus::new(&p, vec![vec![1]]).unwrap();
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let t = enumerate_posterior(&inst).unwrap();
        let m = exact_marginals(&t).unwrap();
        assert!(exact_kl(&m, &t).unwrap().abs() < 1e-14);
    }

    #[test]
    fn symmetric_instance_has_uniform_marginals() {
        let (p, c) = uniform_lda(5);
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let m = exact_marginals(&enumerate_posterior(&inst).unwrap()).unwrap();
        for row in m.rows() {
            assert!((row[0] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn point_mass_marginals_are_one_hot() {
        let p = LdaParams::new(vec![1.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![3]).unwrap();
        let c = LdaCorpus::new(&p, vec![vec![0, 1, 1]]).unwrap();
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let m = exact_marginals(&enumerate_posterior(&inst).unwrap()).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn assortative_pair_correlations() {
        let p = MmsbParams::new(3, vec![1.0, 1.0], vec![vec![0.9, 0.3], vec![0.3, 0.9]]).unwrap();
        for (edge, expected) in [(true, 0.5656184779789819), (false, -0.758325847975511)] {
            let g = MmsbGraph::from_rows(&vec![vec![edge; 3]; 3]).unwrap();
            let inst = CollapsedInstance::mmsb(&p, &g).unwrap();
            let m = exact_marginals(&enumerate_posterior(&inst).unwrap()).unwrap();
            for row in m.rows() {
                let c = indicator_correlation(row, 2, 0).unwrap();
                assert!((c - expected).abs() < 1e-10, "edge {edge}: {c}");
            }
        }
    }

    #[test]
    fn evidence_bounds_every_elbo() {
        let p = LdaParams::new(
            vec![0.5, 0.8],
            vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]],
            vec![4, 3],
        )
        .unwrap();
        let (c, _) = lda::sample(&p, RngSeed(31)).unwrap();
        let t_inst = CollapsedInstance::lda(&p, &c).unwrap();
        let t = enumerate_posterior(&t_inst).unwrap();
        for s in 0..5 {
            let fit = lda::fit(&p, &c, &LdaInit::Jittered(RngSeed(s)), FitOptions::default()).unwrap();
            let gap = log_evidence(&t) - fit.final_elbo();
            let y = ProductDistribution::from_lda(&fit.state).unwrap();
            let kl = full_model_kl(&y, &fit.state.gamma, &t).unwrap();
            assert!(gap >= 0.0);
            assert!((gap - kl).abs() < 1e-8, "{gap} vs {kl}");
        }
        let mp = MmsbParams::new(3, vec![1.0, 1.0], vec![vec![0.9, 0.3], vec![0.3, 0.9]]).unwrap();
        let (g, _) = mmsb::sample(&mp, RngSeed(2)).unwrap();
        let inst = CollapsedInstance::mmsb(&mp, &g).unwrap();
        let t = enumerate_posterior(&inst).unwrap();
        for method in [MmsbMethod::PartiallyGrouped, MmsbMethod::FullyFactorized] {
            let run = mmsb::fit_once(&mp, &g, method, &MmsbInit::Jittered(RngSeed(4)), FitOptions::default()).unwrap();
            let y = match &run.state {
                mmsb::MmsbState::Pg(s) => ProductDistribution::from_pg(s).unwrap(),
                mmsb::MmsbState::Ff(s) => ProductDistribution::from_ff(s).unwrap(),
            };
            let gamma: Vec<Vec<f64>> = run.state.gamma().chunks(2).map(<[f64]>::to_vec).collect();
            let gap = log_evidence(&t) - run.final_elbo();
            let kl = full_model_kl(&y, &gamma, &t).unwrap();
            assert!((gap - kl).abs() < 1e-8, "{method:?}: {gap} vs {kl}");
        }
    }

    #[test]
    fn fitted_collapsed_vi_beats_random_competitors() {
        let p = LdaParams::new(vec![0.5, 0.5], vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.4, 0.5]], vec![6]).unwrap();
        let (c, _) = lda::sample(&p, RngSeed(5)).unwrap();
        let inst = CollapsedInstance::lda(&p, &c).unwrap();
        let t = enumerate_posterior(&inst).unwrap();
        let fit = collapsed_vi(
            &inst,
            CollapsedMode::Exact,
            &YInit::Uniform,
            FitOptions::new(1e-12, 500).unwrap(),
        )
        .unwrap();
        let best = exact_kl(&fit.y, &t).unwrap();
        for s in 0..100 {
            let y = YInit::Random(RngSeed(1000 + s)).build(&inst).unwrap();
            assert!(best <= exact_kl(&y, &t).unwrap());
        }
        // Jensen gap stays nonnegative at the optimum too
        assert!(
            expected_energy(&inst, &fit.y).unwrap() - eval_i(&inst, &fit.y).unwrap() <= t.log_partition_mu() + 1e-12
        );
    }
}
