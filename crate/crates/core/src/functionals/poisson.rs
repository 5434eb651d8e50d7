use alloc::vec;
use alloc::vec::Vec;

use super::{CategoryMap, CollapsedInstance, ProductDistribution};
use crate::error::Result;
use crate::numerics::{compensated_sum, ln, log_gamma_pos};

/// Distribution of a sum of independent Bernoulli(`p_i`) variables.
pub fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut dist = vec![0.0; probs.len() + 1];
    dist[0] = 1.0;
    for (seen, &p) in probs.iter().enumerate() {
        for m in (1..=seen + 1).rev() {
            dist[m] = dist[m] * (1.0 - p) + dist[m - 1] * p;
        }
        dist[0] *= 1.0 - p;
    }
    dist
}

/// `E[h(X)]` for `X` with distribution `dist` on `0..`.
fn expect(dist: &[f64], h: impl Fn(f64) -> f64) -> f64 {
    compensated_sum(
        dist.iter()
            .enumerate()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(m, &p)| p * h(m as f64)),
    )
}

/// Probability that a site's mapped category equals `l`.
fn mapped_mass(row: &[f64], map: CategoryMap, k: usize, l: usize) -> f64 {
    row.iter()
        .enumerate()
        .filter(|&(c, _)| map.apply(c, k) == l)
        .map(|(_, &v)| v)
        .sum()
}

/// Exact `E_{Q_y}[f(Z)]`, each count `N_gm` Poisson-binomial over its
/// sites.
pub fn expected_energy(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<f64> {
    inst.check(y)?;
    let k = inst.num_topics();
    let mut terms = Vec::new();
    for members in inst.group_members() {
        for (l, &a) in inst.alpha().iter().enumerate() {
            let probs: Vec<f64> = members
                .iter()
                .map(|&(s, map)| mapped_mass(y.row(s), map, k, l))
                .collect();
            terms.push(expect(&poisson_binomial(&probs), |m| log_gamma_pos(m + a)));
        }
    }
    Ok(compensated_sum(terms) - inst.total_term())
}

/// `E_{Q_{y,−s}}[f | Z_s = c]` up to a `c`-independent constant, for every
/// category: `Σ_slots E ln(N^{−s}_{g,map(c)} + α_{map(c)})`.
pub(crate) fn conditional_scores(
    inst: &CollapsedInstance,
    y: &ProductDistribution,
    members: &[Vec<(usize, CategoryMap)>],
    site: usize,
) -> Vec<f64> {
    let k = inst.num_topics();
    let per_slot: Vec<Vec<f64>> = inst
        .slots(site)
        .iter()
        .map(|slot| {
            inst.alpha()
                .iter()
                .enumerate()
                .map(|(l, &a)| {
                    let probs: Vec<f64> = members[slot.group]
                        .iter()
                        .filter(|&&(s, _)| s != site)
                        .map(|&(s, map)| mapped_mass(y.row(s), map, k, l))
                        .collect();
                    expect(&poisson_binomial(&probs), |m| ln(m + a))
                })
                .collect()
        })
        .collect();
    (0..inst.num_categories())
        .map(|c| {
            inst.slots(site)
                .iter()
                .zip(&per_slot)
                .map(|(slot, e)| e[slot.map.apply(c, k)])
                .sum()
        })
        .collect()
}
