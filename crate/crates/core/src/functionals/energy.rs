use alloc::vec;
use alloc::vec::Vec;

use super::{CollapsedInstance, ProductDistribution};
use crate::error::{Error, Result};
use crate::numerics::{digamma_pos, ln, log_gamma_pos, normalize_log_weights};

/// Fractional counts `Ñ[g][m](y)`.
pub fn soft_counts(inst: &CollapsedInstance, y: &ProductDistribution) -> Vec<Vec<f64>> {
    counts_of_rows(inst, y.rows())
}

fn counts_of_rows<'a>(inst: &CollapsedInstance, rows: impl Iterator<Item = &'a [f64]>) -> Vec<Vec<f64>> {
    let k = inst.num_topics();
    let mut counts = vec![vec![0.0; k]; inst.num_groups()];
    for (s, row) in rows.enumerate() {
        for slot in inst.slots(s) {
            let g = &mut counts[slot.group];
            for (c, &v) in row.iter().enumerate() {
                g[slot.map.apply(c, k)] += v;
            }
        }
    }
    counts
}

fn f_from_counts(inst: &CollapsedInstance, counts: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for g in counts {
        for (&n, &a) in g.iter().zip(inst.alpha()) {
            total += log_gamma_pos(n + a);
        }
    }
    total - inst.total_term()
}

/// `F(y) = Σ_g [Σ_m lnΓ(Ñ_gm(y) + α_m) − lnΓ(total_g + Σα)]`.
pub fn eval_f(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<f64> {
    inst.check(y)?;
    Ok(f_from_counts(inst, &soft_counts(inst, y)))
}

/// `F` at arbitrary rows, off the simplex included; for derivative checks.
pub fn eval_f_extended(inst: &CollapsedInstance, rows: &[Vec<f64>]) -> Result<f64> {
    if rows.len() != inst.num_sites() || rows.iter().any(|r| r.len() != inst.num_categories()) {
        return Err(Error::DimensionMismatch {
            what: "rows",
            expected: inst.num_sites() * inst.num_categories(),
            found: rows.iter().map(Vec::len).sum(),
        });
    }
    Ok(f_from_counts(
        inst,
        &counts_of_rows(inst, rows.iter().map(Vec::as_slice)),
    ))
}

/// `f(z) = F(G(z))`.
pub fn energy_f(inst: &CollapsedInstance, z: &[usize]) -> Result<f64> {
    inst.check_assignment(z)?;
    eval_f(inst, &ProductDistribution::one_hot(z, inst.num_categories())?)
}

/// `∂F/∂y_{s,c} = Σ_slots ψ(Ñ_{g,map(c)} + α_{map(c)})`.
pub fn gradient(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<Vec<Vec<f64>>> {
    inst.check(y)?;
    let k = inst.num_topics();
    let psi: Vec<Vec<f64>> = soft_counts(inst, y)
        .iter()
        .map(|g| g.iter().zip(inst.alpha()).map(|(&n, &a)| digamma_pos(n + a)).collect())
        .collect();
    Ok((0..inst.num_sites())
        .map(|s| {
            (0..inst.num_categories())
                .map(|c| {
                    inst.slots(s)
                        .iter()
                        .map(|slot| psi[slot.group][slot.map.apply(c, k)])
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// `I(y) = Σ y ln(y/μ)`; mass where `μ = 0` is an error.
pub fn eval_i(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<f64> {
    inst.check(y)?;
    let mut total = 0.0;
    for (s, row) in y.rows().enumerate() {
        for (c, (&v, &m)) in row.iter().zip(inst.mu(s)).enumerate() {
            if v > 0.0 {
                if m == 0.0 {
                    return Err(Error::SupportMismatch { site: s, category: c });
                }
                total += v * ln(v / m);
            }
        }
    }
    Ok(total)
}

/// `J(y, y′) = Σ y ln(y′/μ)`; `−∞` when `y′` misses mass of `y`, an error
/// when `μ` does.
pub fn eval_j(inst: &CollapsedInstance, y: &ProductDistribution, y_prime: &ProductDistribution) -> Result<f64> {
    inst.check(y)?;
    inst.check(y_prime)?;
    let mut total = 0.0;
    for (s, (row, row_p)) in y.rows().zip(y_prime.rows()).enumerate() {
        for (c, ((&v, &vp), &m)) in row.iter().zip(row_p).zip(inst.mu(s)).enumerate() {
            if v > 0.0 {
                if m == 0.0 {
                    return Err(Error::SupportMismatch { site: s, category: c });
                }
                total += v * ln(vp / m);
            }
        }
    }
    Ok(total)
}

/// `T_{s,c}(y) ∝ μ_s(c) exp(F(U¹(y; s, c)))`, via the count shift
/// `Ñ(U¹) = Ñ(y) − y_s + e_c`.
pub fn t_map(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<ProductDistribution> {
    inst.check(y)?;
    let k = inst.num_topics();
    let counts = soft_counts(inst, y);
    let mut rows = Vec::with_capacity(inst.num_sites());
    let mut row = vec![0.0; inst.num_categories()];
    let mut base: Vec<(usize, Vec<f64>)> = Vec::new();
    for s in 0..inst.num_sites() {
        let y_s = y.row(s);
        // counts of the touched groups with site s removed
        base.clear();
        for slot in inst.slots(s) {
            let mut g = counts[slot.group].clone();
            for (c, &v) in y_s.iter().enumerate() {
                g[slot.map.apply(c, k)] -= v;
            }
            g.iter_mut().for_each(|x| *x = x.max(0.0));
            base.push((slot.group, g));
        }
        for (c, r) in row.iter_mut().enumerate() {
            let m = inst.mu(s)[c];
            if m == 0.0 {
                *r = f64::NEG_INFINITY;
                continue;
            }
            let mut score = ln(m);
            for (slot, (_, g)) in inst.slots(s).iter().zip(&base) {
                let l = slot.map.apply(c, k);
                score += ln(g[l] + inst.alpha()[l]);
            }
            *r = score;
        }
        normalize_log_weights(&mut row).ok_or(Error::DegenerateRow { site: s })?;
        rows.push(row.clone());
    }
    ProductDistribution::from_normalized(rows)
}

/// `Σ_{s,c} F_{s,c}(y)(y_{s,c} − T_{s,c}(y))`.
fn gradient_pairing(inst: &CollapsedInstance, y: &ProductDistribution, t: &ProductDistribution) -> Result<f64> {
    let grad = gradient(inst, y)?;
    Ok(grad
        .iter()
        .zip(y.rows().zip(t.rows()))
        .flat_map(|(gr, (a, b))| gr.iter().zip(a.iter().zip(b)).map(|(&g, (&x, &t))| g * (x - t)))
        .sum())
}

/// `Δ₁(y) = F(y) − F(T(y)) − Σ F_{s,c}(y)(y − T(y))`.
pub fn delta1(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<f64> {
    let t = t_map(inst, y)?;
    Ok(eval_f(inst, y)? - eval_f(inst, &t)? - gradient_pairing(inst, y, &t)?)
}

/// `Δ₂(y) = I(T(y)) − J(y, T(y)) + Σ F_{s,c}(y)(y − T(y))`.
pub fn delta2(inst: &CollapsedInstance, y: &ProductDistribution) -> Result<f64> {
    let t = t_map(inst, y)?;
    Ok(eval_i(inst, &t)? - eval_j(inst, y, &t)? + gradient_pairing(inst, y, &t)?)
}
