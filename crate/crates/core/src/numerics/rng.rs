use alloc::vec::Vec;

use rand_core::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma, StandardUniform};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

use super::{SimplexVector, ln, normalize_log_weights};

/// Generator used for every seeded stream in the crate.
pub type SeededRng = Xoshiro256PlusPlus;

/// Explicit 64-bit seed. Identical seeds give bit-identical streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RngSeed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngSeed {
    pub fn rng(self) -> SeededRng {
        Xoshiro256PlusPlus::seed_from_u64(self.0)
    }

    /// Seed of the `index`-th independent substream derived from `self`.
    pub fn substream(self, index: u64) -> RngSeed {
        RngSeed(splitmix64(
            self.0 ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }
}

/// Uniform draw on `[0, 1)`.
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardUniform.sample(rng)
}

/// Index drawn from the categorical distribution `p`.
pub fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u = sample_uniform(rng);
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the partial sums
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Dirichlet draw via normalized gamma variates.
///
/// Shapes `α ≥ 1` use Marsaglia–Tsang directly. Shapes `α < 1` use the boost
/// `G(α) = G(α+1)·U^{1/α}` evaluated in log space, so tiny shapes cannot
/// underflow every coordinate to zero.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<SimplexVector> {
    if alpha.is_empty() {
        return Err(Error::EmptyInput("sample_dirichlet"));
    }
    if let Some(&bad) = alpha.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::Domain {
            function: "sample_dirichlet",
            value: bad,
        });
    }
    let mut log_g: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a >= 1.0 {
                let g = Gamma::new(a, 1.0).expect("shape checked above");
                ln(g.sample(rng))
            } else {
                let g = Gamma::new(a + 1.0, 1.0).expect("shape checked above");
                let u: f64 = sample_uniform(rng);
                // 1 - u lies in (0, 1]
                ln(g.sample(rng)) + ln(1.0 - u) / a
            }
        })
        .collect();
    normalize_log_weights(&mut log_g).ok_or(Error::DegenerateRow { site: 0 })?;
    SimplexVector::new(log_g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngSeed(7).rng();
        let mut b = RngSeed(7).rng();
        for _ in 0..100 {
            assert_eq!(sample_uniform(&mut a).to_bits(), sample_uniform(&mut b).to_bits());
        }
        assert_ne!(RngSeed(7).substream(0), RngSeed(7).substream(1));
        assert_eq!(RngSeed(7).substream(3), RngSeed(7).substream(3));
    }

    #[test]
    fn dirichlet_point_simplex() {
        let mut rng = RngSeed(1).rng();
        assert_eq!(sample_dirichlet(&[1.0], &mut rng).unwrap().as_slice(), &[1.0]);
        assert_eq!(sample_dirichlet(&[0.01], &mut rng).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn dirichlet_rejects_bad_shape() {
        let mut rng = RngSeed(1).rng();
        assert!(sample_dirichlet(&[1.0, 0.0], &mut rng).is_err());
        assert!(sample_dirichlet(&[-1.0], &mut rng).is_err());
        assert!(sample_dirichlet(&[], &mut rng).is_err());
    }

    fn mean_first_coordinate(alpha: &[f64], draws: usize, seed: u64) -> f64 {
        let mut rng = RngSeed(seed).rng();
        (0..draws)
            .map(|_| sample_dirichlet(alpha, &mut rng).unwrap()[0])
            .sum::<f64>()
            / draws as f64
    }

    #[test]
    fn dirichlet_means() {
        let m = mean_first_coordinate(&[5.0, 5.0], 100_000, 11);
        assert!((m - 0.5).abs() < 0.005, "Dir(5,5) mean {m}");
        let m = mean_first_coordinate(&[2.0, 1.0], 100_000, 12);
        assert!((m - 2.0 / 3.0).abs() < 0.005, "Dir(2,1) mean {m}");
        // boosted branch
        let m = mean_first_coordinate(&[0.3, 0.6], 100_000, 13);
        assert!((m - 1.0 / 3.0).abs() < 0.01, "Dir(0.3,0.6) mean {m}");
    }

    #[test]
    fn dirichlet_outputs_are_simplex() {
        let mut rng = RngSeed(5).rng();
        for _ in 0..1000 {
            let p = sample_dirichlet(&[0.05, 0.5, 3.0, 1e-3], &mut rng).unwrap();
            let s: f64 = p.as_slice().iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            assert!(p.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn categorical_frequencies() {
        let mut rng = RngSeed(3).rng();
        let p = [0.2, 0.0, 0.8];
        let mut counts = [0usize; 3];
        for _ in 0..50_000 {
            counts[sample_categorical(&p, &mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 50_000.0 - 0.2).abs() < 0.01);
    }
}
