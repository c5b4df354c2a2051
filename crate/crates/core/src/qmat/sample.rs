use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{qr_orthonormalize, CMat, CVec};
use super::{DensityMatrix, PureStateVector};
use crate::error::{Error, Result};

pub type TrialRng = ChaCha8Rng;

/// Independent stream for trial `trial` of the campaign seeded with `seed`.
/// Streams do not depend on evaluation order, so parallel and serial runs agree.
pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Measure {
    HilbertSchmidtMixed,
    HaarPure,
    Perturbation { radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub measure: Measure,
}

impl RngSpec {
    pub fn new(seed: u64, measure: Measure) -> Result<Self> {
        if let Measure::Perturbation { radius } = measure {
            if !(radius > 0.0 && radius <= 1.0) {
                return Err(Error::OutOfRange(format!("perturbation radius {radius} outside (0, 1]")));
            }
        }
        Ok(RngSpec { seed, measure })
    }

    /// Same measure, seed for an individual trial.
    pub fn for_trial(&self, trial: u64) -> RngSpec {
        let mut rng = trial_rng(self.seed, trial);
        RngSpec { seed: rng.random(), measure: self.measure }
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Hilbert–Schmidt random mixed state: `G G† / Tr(G G†)` with square Ginibre `G`.
pub fn random_mixed<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> DensityMatrix {
    let d: usize = dims.iter().product();
    random_mixed_with_rank(rng, dims, d)
}

/// Induced measure with a `d × rank` Ginibre factor; generically of the given rank.
pub fn random_mixed_with_rank<R: Rng + ?Sized>(rng: &mut R, dims: &[usize], rank: usize) -> DensityMatrix {
    let d: usize = dims.iter().product();
    let g = gaussian_matrix(rng, d, rank.max(1));
    DensityMatrix::from_positive_unnormalized(dims.to_vec(), &g * g.adjoint())
}

pub fn random_haar_pure<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> PureStateVector {
    let d: usize = dims.iter().product();
    let v = CVec::from_fn(d, |_, _| complex_normal(rng));
    PureStateVector::from_unnormalized(dims.to_vec(), v)
}

/// Haar-random `rows × cols` isometry (`rows >= cols`).
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    qr_orthonormalize(&gaussian_matrix(rng, rows, cols))
}

fn draw_state<R: Rng + ?Sized>(rng: &mut R, measure: Measure, dims: &[usize]) -> DensityMatrix {
    match measure {
        Measure::HilbertSchmidtMixed => random_mixed(rng, dims),
        Measure::HaarPure => random_haar_pure(rng, dims).to_density(),
        Measure::Perturbation { .. } => {
            // Base states cover every rank, so boundary (rank-deficient) cases are exercised.
            let d: usize = dims.iter().product();
            let rank = rng.random_range(1..=d);
            random_mixed_with_rank(rng, dims, rank)
        }
    }
}

pub fn sample_state(spec: &RngSpec, dims: &[usize]) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    draw_state(&mut rng, spec.measure, dims)
}

/// Two states. Under `Perturbation { radius }` the second is
/// `(1 - t) ρ + t τ` with `t ∈ (0, radius]`, so `½||ρ - σ||_1 <= radius`.
pub fn sample_pair(spec: &RngSpec, dims: &[usize]) -> (DensityMatrix, DensityMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_pair_with(&mut rng, spec.measure, dims)
}

pub(crate) fn sample_pair_with<R: Rng + ?Sized>(
    rng: &mut R,
    measure: Measure,
    dims: &[usize],
) -> (DensityMatrix, DensityMatrix) {
    match measure {
        Measure::Perturbation { radius } => {
            let rho = draw_state(rng, measure, dims);
            let tau = draw_state(rng, measure, dims);
            let t = radius * (1.0 - rng.random::<f64>());
            let sigma = rho.mix(&tau, t).expect("same dims and t in (0,1]");
            (rho, sigma)
        }
        _ => (draw_state(rng, measure, dims), draw_state(rng, measure, dims)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::trace_distance_norm;

    #[test]
    fn fixed_seed_is_deterministic() {
        for measure in [Measure::HilbertSchmidtMixed, Measure::HaarPure, Measure::Perturbation { radius: 0.3 }] {
            let spec = RngSpec::new(42, measure).unwrap();
            assert_eq!(sample_state(&spec, &[2, 3]), sample_state(&spec, &[2, 3]));
            assert_eq!(sample_pair(&spec, &[3]), sample_pair(&spec, &[3]));
        }
    }

    #[test]
    fn perturbation_pairs_respect_radius() {
        let spec = RngSpec::new(7, Measure::Perturbation { radius: 0.1 }).unwrap();
        for k in 0..200 {
            let (a, b) = sample_pair(&spec.for_trial(k), &[3]);
            assert!(trace_distance_norm(&a, &b).unwrap() <= 0.2 + 1e-12);
        }
    }

    #[test]
    fn radius_must_be_in_unit_interval() {
        assert!(RngSpec::new(0, Measure::Perturbation { radius: 0.0 }).is_err());
        assert!(RngSpec::new(0, Measure::Perturbation { radius: 1.5 }).is_err());
    }

    #[test]
    fn hilbert_schmidt_mean_purity() {
        // For the square-Ginibre measure E[Tr ρ²] = 2d/(d²+1); 0.8 at d = 2.
        let mut rng = trial_rng(2024, 0);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| random_mixed(&mut rng, &[2]).purity()).sum::<f64>() / n as f64;
        assert!((mean - 0.8).abs() <= 0.05 * 0.8, "mean purity {mean}");
    }

    #[test]
    fn isometries_are_orthonormal() {
        let mut rng = trial_rng(1, 2);
        let v = random_isometry(&mut rng, 7, 3);
        let gram = v.adjoint() * &v;
        assert!(crate::qmat::linalg::max_abs(&(gram - CMat::identity(3, 3))) < 1e-12);
    }
}
