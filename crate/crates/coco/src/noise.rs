//! Martingale-difference gradient noise.
//!
//! Three second-moment profiles are supported: the affine model
//! `E[|M|^2 | F_t] = sigma^2 (1 + |x_t|^2)`, plus the relative and absolute
//! models used in earlier work for comparison runs. Draws are isotropic
//! Gaussian, which meets the affine bound with equality, the hardest case
//! the assumption admits.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise second-moment model. The total squared-norm budget is split evenly
/// across the `N * d` coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `E[|M|^2] = sigma^2 (1 + |x|^2)`: non-vanishing, grows with the iterate.
    Affine { sigma: f64 },
    /// `E[|M|^2] = tau |v(x)|^2`: vanishes at equilibrium.
    Relative { tau: f64 },
    /// `E[|M|^2] = sigma^2`: constant variance.
    Absolute { sigma: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let (name, value) = match self {
            NoiseModel::Affine { sigma } | NoiseModel::Absolute { sigma } => ("sigma", *sigma),
            NoiseModel::Relative { tau } => ("tau", *tau),
        };
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise {name} must be a nonnegative real, got {value}"
            )));
        }
        Ok(())
    }

    /// Total second moment `E[|M|^2]` at state `x` with gradient `v_x`.
    pub fn second_moment(&self, x: &DVector<f64>, v_x: &DVector<f64>) -> f64 {
        match self {
            NoiseModel::Affine { sigma } => sigma * sigma * (1.0 + x.norm_squared()),
            NoiseModel::Relative { tau } => tau * v_x.norm_squared(),
            NoiseModel::Absolute { sigma } => sigma * sigma,
        }
    }

    /// Draws one noise vector `M` with i.i.d. `N(0, s^2)` coordinates where
    /// `s^2` is the total budget divided by the dimension.
    ///
    /// The generator is always advanced by `dim` draws so that streams stay
    /// aligned across models with different (possibly zero) scales.
    pub fn sample(&self, x: &DVector<f64>, v_x: &DVector<f64>, rng: &mut RngStream) -> DVector<f64> {
        let dim = x.len();
        let per_coord = (self.second_moment(x, v_x) / dim as f64).sqrt();
        DVector::from_fn(dim, |_, _| {
            let z: f64 = StandardNormal.sample(rng.inner());
            per_coord * z
        })
    }
}

/// Deterministic, splittable random stream.
///
/// Built on a counter-based generator: one 64-bit seed plus a 64-bit stream
/// index yield independent sequences, bit-exact regardless of thread
/// scheduling. Each trajectory owns exactly one stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for trajectory `k` of an ensemble rooted at
    /// `base_seed`; distinct `k` never collide.
    pub fn for_trajectory(base_seed: u64, k: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(base_seed);
        rng.set_stream(k);
        Self { rng }
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(values: &[f64]) -> DVector<f64> {
        DVector::from_vec(values.to_vec())
    }

    #[test]
    fn zero_sigma_yields_zero_vector() {
        let model = NoiseModel::Affine { sigma: 0.0 };
        let x = vec_of(&[3.0, -1.0]);
        let v = vec_of(&[1.0, 1.0]);
        let mut rng = RngStream::from_seed(1);
        let m = model.sample(&x, &v, &mut rng);
        assert_eq!(m.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn relative_noise_vanishes_at_equilibrium() {
        let model = NoiseModel::Relative { tau: 1.0 };
        let x = vec_of(&[0.5, 0.5]);
        let v = vec_of(&[0.0, 0.0]);
        let mut rng = RngStream::from_seed(1);
        let m = model.sample(&x, &v, &mut rng);
        assert_eq!(m.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn affine_second_moment_calibration() {
        // E|M|^2 should match sigma^2 (1 + |x|^2) within 5 standard errors.
        let model = NoiseModel::Affine { sigma: 1.0 };
        for x in [vec_of(&[0.0, 0.0]), vec_of(&[10.0, 10.0])] {
            let v = vec_of(&[0.0, 0.0]);
            let mut rng = RngStream::from_seed(42);
            let n = 100_000usize;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let m = model.sample(&x, &v, &mut rng);
                let ns = m.norm_squared();
                sum += ns;
                sum_sq += ns * ns;
            }
            let mean = sum / n as f64;
            let var = sum_sq / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            let expected = 1.0 + x.norm_squared();
            assert!(
                (mean - expected).abs() <= 5.0 * se,
                "mean {mean}, expected {expected}, se {se}"
            );
        }
    }

    #[test]
    fn per_coordinate_variance_splits_budget() {
        let model = NoiseModel::Affine { sigma: 1.0 };
        let x = vec_of(&[0.0, 0.0]);
        let v = vec_of(&[0.0, 0.0]);
        let mut rng = RngStream::from_seed(9);
        let n = 100_000usize;
        let mut sum_sq = [0.0f64; 2];
        for _ in 0..n {
            let m = model.sample(&x, &v, &mut rng);
            sum_sq[0] += m[0] * m[0];
            sum_sq[1] += m[1] * m[1];
        }
        for s in sum_sq {
            let var = s / n as f64;
            assert!((var - 0.5).abs() < 0.02, "per-coordinate variance {var}");
        }
    }

    #[test]
    fn empirical_mean_is_zero() {
        let model = NoiseModel::Affine { sigma: 2.0 };
        let x = vec_of(&[1.0, -4.0, 2.0]);
        let v = vec_of(&[0.0, 0.0, 0.0]);
        let mut rng = RngStream::from_seed(3);
        let n = 100_000usize;
        let mut mean = DVector::zeros(3);
        for _ in 0..n {
            mean += model.sample(&x, &v, &mut rng);
        }
        mean /= n as f64;
        let per_coord = (model.second_moment(&x, &v) / 3.0).sqrt();
        let tol = 5.0 * per_coord / (n as f64).sqrt() * 3.0f64.sqrt();
        assert!(mean.norm() <= tol, "mean norm {}", mean.norm());
    }

    #[test]
    fn identical_seeds_give_identical_sequences() {
        let model = NoiseModel::Affine { sigma: 1.5 };
        let x = vec_of(&[1.0, 2.0]);
        let v = vec_of(&[0.5, 0.5]);
        let mut a = RngStream::for_trajectory(77, 4);
        let mut b = RngStream::for_trajectory(77, 4);
        for _ in 0..100 {
            assert_eq!(model.sample(&x, &v, &mut a), model.sample(&x, &v, &mut b));
        }
    }

    #[test]
    fn distinct_trajectory_streams_differ() {
        let model = NoiseModel::Affine { sigma: 1.0 };
        let x = vec_of(&[0.0]);
        let v = vec_of(&[0.0]);
        let mut a = RngStream::for_trajectory(77, 0);
        let mut b = RngStream::for_trajectory(77, 1);
        let ma: Vec<f64> = (0..16).map(|_| model.sample(&x, &v, &mut a)[0]).collect();
        let mb: Vec<f64> = (0..16).map(|_| model.sample(&x, &v, &mut b)[0]).collect();
        assert_ne!(ma, mb);
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(NoiseModel::Affine { sigma: -1.0 }.validate().is_err());
        assert!(NoiseModel::Relative { tau: -0.1 }.validate().is_err());
        assert!(NoiseModel::Absolute { sigma: 1.0 }.validate().is_ok());
    }
}
