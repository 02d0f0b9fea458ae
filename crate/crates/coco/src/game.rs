//! Game abstraction: joint action space, gradient operator, Nash equilibrium
//! geometry, and sampled operator-property checks for the two supported
//! co-coercive game families.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::noise::RngStream;

/// Eigenvalues in (-ZERO_EIG_TOL, ZERO_EIG_TOL) are treated as exactly zero
/// when constructing the kernel of the interaction matrix.
const ZERO_EIG_TOL: f64 = 1e-10;
/// Maximum tolerated asymmetry |Q - Q^T| before construction fails.
const SYMMETRY_TOL: f64 = 1e-12;
/// Standard deviation for the operator-property sampling distribution.
const SAMPLE_SCALE: f64 = 10.0;

/// Joint action profile `x = (x_1, ..., x_N)`, the concatenation of all
/// players' actions into one vector of length `N * d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionProfile {
    values: DVector<f64>,
}

impl ActionProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("action profile entry {bad}")));
        }
        Ok(Self {
            values: DVector::from_vec(values),
        })
    }

    pub(crate) fn from_vector(values: DVector<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }
}

/// Family-specific game parameters.
#[derive(Clone, Debug)]
pub enum GameKind {
    /// Quadratic game `v(x) = Q x` with symmetric negative semidefinite `Q`.
    Quadratic { q: DMatrix<f64> },
    /// Concave aggregate game with linear reward `<phi, x_n>` and quadratic
    /// aggregate cost: `v_n(x) = phi - gamma * sum_m x_m`.
    AggregatePotential { phi: DVector<f64>, gamma: f64 },
}

/// Descriptor of the equilibrium set `{x : v(x) = 0}`, sufficient to compute
/// the orthogonal projection onto it.
#[derive(Clone, Debug)]
pub enum NeSetDescriptor {
    /// Linear subspace through the origin: `ker(Q)`, stored as the
    /// orthogonal projector onto it.
    KernelSubspace { projector: DMatrix<f64> },
    /// Affine subspace `sum_n x_n = phi / gamma`.
    AggregateAffine { target: DVector<f64> },
}

/// One co-coercive game instance with its equilibrium geometry and
/// co-coercivity parameter resolved at construction.
#[derive(Clone, Debug)]
pub struct GameSpec {
    players: usize,
    action_dim: usize,
    kind: GameKind,
    lambda: f64,
    ne_set: NeSetDescriptor,
}

/// Result of sampled verification of the co-coercivity inequality.
#[derive(Clone, Copy, Debug)]
pub struct CocoercivityReport {
    pub min_slack: f64,
    pub holds: bool,
}

/// Result of a sampled Lipschitz-constant check on the gradient operator.
#[derive(Clone, Copy, Debug)]
pub struct LipschitzReport {
    pub max_ratio: f64,
    pub holds: bool,
}

impl GameSpec {
    /// Builds a quadratic game from a dense interaction matrix.
    ///
    /// `q` must be `(players * action_dim)` square, symmetric within `1e-12`,
    /// negative semidefinite, and not identically singular (a zero matrix
    /// has no negative eigenvalue and yields no co-coercivity parameter).
    pub fn quadratic(players: usize, action_dim: usize, q: DMatrix<f64>) -> Result<Self> {
        let dim = players
            .checked_mul(action_dim)
            .filter(|d| *d > 0)
            .ok_or_else(|| Error::InvalidGame("players and action_dim must be positive".into()))?;
        if q.nrows() != dim || q.ncols() != dim {
            return Err(Error::InvalidGame(format!(
                "interaction matrix must be {dim}x{dim}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        let max_asym = (&q - q.transpose()).amax();
        if max_asym > SYMMETRY_TOL {
            return Err(Error::InvalidGame(format!(
                "interaction matrix not symmetric: max |Q - Q^T| entry is {max_asym:e}"
            )));
        }
        let q = (&q + q.transpose()) * 0.5;

        let eigen = q.clone().symmetric_eigen();
        let mut min_eig = f64::INFINITY;
        for &ev in eigen.eigenvalues.iter() {
            if ev > ZERO_EIG_TOL {
                return Err(Error::InvalidGame(format!(
                    "interaction matrix not negative semidefinite: eigenvalue {ev:e} > 0"
                )));
            }
            min_eig = min_eig.min(ev);
        }
        if min_eig >= -ZERO_EIG_TOL {
            return Err(Error::InvalidGame(
                "trivial game: interaction matrix has no negative eigenvalue".into(),
            ));
        }

        // Orthogonal projector onto ker(Q) from the eigenvectors whose
        // eigenvalues sit inside the zero band.
        let mut projector = DMatrix::zeros(dim, dim);
        for (i, &ev) in eigen.eigenvalues.iter().enumerate() {
            if ev.abs() <= ZERO_EIG_TOL {
                let col = eigen.eigenvectors.column(i);
                projector += &col * col.transpose();
            }
        }

        Ok(Self {
            players,
            action_dim,
            lambda: 1.0 / min_eig.abs(),
            kind: GameKind::Quadratic { q },
            ne_set: NeSetDescriptor::KernelSubspace { projector },
        })
    }

    /// Builds a concave aggregate game with common reward vector `phi` and
    /// aggregate cost coefficient `gamma > 0`.
    pub fn aggregate(players: usize, action_dim: usize, phi: DVector<f64>, gamma: f64) -> Result<Self> {
        if players == 0 || action_dim == 0 {
            return Err(Error::InvalidGame("players and action_dim must be positive".into()));
        }
        if phi.len() != action_dim {
            return Err(Error::InvalidGame(format!(
                "phi must have length {action_dim}, got {}",
                phi.len()
            )));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidGame(format!("gamma must be positive, got {gamma}")));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGame("phi has non-finite entries".into()));
        }
        let target = &phi / gamma;
        Ok(Self {
            players,
            action_dim,
            lambda: 1.0 / (gamma * players as f64),
            kind: GameKind::AggregatePotential { phi, gamma },
            ne_set: NeSetDescriptor::AggregateAffine { target },
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Dimension of the joint action space, `N * d`.
    pub fn dim(&self) -> usize {
        self.players * self.action_dim
    }

    pub fn kind(&self) -> &GameKind {
        &self.kind
    }

    pub fn ne_set(&self) -> &NeSetDescriptor {
        &self.ne_set
    }

    /// The co-coercivity parameter: `1/|lambda_min(Q)|` for quadratic games,
    /// `1/(gamma N)` for aggregate games.
    pub fn cocoercivity_parameter(&self) -> f64 {
        self.lambda
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Evaluates the game gradient operator `v(x)`.
    pub fn gradient(&self, x: &ActionProfile) -> Result<DVector<f64>> {
        self.check_dim(x.dim())?;
        Ok(self.gradient_raw(x.as_vector()))
    }

    pub(crate) fn gradient_raw(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            GameKind::Quadratic { q } => q * x,
            GameKind::AggregatePotential { phi, gamma } => {
                let d = self.action_dim;
                let mut aggregate = DVector::zeros(d);
                for n in 0..self.players {
                    aggregate += x.rows(n * d, d);
                }
                let block = phi - aggregate * *gamma;
                let mut out = DVector::zeros(self.dim());
                for n in 0..self.players {
                    out.rows_mut(n * d, d).copy_from(&block);
                }
                out
            }
        }
    }

    /// Euclidean orthogonal projection of `x` onto the equilibrium set.
    pub fn project_to_ne(&self, x: &ActionProfile) -> Result<ActionProfile> {
        self.check_dim(x.dim())?;
        Ok(ActionProfile::from_vector(self.project_raw(x.as_vector())))
    }

    pub(crate) fn project_raw(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.ne_set {
            NeSetDescriptor::KernelSubspace { projector } => projector * x,
            NeSetDescriptor::AggregateAffine { target } => {
                let d = self.action_dim;
                let mut aggregate = DVector::zeros(d);
                for n in 0..self.players {
                    aggregate += x.rows(n * d, d);
                }
                // Shift every player's block by an equal share of the
                // aggregate deficit; this is the orthogonal projection onto
                // the affine subspace sum_n x_n = phi / gamma.
                let shift = (&aggregate - target) / self.players as f64;
                let mut out = x.clone();
                for n in 0..self.players {
                    let mut block = out.rows_mut(n * d, d);
                    block -= &shift;
                }
                out
            }
        }
    }

    /// Euclidean distance from `x` to the equilibrium set.
    pub fn distance_to_ne(&self, x: &ActionProfile) -> Result<f64> {
        let projected = self.project_to_ne(x)?;
        Ok((x.as_vector() - projected.as_vector()).norm())
    }

    /// Samples `num_pairs` pairs of profiles and checks the co-coercivity
    /// inequality with the game's own parameter.
    pub fn verify_cocoercivity(&self, num_pairs: usize, rng_seed: u64) -> CocoercivityReport {
        self.verify_cocoercivity_with(self.lambda, num_pairs, rng_seed)
    }

    /// Sampled co-coercivity check against an arbitrary candidate `lambda`.
    ///
    /// Sampling can only falsify the inequality, never prove it; a passing
    /// report means no violating pair was found among the samples.
    pub fn verify_cocoercivity_with(
        &self,
        lambda: f64,
        num_pairs: usize,
        rng_seed: u64,
    ) -> CocoercivityReport {
        let mut rng = RngStream::from_seed(rng_seed);
        let normal = Normal::new(0.0, SAMPLE_SCALE).expect("valid normal");
        let dim = self.dim();
        let mut min_slack = f64::INFINITY;
        let mut holds = true;
        for _ in 0..num_pairs {
            let x = DVector::from_fn(dim, |_, _| normal.sample(rng.inner()));
            let y = DVector::from_fn(dim, |_, _| normal.sample(rng.inner()));
            let dv = self.gradient_raw(&y) - self.gradient_raw(&x);
            let dx = &y - &x;
            let slack = -lambda * dv.norm_squared() - dx.dot(&dv);
            min_slack = min_slack.min(slack);
            let tol = -1e-9 * (1.0 + x.norm_squared() + y.norm_squared());
            if slack < tol {
                holds = false;
            }
        }
        CocoercivityReport { min_slack, holds }
    }

    /// Sampled check that the gradient operator is `(1/lambda)`-Lipschitz.
    pub fn lipschitz_check(&self, num_pairs: usize, rng_seed: u64) -> LipschitzReport {
        let mut rng = RngStream::from_seed(rng_seed);
        let normal = Normal::new(0.0, SAMPLE_SCALE).expect("valid normal");
        let dim = self.dim();
        let mut max_ratio: f64 = 0.0;
        for _ in 0..num_pairs {
            let x = DVector::from_fn(dim, |_, _| normal.sample(rng.inner()));
            let y = DVector::from_fn(dim, |_, _| normal.sample(rng.inner()));
            let dx_norm = (&y - &x).norm();
            if dx_norm < 1e-12 {
                continue;
            }
            let dv_norm = (self.gradient_raw(&y) - self.gradient_raw(&x)).norm();
            max_ratio = max_ratio.max(dv_norm / dx_norm);
        }
        LipschitzReport {
            max_ratio,
            holds: max_ratio <= 1.0 / self.lambda + 1e-9,
        }
    }
}
