//! The learning iteration `x_{t+1} = x_t + beta_t (v(x_t) + M_{t+1})`
//! together with the averaged-noise shadow state
//! `U_{t+1} = (1 - beta_t) U_t + beta_t M_{t+1}` and the derived modified
//! iterate `z_t = x_t - U_t`.

use nalgebra::DVector;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::game::{ActionProfile, GameKind, GameSpec};
use crate::kahan::KahanSum;
use crate::noise::{NoiseModel, RngStream};
use crate::schedule::{min_t0, StepsizeSchedule};

/// Any coordinate beyond this magnitude aborts the run: the theory
/// guarantees stability, so a breach indicates misconfiguration rather than
/// a valid sample.
const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Full description of one seeded trajectory.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub game: GameSpec,
    pub noise: NoiseModel,
    pub schedule: StepsizeSchedule,
    pub x0: ActionProfile,
    pub horizon: u64,
    /// Sorted, deduplicated, always containing 0 and the horizon.
    pub checkpoints: Vec<u64>,
    pub base_seed: u64,
    /// Trajectory index within the ensemble; selects the RNG stream.
    pub stream: u64,
}

impl RunConfig {
    pub fn new(
        game: GameSpec,
        noise: NoiseModel,
        schedule: StepsizeSchedule,
        x0: ActionProfile,
        horizon: u64,
        checkpoints: Option<Vec<u64>>,
        base_seed: u64,
        stream: u64,
    ) -> Result<Self> {
        if x0.dim() != game.dim() {
            return Err(Error::DimensionMismatch {
                expected: game.dim(),
                actual: x0.dim(),
            });
        }
        if horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        noise.validate()?;
        // The schedule was validated against some lambda at construction;
        // re-check admissibility against this game's parameter.
        let bound = min_t0(game.cocoercivity_parameter(), schedule.exponent().value())?;
        if schedule.t0() < bound {
            return Err(Error::InvalidSchedule(format!(
                "T0 below admissible minimum {bound} for this game: got {}",
                schedule.t0()
            )));
        }
        let checkpoints = match checkpoints {
            Some(mut cps) => {
                cps.sort_unstable();
                cps.dedup();
                if cps.iter().any(|&t| t > horizon) {
                    return Err(Error::InvalidConfig(
                        "checkpoints must lie within [0, horizon]".into(),
                    ));
                }
                if cps.first() != Some(&0) || cps.last() != Some(&horizon) {
                    return Err(Error::InvalidConfig(
                        "checkpoints must include 0 and the horizon".into(),
                    ));
                }
                cps
            }
            None => default_checkpoints(horizon),
        };
        Ok(Self {
            game,
            noise,
            schedule,
            x0,
            horizon,
            checkpoints,
            base_seed,
            stream,
        })
    }

    /// The reported seed label for this trajectory.
    pub fn seed(&self) -> u64 {
        self.base_seed.wrapping_add(self.stream)
    }

    pub fn rng(&self) -> RngStream {
        RngStream::for_trajectory(self.base_seed, self.stream)
    }

    /// Hash of everything except the stream index; records from different
    /// seeds of the same experiment share it.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.game.players().to_le_bytes());
        hasher.update(self.game.action_dim().to_le_bytes());
        match self.game.kind() {
            GameKind::Quadratic { q } => {
                hasher.update(b"quadratic");
                for v in q.iter() {
                    hasher.update(v.to_bits().to_le_bytes());
                }
            }
            GameKind::AggregatePotential { phi, gamma } => {
                hasher.update(b"aggregate");
                for v in phi.iter() {
                    hasher.update(v.to_bits().to_le_bytes());
                }
                hasher.update(gamma.to_bits().to_le_bytes());
            }
        }
        hasher.update(format!("{:?}", self.noise).as_bytes());
        hasher.update(self.schedule.exponent().value().to_bits().to_le_bytes());
        hasher.update(self.schedule.t0().to_bits().to_le_bytes());
        for v in self.x0.as_slice() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(self.horizon.to_le_bytes());
        for t in &self.checkpoints {
            hasher.update(t.to_le_bytes());
        }
        hasher.update(self.base_seed.to_le_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Geometrically spaced default checkpoints `{0} U {floor(10^(k/8))} U {T}`.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut cps = vec![0];
    let mut k = 0u32;
    loop {
        let v = 10f64.powf(k as f64 / 8.0).floor() as u64;
        if v >= horizon {
            break;
        }
        cps.push(v);
        k += 1;
    }
    cps.push(horizon);
    cps.sort_unstable();
    cps.dedup();
    cps
}

/// Live iteration state: the iterate, the averaged noise error, and the most
/// recent noise draw. The modified iterate `z_t = x_t - U_t` is derived,
/// never stored.
#[derive(Clone, Debug)]
pub struct IterateState {
    pub t: u64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub last_m: DVector<f64>,
}

impl IterateState {
    pub fn initial(config: &RunConfig) -> Self {
        let dim = config.game.dim();
        Self {
            t: 0,
            x: config.x0.as_vector().clone(),
            u: DVector::zeros(dim),
            last_m: DVector::zeros(dim),
        }
    }

    /// `z_t = x_t - U_t`.
    pub fn shadow_iterate(&self) -> DVector<f64> {
        &self.x - &self.u
    }
}

/// One update with a pre-computed gradient; `step` and the trajectory loop
/// share this so they draw noise identically.
fn step_with_gradient(
    state: &IterateState,
    config: &RunConfig,
    v: &DVector<f64>,
    rng: &mut RngStream,
) -> Result<IterateState> {
    let beta = config.schedule.stepsize(state.t);
    let m = config.noise.sample(&state.x, v, rng);
    let x = &state.x + (v + &m) * beta;
    if x.iter().any(|c| !c.is_finite() || c.abs() > DIVERGENCE_THRESHOLD) {
        return Err(Error::Diverged {
            seed: config.seed(),
            step: state.t + 1,
        });
    }
    let u = &state.u * (1.0 - beta) + &m * beta;
    Ok(IterateState {
        t: state.t + 1,
        x,
        u,
        last_m: m,
    })
}

/// Performs one update `x' = x + beta_t (v(x) + M)`, `U' = (1-beta_t) U + beta_t M`.
pub fn step(state: &IterateState, config: &RunConfig, rng: &mut RngStream) -> Result<IterateState> {
    let v = config.game.gradient_raw(&state.x);
    step_with_gradient(state, config, &v, rng)
}

/// The error `e_t = v(x_t) - v(z_t) + U_t` driving the shadow recursion
/// `z_{t+1} = z_t + beta_t (v(z_t) + e_t)`.
pub fn shadow_error(state: &IterateState, game: &GameSpec) -> DVector<f64> {
    let z = state.shadow_iterate();
    game.gradient_raw(&state.x) - game.gradient_raw(&z) + &state.u
}

/// Checkpointed scalars of one trajectory. The three trailing sums are
/// running accumulators over every step up to and including the checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRow {
    pub t: u64,
    /// `|v(x_t)|^2`
    pub residual_sq: f64,
    /// `|v(z_t)|^2`
    pub shadow_residual_sq: f64,
    /// `|U_t|^2`
    pub u_norm_sq: f64,
    /// squared distance to the equilibrium set
    pub dist_ne_sq: f64,
    /// squared distance to the fixed reference equilibrium `x* = proj(x_0)`
    pub dist_xstar_sq: f64,
    /// `sum_{i<=t} beta_i |v(x_i)|^2`
    pub sum_beta_residual: f64,
    /// `sum_{i<=t} beta_i |v(z_i)|^2`
    pub sum_beta_shadow_residual: f64,
    /// `sum_{i<=t} |v(x_i)|^2`
    pub sum_residual: f64,
}

/// Checkpointed time series of one seeded run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<CheckpointRow>,
}

/// Runs the iteration from `x_0` to the horizon, recording at checkpoints
/// and accumulating the weighted residual sums at every step. Bit-exact
/// reproducible for a fixed config.
pub fn run_trajectory(config: &RunConfig) -> Result<TrajectoryRecord> {
    let game = &config.game;
    let x_star = game.project_raw(config.x0.as_vector());
    let mut rng = config.rng();
    let mut state = IterateState::initial(config);

    let mut sum_beta_residual = KahanSum::new();
    let mut sum_beta_shadow = KahanSum::new();
    let mut sum_residual = KahanSum::new();

    let mut rows = Vec::with_capacity(config.checkpoints.len());
    let mut next_checkpoint = 0usize;

    for t in 0..=config.horizon {
        debug_assert_eq!(state.t, t);
        let v = game.gradient_raw(&state.x);
        let residual_sq = v.norm_squared();
        let z = state.shadow_iterate();
        let shadow_residual_sq = game.gradient_raw(&z).norm_squared();
        let beta = config.schedule.stepsize(t);
        sum_beta_residual.add(beta * residual_sq);
        sum_beta_shadow.add(beta * shadow_residual_sq);
        sum_residual.add(residual_sq);

        if next_checkpoint < config.checkpoints.len() && config.checkpoints[next_checkpoint] == t {
            let projected = game.project_raw(&state.x);
            rows.push(CheckpointRow {
                t,
                residual_sq,
                shadow_residual_sq,
                u_norm_sq: state.u.norm_squared(),
                dist_ne_sq: (&state.x - projected).norm_squared(),
                dist_xstar_sq: (&state.x - &x_star).norm_squared(),
                sum_beta_residual: sum_beta_residual.value(),
                sum_beta_shadow_residual: sum_beta_shadow.value(),
                sum_residual: sum_residual.value(),
            });
            next_checkpoint += 1;
        }

        if t < config.horizon {
            state = step_with_gradient(&state, config, &v, &mut rng)?;
        }
    }

    Ok(TrajectoryRecord {
        seed: config.seed(),
        config_hash: config.content_hash(),
        rows,
    })
}
