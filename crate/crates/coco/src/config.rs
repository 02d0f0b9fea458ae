//! Experiment configuration: a JSON file describing the game, noise model,
//! stepsize schedule, horizon, and ensemble layout, with `key=value`
//! override support for quick variations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::dynamics::RunConfig;
use crate::error::{Error, Result};
use crate::game::{ActionProfile, GameKind, GameSpec};
use crate::noise::NoiseModel;
use crate::schedule::{min_t0, Exponent, StepsizeSchedule};

/// Serialized game description; matrices are row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameConfig {
    Quadratic {
        players: usize,
        action_dim: usize,
        q: Vec<Vec<f64>>,
    },
    Aggregate {
        players: usize,
        action_dim: usize,
        phi: Vec<f64>,
        gamma: f64,
    },
}

impl GameConfig {
    pub fn build(&self) -> Result<GameSpec> {
        match self {
            GameConfig::Quadratic {
                players,
                action_dim,
                q,
            } => {
                let dim = players * action_dim;
                if q.len() != dim || q.iter().any(|row| row.len() != dim) {
                    return Err(Error::InvalidGame(format!(
                        "interaction matrix must be {dim}x{dim}"
                    )));
                }
                let flat: Vec<f64> = q.iter().flatten().copied().collect();
                GameSpec::quadratic(*players, *action_dim, DMatrix::from_row_slice(dim, dim, &flat))
            }
            GameConfig::Aggregate {
                players,
                action_dim,
                phi,
                gamma,
            } => GameSpec::aggregate(
                *players,
                *action_dim,
                DVector::from_vec(phi.clone()),
                *gamma,
            ),
        }
    }
}

impl From<&GameSpec> for GameConfig {
    fn from(game: &GameSpec) -> Self {
        match game.kind() {
            GameKind::Quadratic { q } => GameConfig::Quadratic {
                players: game.players(),
                action_dim: game.action_dim(),
                q: (0..q.nrows())
                    .map(|i| q.row(i).iter().copied().collect())
                    .collect(),
            },
            GameKind::AggregatePotential { phi, gamma } => GameConfig::Aggregate {
                players: game.players(),
                action_dim: game.action_dim(),
                phi: phi.iter().copied().collect(),
                gamma: *gamma,
            },
        }
    }
}

/// Stepsize section. `t0` defaults to `ceil(min_t0)` for the paired game.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepsizeConfig {
    pub b: Exponent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

/// Which artifact files an experiment writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitKind {
    Trajectories,
    Ensemble,
    Constants,
    BoundReport,
    RateFit,
}

fn default_emit() -> Vec<EmitKind> {
    vec![
        EmitKind::Ensemble,
        EmitKind::Constants,
        EmitKind::BoundReport,
        EmitKind::RateFit,
    ]
}

/// Full experiment description: one run configuration fanned out over
/// `runs` consecutive seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    pub noise: NoiseModel,
    pub stepsize: StepsizeConfig,
    pub x0: Vec<f64>,
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    pub runs: usize,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_emit")]
    pub emit: Vec<EmitKind>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        Ok(serde_json::from_value(value)?)
    }

    /// Runs every structural invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut diagnostics = Vec::new();
        let game = match self.game.build() {
            Ok(game) => Some(game),
            Err(err) => {
                diagnostics.push(err.to_string());
                None
            }
        };
        let b = self.stepsize.b.value();
        if !(b > 0.5 && b < 1.0) {
            diagnostics.push(format!(
                "stepsize exponent b must lie in the admissible range (0.5, 1), got {b}"
            ));
        }
        if let Some(game) = &game {
            if self.x0.len() != game.dim() {
                diagnostics.push(format!(
                    "x0 must have length {} (players * action_dim), got {}",
                    game.dim(),
                    self.x0.len()
                ));
            }
            if b > 0.5 && b < 1.0 {
                let bound = min_t0(game.cocoercivity_parameter(), b).expect("b in range");
                if let Some(t0) = self.stepsize.t0 {
                    if t0 < bound {
                        diagnostics.push(format!("T0 below admissible minimum {bound}: got {t0}"));
                    }
                }
            }
        }
        if let Err(err) = self.noise.validate() {
            diagnostics.push(err.to_string());
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            diagnostics.push("x0 has non-finite entries".into());
        }
        if self.horizon == 0 {
            diagnostics.push("horizon must be positive".into());
        }
        if self.runs == 0 {
            diagnostics.push("runs must be at least 1".into());
        }
        if let Some(cps) = &self.checkpoints {
            if cps.first() != Some(&0) || cps.last() != Some(&self.horizon) {
                diagnostics.push("checkpoints must include 0 and the horizon".into());
            }
            if cps.windows(2).any(|w| w[0] >= w[1]) {
                diagnostics.push("checkpoints must be strictly increasing".into());
            }
            if cps.iter().any(|&t| t > self.horizon) {
                diagnostics.push("checkpoints must lie within [0, horizon]".into());
            }
        }
        diagnostics
    }

    /// Resolved `T0`: the configured value, or `ceil(min_t0)` by default.
    pub fn resolved_t0(&self, lambda: f64) -> Result<f64> {
        match self.stepsize.t0 {
            Some(t0) => Ok(t0),
            None => Ok(min_t0(lambda, self.stepsize.b.value())?.ceil()),
        }
    }

    /// Builds the validated run configuration for ensemble member `stream`.
    pub fn run_config(&self, stream: u64) -> Result<RunConfig> {
        let diagnostics = self.validate();
        if !diagnostics.is_empty() {
            return Err(Error::InvalidConfig(diagnostics.join("; ")));
        }
        let game = self.game.build()?;
        let lambda = game.cocoercivity_parameter();
        let t0 = self.resolved_t0(lambda)?;
        let schedule = StepsizeSchedule::new(self.stepsize.b, t0, lambda)?;
        RunConfig::new(
            game,
            self.noise,
            schedule,
            ActionProfile::new(self.x0.clone())?,
            self.horizon,
            self.checkpoints.clone(),
            self.base_seed,
            stream,
        )
    }

    /// The seed labels of the ensemble: `base_seed, base_seed+1, ...`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64)
            .map(|k| self.base_seed.wrapping_add(k))
            .collect()
    }
}

/// Applies dotted-path `key=value` overrides to a raw JSON config value.
/// Values parse as JSON when possible and fall back to strings.
pub fn apply_overrides(mut value: serde_json::Value, overrides: &[String]) -> Result<serde_json::Value> {
    for entry in overrides {
        let (path, raw) = entry.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("override must look like key=value, got {entry:?}"))
        })?;
        let parsed: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let segments: Vec<&str> = path.split('.').collect();
        let (last, parents) = segments.split_last().expect("split produces a segment");
        let mut cursor = &mut value;
        for segment in parents {
            cursor = cursor
                .as_object_mut()
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "override path {path:?} does not address an object"
                    ))
                })?
                .entry(segment.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
        let map = cursor.as_object_mut().ok_or_else(|| {
            Error::InvalidConfig(format!("override path {path:?} does not address an object"))
        })?;
        map.insert(last.to_string(), parsed);
    }
    Ok(value)
}
