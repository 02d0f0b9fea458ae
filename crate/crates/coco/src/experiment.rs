//! Experiment front-end: fans a config out over seeded trajectories on a
//! bounded worker pool, aggregates, runs the bound checks, and writes the
//! artifact files.

use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{
    self, BoundReport, EnsembleStats, RateFit, SeriesKind, TheoreticalConstants,
};
use crate::config::{EmitKind, ExperimentConfig};
use crate::dynamics::{run_trajectory, RunConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;

/// Everything produced by one experiment invocation.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub stats: EnsembleStats,
    pub constants: Option<TheoreticalConstants>,
    pub report: Option<BoundReport>,
    pub rate_fit: Option<RateFit>,
    pub as_convergence: analysis::AsConvergenceReport,
    pub warnings: Vec<String>,
}

impl ExperimentOutcome {
    /// True when no bound check failed outright.
    pub fn all_checks_pass(&self) -> bool {
        self.report.as_ref().map_or(true, |r| r.all_pass())
    }

    /// One-screen human summary.
    pub fn summary(&self, reference: &RunConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "runs: {}  horizon: {}  checkpoints: {}",
            self.stats.runs,
            reference.horizon,
            reference.checkpoints.len()
        );
        if let Some(constants) = &self.constants {
            let _ = writeln!(
                out,
                "regime: {:?} (b = {}, T0 = {}, lambda = {})",
                constants.b_regime, constants.b, constants.t0, constants.lambda
            );
        }
        if let Some(fit) = &self.rate_fit {
            let _ = writeln!(
                out,
                "fitted decay slope over [{}, {}]: {:.4} (r2 = {:.4})",
                fit.t_min, fit.t_max, fit.slope, fit.r2
            );
        }
        if let Some(report) = &self.report {
            let _ = writeln!(
                out,
                "bound checks: {} passed, {} failed, {} inconclusive",
                report.passed, report.failed, report.inconclusive
            );
        }
        let _ = writeln!(
            out,
            "convergence proxy: {}/{} seeds below {} x early minimum",
            self.as_convergence.seeds_passed, self.as_convergence.runs,
            self.as_convergence.final_factor
        );
        for warning in &self.warnings {
            let _ = writeln!(out, "warning: {warning}");
        }
        out
    }
}

/// Runs all seeded trajectories of an experiment on a pool of `parallelism`
/// workers. Records come back in seed order regardless of scheduling.
pub fn run_ensemble(config: &ExperimentConfig, parallelism: usize) -> Result<Vec<TrajectoryRecord>> {
    let run_configs: Vec<RunConfig> = (0..config.runs as u64)
        .map(|k| config.run_config(k))
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Analysis(format!("worker pool: {e}")))?;
    pool.install(|| {
        run_configs
            .par_iter()
            .map(run_trajectory)
            .collect::<Result<Vec<_>>>()
    })
}

/// Runs the full experiment and writes the requested artifact files.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    parallelism: usize,
) -> Result<ExperimentOutcome> {
    let reference = config.run_config(0)?;
    let records = run_ensemble(config, parallelism)?;
    let outcome = analyze(config, &reference, &records)?;

    fs::create_dir_all(out_dir)?;
    write_json_atomic(&out_dir.join("config_resolved.json"), &resolved_config(config)?)?;
    if config.emit.contains(&EmitKind::Constants) {
        if let Some(constants) = &outcome.constants {
            write_json_atomic(&out_dir.join("constants.json"), constants)?;
        }
    }
    if config.emit.contains(&EmitKind::Ensemble) {
        let csv = ensemble_csv(&outcome.stats, outcome.constants.as_ref());
        write_atomic(&out_dir.join("ensemble.csv"), csv.as_bytes())?;
    }
    if config.emit.contains(&EmitKind::BoundReport) {
        if let Some(report) = &outcome.report {
            write_json_atomic(&out_dir.join("bound_report.json"), report)?;
        }
    }
    if config.emit.contains(&EmitKind::RateFit) {
        if let Some(fit) = &outcome.rate_fit {
            write_json_atomic(&out_dir.join("rate_fit.json"), fit)?;
        }
    }
    if config.emit.contains(&EmitKind::Trajectories) {
        let dir = out_dir.join("trajectories");
        fs::create_dir_all(&dir)?;
        for record in &records {
            let path = dir.join(format!("seed_{}.csv", record.seed));
            write_atomic(&path, trajectory_csv(record).as_bytes())?;
        }
    }
    Ok(outcome)
}

/// Analysis pass shared by the CLI and the library surface.
pub fn analyze(
    config: &ExperimentConfig,
    reference: &RunConfig,
    records: &[TrajectoryRecord],
) -> Result<ExperimentOutcome> {
    let stats = analysis::aggregate(records)?;
    let mut warnings = Vec::new();

    let (constants, report) = match config.noise {
        NoiseModel::Relative { .. } => {
            warnings.push(
                "theoretical constants and bound checks are unavailable for the relative noise model"
                    .into(),
            );
            (None, None)
        }
        _ => {
            let constants = analysis::compute_constants(reference)?;
            let report = analysis::check_bounds(&stats, &constants, reference);
            (Some(constants), Some(report))
        }
    };

    let t_min = if config.horizon >= 4000 { 1000 } else { 0 };
    let rate_fit = match analysis::fit_decay_rate(&stats, t_min, config.horizon, SeriesKind::ResidualSq)
    {
        Ok(fit) => Some(fit),
        Err(err) => {
            warnings.push(format!("rate fit skipped: {err}"));
            None
        }
    };

    let as_convergence = analysis::as_convergence_check(records, 0.25)?;

    Ok(ExperimentOutcome {
        stats,
        constants,
        report,
        rate_fit,
        as_convergence,
        warnings,
    })
}

/// The config as actually executed, with defaults resolved.
fn resolved_config(config: &ExperimentConfig) -> Result<ExperimentConfig> {
    let mut resolved = config.clone();
    let game = config.game.build()?;
    resolved.stepsize.t0 = Some(config.resolved_t0(game.cocoercivity_parameter())?);
    if resolved.checkpoints.is_none() {
        resolved.checkpoints = Some(crate::dynamics::default_checkpoints(config.horizon));
    }
    Ok(resolved)
}

fn fmt17(value: f64) -> String {
    format!("{value:.16e}")
}

/// Fixed-header ensemble CSV, one row per checkpoint, 17 significant digits.
pub fn ensemble_csv(stats: &EnsembleStats, constants: Option<&TheoreticalConstants>) -> String {
    let mut out = String::from(
        "t,mean_residual_sq,se_residual_sq,mean_shadow_residual_sq,se_shadow,\
         mean_U_norm_sq,se_U,mean_dist_xstar_sq,se_dist,time_avg_residual,\
         theory_bound_last_iterate,theory_bound_time_avg\n",
    );
    for cp in &stats.checkpoints {
        let time_avg = cp.prefix_residual_sum.mean / (cp.t + 1) as f64;
        let (bound_last, bound_avg) = match constants {
            Some(c) => (c.last_iterate_bound(cp.t), c.time_average_bound(cp.t)),
            None => (f64::NAN, f64::NAN),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            cp.t,
            fmt17(cp.residual_sq.mean),
            fmt17(cp.residual_sq.se),
            fmt17(cp.shadow_residual_sq.mean),
            fmt17(cp.shadow_residual_sq.se),
            fmt17(cp.u_norm_sq.mean),
            fmt17(cp.u_norm_sq.se),
            fmt17(cp.dist_xstar_sq.mean),
            fmt17(cp.dist_xstar_sq.se),
            fmt17(time_avg),
            fmt17(bound_last),
            fmt17(bound_avg),
        );
    }
    out
}

/// Per-seed trajectory CSV with the raw checkpoint rows.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut out = String::from(
        "t,residual_sq,shadow_residual_sq,U_norm_sq,dist_ne_sq,dist_xstar_sq,\
         sum_beta_residual,sum_beta_shadow_residual,sum_residual\n",
    );
    for row in &record.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.t,
            fmt17(row.residual_sq),
            fmt17(row.shadow_residual_sq),
            fmt17(row.u_norm_sq),
            fmt17(row.dist_ne_sq),
            fmt17(row.dist_xstar_sq),
            fmt17(row.sum_beta_residual),
            fmt17(row.sum_beta_shadow_residual),
            fmt17(row.sum_residual),
        );
    }
    out
}

/// Write-to-temp plus atomic rename; no partial files on failure.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json_atomic<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
