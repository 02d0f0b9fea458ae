//! Closed-form theoretical constants, Monte Carlo aggregation, empirical
//! decay-rate fitting, and pass/fail bound-check reports.

use serde::{Deserialize, Serialize};

use crate::dynamics::{RunConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::schedule::Regime;

/// The closed-form constants governing the dynamics, evaluated for one run
/// configuration. Only the rate-regime branch matching the schedule's
/// exponent is populated.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoreticalConstants {
    pub lambda: f64,
    pub sigma: f64,
    pub b: f64,
    pub t0: f64,
    pub b_regime: Regime,
    /// `|x_0 - x*|^2` for the fixed reference equilibrium `x* = proj(x_0)`.
    pub x0_dist_sq: f64,
    /// `|x*|^2`
    pub xstar_norm_sq: f64,
    /// Upper bound on `sum_t beta_t^2`.
    pub d1: f64,
    /// Uniform bound on `E|M_{t+1}|^2`.
    pub d2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma5: f64,
    pub gamma6: Option<f64>,
    pub gamma7: Option<f64>,
    pub gamma8: Option<f64>,
    /// Time-average bound constant.
    pub c1: f64,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
}

impl TheoreticalConstants {
    /// The populated last-iterate constant for the active regime.
    pub fn last_iterate_constant(&self) -> f64 {
        match self.b_regime {
            Regime::Low => self.c2.expect("low regime populated"),
            Regime::Critical => self.c3.expect("critical regime populated"),
            Regime::High => self.c4.expect("high regime populated"),
        }
    }

    /// Last-iterate bound curve `E|v(x_t)|^2 <= ...` evaluated at `t`.
    pub fn last_iterate_bound(&self, t: u64) -> f64 {
        let tp = (t + 1) as f64;
        match self.b_regime {
            Regime::Low => self.last_iterate_constant() / tp.powf(2.0 * self.b - 1.0),
            Regime::Critical => self.last_iterate_constant() * tp.ln() / tp.powf(1.0 / 3.0),
            Regime::High => self.last_iterate_constant() / tp.powf(1.0 - self.b),
        }
    }

    /// Shadow last-iterate bound curve `E|v(z_t)|^2 <= ...` at `t`.
    pub fn shadow_last_iterate_bound(&self, t: u64) -> f64 {
        let tp = (t + 1) as f64;
        match self.b_regime {
            Regime::Low => self.gamma6.expect("low regime populated") / tp.powf(2.0 * self.b - 1.0),
            Regime::Critical => {
                self.gamma7.expect("critical regime populated") * tp.ln() / tp.powf(1.0 / 3.0)
            }
            Regime::High => {
                self.gamma8.expect("high regime populated") / tp.powf(1.0 - self.b)
            }
        }
    }

    /// Time-average bound curve `C1 / (t+1)^(1-b)` at `t`.
    pub fn time_average_bound(&self, t: u64) -> f64 {
        self.c1 / ((t + 1) as f64).powf(1.0 - self.b)
    }
}

/// Evaluates every constant from the closed-form expressions.
///
/// Defined for the affine and absolute noise models (the absolute second
/// moment is dominated by the affine bound at the same `sigma`); the
/// relative model has no matching closed form here.
pub fn compute_constants(config: &RunConfig) -> Result<TheoreticalConstants> {
    let sigma = match config.noise {
        NoiseModel::Affine { sigma } | NoiseModel::Absolute { sigma } => sigma,
        NoiseModel::Relative { .. } => {
            return Err(Error::Analysis(
                "theoretical constants are defined for the affine and absolute noise models only"
                    .into(),
            ))
        }
    };
    let lambda = config.game.cocoercivity_parameter();
    let schedule = &config.schedule;
    let b = schedule.exponent().value();
    let t0 = schedule.t0();
    let regime = schedule.regime();

    let x_star = config.game.project_raw(config.x0.as_vector());
    let x0_dist_sq = (config.x0.as_vector() - &x_star).norm_squared();
    let xstar_norm_sq = x_star.norm_squared();

    let s2 = sigma * sigma;
    let d1 = schedule.d1_upper_bound();
    let gamma1 = (2.0 * s2 * d1).exp() * (x0_dist_sq + s2 * (1.0 + 2.0 * xstar_norm_sq) * d1);
    let gamma2 =
        (x0_dist_sq + s2 * d1 * (1.0 + 2.0 * xstar_norm_sq + 2.0 * gamma1)) / lambda;
    let d2 = s2 * (1.0 + 2.0 * gamma1 + 2.0 * xstar_norm_sq);
    let gamma3 = 2.0 * d2;
    let gamma4 = 2.0 * gamma2 + 2.0 * gamma3 * d1 / (lambda * lambda);
    let gamma5 = (1.0 + 1.0 / lambda).powi(2) * gamma3 / lambda;

    let t0_b = t0.powf(b);
    let c1 = gamma2 * t0_b;
    let shared = 2.0 * gamma3 / (lambda * lambda);

    let (mut gamma6, mut gamma7, mut gamma8) = (None, None, None);
    let (mut c2, mut c3, mut c4) = (None, None, None);
    match regime {
        Regime::Low => {
            let g6 = gamma4 * t0_b + gamma5 * t0_b / ((1.0 - b) * (2.0 - 3.0 * b));
            c2 = Some(2.0 * g6 + shared);
            gamma6 = Some(g6);
        }
        Regime::Critical => {
            let t0_23 = t0.powf(2.0 / 3.0);
            let g7 = gamma4 * t0_23 / 2.0_f64.ln() + 6.0 * gamma5 * t0_23;
            c3 = Some(2.0 * g7 + shared);
            gamma7 = Some(g7);
        }
        Regime::High => {
            let series = schedule.high_regime_series_upper_bound()?;
            let g8 = gamma4 * t0_b + gamma5 * t0_b / (1.0 - b) * series;
            c4 = Some(2.0 * g8 + shared);
            gamma8 = Some(g8);
        }
    }

    Ok(TheoreticalConstants {
        lambda,
        sigma,
        b,
        t0,
        b_regime: regime,
        x0_dist_sq,
        xstar_norm_sq,
        d1,
        d2,
        gamma1,
        gamma2,
        gamma3,
        gamma4,
        gamma5,
        gamma6,
        gamma7,
        gamma8,
        c1,
        c2,
        c3,
        c4,
    })
}

/// Sample mean with its standard error across the ensemble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatSeries {
    pub mean: f64,
    pub se: f64,
}

/// Cross-seed statistics at one checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub t: u64,
    pub residual_sq: StatSeries,
    pub shadow_residual_sq: StatSeries,
    pub u_norm_sq: StatSeries,
    pub dist_ne_sq: StatSeries,
    pub dist_xstar_sq: StatSeries,
    /// `sum_{i<=t} beta_i |v(x_i)|^2`, averaged across seeds.
    pub weighted_sum: StatSeries,
    /// `sum_{i<=t} beta_i |v(z_i)|^2`, averaged across seeds.
    pub shadow_weighted_sum: StatSeries,
    /// `sum_{i<=t} |v(x_i)|^2`, averaged across seeds.
    pub prefix_residual_sum: StatSeries,
}

/// Per-checkpoint ensemble estimates of the expectations the guarantees
/// bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub runs: usize,
    pub checkpoints: Vec<CheckpointStats>,
}

fn mean_se(values: &[f64]) -> StatSeries {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return StatSeries { mean, se: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    StatSeries {
        mean,
        se: (var / n).sqrt(),
    }
}

/// Aggregates trajectory records into per-checkpoint sample means and
/// standard errors. All records must come from the same experiment.
pub fn aggregate(records: &[TrajectoryRecord]) -> Result<EnsembleStats> {
    let first = records
        .first()
        .ok_or_else(|| Error::Analysis("cannot aggregate an empty record list".into()))?;
    let checkpoints: Vec<u64> = first.rows.iter().map(|r| r.t).collect();
    for record in records {
        if record.config_hash != first.config_hash {
            return Err(Error::Analysis("records come from different configs".into()));
        }
        let cps: Vec<u64> = record.rows.iter().map(|r| r.t).collect();
        if cps != checkpoints {
            return Err(Error::Analysis("records have mismatched checkpoints".into()));
        }
    }

    let mut stats = Vec::with_capacity(checkpoints.len());
    let mut scratch = vec![0.0f64; records.len()];
    let mut collect = |get: &dyn Fn(&TrajectoryRecord) -> f64| -> StatSeries {
        for (slot, record) in scratch.iter_mut().zip(records) {
            *slot = get(record);
        }
        mean_se(&scratch)
    };
    for (i, &t) in checkpoints.iter().enumerate() {
        stats.push(CheckpointStats {
            t,
            residual_sq: collect(&|r| r.rows[i].residual_sq),
            shadow_residual_sq: collect(&|r| r.rows[i].shadow_residual_sq),
            u_norm_sq: collect(&|r| r.rows[i].u_norm_sq),
            dist_ne_sq: collect(&|r| r.rows[i].dist_ne_sq),
            dist_xstar_sq: collect(&|r| r.rows[i].dist_xstar_sq),
            weighted_sum: collect(&|r| r.rows[i].sum_beta_residual),
            shadow_weighted_sum: collect(&|r| r.rows[i].sum_beta_shadow_residual),
            prefix_residual_sum: collect(&|r| r.rows[i].sum_residual),
        });
    }
    Ok(EnsembleStats {
        runs: records.len(),
        checkpoints: stats,
    })
}

/// Tri-state outcome of one bound check at one checkpoint.
///
/// `pass` is the statistical rule `estimate - 2*SE <= bound`. A checkpoint
/// where the point estimate exceeds the bound but the rule still passes is
/// flagged inconclusive: the Monte Carlo error exceeds the bound-to-estimate
/// gap there, so nothing can be concluded either way.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckOutcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCheckEntry {
    pub check_name: String,
    pub checkpoint: u64,
    pub estimate: f64,
    pub standard_error: f64,
    pub bound: f64,
    pub pass: bool,
    pub outcome: CheckOutcome,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub entries: Vec<BoundCheckEntry>,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
}

impl BoundReport {
    /// True when no check failed outright (inconclusive entries allowed).
    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }
}

fn check_entry(name: &str, t: u64, estimate: StatSeries, bound: f64) -> BoundCheckEntry {
    let pass = estimate.mean - 2.0 * estimate.se <= bound;
    let outcome = if !pass {
        CheckOutcome::Fail
    } else if estimate.mean > bound {
        CheckOutcome::Inconclusive
    } else {
        CheckOutcome::Pass
    };
    BoundCheckEntry {
        check_name: name.to_string(),
        checkpoint: t,
        estimate: estimate.mean,
        standard_error: estimate.se,
        bound,
        pass,
        outcome,
    }
}

/// Checks every per-checkpoint estimate against its theoretical bound:
/// the time-average and last-iterate rate curves, uniform boundedness of the
/// iterates, the weighted residual sums, and the shadow-sequence bounds.
pub fn check_bounds(
    stats: &EnsembleStats,
    constants: &TheoreticalConstants,
    config: &RunConfig,
) -> BoundReport {
    let mut entries = Vec::new();
    for cp in &stats.checkpoints {
        let t = cp.t;
        let tp = (t + 1) as f64;
        let time_avg = StatSeries {
            mean: cp.prefix_residual_sum.mean / tp,
            se: cp.prefix_residual_sum.se / tp,
        };
        entries.push(check_entry(
            "theorem2_time_average",
            t,
            time_avg,
            constants.time_average_bound(t),
        ));
        // In the critical regime the last-iterate curves carry a log(t+1)
        // factor and vanish at t = 0; the rate statements start at t = 1
        // there.
        let rate_curve_defined = constants.b_regime != Regime::Critical || t >= 1;
        if rate_curve_defined {
            entries.push(check_entry(
                "theorem3_last_iterate",
                t,
                cp.residual_sq,
                constants.last_iterate_bound(t),
            ));
        }
        entries.push(check_entry(
            "lemma2_bounded_iterates",
            t,
            cp.dist_xstar_sq,
            constants.gamma1,
        ));
        entries.push(check_entry(
            "lemma3_weighted_residual_sum",
            t,
            cp.weighted_sum,
            constants.gamma2,
        ));
        entries.push(check_entry(
            "lemma4a_noise_average",
            t,
            cp.u_norm_sq,
            constants.gamma3 * config.schedule.stepsize(t),
        ));
        entries.push(check_entry(
            "lemma4b_shadow_weighted_sum",
            t,
            cp.shadow_weighted_sum,
            constants.gamma4,
        ));
        if rate_curve_defined {
            entries.push(check_entry(
                "lemma5_shadow_last_iterate",
                t,
                cp.shadow_residual_sq,
                constants.shadow_last_iterate_bound(t),
            ));
        }
    }
    let passed = entries.iter().filter(|e| e.outcome == CheckOutcome::Pass).count();
    let failed = entries.iter().filter(|e| e.outcome == CheckOutcome::Fail).count();
    let inconclusive = entries
        .iter()
        .filter(|e| e.outcome == CheckOutcome::Inconclusive)
        .count();
    BoundReport {
        entries,
        passed,
        failed,
        inconclusive,
    }
}

/// Which per-checkpoint mean a rate fit runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    ResidualSq,
    ShadowResidualSq,
    UNormSq,
    DistXstarSq,
}

impl SeriesKind {
    fn pick(&self, cp: &CheckpointStats) -> f64 {
        match self {
            SeriesKind::ResidualSq => cp.residual_sq.mean,
            SeriesKind::ShadowResidualSq => cp.shadow_residual_sq.mean,
            SeriesKind::UNormSq => cp.u_norm_sq.mean,
            SeriesKind::DistXstarSq => cp.dist_xstar_sq.mean,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub series: SeriesKind,
    pub t_min: u64,
    pub t_max: u64,
    pub points: usize,
}

/// Ordinary least squares of `log(estimate)` against `log(t+1)` over the
/// checkpoints inside the window.
pub fn fit_decay_rate(
    stats: &EnsembleStats,
    t_min: u64,
    t_max: u64,
    series: SeriesKind,
) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for cp in &stats.checkpoints {
        if cp.t < t_min || cp.t > t_max {
            continue;
        }
        let value = series.pick(cp);
        if value <= 0.0 {
            return Err(Error::Analysis(format!(
                "nonpositive estimate {value} at t = {} in the fit window; enlarge the ensemble",
                cp.t
            )));
        }
        xs.push(((cp.t + 1) as f64).ln());
        ys.push(value.ln());
    }
    if xs.len() < 4 {
        return Err(Error::Analysis(format!(
            "rate fit needs at least 4 checkpoints in the window, found {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        series,
        t_min,
        t_max,
        points: xs.len(),
    })
}

/// Per-seed convergence summary for the almost-sure convergence proxy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedConvergence {
    pub seed: u64,
    /// Minimum `dist_ne_sq` over the checkpoints with `t <= 10`.
    pub early_min: f64,
    pub final_dist_ne_sq: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsConvergenceReport {
    pub runs: usize,
    pub final_factor: f64,
    pub seeds_passed: usize,
    pub pass_fraction: f64,
    /// Fraction of seeds whose checkpoint distances decrease at a majority
    /// of consecutive checkpoint pairs.
    pub median_decrease_fraction: f64,
    pub per_seed: Vec<SeedConvergence>,
}

/// Finite-horizon proxy for almost-sure convergence to the equilibrium set:
/// each seed's final squared distance must drop below `final_factor` times
/// its own minimum over the first decade of checkpoints.
pub fn as_convergence_check(
    records: &[TrajectoryRecord],
    final_factor: f64,
) -> Result<AsConvergenceReport> {
    if records.is_empty() {
        return Err(Error::Analysis("cannot check an empty record list".into()));
    }
    let mut per_seed = Vec::with_capacity(records.len());
    let mut median_decrease = 0usize;
    for record in records {
        let early_min = record
            .rows
            .iter()
            .filter(|r| r.t <= 10)
            .map(|r| r.dist_ne_sq)
            .fold(f64::INFINITY, f64::min);
        let final_dist = record.rows.last().expect("nonempty rows").dist_ne_sq;
        let pass = final_dist <= final_factor * early_min;
        let decreases = record
            .rows
            .windows(2)
            .filter(|w| w[1].dist_ne_sq < w[0].dist_ne_sq)
            .count();
        let pairs = record.rows.len().saturating_sub(1);
        if pairs > 0 && 2 * decreases > pairs {
            median_decrease += 1;
        }
        per_seed.push(SeedConvergence {
            seed: record.seed,
            early_min,
            final_dist_ne_sq: final_dist,
            pass,
        });
    }
    let seeds_passed = per_seed.iter().filter(|s| s.pass).count();
    Ok(AsConvergenceReport {
        runs: records.len(),
        final_factor,
        seeds_passed,
        pass_fraction: seeds_passed as f64 / records.len() as f64,
        median_decrease_fraction: median_decrease as f64 / records.len() as f64,
        per_seed,
    })
}
