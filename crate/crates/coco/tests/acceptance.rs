//! End-to-end acceptance suite. Each test covers one acceptance criterion
//! and prints a single PASS line on success; assertion failures mark the
//! criterion failed.

use std::process::Command;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use coco::analysis::{
    self, BoundReport, CheckOutcome, EnsembleStats, SeriesKind, TheoreticalConstants,
};
use coco::config::ExperimentConfig;
use coco::dynamics::TrajectoryRecord;
use coco::experiment::run_ensemble;
use coco::game::GameSpec;
use coco::noise::NoiseModel;
use coco::schedule::{min_t0, Exponent, Regime, StepsizeSchedule};

const MAIN_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/quadratic_b23.json");

struct MainRun {
    config: ExperimentConfig,
    records: Vec<TrajectoryRecord>,
    stats: EnsembleStats,
    constants: TheoreticalConstants,
    report: BoundReport,
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// The reference ensemble shared by the first five criteria: the bundled
/// two-player quadratic game, affine noise, b = 2/3, 200 seeds over 1e5 steps.
fn main_run() -> &'static MainRun {
    static RUN: OnceLock<MainRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = ExperimentConfig::from_path(MAIN_CONFIG.as_ref()).expect("bundled config");
        let records = run_ensemble(&config, workers()).expect("ensemble");
        let stats = analysis::aggregate(&records).expect("aggregate");
        let reference = config.run_config(0).expect("run config");
        let constants = analysis::compute_constants(&reference).expect("constants");
        let report = analysis::check_bounds(&stats, &constants, &reference);
        MainRun {
            config,
            records,
            stats,
            constants,
            report,
        }
    })
}

fn entries<'a>(report: &'a BoundReport, name: &str) -> Vec<&'a analysis::BoundCheckEntry> {
    report.entries.iter().filter(|e| e.check_name == name).collect()
}

#[test]
fn c01_last_iterate_rate_bound() {
    let run = main_run();
    assert_eq!(run.constants.b_regime, Regime::Critical);
    let checked = entries(&run.report, "theorem3_last_iterate");
    assert!(!checked.is_empty());
    for entry in checked.iter().filter(|e| e.checkpoint >= 100) {
        assert!(
            entry.outcome != CheckOutcome::Fail,
            "last-iterate bound failed at t = {}: estimate {} > bound {}",
            entry.checkpoint,
            entry.estimate,
            entry.bound
        );
    }
    println!("[PASS] criterion 1: mean squared residual stays under the last-iterate rate curve for t >= 100");
}

#[test]
fn c02_empirical_decay_rate() {
    let run = main_run();
    let fit =
        analysis::fit_decay_rate(&run.stats, 1_000, 100_000, SeriesKind::ResidualSq).expect("fit");
    assert!(fit.slope <= -0.25, "slope {} too shallow", fit.slope);
    assert!(fit.r2 >= 0.9, "r2 {} too low", fit.r2);
    println!(
        "[PASS] criterion 2: fitted decay slope {:.3} <= -0.25 with r2 {:.3} >= 0.9",
        fit.slope, fit.r2
    );
}

#[test]
fn c03_time_average_bound() {
    let run = main_run();
    let checked = entries(&run.report, "theorem2_time_average");
    assert!(!checked.is_empty());
    for entry in &checked {
        assert!(
            entry.outcome != CheckOutcome::Fail,
            "time-average bound failed at t = {}",
            entry.checkpoint
        );
    }
    println!("[PASS] criterion 3: time-averaged squared residual stays under its rate curve at every checkpoint");
}

#[test]
fn c04_noise_averaging_bounds() {
    let run = main_run();
    for name in ["lemma4a_noise_average", "lemma4b_shadow_weighted_sum"] {
        let checked = entries(&run.report, name);
        assert!(!checked.is_empty());
        for entry in &checked {
            assert!(
                entry.outcome != CheckOutcome::Fail,
                "{name} failed at t = {}",
                entry.checkpoint
            );
        }
    }
    println!("[PASS] criterion 4: averaged-noise norm and shadow weighted-sum bounds hold at every checkpoint");
}

#[test]
fn c05_bounded_iterates() {
    let run = main_run();
    let checked = entries(&run.report, "lemma2_bounded_iterates");
    assert!(!checked.is_empty());
    for entry in &checked {
        assert!(
            entry.outcome != CheckOutcome::Fail,
            "boundedness failed at t = {}",
            entry.checkpoint
        );
    }
    println!("[PASS] criterion 5: mean squared distance to the reference equilibrium stays under its uniform bound");
}

#[test]
fn c06_regime_sweep() {
    let cases = [
        (serde_json::json!(0.55), Regime::Low),
        (serde_json::json!("2/3"), Regime::Critical),
        (serde_json::json!(0.8), Regime::High),
    ];
    for (b, regime) in cases {
        let mut raw: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(MAIN_CONFIG).unwrap()).unwrap();
        raw["stepsize"] = serde_json::json!({ "b": b });
        raw["horizon"] = serde_json::json!(30_000);
        raw["runs"] = serde_json::json!(100);
        let config = ExperimentConfig::from_value(raw).unwrap();
        let records = run_ensemble(&config, workers()).unwrap();
        let stats = analysis::aggregate(&records).unwrap();
        let reference = config.run_config(0).unwrap();
        let constants = analysis::compute_constants(&reference).unwrap();
        assert_eq!(constants.b_regime, regime);
        match regime {
            Regime::Low => assert!(constants.c2.is_some()),
            Regime::Critical => assert!(constants.c3.is_some()),
            Regime::High => assert!(constants.c4.is_some()),
        }
        let report = analysis::check_bounds(&stats, &constants, &reference);
        assert_eq!(
            report.failed, 0,
            "regime {regime:?} had {} failed checks",
            report.failed
        );
    }
    println!("[PASS] criterion 6: all bound checks hold across the exponent sweep b in {{0.55, 2/3, 0.8}}");
}

#[test]
fn c07_aggregate_game_convergence() {
    let config = ExperimentConfig::from_value(serde_json::json!({
        "game": {"kind": "aggregate", "players": 3, "action_dim": 2,
                 "phi": [1.0, 1.0], "gamma": 1.0},
        "noise": {"kind": "affine", "sigma": 1.0},
        "stepsize": {"b": "2/3"},
        "x0": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "horizon": 1_000_000,
        "runs": 50,
        "base_seed": 31
    }))
    .unwrap();
    let records = run_ensemble(&config, workers()).unwrap();
    let report = analysis::as_convergence_check(&records, 0.25).unwrap();
    assert!(
        report.pass_fraction >= 0.95,
        "only {} of {} seeds converged",
        report.seeds_passed,
        report.runs
    );
    println!(
        "[PASS] criterion 7: {}/{} aggregate-game seeds ended below a quarter of their early minimum distance",
        report.seeds_passed, report.runs
    );
}

#[test]
fn c08_operator_property_grid() {
    for &n in &[2usize, 5, 10] {
        for &d in &[1usize, 3] {
            let dim = n * d;
            // Deterministic full-rank-ish factor; Q = -A A^T is symmetric NSD.
            let a = DMatrix::from_fn(dim, dim, |i, j| {
                ((i * 31 + j * 17 + n * 7 + d) % 13) as f64 / 13.0 - 0.5
            });
            let q = -(&a * a.transpose());
            let game = GameSpec::quadratic(n, d, q).unwrap();
            let coco_report = game.verify_cocoercivity(10_000, 1);
            assert!(coco_report.holds, "quadratic {n}x{d}: slack {}", coco_report.min_slack);
            assert!(game.lipschitz_check(10_000, 2).holds, "quadratic {n}x{d} lipschitz");

            let phi = DVector::from_fn(d, |i, _| 1.0 - 0.5 * i as f64);
            let agg = GameSpec::aggregate(n, d, phi, 0.9).unwrap();
            let coco_report = agg.verify_cocoercivity(10_000, 1);
            assert!(coco_report.holds, "aggregate {n}x{d}: slack {}", coco_report.min_slack);
            assert!(agg.lipschitz_check(10_000, 2).holds, "aggregate {n}x{d} lipschitz");
        }
    }
    println!("[PASS] criterion 8: co-coercivity and Lipschitz checks hold over 10^4 sampled pairs on the full size grid");
}

/// Straight-line recomputation of every constant, independent of
/// `compute_constants`' internal ordering.
#[allow(clippy::too_many_arguments)]
fn oracle_constants(
    game: &GameSpec,
    sigma: f64,
    b: Exponent,
    t0: f64,
    x0: &[f64],
) -> TheoreticalConstants {
    let lambda = game.cocoercivity_parameter();
    let schedule = StepsizeSchedule::new(b, t0, lambda).unwrap();
    let x0v = DVector::from_row_slice(x0);
    let x_star = game
        .project_to_ne(&coco::ActionProfile::new(x0.to_vec()).unwrap())
        .unwrap();
    let x_star = x_star.as_vector();
    let x0_dist_sq = (&x0v - x_star).norm_squared();
    let xstar_norm_sq = x_star.norm_squared();
    let bv = b.value();
    let d1 = schedule.d1_upper_bound();
    let s2 = sigma * sigma;
    let gamma1 = (2.0 * s2 * d1).exp() * (x0_dist_sq + s2 * (1.0 + 2.0 * xstar_norm_sq) * d1);
    let gamma2 = (x0_dist_sq + s2 * d1 * (1.0 + 2.0 * xstar_norm_sq + 2.0 * gamma1)) / lambda;
    let d2 = s2 * (1.0 + 2.0 * gamma1 + 2.0 * xstar_norm_sq);
    let gamma3 = 2.0 * d2;
    let gamma4 = 2.0 * gamma2 + 2.0 * gamma3 * d1 / (lambda * lambda);
    let gamma5 = (1.0 + 1.0 / lambda) * (1.0 + 1.0 / lambda) * gamma3 / lambda;
    let c1 = gamma2 * t0.powf(bv);
    let shared = 2.0 * gamma3 / (lambda * lambda);
    let (mut gamma6, mut gamma7, mut gamma8) = (None, None, None);
    let (mut c2, mut c3, mut c4) = (None, None, None);
    match b.regime() {
        Regime::Low => {
            let g6 = gamma4 * t0.powf(bv) + gamma5 * t0.powf(bv) / ((1.0 - bv) * (2.0 - 3.0 * bv));
            gamma6 = Some(g6);
            c2 = Some(2.0 * g6 + shared);
        }
        Regime::Critical => {
            let g7 = gamma4 * t0.powf(2.0 / 3.0) / std::f64::consts::LN_2
                + 6.0 * gamma5 * t0.powf(2.0 / 3.0);
            gamma7 = Some(g7);
            c3 = Some(2.0 * g7 + shared);
        }
        Regime::High => {
            let series = schedule.high_regime_series_upper_bound().unwrap();
            let g8 = gamma4 * t0.powf(bv) + gamma5 * t0.powf(bv) / (1.0 - bv) * series;
            gamma8 = Some(g8);
            c4 = Some(2.0 * g8 + shared);
        }
    }
    TheoreticalConstants {
        lambda,
        sigma,
        b: bv,
        t0,
        b_regime: b.regime(),
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
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => close(a, b),
        _ => false,
    }
}

#[test]
fn c09_constants_against_oracle() {
    let exponents = [
        Exponent::Rational { num: 5, den: 9 },
        Exponent::Rational { num: 2, den: 3 },
        Exponent::Real(0.6),
        Exponent::Real(0.75),
        Exponent::Real(0.9),
    ];
    let sigmas = [0.3, 0.75, 1.0, 1.6];
    let mut cases = 0;
    for (i, &b) in exponents.iter().enumerate() {
        for (j, &sigma) in sigmas.iter().enumerate() {
            let (game, x0): (GameSpec, Vec<f64>) = if (i + j) % 2 == 0 {
                (
                    GameSpec::quadratic(
                        2,
                        1,
                        DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, -1.0]),
                    )
                    .unwrap(),
                    vec![1.0 + 0.1 * j as f64, -0.5],
                )
            } else {
                (
                    GameSpec::aggregate(3, 1, DVector::from_vec(vec![1.0]), 1.0).unwrap(),
                    vec![0.2, -0.3, 0.4 * i as f64],
                )
            };
            let lambda = game.cocoercivity_parameter();
            let t0 = min_t0(lambda, b.value()).unwrap().ceil() + j as f64;
            let schedule = StepsizeSchedule::new(b, t0, lambda).unwrap();
            let config = coco::dynamics::RunConfig::new(
                game.clone(),
                NoiseModel::Affine { sigma },
                schedule,
                coco::ActionProfile::new(x0.clone()).unwrap(),
                1000,
                None,
                0,
                0,
            )
            .unwrap();
            let got = analysis::compute_constants(&config).unwrap();
            let want = oracle_constants(&game, sigma, b, t0, &x0);
            assert!(close(got.d1, want.d1), "d1 mismatch");
            assert!(close(got.d2, want.d2), "d2 mismatch");
            assert!(close(got.gamma1, want.gamma1), "gamma1 mismatch");
            assert!(close(got.gamma2, want.gamma2), "gamma2 mismatch");
            assert!(close(got.gamma3, want.gamma3), "gamma3 mismatch");
            assert!(close(got.gamma4, want.gamma4), "gamma4 mismatch");
            assert!(close(got.gamma5, want.gamma5), "gamma5 mismatch");
            assert!(close_opt(got.gamma6, want.gamma6), "gamma6 mismatch");
            assert!(close_opt(got.gamma7, want.gamma7), "gamma7 mismatch");
            assert!(close_opt(got.gamma8, want.gamma8), "gamma8 mismatch");
            assert!(close(got.c1, want.c1), "c1 mismatch");
            assert!(close_opt(got.c2, want.c2), "c2 mismatch");
            assert!(close_opt(got.c3, want.c3), "c3 mismatch");
            assert!(close_opt(got.c4, want.c4), "c4 mismatch");
            cases += 1;
        }
    }
    assert_eq!(cases, 20);

    // Zero-noise collapse from an equilibrium start: everything driven by
    // sigma vanishes and the rest sits at projector-rounding scale.
    let game =
        GameSpec::quadratic(2, 1, DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, -1.0]))
            .unwrap();
    let schedule =
        StepsizeSchedule::new(Exponent::Rational { num: 2, den: 3 }, 3.0, 0.5).unwrap();
    let config = coco::dynamics::RunConfig::new(
        game,
        NoiseModel::Affine { sigma: 0.0 },
        schedule,
        coco::ActionProfile::new(vec![1.0, -1.0]).unwrap(),
        1000,
        None,
        0,
        0,
    )
    .unwrap();
    let collapsed = analysis::compute_constants(&config).unwrap();
    assert_eq!(collapsed.d2, 0.0);
    assert_eq!(collapsed.gamma3, 0.0);
    assert!(collapsed.gamma1 < 1e-28);
    assert!(collapsed.c3.unwrap() < 1e-28);

    println!("[PASS] criterion 9: closed-form constants match the independent oracle to 1e-12 on 20 configurations plus the zero-noise collapse");
}

#[test]
fn c10_parallel_determinism() {
    let bin = env!("CARGO_BIN_EXE_coco");
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, parallelism) in dirs.iter().zip(["1", "8"]) {
        let status = Command::new(bin)
            .args([
                "run",
                MAIN_CONFIG,
                "--override",
                "horizon=20000",
                "--override",
                "runs=40",
                "--out",
            ])
            .arg(dir.path())
            .args(["--parallelism", parallelism])
            .status()
            .unwrap();
        assert!(status.success(), "run at parallelism {parallelism} failed");
    }
    for name in ["ensemble.csv", "bound_report.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between parallelism 1 and 8");
    }
    println!("[PASS] criterion 10: ensemble.csv and bound_report.json are byte-identical at parallelism 1 and 8");
}

#[test]
fn main_ensemble_no_outright_failures() {
    // Companion sanity line for the shared ensemble as a whole.
    let run = main_run();
    assert_eq!(run.config.runs, 200);
    assert_eq!(run.report.failed, 0, "{} checks failed", run.report.failed);
    assert!(run.records.len() == 200);
}
