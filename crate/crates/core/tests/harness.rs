use std::fs;
use std::path::Path;

use mecaloc::harness::commands::{fuse, metrics, simulate, simulate_run};
use mecaloc::harness::experiment::{replay, summaries};
use mecaloc::harness::log::{read_log, write_log};
use mecaloc::harness::{ExperimentConfig, FuseArgs, SimulateArgs, TrajectoryRecord};
use mecaloc::metrics::Source;
use mecaloc::*;

fn default_config() -> ExperimentConfig {
    ExperimentConfig::load(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml"),
    )
    .unwrap()
}

fn with_sigma_ips(cfg: &ExperimentConfig, sigma: f64) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    cfg.filter.filter.measurement = MeasurementNoise::new(sigma).unwrap();
    cfg
}

#[test]
fn shipped_default_matches_builtin_default() {
    let shipped = default_config();
    assert_eq!(shipped.seed, 1);
    assert_eq!(
        ExperimentConfig { seed: 0, ..shipped },
        ExperimentConfig::default()
    );
}

#[test]
fn replay_reproduces_simulated_estimates() {
    let cfg = default_config();
    let run = simulate_run(&cfg, 3).unwrap();
    let again = replay(run.rows.clone(), run.rows[0].truth, &cfg.filter).unwrap();
    assert_eq!(again, run.rows);
}

#[test]
fn huge_ips_noise_makes_the_filter_follow_odometry() {
    let cfg = default_config();
    let run = simulate_run(&cfg, 0).unwrap();
    let loose = replay(
        run.rows.clone(),
        run.rows[0].truth,
        &with_sigma_ips(&cfg, 0.3 * 100.0).filter,
    )
    .unwrap();
    let gap = loose
        .iter()
        .filter_map(|r| r.odometry.map(|o| o.distance_to(&r.ekf)))
        .fold(0.0f64, f64::max);
    let odo_max = run.summaries[&Source::Odometry].max;
    assert!(gap < 0.1 * odo_max, "ekf strays {gap} m from odometry");
    let s = summaries(&loose).unwrap();
    assert!((s[&Source::Ekf].max - odo_max).abs() < 0.1 * odo_max);
}

#[test]
fn gating_limits_damage_from_outliers() {
    let cfg = default_config();
    let mut rows = simulate_run(&cfg, 5).unwrap().rows;
    let mut injected = 0;
    for r in rows.iter_mut().filter(|r| r.ips.is_some()).step_by(10) {
        let (x, y) = r.ips.unwrap();
        r.ips = Some((x + 10.0, y - 10.0));
        injected += 1;
    }
    assert!(injected > 10);
    let start = rows[0].truth;
    let mut gated = cfg.filter;
    gated.filter.gate = Some(ekf::DEFAULT_GATE);
    let open = summaries(&replay(rows.clone(), start, &cfg.filter).unwrap()).unwrap();
    let shut = summaries(&replay(rows, start, &gated).unwrap()).unwrap();
    assert!(shut[&Source::Ekf].max < open[&Source::Ekf].max);
    assert!(shut[&Source::Ekf].max < 1.0);
}

#[test]
fn metrics_of_a_written_log_match_the_simulation_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, "seed = 9\n[trajectory]\nlaps = 1\n").unwrap();
    let out = dir.path().join("out");
    let (summary, runs) = simulate(&SimulateArgs {
        config: cfg_path.clone(),
        seed: None,
        runs: None,
        out: out.clone(),
    })
    .unwrap();
    assert_eq!(runs[0].seed, 9);
    assert_eq!(
        fs::read_to_string(out.join("summary.txt")).unwrap(),
        summary
    );
    assert_eq!(metrics(&out.join("trajectory.csv")).unwrap(), summary);

    let (fused, rows) = fuse(&FuseArgs {
        input: out.join("trajectory.csv"),
        config: cfg_path,
        out: dir.path().join("fused"),
    })
    .unwrap();
    assert_eq!(fused, summary);
    assert_eq!(rows, runs[0].rows);
}

#[test]
fn batch_writes_one_log_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, "[trajectory]\nlaps = 1\n").unwrap();
    let (summary, runs) = simulate(&SimulateArgs {
        config: cfg_path,
        seed: Some(40),
        runs: Some(3),
        out: dir.path().to_path_buf(),
    })
    .unwrap();
    assert!(summary.starts_with("mean over 3 runs (seeds 40..=42)"));
    assert_eq!(
        runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        [40, 41, 42]
    );
    for i in 0..3 {
        assert!(dir
            .path()
            .join(format!("trajectory_run{i:04}.csv"))
            .exists());
    }
    let table = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 * 3);
}

fn synthetic_rows(offset: (f64, f64)) -> Vec<TrajectoryRecord> {
    (0..50)
        .map(|k| {
            let t = k as f64 * 0.1;
            let truth = Pose2D::new(0.2 * t, -0.1 * t, 0.0);
            let est = Pose2D::new(truth.x + offset.0, truth.y + offset.1, 0.0);
            let is_fix = k % 5 == 4;
            TrajectoryRecord {
                t,
                kind: if is_fix {
                    harness::RowKind::Fix
                } else {
                    harness::RowKind::Twist
                },
                truth,
                twist: (!is_fix).then_some(BodyTwist::new(0.2, -0.1, 0.0)),
                odometry: (!is_fix).then_some(est),
                ips: is_fix.then_some((est.x, est.y)),
                ekf: est,
                variances: [0.01; 3],
                nis: None,
            }
        })
        .collect()
}

#[test]
fn summaries_of_synthetic_logs() {
    let exact = summaries(&synthetic_rows((0.0, 0.0))).unwrap();
    assert_eq!(exact.len(), 3);
    for s in exact.values() {
        assert_eq!((s.max, s.rmse, s.final_error), (0.0, 0.0, 0.0));
    }
    let shifted = summaries(&synthetic_rows((0.3, -0.4))).unwrap();
    for s in shifted.values() {
        assert!(
            (s.max - 0.5).abs() < 1e-12
                && (s.rmse - 0.5).abs() < 1e-12
                && (s.final_error - 0.5).abs() < 1e-12
        );
    }
    let mut buf = Vec::new();
    write_log(&mut buf, &synthetic_rows((0.3, -0.4))).unwrap();
    assert_eq!(
        summaries(&read_log(buf.as_slice()).unwrap()).unwrap(),
        shifted
    );
}

#[test]
fn config_errors_name_the_field() {
    let cases = [
        ("[filter]\nsigma_ips_m = -1.0\n", "filter.sigma_ips_m"),
        ("[slip]\nmode = \"sideways\"\n", "slip.mode"),
        ("[trajectory]\nlaps = 0\n", "trajectory.laps"),
        (
            "[ips]\nbeacons_m = [[0.0, 0.0, 2.0], [1.0, 0.0, 2.0]]\n",
            "ips.beacons_m",
        ),
        ("[geometry]\nwheel_radius = 1.0\n", "wheel_radius"),
        ("seed = \n", "line 1"),
    ];
    for (text, needle) in cases {
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains(needle), "{text:?}: {err}");
        assert_eq!(err.exit_code(), 2, "{text:?}");
    }
}
