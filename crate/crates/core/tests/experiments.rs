use pike_core::config::Config;
use pike_core::experiments::{self, ExperimentKind};
use pike_core::{io, EmbeddingMode};

fn small() -> Config {
    Config {
        trials: 3,
        smd_phase_sizes: vec![10, 40],
        smd_sweep_sizes: vec![5, 20, 60],
        smd_sweep_initial_states: 8,
        smd_steps: 30,
        tracking_samples: 60,
        tracking_large_samples: 120,
        tracking_steps: 8,
        control_grid: vec![4, 5],
        ..Config::default()
    }
}

#[test]
fn exact_prior_phase_errors_vanish() {
    let cfg = Config {
        smd_damping: 0.0,
        ..small()
    };
    let report = experiments::run_smd_phase(&cfg).unwrap();
    for r in report
        .records
        .iter()
        .filter(|r| r.mode == EmbeddingMode::PhysicsInformed)
    {
        assert!(r.error < 1e-9, "{r:?}");
    }
}

#[test]
fn phase_report_shape() {
    let cfg = small();
    let report = experiments::run_smd_phase(&cfg).unwrap();
    assert_eq!(report.records.len(), 2 * 2 * 2 * cfg.trials);
    assert_eq!(report.aggregates.len(), 8);
    for a in &report.aggregates {
        assert_eq!(a.count, cfg.trials);
    }
    let labels: Vec<&str> = report.trajectories.iter().map(|t| t.label.as_str()).collect();
    assert!(labels.contains(&"truth") && labels.contains(&"prior") && labels.contains(&"pi_40"));
    for t in &report.trajectories {
        assert_eq!(t.states.len(), cfg.smd_steps + 1);
        assert_eq!(t.states[0], cfg.smd_x0);
    }
}

#[test]
fn sweep_curves_cover_the_grid() {
    let cfg = small();
    let report = experiments::run_smd_sweep(&cfg).unwrap();
    for mode in [EmbeddingMode::PhysicsInformed, EmbeddingMode::DataDriven] {
        let curve: Vec<usize> = report
            .aggregates
            .iter()
            .filter(|a| a.mode == mode)
            .map(|a| a.samples)
            .collect();
        assert_eq!(curve, cfg.smd_sweep_sizes);
    }
}

#[test]
fn tracking_has_three_arms() {
    let cfg = small();
    let report = experiments::run_tracking(&cfg).unwrap();
    assert_eq!(report.aggregates.len(), 3);
    assert_eq!(report.records.len(), 3 * cfg.trials);
    assert!(report
        .aggregate_for("tracking", EmbeddingMode::DataDriven, 120)
        .is_some());
    assert_eq!(report.trajectories.len(), 4);
}

#[test]
fn records_are_finite_and_aggregates_recompute() {
    let cfg = small();
    for kind in ExperimentKind::ALL {
        let report = experiments::run(kind, &cfg).unwrap();
        for r in &report.records {
            assert!(r.error.is_finite() && r.error >= 0.0);
        }
        for a in &report.aggregates {
            let errors: Vec<f64> = report
                .records
                .iter()
                .filter(|r| r.regime == a.regime && r.mode == a.mode && r.samples == a.samples)
                .map(|r| r.error)
                .collect();
            let (q1, median, q3) = experiments::quartiles(&errors).unwrap();
            assert_eq!((a.q1, a.median, a.q3), (q1, median, q3));
            assert!(a.q1 <= a.median && a.median <= a.q3);
        }
    }
}

#[test]
fn replay_is_deterministic_and_seed_sensitive() {
    let cfg = small();
    for kind in ExperimentKind::ALL {
        let a = experiments::run(kind, &cfg).unwrap().without_timing();
        let b = experiments::run(kind, &cfg).unwrap().without_timing();
        assert_eq!(a, b, "{kind}");
        let c = experiments::run(
            kind,
            &Config {
                seed: 99,
                ..cfg.clone()
            },
        )
        .unwrap()
        .without_timing();
        assert_ne!(a.records, c.records);
        assert_eq!(a.records.len(), c.records.len());
    }
}

#[test]
fn report_round_trips_through_json_and_csv() {
    let report = experiments::run_smd_phase(&small()).unwrap();
    let mut buf = Vec::new();
    io::write_report_json(&report, &mut buf).unwrap();
    assert_eq!(io::read_report_json(&buf[..]).unwrap(), report);

    let mut csv = Vec::new();
    io::write_report_csv(&report, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,mode,M,trial,seed,error,runtime_ms,regime,diverged"
    );
    assert_eq!(lines.count(), report.records.len());
}

#[test]
fn invalid_configs_are_rejected() {
    let cfg = Config { trials: 0, ..small() };
    assert!(experiments::run_smd_phase(&cfg).is_err());
    let cfg = Config {
        smd_sweep_sizes: vec![],
        ..small()
    };
    assert!(experiments::run_smd_sweep(&cfg).is_err());
}
