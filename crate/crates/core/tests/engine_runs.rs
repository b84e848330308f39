use std::path::PathBuf;

use iurlse_core::benchlab::{oracle_values, BenchmarkFunction};
use iurlse_core::engine::{run, AlgorithmConfig, Exploration, Observation, Observer, TerminationReason, TrialRecord};
use iurlse_core::{Method, Result};

fn quartic_run(case: &str, cfg: &AlgorithmConfig, with_oracle: bool) -> iurlse_core::RunResult {
    let bench = BenchmarkFunction::quartic1d();
    let case = bench.case(case).unwrap();
    let truth = with_oracle.then(|| {
        oracle_values(|s| bench.eval(s), &case.truth, &bench.candidates, bench.threshold, 20_000, 1).unwrap()
    });
    let mut obs = bench.observer(&case.truth, cfg.seed);
    run(
        cfg,
        bench.gp_prior().unwrap(),
        &case.learner,
        &bench.candidates,
        bench.threshold,
        &mut obs,
        truth.as_deref(),
    )
    .unwrap()
}

fn without_clock(records: &[TrialRecord]) -> Vec<TrialRecord> {
    records
        .iter()
        .map(|r| TrialRecord {
            elapsed_secs: 0.0,
            ..r.clone()
        })
        .collect()
}

#[test]
fn golden_trial_stream() {
    let cfg = AlgorithmConfig {
        t_max: 8,
        quad_nodes: 200,
        outer_nodes: 16,
        seed: 20_240_601,
        ..Default::default()
    };
    let result = quartic_run("case2", &cfg, true);
    let got = without_clock(&result.trials);
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_quartic_case2.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap()).unwrap();
    }
    let text = std::fs::read_to_string(&path).expect("golden fixture missing; rerun with UPDATE_GOLDEN=1");
    let want: Vec<TrialRecord> = serde_json::from_str(&text).unwrap();
    assert_eq!(got, want);
}

#[test]
fn replay_is_bitwise() {
    for method in Method::ALL {
        let cfg = AlgorithmConfig {
            t_max: 6,
            quad_nodes: 100,
            outer_nodes: 8,
            method,
            seed: 42,
            exploration: Exploration::Constant { p: 0.2 },
            ..Default::default()
        };
        let a = quartic_run("case1", &cfg, true);
        let b = quartic_run("case1", &cfg, true);
        assert!(a.same_outcome(&b), "{method}");
        let c = quartic_run("case1", &AlgorithmConfig { seed: 43, ..cfg.clone() }, true);
        assert_ne!(without_clock(&a.trials), without_clock(&c.trials));
    }
}

#[test]
fn terminal_state_matches_last_record() {
    let cfg = AlgorithmConfig {
        t_max: 10,
        quad_nodes: 200,
        outer_nodes: 16,
        seed: 5,
        ..Default::default()
    };
    let r = quartic_run("case2", &cfg, true);
    assert_eq!(r.trials.len(), 10);
    assert_eq!(r.reason, TerminationReason::Budget);
    let last = r.trials.last().unwrap();
    assert_eq!((last.n_high, last.n_low, last.n_unclassified), (r.terminal.n_high, r.terminal.n_low, r.terminal.n_unclassified));
    assert_eq!(last.metrics, r.final_metrics);
    for t in &r.trials {
        assert_eq!(t.n_high + t.n_low + t.n_unclassified, 41);
        assert_eq!(t.explore, t.score.is_none());
        let m = t.metrics.unwrap();
        for v in [m.f1, m.precision, m.recall] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn explore_rate_tracks_configuration() {
    let p = 0.3;
    let cfg = AlgorithmConfig {
        t_max: 400,
        quad_nodes: 20,
        outer_nodes: 4,
        method: Method::Straddle,
        seed: 8,
        exploration: Exploration::Constant { p },
        ..Default::default()
    };
    let r = quartic_run("case2", &cfg, false);
    let rate = r.trials.iter().filter(|t| t.explore).count() as f64 / r.trials.len() as f64;
    let se = (p * (1.0 - p) / r.trials.len() as f64).sqrt();
    assert!((rate - p).abs() < 3.0 * se, "rate {rate}");
}

#[test]
fn empties_unclassified_set_with_tolerance() {
    let cfg = AlgorithmConfig {
        epsilon: 0.05,
        exploration: Exploration::Constant { p: 0.05 },
        t_max: 400,
        quad_nodes: 300,
        outer_nodes: 16,
        stop_on_empty_u: true,
        seed: 3,
        ..Default::default()
    };
    let r = quartic_run("case2", &cfg, false);
    assert_eq!(r.reason, TerminationReason::UnclassifiedEmpty);
    assert_eq!(r.terminal.n_unclassified, 0);
}

#[test]
fn estimated_shift_posterior_absorbs_every_observation() {
    let cfg = AlgorithmConfig {
        t_max: 30,
        quad_nodes: 200,
        outer_nodes: 16,
        seed: 12,
        ..Default::default()
    };
    let r = quartic_run("unknown_case2", &cfg, true);
    let xi = r.final_input.xi().unwrap();
    assert_eq!(xi.count() as usize, r.initial.len() + r.trials.len());
    let shifts: Vec<f64> = r
        .initial
        .iter()
        .map(|o| o.s[0] - o.x[0])
        .chain(r.trials.iter().map(|t| t.s[0] - t.x[0]))
        .collect();
    // posterior mean under N(0, 0.64) prior, known variance 0.16
    let prec = 1.0 / 0.64 + shifts.len() as f64 / 0.16;
    let want = (shifts.iter().sum::<f64>() / 0.16) / prec;
    assert!((xi.normal_params().unwrap().0 - want).abs() < 1e-12);
    assert!((want - 0.4).abs() < 0.25);
}

struct Broken;

impl Observer for Broken {
    fn observe(&mut self, x: &[f64], counter: u64) -> Result<Observation> {
        Ok(Observation {
            s: x.to_vec(),
            y: if counter < 3 { 1.0 } else { f64::NAN },
        })
    }
}

#[test]
fn gp_failure_ends_run_with_diagnostic() {
    let bench = BenchmarkFunction::quartic1d();
    let case = bench.case("case2").unwrap();
    let cfg = AlgorithmConfig {
        t_max: 10,
        quad_nodes: 50,
        outer_nodes: 4,
        method: Method::Straddle,
        ..Default::default()
    };
    let r = run(&cfg, bench.gp_prior().unwrap(), &case.learner, &bench.candidates, 8.0, &mut Broken, None).unwrap();
    assert_eq!(r.trials.len(), 2);
    assert!(matches!(r.reason, TerminationReason::GpFailure(ref m) if m.contains("finite")));
}
