//! Replicated runs and per-iteration aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchlab::functions::{BenchmarkFunction, InputCase};
use crate::benchlab::metrics::Metrics;
use crate::engine::{run, AlgorithmConfig, RunResult};
use crate::seed::{derive, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single value.
    pub se: f64,
}

impl MeanSe {
    /// Half-width of the normal 95% band.
    pub fn band(&self) -> f64 {
        1.96 * self.se
    }
}

pub fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSe { mean, se: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanSe {
        mean,
        se: (var / n as f64).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: u64,
    pub n: usize,
    pub f1: MeanSe,
    pub precision: MeanSe,
    pub recall: MeanSe,
}

/// Per-iteration mean and SE over runs. A run that stopped early contributes
/// its last metrics to every later iteration.
pub fn aggregate(runs: &[&RunResult], t_max: u64) -> Vec<SeriesPoint> {
    (1..=t_max)
        .map(|t| {
            let ms: Vec<Metrics> = runs.iter().filter_map(|r| metrics_at(r, t)).collect();
            let col = |g: fn(&Metrics) -> f64| ms.iter().map(g).collect::<Vec<_>>();
            SeriesPoint {
                t,
                n: ms.len(),
                f1: mean_se(&col(|m| m.f1)),
                precision: mean_se(&col(|m| m.precision)),
                recall: mean_se(&col(|m| m.recall)),
            }
        })
        .collect()
}

fn metrics_at(r: &RunResult, t: u64) -> Option<Metrics> {
    match r.trials.iter().rev().find(|rec| rec.t <= t) {
        Some(rec) => rec.metrics,
        None => r.final_metrics,
    }
}

#[derive(Clone, Debug)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub seed: u64,
    pub result: Result<RunResult, String>,
}

/// Seed of replication `r` under `root`.
pub fn replication_seed(root: u64, r: usize) -> u64 {
    derive(root, Stream::Replication, r as u64, 0)
}

/// Runs `replications` independent seeds in parallel. `config.seed` is
/// replaced by each replication's derived seed. Failed runs are reported, not
/// dropped.
pub fn run_replications(
    bench: &BenchmarkFunction,
    case: &InputCase,
    config: &AlgorithmConfig,
    root_seed: u64,
    replications: usize,
    oracle: Option<&[f64]>,
) -> Vec<ReplicationOutcome> {
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let seed = replication_seed(root_seed, r);
            let cfg = AlgorithmConfig { seed, ..config.clone() };
            let result = bench.gp_prior().and_then(|gp| {
                let mut obs = bench.observer(&case.truth, seed);
                run(&cfg, gp, &case.learner, &bench.candidates, bench.threshold, &mut obs, oracle)
            });
            ReplicationOutcome {
                replication: r,
                seed,
                result: result.map_err(|e| e.to_string()),
            }
        })
        .collect()
}
