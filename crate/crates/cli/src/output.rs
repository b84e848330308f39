//! Result files: per-trial CSV, run summary JSON, oracle table JSON and the
//! aggregated report CSV. Every file carries `schema_version`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use iurlse_core::benchlab::{mean_se, BenchmarkFunction, MeanSe, Metrics};
use iurlse_core::{InputDistribution, Method, RunResult, TerminationReason};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ConfigFile;

pub const SCHEMA_VERSION: u32 = 1;

/// One finished replication of one method.
#[derive(Clone, Debug)]
pub struct RunEntry {
    pub run_id: String,
    pub method: Method,
    pub replication: usize,
    pub seed: u64,
    pub result: RunResult,
}

pub fn results_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "schema_version", "run_id", "seed", "t", "method", "f1", "precision", "recall", "n_h", "n_l", "n_u", "explore",
        "y",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..dim).map(|k| format!("x{k}")));
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results<W: Write>(out: W, entries: &[RunEntry], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(results_header(dim))?;
    for e in entries {
        for t in &e.result.trials {
            let mut row = vec![
                SCHEMA_VERSION.to_string(),
                e.run_id.clone(),
                e.seed.to_string(),
                t.t.to_string(),
                e.method.to_string(),
                opt(t.metrics.map(|m| m.f1)),
                opt(t.metrics.map(|m| m.precision)),
                opt(t.metrics.map(|m| m.recall)),
                t.n_high.to_string(),
                t.n_low.to_string(),
                t.n_unclassified.to_string(),
                (t.explore as u8).to_string(),
                t.y.to_string(),
            ];
            row.extend(t.x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalSets {
    pub labels: String,
    pub high: Vec<usize>,
    pub low: Vec<usize>,
    pub n_unclassified: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub method: Method,
    pub replication: usize,
    pub seed: u64,
    pub reason: TerminationReason,
    pub trials: usize,
    pub initial_points: Vec<usize>,
    pub terminal: TerminalSets,
    pub final_metrics: Option<Metrics>,
    /// Final `ξ` posterior for estimated input laws.
    pub final_input: InputDistribution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub runs: usize,
    pub t: u64,
    pub f1: MeanSe,
    pub precision: MeanSe,
    pub recall: MeanSe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub run_id: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRef {
    pub samples: usize,
    pub seed: u64,
    pub benchmark_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config: ConfigFile,
    pub benchmark: String,
    pub case: String,
    pub candidates: usize,
    pub threshold: f64,
    pub oracle: Option<OracleRef>,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<Failure>,
    pub aggregates: Vec<MethodAggregate>,
}

pub fn run_summary(e: &RunEntry) -> RunSummary {
    let term = &e.result.terminal;
    let pick = |want: iurlse_core::Label| {
        term.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == want)
            .map(|(i, _)| i)
            .collect::<Vec<_>>()
    };
    RunSummary {
        run_id: e.run_id.clone(),
        method: e.method,
        replication: e.replication,
        seed: e.seed,
        reason: e.result.reason.clone(),
        trials: e.result.trials.len(),
        initial_points: e.result.initial.iter().map(|o| o.chosen).collect(),
        terminal: TerminalSets {
            labels: term.label_string(),
            high: pick(iurlse_core::Label::High),
            low: pick(iurlse_core::Label::Low),
            n_unclassified: term.n_unclassified,
        },
        final_metrics: e.result.final_metrics,
        final_input: e.result.final_input.clone(),
    }
}

/// Final-iteration aggregates per method.
pub fn method_aggregates(entries: &[RunEntry], t_max: u64) -> Vec<MethodAggregate> {
    let mut out = Vec::new();
    for m in Method::ALL {
        let runs: Vec<&RunResult> = entries.iter().filter(|e| e.method == m).map(|e| &e.result).collect();
        if runs.is_empty() {
            continue;
        }
        if let Some(last) = iurlse_core::benchlab::aggregate(&runs, t_max).pop() {
            if last.n == 0 {
                continue;
            }
            out.push(MethodAggregate {
                method: m,
                runs: last.n,
                t: last.t,
                f1: last.f1,
                precision: last.precision,
                recall: last.recall,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleFile {
    pub schema_version: u32,
    pub benchmark: String,
    pub case: String,
    pub threshold: f64,
    pub samples: usize,
    pub seed: u64,
    pub benchmark_hash: String,
    /// `p*` per candidate, in candidate order.
    pub p_star: Vec<f64>,
}

/// SHA-256 over the benchmark name, threshold, candidate coordinates and the
/// true input law. Ties an oracle table to the problem it was built for.
pub fn benchmark_hash(bench: &BenchmarkFunction, truth: &InputDistribution) -> String {
    let mut h = Sha256::new();
    h.update(bench.name.as_bytes());
    h.update(bench.threshold.to_le_bytes());
    h.update((bench.dim() as u64).to_le_bytes());
    for v in bench.candidates.as_flat() {
        h.update(v.to_le_bytes());
    }
    h.update(serde_json::to_vec(truth).expect("serialisable"));
    hex::encode(h.finalize())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_oracle(path: &Path) -> Result<OracleFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("missing oracle file {}", path.display()))?;
    let o: OracleFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if o.schema_version != SCHEMA_VERSION {
        bail!("{}: schema_version {} (expected {SCHEMA_VERSION})", path.display(), o.schema_version);
    }
    Ok(o)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct MetricRow {
    t: u64,
    values: [f64; 3],
}

pub const REPORT_METRICS: [&str; 3] = ["f1", "precision", "recall"];

/// One output line of the report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub t: u64,
    pub metric: &'static str,
    pub stats: MeanSe,
    pub n: usize,
}

/// Reads per-trial CSVs and aggregates mean and SE per `(method, t, metric)`.
/// Runs that ended early carry their last values forward.
pub fn build_report(files: &[&Path]) -> Result<Vec<ReportRow>> {
    if files.is_empty() {
        bail!("no result files given");
    }
    // method -> run key -> rows
    let mut runs: BTreeMap<String, BTreeMap<(usize, String), Vec<MetricRow>>> = BTreeMap::new();
    for (fi, path) in files.iter().enumerate() {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .with_context(|| format!("{}: missing column `{name}`", path.display()))
        };
        let (c_ver, c_run, c_t, c_method) = (col("schema_version")?, col("run_id")?, col("t")?, col("method")?);
        let c_metrics = [col("f1")?, col("precision")?, col("recall")?];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let at = || format!("{}: row {}", path.display(), line + 2);
            let ver: u32 = rec[c_ver].parse().with_context(at)?;
            if ver != SCHEMA_VERSION {
                bail!("{}: schema_version {ver} (expected {SCHEMA_VERSION})", at());
            }
            if rec[c_metrics[0]].is_empty() {
                continue;
            }
            let mut values = [0.0; 3];
            for (v, &c) in values.iter_mut().zip(&c_metrics) {
                *v = rec[c].parse().with_context(at)?;
            }
            runs.entry(rec[c_method].to_string())
                .or_default()
                .entry((fi, rec[c_run].to_string()))
                .or_default()
                .push(MetricRow {
                    t: rec[c_t].parse().with_context(at)?,
                    values,
                });
        }
    }
    if runs.is_empty() {
        bail!("no metric values in the given result files");
    }

    let mut out = Vec::new();
    for (method, by_run) in &runs {
        let mut series: Vec<Vec<MetricRow>> = by_run.values().cloned().collect();
        for s in &mut series {
            s.sort_by_key(|r| r.t);
        }
        let t_max = series.iter().filter_map(|s| s.last()).map(|r| r.t).max().unwrap_or(0);
        for t in 1..=t_max {
            let at_t: Vec<&MetricRow> = series.iter().filter_map(|s| s.iter().rev().find(|r| r.t <= t)).collect();
            if at_t.is_empty() {
                continue;
            }
            for (k, metric) in REPORT_METRICS.iter().enumerate() {
                let vals: Vec<f64> = at_t.iter().map(|r| r.values[k]).collect();
                out.push(ReportRow {
                    method: method.clone(),
                    t,
                    metric,
                    stats: mean_se(&vals),
                    n: vals.len(),
                });
            }
        }
    }
    Ok(out)
}

pub fn write_report<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["schema_version", "method", "t", "metric", "mean", "se", "n"])?;
    for r in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.method.clone(),
            r.t.to_string(),
            r.metric.to_string(),
            r.stats.mean.to_string(),
            r.stats.se.to_string(),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
