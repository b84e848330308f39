//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use iurlse_core::benchlab::{oracle_values, replication_seed, run_replications, BenchmarkFunction, BUILTIN_NAMES};
use iurlse_core::InputDistribution;

use crate::config::{Loaded, Overrides};
use crate::output::{
    benchmark_hash, build_report, method_aggregates, read_oracle, run_summary, write_json, write_report,
    write_results, Failure, OracleFile, OracleRef, RunEntry, Summary, SCHEMA_VERSION,
};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ORACLE_FILE: &str = "oracle.json";
pub const REPORT_FILE: &str = "report.csv";

/// Paths written by `run`.
#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub failures: usize,
}

fn compute_oracle(loaded: &Loaded, bench: &BenchmarkFunction, truth: &InputDistribution) -> Result<OracleFile> {
    let o = &loaded.file.oracle;
    let p_star = oracle_values(|s| bench.eval(s), truth, &bench.candidates, bench.threshold, o.samples, o.seed)?;
    Ok(OracleFile {
        schema_version: SCHEMA_VERSION,
        benchmark: bench.name.clone(),
        case: loaded.file.experiment.case.clone(),
        threshold: bench.threshold,
        samples: o.samples,
        seed: o.seed,
        benchmark_hash: benchmark_hash(bench, truth),
        p_star,
    })
}

pub fn cmd_oracle(config: &Path, overrides: &Overrides) -> Result<PathBuf> {
    let loaded = Loaded::from_path(config, overrides)?;
    let (bench, case) = loaded.problem()?;
    let table = compute_oracle(&loaded, &bench, &case.truth)?;
    let path = match (&overrides.out, &loaded.file.oracle.file) {
        (None, Some(f)) => loaded.resolve(f),
        _ => {
            let dir = loaded.out_dir();
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            dir.join(ORACLE_FILE)
        }
    };
    write_json(&path, &table)?;
    Ok(path)
}

pub fn cmd_run(config: &Path, overrides: &Overrides) -> Result<RunOutputs> {
    let loaded = Loaded::from_path(config, overrides)?;
    let cfg = &loaded.file;
    let (bench, case) = loaded.problem()?;

    let oracle = if cfg.experiment.metrics {
        let table = match &cfg.oracle.file {
            Some(f) => {
                let t = read_oracle(&loaded.resolve(f))?;
                let want = benchmark_hash(&bench, &case.truth);
                if t.benchmark_hash != want || t.p_star.len() != bench.candidates.len() {
                    bail!("oracle file {} was built for a different benchmark or input law", f.display());
                }
                t
            }
            None => compute_oracle(&loaded, &bench, &case.truth)?,
        };
        Some(table)
    } else {
        None
    };

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for &method in &cfg.experiment.methods {
        let alg = iurlse_core::AlgorithmConfig {
            method,
            ..cfg.algorithm_config(0)
        };
        let outcomes = run_replications(
            &bench,
            &case,
            &alg,
            cfg.experiment.seed,
            cfg.experiment.replications,
            oracle.as_ref().map(|o| o.p_star.as_slice()),
        );
        for o in outcomes {
            let run_id = format!("{method}-{}", o.replication);
            debug_assert_eq!(o.seed, replication_seed(cfg.experiment.seed, o.replication));
            match o.result {
                Ok(result) => entries.push(RunEntry {
                    run_id,
                    method,
                    replication: o.replication,
                    seed: o.seed,
                    result,
                }),
                Err(error) => failures.push(Failure {
                    run_id,
                    seed: o.seed,
                    error,
                }),
            }
        }
    }

    let dir = loaded.out_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let results = dir.join(RESULTS_FILE);
    let file = std::fs::File::create(&results).with_context(|| format!("creating {}", results.display()))?;
    write_results(std::io::BufWriter::new(file), &entries, bench.dim())?;

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        benchmark: bench.name.clone(),
        case: case.name.clone(),
        candidates: bench.candidates.len(),
        threshold: bench.threshold,
        oracle: oracle.as_ref().map(|o| OracleRef {
            samples: o.samples,
            seed: o.seed,
            benchmark_hash: o.benchmark_hash.clone(),
        }),
        runs: entries.iter().map(run_summary).collect(),
        failures: failures.clone(),
        aggregates: method_aggregates(&entries, cfg.algorithm.t_max),
    };
    let summary_path = dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    Ok(RunOutputs {
        results,
        summary: summary_path,
        failures: failures.len(),
    })
}

/// Accepts result CSVs or directories holding `results.csv`.
pub fn cmd_report(inputs: &[PathBuf], out: Option<&Path>) -> Result<PathBuf> {
    let files: Vec<PathBuf> = inputs
        .iter()
        .map(|p| if p.is_dir() { p.join(RESULTS_FILE) } else { p.clone() })
        .collect();
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    let rows = build_report(&refs)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(REPORT_FILE);
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_report(std::io::BufWriter::new(file), &rows)?;
    Ok(path)
}

pub fn cmd_list_benchmarks() -> String {
    let mut s = String::from("name        dim  candidates  threshold  cases\n");
    for name in BUILTIN_NAMES {
        let b = BenchmarkFunction::builtin(name).expect("builtin");
        s.push_str(&format!(
            "{:<11} {:>3}  {:>10}  {:>9}  {}\n",
            b.name,
            b.dim(),
            b.candidates.len(),
            b.threshold,
            b.case_names().join(", ")
        ));
    }
    s.push_str("ccpp          4        2000        -15  gaussian sd 0.125 per feature (needs [ccpp] path)\n");
    s
}
