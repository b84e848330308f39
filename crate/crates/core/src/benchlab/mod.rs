//! Benchmark problems, ground truth and experiment aggregation.

pub mod ccpp;
pub mod experiment;
pub mod functions;
pub mod metrics;
pub mod oracle;

pub use experiment::{aggregate, mean_se, replication_seed, run_replications, MeanSe, ReplicationOutcome, SeriesPoint};
pub use functions::{BenchmarkFunction, GridSpec, InputCase, Objective, BUILTIN_NAMES};
pub use metrics::{metrics, Metrics};
pub use oracle::{oracle_p_star, oracle_values, OracleTable, DEFAULT_ORACLE_SAMPLES};
