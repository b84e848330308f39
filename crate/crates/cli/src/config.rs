//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use iurlse_core::acquisition::{DEFAULT_OUTER_NODES, DEFAULT_STRADDLE_KAPPA};
use iurlse_core::benchlab::ccpp::{self, CcppSetup};
use iurlse_core::benchlab::{BenchmarkFunction, InputCase, DEFAULT_ORACLE_SAMPLES};
use iurlse_core::reliability::DEFAULT_QUAD_NODES;
use iurlse_core::{AlgorithmConfig, Exploration, InputDistribution, KernelSpec, Method};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub gp: GpSection,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub oracle: OracleSection,
    pub ccpp: Option<CcppSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub benchmark: String,
    pub case: String,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the benchmark's threshold `h`.
    pub threshold: Option<f64>,
    /// Random subset of the candidate grid.
    pub subsample: Option<usize>,
    /// Record F1 / precision / recall against an oracle table.
    #[serde(default = "yes")]
    pub metrics: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmSection {
    pub alpha: f64,
    pub epsilon: f64,
    pub beta_sqrt: f64,
    pub exploration: Exploration,
    pub t_max: u64,
    pub quad_nodes: usize,
    pub outer_nodes: usize,
    pub stop_on_empty_u: bool,
    pub initial_points: usize,
    pub straddle_kappa: f64,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        AlgorithmSection {
            alpha: 0.95,
            epsilon: 0.0,
            beta_sqrt: 3.0,
            exploration: Exploration::Constant { p: 0.0 },
            t_max: 100,
            quad_nodes: DEFAULT_QUAD_NODES,
            outer_nodes: DEFAULT_OUTER_NODES,
            stop_on_empty_u: false,
            initial_points: 1,
            straddle_kappa: DEFAULT_STRADDLE_KAPPA,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpSection {
    pub signal_variance: Option<f64>,
    pub length_scale: Option<f64>,
    pub noise_variance: Option<f64>,
}

/// Replaces the case's laws. `truth` drives the simulator, `learner` the model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub truth: Option<InputDistribution>,
    pub learner: Option<InputDistribution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub samples: usize,
    pub seed: u64,
    /// Oracle table to read (run) or write (oracle); relative to the config file.
    pub file: Option<PathBuf>,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            samples: DEFAULT_ORACLE_SAMPLES,
            seed: 0,
            file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcppSection {
    pub path: PathBuf,
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_ccpp_candidates")]
    pub candidates: usize,
    #[serde(default)]
    pub split_seed: u64,
    /// Require exactly this many rows; `0` disables the check.
    #[serde(default = "default_rows")]
    pub rows: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Proposed]
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_train() -> usize {
    ccpp::DEFAULT_TRAIN
}
fn default_ccpp_candidates() -> usize {
    ccpp::DEFAULT_CANDIDATES
}
fn default_rows() -> usize {
    ccpp::CCPP_ROWS
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub method: Option<Method>,
    pub out: Option<PathBuf>,
}

/// A parsed, validated configuration with paths resolved.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub file: ConfigFile,
    pub base_dir: PathBuf,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<ConfigFile> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| anyhow!("{origin}: {e}"))?;
        file.validate().map_err(|(key, msg)| match locate(text, key) {
            Some(line) => anyhow!("{origin}:{line}: {msg}"),
            None => anyhow!("{origin}: {msg}"),
        })?;
        Ok(file)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.experiment.seed = s;
        }
        if let Some(r) = o.replications {
            self.experiment.replications = r;
        }
        if let Some(m) = o.method {
            self.experiment.methods = vec![m];
        }
        if let Some(d) = &o.out {
            self.output.dir = Some(d.clone());
        }
    }

    /// Semantic checks. Errors name the offending key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let a = &self.algorithm;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(("alpha", format!("alpha out of range (0, 1): {}", a.alpha)));
        }
        if self.experiment.replications == 0 {
            return Err(("replications", "replications must be at least 1".into()));
        }
        if self.experiment.methods.is_empty() {
            return Err(("methods", "at least one method is required".into()));
        }
        if self.oracle.samples == 0 {
            return Err(("samples", "oracle samples must be at least 1".into()));
        }
        if let Some(0) = self.experiment.subsample {
            return Err(("subsample", "subsample must be at least 1".into()));
        }
        self.algorithm_config(0).validate().map_err(|e| {
            let key = match &e {
                iurlse_core::Error::InvalidParameter { name, .. } => *name,
                _ => "algorithm",
            };
            (key, e.to_string())
        })?;
        for d in [&self.input.truth, &self.input.learner].into_iter().flatten() {
            d.validate().map_err(|e| ("input", e.to_string()))?;
        }
        if self.experiment.benchmark == "ccpp" && self.ccpp.is_none() {
            return Err(("benchmark", "benchmark `ccpp` needs a [ccpp] section with the data path".into()));
        }
        Ok(())
    }

    pub fn algorithm_config(&self, seed: u64) -> AlgorithmConfig {
        let a = &self.algorithm;
        AlgorithmConfig {
            alpha: a.alpha,
            epsilon: a.epsilon,
            beta_sqrt: a.beta_sqrt,
            exploration: a.exploration,
            t_max: a.t_max,
            quad_nodes: a.quad_nodes,
            outer_nodes: a.outer_nodes,
            method: self.experiment.methods[0],
            seed,
            stop_on_empty_u: a.stop_on_empty_u,
            initial_points: a.initial_points,
            straddle_kappa: a.straddle_kappa,
            record_intervals: false,
        }
    }
}

/// 1-based line of the first assignment to `key`.
fn locate(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl Loaded {
    pub fn from_path(path: &Path, overrides: &Overrides) -> Result<Loaded> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut file = ConfigFile::parse(&text, &path.display().to_string())?;
        let mut overrides = overrides.clone();
        // command-line paths are relative to the working directory
        if let Some(d) = overrides.out.as_mut().filter(|d| d.is_relative()) {
            *d = std::env::current_dir()?.join(&*d);
        }
        file.apply(&overrides);
        file.validate().map_err(|(_, m)| anyhow!("{m}"))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded { file, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Benchmark with overrides, and the input case.
    pub fn problem(&self) -> Result<(BenchmarkFunction, InputCase)> {
        let e = &self.file.experiment;
        let mut bench = if e.benchmark == "ccpp" {
            let c = self.file.ccpp.as_ref().expect("validated");
            let rows = (c.rows > 0).then_some(c.rows);
            let data = ccpp::load_ccpp(&self.resolve(&c.path), rows)?;
            ccpp::ccpp_benchmark(
                &data,
                CcppSetup {
                    train: c.train,
                    candidates: c.candidates,
                    seed: c.split_seed,
                },
            )?
        } else {
            BenchmarkFunction::builtin(&e.benchmark)?
        };
        let g = &self.file.gp;
        if g.signal_variance.is_some() || g.length_scale.is_some() {
            bench.kernel = KernelSpec::new(
                g.signal_variance.unwrap_or(bench.kernel.signal_variance),
                g.length_scale.unwrap_or(bench.kernel.length_scale),
            )?;
        }
        if let Some(n) = g.noise_variance {
            if !(n > 0.0) {
                bail!("noise_variance must be positive");
            }
            bench.noise_variance = n;
        }
        if let Some(h) = e.threshold {
            bench.threshold = h;
        }
        if let Some(n) = e.subsample {
            bench = bench.subsample(n, e.seed)?;
        }
        let mut case = if e.benchmark == "ccpp" {
            let d = InputDistribution::iid_gaussian(bench.dim(), 0.0, bench.gaussian_sd)?;
            InputCase {
                name: e.case.clone(),
                truth: d.clone(),
                learner: d,
            }
        } else {
            bench.case(&e.case)?
        };
        if let Some(t) = &self.file.input.truth {
            case.truth = t.clone();
        }
        if let Some(l) = &self.file.input.learner {
            case.learner = l.clone();
        }
        if case.truth.dim() != bench.dim() || case.learner.dim() != bench.dim() {
            bail!("input laws must have dimension {}", bench.dim());
        }
        Ok((bench, case))
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.file.output.dir {
            Some(d) => self.resolve(d),
            None => PathBuf::from("."),
        }
    }
}
