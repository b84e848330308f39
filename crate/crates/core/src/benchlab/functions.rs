//! Test functions, candidate grids and input-uncertainty cases.

use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::engine::SimulatedObserver;
use crate::error::{Error, Result};
use crate::gp::{GpPosterior, KernelSpec};
use crate::input::{InputDistribution, XiPosterior};
use crate::points::PointSet;
use crate::seed::{stream_rng, Stream};

pub const BUILTIN_NAMES: [&str; 3] = ["quartic1d", "sinusoidal", "himmelblau"];

/// Regular grid with `divisions[k] + 1` points along axis `k`, first axis slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub divisions: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, divisions: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != divisions.len() || lower.is_empty() {
            return Err(Error::param("grid", "lower, upper and divisions must have equal non-zero length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::param("grid", "lower must be below upper"));
        }
        if divisions.contains(&0) {
            return Err(Error::param("grid", "divisions must be positive"));
        }
        Ok(GridSpec { lower, upper, divisions })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.divisions.iter().map(|d| d + 1).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> PointSet {
        let d = self.dim();
        let n = self.len();
        let mut out = PointSet::with_capacity(d, n);
        let mut idx = vec![0usize; d];
        let mut p = vec![0.0; d];
        for _ in 0..n {
            for k in 0..d {
                let step = (self.upper[k] - self.lower[k]) / self.divisions[k] as f64;
                p[k] = if idx[k] == self.divisions[k] {
                    self.upper[k]
                } else {
                    self.lower[k] + idx[k] as f64 * step
                };
            }
            out.push(&p).expect("grid dimension");
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] <= self.divisions[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub enum Objective {
    /// `3 - 40x + 38x² - 11x³ + x⁴`
    Quartic,
    /// `-sin(10 x1) - cos(4 x2) + cos(3 x1 x2)`
    Sinusoidal,
    /// `(x1² + x2 - 11)² + (x1 + x2² - 7)² - 100`
    Himmelblau,
    /// Posterior mean of a fitted GP.
    Surrogate(Arc<GpPosterior>),
}

impl Objective {
    pub fn eval(&self, s: &[f64]) -> f64 {
        match self {
            Objective::Quartic => {
                let x = s[0];
                (((x - 11.0) * x + 38.0) * x - 40.0) * x + 3.0
            }
            Objective::Sinusoidal => -(10.0 * s[0]).sin() - (4.0 * s[1]).cos() + (3.0 * s[0] * s[1]).cos(),
            Objective::Himmelblau => {
                let a = s[0] * s[0] + s[1] - 11.0;
                let b = s[0] + s[1] * s[1] - 7.0;
                a * a + b * b - 100.0
            }
            Objective::Surrogate(gp) => gp.posterior(s).mean,
        }
    }
}

/// True and learner input laws for one experimental case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputCase {
    pub name: String,
    pub truth: InputDistribution,
    pub learner: InputDistribution,
}

#[derive(Clone, Debug)]
pub struct BenchmarkFunction {
    pub name: String,
    pub objective: Objective,
    pub candidates: PointSet,
    pub grid: Option<GridSpec>,
    pub kernel: KernelSpec,
    pub noise_variance: f64,
    pub threshold: f64,
    /// Per-axis case-1 Gamma (shape, scale) and case-2 Gaussian sd.
    pub gamma_shift: (f64, f64),
    pub gaussian_sd: f64,
}

impl BenchmarkFunction {
    pub fn quartic1d() -> Self {
        let grid = GridSpec::new(vec![-0.5], vec![5.5], vec![40]).expect("static grid");
        BenchmarkFunction {
            name: "quartic1d".into(),
            objective: Objective::Quartic,
            candidates: grid.points(),
            grid: Some(grid),
            kernel: KernelSpec::new(100.0, 0.5).expect("static kernel"),
            noise_variance: 1e-4,
            threshold: 8.0,
            gamma_shift: (5.0, 0.03),
            gaussian_sd: 0.07,
        }
    }

    pub fn sinusoidal() -> Self {
        let grid = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![30, 60]).expect("static grid");
        let e = std::f64::consts::E;
        BenchmarkFunction {
            name: "sinusoidal".into(),
            objective: Objective::Sinusoidal,
            candidates: grid.points(),
            grid: Some(grid),
            kernel: KernelSpec::new(e * e, 2.0 * (-3.0f64).exp()).expect("static kernel"),
            noise_variance: 1e-4,
            threshold: -0.5,
            gamma_shift: (5.0, 0.03),
            gaussian_sd: 0.07,
        }
    }

    pub fn himmelblau() -> Self {
        let grid = GridSpec::new(vec![-5.0, -5.0], vec![5.0, 5.0], vec![50, 50]).expect("static grid");
        BenchmarkFunction {
            name: "himmelblau".into(),
            objective: Objective::Himmelblau,
            candidates: grid.points(),
            grid: Some(grid),
            kernel: KernelSpec::new(8.0f64.exp(), 2.0).expect("static kernel"),
            noise_variance: 1e-4,
            threshold: 0.0,
            gamma_shift: (5.0, 0.15),
            gaussian_sd: 0.5,
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "quartic1d" => Ok(Self::quartic1d()),
            "sinusoidal" => Ok(Self::sinusoidal()),
            "himmelblau" => Ok(Self::himmelblau()),
            other => Err(Error::param(
                "benchmark",
                format!("unknown benchmark `{other}` (known: {})", BUILTIN_NAMES.join(", ")),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.candidates.dim()
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        self.objective.eval(s)
    }

    pub fn case_names(&self) -> &'static [&'static str] {
        if self.dim() == 1 {
            &["case1", "case2", "unknown_case1", "unknown_case2"]
        } else {
            &["case1", "case2"]
        }
    }

    pub fn case(&self, name: &str) -> Result<InputCase> {
        let d = self.dim();
        let (truth, learner) = match name {
            "case1" => {
                let g = InputDistribution::iid_gamma(d, self.gamma_shift.0, self.gamma_shift.1)?;
                (g.clone(), g)
            }
            "case2" => {
                let g = InputDistribution::iid_gaussian(d, 0.0, self.gaussian_sd)?;
                (g.clone(), g)
            }
            "unknown_case1" if d == 1 => (
                InputDistribution::iid_gaussian(1, 0.0, 0.4)?,
                InputDistribution::estimated(XiPosterior::gamma_precision(0.0, 3.0, 0.48)?)?,
            ),
            "unknown_case2" if d == 1 => (
                InputDistribution::iid_gaussian(1, 0.4, 0.4)?,
                InputDistribution::estimated(XiPosterior::normal_mean(0.0, 0.64, 0.16)?)?,
            ),
            other => {
                return Err(Error::param(
                    "case",
                    format!("unknown case `{other}` for {} (known: {})", self.name, self.case_names().join(", ")),
                ))
            }
        };
        Ok(InputCase {
            name: name.to_string(),
            truth,
            learner,
        })
    }

    pub fn gp_prior(&self) -> Result<GpPosterior> {
        GpPosterior::prior(self.kernel, self.noise_variance, self.dim())
    }

    pub fn observer(&self, truth: &InputDistribution, seed: u64) -> SimulatedObserver<impl Fn(&[f64]) -> f64 + '_> {
        SimulatedObserver {
            f: move |s: &[f64]| self.objective.eval(s),
            truth: truth.clone(),
            noise_sd: self.noise_variance.sqrt(),
            seed,
        }
    }

    /// Keeps `n` candidates drawn without replacement, in original order.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<BenchmarkFunction> {
        let total = self.candidates.len();
        if n == 0 || n > total {
            return Err(Error::param("subsample", format!("size must lie in 1..={total}")));
        }
        let mut rng = stream_rng(seed, Stream::Subsample, 0, 0);
        let mut picked = index::sample(&mut rng, total, n).into_vec();
        picked.sort_unstable();
        let mut out = self.clone();
        out.candidates = self.candidates.select(&picked);
        out.grid = None;
        Ok(out)
    }
}
