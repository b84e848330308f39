//! The sequential estimate / classify / select / observe loop.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    adaptive_sbar_cached, score_all, threshold_c, Method, ScoringInputs, DEFAULT_OUTER_NODES,
    DEFAULT_STRADDLE_KAPPA,
};
use crate::benchlab::metrics::{metrics, Metrics};
use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::input::InputDistribution;
use crate::points::PointSet;
use crate::reliability::{
    classify, sweep, ClassificationState, QuadratureSpec, ReliabilityEstimate, DEFAULT_QUAD_NODES,
};
use crate::seed::{stream_rng, Stream};

/// Scores within this distance of the maximum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Probability `p_t` of a uniform exploration step at trial `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Exploration {
    Constant { p: f64 },
    /// `p_t = min(1, scale / t)`; the series diverges.
    Harmonic { scale: f64 },
}

impl Exploration {
    pub fn probability(&self, t: u64) -> f64 {
        match *self {
            Exploration::Constant { p } => p,
            Exploration::Harmonic { scale } => (scale / t.max(1) as f64).min(1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Exploration::Constant { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::param("exploration", "p must lie in [0, 1]"))
            }
            Exploration::Harmonic { scale } if !(scale >= 0.0 && scale.is_finite()) => {
                Err(Error::param("exploration", "scale must be non-negative"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub beta_sqrt: f64,
    pub exploration: Exploration,
    pub t_max: u64,
    pub quad_nodes: usize,
    pub outer_nodes: usize,
    pub method: Method,
    pub seed: u64,
    pub stop_on_empty_u: bool,
    pub initial_points: usize,
    pub straddle_kappa: f64,
    /// Keep per-candidate intervals in every trial record.
    pub record_intervals: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            alpha: 0.95,
            epsilon: 0.0,
            beta_sqrt: 3.0,
            exploration: Exploration::Constant { p: 0.0 },
            t_max: 100,
            quad_nodes: DEFAULT_QUAD_NODES,
            outer_nodes: DEFAULT_OUTER_NODES,
            method: Method::Proposed,
            seed: 0,
            stop_on_empty_u: false,
            initial_points: 1,
            straddle_kappa: DEFAULT_STRADDLE_KAPPA,
            record_intervals: false,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", "alpha out of range (0, 1)"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be non-negative"));
        }
        if !(self.alpha - self.epsilon > 0.0) {
            return Err(Error::param("epsilon", "alpha - epsilon must be positive"));
        }
        if !(self.beta_sqrt >= 0.0 && self.beta_sqrt.is_finite()) {
            return Err(Error::param("beta_sqrt", "must be non-negative"));
        }
        if self.t_max < 1 {
            return Err(Error::param("t_max", "must be at least 1"));
        }
        if self.quad_nodes < 1 {
            return Err(Error::param("quad_nodes", "must be at least 1"));
        }
        if self.outer_nodes < 1 {
            return Err(Error::param("outer_nodes", "must be at least 1"));
        }
        if !(self.straddle_kappa >= 0.0 && self.straddle_kappa.is_finite()) {
            return Err(Error::param("straddle_kappa", "must be non-negative"));
        }
        self.exploration.validate()
    }
}

/// A realised input and the value observed there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub s: Vec<f64>,
    pub y: f64,
}

/// Source of observations: given a requested point, returns the realised
/// input and the observed output.
pub trait Observer {
    /// `counter` numbers observations from 0 across the whole run.
    fn observe(&mut self, x: &[f64], counter: u64) -> Result<Observation>;
}

/// Simulated experiment: perturb with the true law, evaluate `f`, add noise.
pub struct SimulatedObserver<F> {
    pub f: F,
    pub truth: InputDistribution,
    pub noise_sd: f64,
    pub seed: u64,
}

impl<F: Fn(&[f64]) -> f64> Observer for SimulatedObserver<F> {
    fn observe(&mut self, x: &[f64], counter: u64) -> Result<Observation> {
        let mut rng = stream_rng(self.seed, Stream::Perturb, counter, 0);
        let s = self.truth.sample(x, &mut rng, 1).point(0).to_vec();
        let mut rng = stream_rng(self.seed, Stream::Noise, counter, 0);
        let eps: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        let y = (self.f)(&s) + self.noise_sd * eps;
        Ok(Observation { s, y })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialObservation {
    pub chosen: usize,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: f64,
}

/// One iteration of the loop. Counts and metrics describe the classification
/// after the new observation has been absorbed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub t: u64,
    pub explore: bool,
    pub chosen: usize,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: f64,
    pub n_high: usize,
    pub n_low: usize,
    pub n_unclassified: usize,
    /// Acquisition score of the winner; `None` on exploration steps.
    pub score: Option<f64>,
    pub metrics: Option<Metrics>,
    pub intervals: Option<Vec<ReliabilityEstimate>>,
    pub elapsed_secs: f64,
}

impl TrialRecord {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &TrialRecord) -> bool {
        let mut a = self.clone();
        a.elapsed_secs = other.elapsed_secs;
        a == *other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum TerminationReason {
    UnclassifiedEmpty,
    Budget,
    GpFailure(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub config: AlgorithmConfig,
    pub initial: Vec<InitialObservation>,
    pub trials: Vec<TrialRecord>,
    pub terminal: ClassificationState,
    pub terminal_estimates: Vec<ReliabilityEstimate>,
    pub reason: TerminationReason,
    pub final_metrics: Option<Metrics>,
    /// Learner's input law at termination (differs from the initial one when `ξ` is estimated).
    pub final_input: InputDistribution,
    #[serde(skip)]
    pub final_gp: Option<GpPosterior>,
}

impl RunResult {
    /// Equality of everything except wall-clock time and the cached posterior.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        self.config == other.config
            && self.initial == other.initial
            && self.trials.len() == other.trials.len()
            && self.trials.iter().zip(&other.trials).all(|(a, b)| a.same_outcome(b))
            && self.terminal == other.terminal
            && self.terminal_estimates == other.terminal_estimates
            && self.reason == other.reason
            && self.final_metrics == other.final_metrics
    }
}

/// Index of the largest score; scores within [`TIE_TOLERANCE`] of the maximum
/// resolve to the lowest index.
pub fn select_point(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::param("scores", "must be finite"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(scores.iter().position(|&s| s >= max - TIE_TOLERANCE).expect("non-empty"))
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopDecision {
    Continue,
    Stop(TerminationReason),
}

/// `t` is the number of completed trials.
pub fn stopping(state: &ClassificationState, t: u64, config: &AlgorithmConfig) -> StopDecision {
    if config.stop_on_empty_u && state.unclassified_is_empty() {
        StopDecision::Stop(TerminationReason::UnclassifiedEmpty)
    } else if t >= config.t_max {
        StopDecision::Stop(TerminationReason::Budget)
    } else {
        StopDecision::Continue
    }
}

/// Runs the active-learning loop.
///
/// `gp0` may already hold data; `initial_points` further random candidates
/// are observed before the first trial. `oracle` holds the true `p*` per
/// candidate and enables per-trial metrics.
#[allow(clippy::too_many_arguments)]
pub fn run(
    config: &AlgorithmConfig,
    gp0: GpPosterior,
    dist: &InputDistribution,
    candidates: &PointSet,
    h: f64,
    observer: &mut dyn Observer,
    oracle: Option<&[f64]>,
) -> Result<RunResult> {
    config.validate()?;
    dist.validate()?;
    let n = candidates.len();
    if n == 0 {
        return Err(Error::EmptyCandidates);
    }
    if candidates.dim() != gp0.dim() || dist.dim() != gp0.dim() {
        return Err(Error::DimensionMismatch {
            expected: gp0.dim(),
            got: candidates.dim(),
        });
    }
    if let Some(truth) = oracle {
        if truth.len() != n {
            return Err(Error::param("oracle", "one truth value per candidate required"));
        }
    }
    let quad = QuadratureSpec::new(config.quad_nodes, config.seed)?;
    let c = threshold_c(config.alpha, config.epsilon, config.beta_sqrt * config.beta_sqrt)?.c;

    let mut gp = gp0;
    let mut dist = dist.clone();
    let mut counter = 0u64;
    let mut initial = Vec::with_capacity(config.initial_points);
    let mut failure = None;

    for i in 0..config.initial_points {
        let mut rng = stream_rng(config.seed, Stream::InitialDesign, i as u64, 0);
        let idx = rng.gen_range(0..n);
        let x = candidates.point(idx);
        let obs = observer.observe(x, counter)?;
        counter += 1;
        match gp.add_observation(&obs.s, obs.y) {
            Ok(next) => gp = next,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
        dist = dist.with_observed_shifts(&shift(x, &obs.s));
        initial.push(InitialObservation {
            chosen: idx,
            x: x.to_vec(),
            s: obs.s,
            y: obs.y,
        });
    }

    let mut current = sweep(&gp, &dist, candidates, h, config.beta_sqrt, &quad, 0);
    let mut state = classify(&current.estimates, config.alpha, config.epsilon);
    let mut trials = Vec::new();

    let mut reason = match failure {
        Some(msg) => Some(TerminationReason::GpFailure(msg)),
        None if config.stop_on_empty_u && state.unclassified_is_empty() => Some(TerminationReason::UnclassifiedEmpty),
        None => None,
    };

    let mut t = 0u64;
    while reason.is_none() {
        t += 1;
        let started = Instant::now();
        let mut rng = stream_rng(config.seed, Stream::Explore, t, 0);
        let explore = rng.gen::<f64>() < config.exploration.probability(t);
        let (idx, score) = if explore {
            (rng.gen_range(0..n), None)
        } else {
            let sbar = (config.method == Method::Proposed)
                .then(|| adaptive_sbar_cached(&gp, &dist, candidates, h, &current.nodes));
            let mut orng = stream_rng(config.seed, Stream::OuterNodes, t, 0);
            let outer_shifts = dist.sample_shifts(&mut orng, config.outer_nodes);
            let inputs = ScoringInputs {
                gp: &gp,
                dist: &dist,
                candidates,
                h,
                c,
                sbar: sbar.as_ref(),
                outer_shifts: &outer_shifts,
                straddle_kappa: config.straddle_kappa,
                seed: config.seed,
                trial: t,
            };
            let evals = score_all(config.method, &inputs)?;
            let scores: Vec<f64> = evals.iter().map(|e| e.score).collect();
            let idx = select_point(&scores)?;
            (idx, Some(scores[idx]))
        };

        let x = candidates.point(idx);
        let obs = observer.observe(x, counter)?;
        counter += 1;
        gp = match gp.add_observation(&obs.s, obs.y) {
            Ok(next) => next,
            Err(e) => {
                reason = Some(TerminationReason::GpFailure(e.to_string()));
                break;
            }
        };
        dist = dist.with_observed_shifts(&shift(x, &obs.s));

        current = sweep(&gp, &dist, candidates, h, config.beta_sqrt, &quad, t);
        state = classify(&current.estimates, config.alpha, config.epsilon);
        let m = oracle.map(|truth| metrics(&state, truth, config.alpha)).transpose()?;

        trials.push(TrialRecord {
            t,
            explore,
            chosen: idx,
            x: x.to_vec(),
            s: obs.s,
            y: obs.y,
            n_high: state.n_high,
            n_low: state.n_low,
            n_unclassified: state.n_unclassified,
            score,
            metrics: m,
            intervals: config.record_intervals.then(|| current.estimates.clone()),
            elapsed_secs: started.elapsed().as_secs_f64(),
        });

        if let StopDecision::Stop(r) = stopping(&state, t, config) {
            reason = Some(r);
        }
    }

    let final_metrics = oracle.map(|truth| metrics(&state, truth, config.alpha)).transpose()?;
    Ok(RunResult {
        config: config.clone(),
        initial,
        trials,
        terminal: state,
        terminal_estimates: current.estimates,
        reason: reason.expect("loop exits with a reason"),
        final_metrics,
        final_input: dist,
        final_gp: Some(gp),
    })
}

fn shift(x: &[f64], s: &[f64]) -> Vec<f64> {
    s.iter().zip(x).map(|(a, b)| a - b).collect()
}
