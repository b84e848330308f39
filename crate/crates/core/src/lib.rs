//! Level-set estimation of the reliability `P(f(x + ξ) < h)` under input
//! uncertainty, with Gaussian-process surrogates and one-step-ahead acquisition.

pub mod acquisition;
pub mod benchlab;
pub mod engine;
pub mod error;
pub mod gp;
pub mod input;
pub mod normal;
pub mod points;
pub mod reliability;
pub mod seed;

pub use acquisition::{
    a_hat, adaptive_sbar, adaptive_sbar_cached, inner_gain, mile, score_all, straddle, threshold_c,
    AcquisitionEvaluation, Method, SbarSet, ScoringInputs, ThresholdC,
};
pub use engine::{
    run, select_point, stopping, AlgorithmConfig, Exploration, Observation, Observer, RunResult,
    SimulatedObserver, StopDecision, TerminationReason, TrialRecord,
};
pub use error::{Error, Result};
pub use gp::{GpPosterior, KernelSpec, OneStepAhead, Prediction};
pub use input::{InputDistribution, Shift1d, XiPosterior};
pub use points::PointSet;
pub use reliability::{
    classify, misclassification_loss, sweep, ClassificationState, Label, QuadratureSpec, ReliabilityEstimate,
};
pub use seed::{derive, stream_rng, Stream, StreamRng};
