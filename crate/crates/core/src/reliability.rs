//! Credible intervals for the reliability `p*_x = P(f(S(x)) < h)` and the
//! three-way classification built on them.
//!
//! For each candidate the posterior mean `μ^(p)` and the spread `γ²` are
//! Monte-Carlo averages of `Φ_s` and `Φ_s (1 - Φ_s)` over one shared set of
//! nodes drawn from the input law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::input::InputDistribution;
use crate::normal;
use crate::points::PointSet;
use crate::seed::{stream_rng, Stream};

/// Default number of quadrature nodes per candidate.
pub const DEFAULT_QUAD_NODES: usize = 1000;

/// Monte-Carlo node budget and seeding for `μ^(p)` / `γ²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn new(nodes: usize, seed: u64) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::param("quad_nodes", "must be at least 1"));
        }
        Ok(QuadratureSpec { nodes, seed })
    }

    /// Nodes for candidate `index` at trial `trial`.
    pub fn nodes_for(&self, dist: &InputDistribution, x: &[f64], trial: u64, index: usize) -> PointSet {
        let mut rng = stream_rng(self.seed, Stream::Quadrature, trial, index as u64);
        dist.sample(x, &mut rng, self.nodes)
    }
}

/// `Φ((h - μ_t(s)) / σ_t(s))`.
pub fn phi_s(gp: &GpPosterior, h: f64, s: &[f64]) -> f64 {
    let p = gp.posterior(s);
    normal::cdf((h - p.mean) / p.sd())
}

/// `Φ_s` for a batch of points.
pub fn phi_batch(gp: &GpPosterior, h: f64, points: &PointSet) -> Vec<f64> {
    let proj = gp.project(points);
    proj.means
        .iter()
        .zip(&proj.variances)
        .map(|(m, v)| normal::cdf((h - m) / v.sqrt()))
        .collect()
}

/// `(μ^(p), γ²)` from node values of `Φ_s`.
pub fn moments_from_phi(phi: &[f64]) -> (f64, f64) {
    let n = phi.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for &p in phi {
        a += p;
        b += p * (1.0 - p);
    }
    ((a / n).clamp(0.0, 1.0), (b / n).clamp(0.0, 0.25))
}

/// `μ_t^(p)(x)` estimated on the nodes of `(trial, index)`.
pub fn mu_p(
    gp: &GpPosterior,
    dist: &InputDistribution,
    x: &[f64],
    h: f64,
    quad: &QuadratureSpec,
    trial: u64,
    index: usize,
) -> f64 {
    let nodes = quad.nodes_for(dist, x, trial, index);
    moments_from_phi(&phi_batch(gp, h, &nodes)).0
}

/// `γ_t²(x)` estimated on the same nodes as [`mu_p`].
pub fn gamma_sq(
    gp: &GpPosterior,
    dist: &InputDistribution,
    x: &[f64],
    h: f64,
    quad: &QuadratureSpec,
    trial: u64,
    index: usize,
) -> f64 {
    let nodes = quad.nodes_for(dist, x, trial, index);
    moments_from_phi(&phi_batch(gp, h, &nodes)).1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "H")]
    High,
    #[serde(rename = "L")]
    Low,
    #[serde(rename = "U")]
    Unclassified,
}

impl Label {
    pub fn as_char(self) -> char {
        match self {
            Label::High => 'H',
            Label::Low => 'L',
            Label::Unclassified => 'U',
        }
    }
}

/// Interval `[μ^(p) - β^{1/2} γ, μ^(p) + β^{1/2} γ]` for one candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityEstimate {
    pub mu_p: f64,
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ReliabilityEstimate {
    pub fn new(mu_p: f64, gamma_sq: f64, beta_sqrt: f64) -> Self {
        let gamma = gamma_sq.max(0.0).sqrt();
        ReliabilityEstimate {
            mu_p,
            gamma,
            lower: mu_p - beta_sqrt * gamma,
            upper: mu_p + beta_sqrt * gamma,
        }
    }

    /// `H` if `l > α - ε`, else `L` if `u ≤ α + ε`, else `U`.
    pub fn label(&self, alpha: f64, epsilon: f64) -> Label {
        if self.lower > alpha - epsilon {
            Label::High
        } else if self.upper <= alpha + epsilon {
            Label::Low
        } else {
            Label::Unclassified
        }
    }
}

/// Node set and `Φ_s` values kept for one candidate during a trial.
#[derive(Clone, Debug)]
pub struct CandidateNodes {
    pub nodes: PointSet,
    pub phi: Vec<f64>,
}

/// Estimates for every candidate at one trial, with the node data retained.
#[derive(Clone, Debug)]
pub struct ReliabilitySweep {
    pub estimates: Vec<ReliabilityEstimate>,
    pub nodes: Vec<CandidateNodes>,
}

/// Computes intervals for all candidates. Candidates are independent and
/// evaluated in parallel; the result does not depend on the worker count.
pub fn sweep(
    gp: &GpPosterior,
    dist: &InputDistribution,
    candidates: &PointSet,
    h: f64,
    beta_sqrt: f64,
    quad: &QuadratureSpec,
    trial: u64,
) -> ReliabilitySweep {
    let per: Vec<(ReliabilityEstimate, CandidateNodes)> = (0..candidates.len())
        .into_par_iter()
        .map(|i| {
            let nodes = quad.nodes_for(dist, candidates.point(i), trial, i);
            let phi = phi_batch(gp, h, &nodes);
            let (m, g2) = moments_from_phi(&phi);
            (ReliabilityEstimate::new(m, g2, beta_sqrt), CandidateNodes { nodes, phi })
        })
        .collect();
    let (estimates, nodes) = per.into_iter().unzip();
    ReliabilitySweep { estimates, nodes }
}

/// Labels over the candidate set with per-label counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationState {
    pub labels: Vec<Label>,
    pub n_high: usize,
    pub n_low: usize,
    pub n_unclassified: usize,
}

impl ClassificationState {
    pub fn from_labels(labels: Vec<Label>) -> Self {
        let mut s = ClassificationState {
            labels,
            n_high: 0,
            n_low: 0,
            n_unclassified: 0,
        };
        for l in &s.labels {
            match l {
                Label::High => s.n_high += 1,
                Label::Low => s.n_low += 1,
                Label::Unclassified => s.n_unclassified += 1,
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn unclassified_is_empty(&self) -> bool {
        self.n_unclassified == 0
    }

    pub fn high_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(|(_, l)| **l == Label::High).map(|(i, _)| i)
    }

    /// Compact `H`/`L`/`U` string, one character per candidate.
    pub fn label_string(&self) -> String {
        self.labels.iter().map(|l| l.as_char()).collect()
    }
}

pub fn classify(estimates: &[ReliabilityEstimate], alpha: f64, epsilon: f64) -> ClassificationState {
    ClassificationState::from_labels(estimates.iter().map(|e| e.label(alpha, epsilon)).collect())
}

/// `e_α(x)`: `max(0, p* - α)` on `L`, `max(0, α - p*)` on `H`, zero on `U`.
pub fn misclassification_loss(p_star: &[f64], state: &ClassificationState, alpha: f64) -> Result<Vec<f64>> {
    if p_star.len() != state.len() {
        return Err(Error::param(
            "p_star",
            format!("{} truth values for {} candidates", p_star.len(), state.len()),
        ));
    }
    Ok(p_star
        .iter()
        .zip(&state.labels)
        .map(|(&p, l)| match l {
            Label::Low => (p - alpha).max(0.0),
            Label::High => (alpha - p).max(0.0),
            Label::Unclassified => 0.0,
        })
        .collect())
}
