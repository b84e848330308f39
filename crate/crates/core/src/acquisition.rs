//! Point-selection scores.
//!
//! The proposed score is an approximate expected one-step gain in the number
//! of representative points `s̄ ∈ S̄_t` whose fantasy lower bound clears
//! `α - ε`. With the mean-point approximation the lower-bound condition
//! reduces to `Φ_{s̄|y*} > c`, and since the fantasy mean is linear in `y*`
//! the expectation over `y*` has the closed form
//!
//! ```text
//! Φ( sqrt(σ_t²(s*) + σ²) / |k_t(s̄, s*)| · (h - μ_t(s̄) - Φ⁻¹(c) σ_t(s̄ | s*)) )
//! ```
//!
//! which is then averaged over outer draws `s* ~ g(· | θ_x)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, Projection};
use crate::input::InputDistribution;
use crate::normal;
use crate::points::PointSet;
use crate::reliability::{phi_batch, CandidateNodes};
use crate::seed::{stream_rng, Stream};

/// Cross-covariances below `KAPPA_MIN · σ_f²` are treated as zero.
pub const KAPPA_MIN: f64 = 1e-12;
/// Default number of outer draws `s*` per candidate.
pub const DEFAULT_OUTER_NODES: usize = 64;
/// Default straddle width.
pub const DEFAULT_STRADDLE_KAPPA: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Straddle,
    Mile,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::Straddle, Method::Mile, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Straddle => "straddle",
            Method::Mile => "mile",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proposed" => Ok(Method::Proposed),
            "straddle" => Ok(Method::Straddle),
            "mile" => Ok(Method::Mile),
            "random" => Ok(Method::Random),
            other => Err(Error::param("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Smallest `Φ` satisfying `Φ - β^{1/2} sqrt(Φ(1 - Φ)) > α - ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdC {
    pub alpha_eff: f64,
    pub beta: f64,
    pub c: f64,
}

/// Larger root of `(1+β)c² - (2a + β)c + a² = 0` with `a = α - ε`.
pub fn threshold_c(alpha: f64, epsilon: f64, beta: f64) -> Result<ThresholdC> {
    let a = alpha - epsilon;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::param("alpha", format!("alpha - epsilon = {a} must lie in (0, 1)")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", "must be finite and non-negative"));
    }
    let disc = beta * beta + 4.0 * a * beta * (1.0 - a);
    let c = ((2.0 * a + beta + disc.sqrt()) / (2.0 * (1.0 + beta))).min(1.0);
    Ok(ThresholdC {
        alpha_eff: a,
        beta,
        c,
    })
}

/// One representative point per candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct SbarSet {
    pub points: PointSet,
    /// Value of `Φ_s (1 - Φ_s) g(s | θ_x)` at the chosen point.
    pub integrand: Vec<f64>,
    /// Index into the candidate's node set, `None` for its mean point.
    pub source: Vec<Option<usize>>,
}

impl SbarSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// For each candidate, the maximiser of `Φ_s (1 - Φ_s) g(s | θ_x)` over its
/// mean point followed by its search nodes (first maximum wins).
pub fn adaptive_sbar(
    gp: &GpPosterior,
    dist: &InputDistribution,
    candidates: &PointSet,
    h: f64,
    search_nodes: &[PointSet],
) -> Result<SbarSet> {
    if search_nodes.len() != candidates.len() {
        return Err(Error::param("search_nodes", "need one node set per candidate"));
    }
    let cached: Vec<CandidateNodes> = search_nodes
        .iter()
        .map(|n| CandidateNodes {
            nodes: n.clone(),
            phi: phi_batch(gp, h, n),
        })
        .collect();
    Ok(adaptive_sbar_cached(gp, dist, candidates, h, &cached))
}

/// [`adaptive_sbar`] reusing `Φ_s` already computed on the quadrature nodes.
pub fn adaptive_sbar_cached(
    gp: &GpPosterior,
    dist: &InputDistribution,
    candidates: &PointSet,
    h: f64,
    nodes: &[CandidateNodes],
) -> SbarSet {
    let dim = candidates.dim();
    let mut means = PointSet::with_capacity(dim, candidates.len());
    for x in candidates.iter() {
        means.push(&dist.mean_point(x)).expect("dimension");
    }
    let phi_means = phi_batch(gp, h, &means);

    let picks: Vec<(Vec<f64>, f64, Option<usize>)> = (0..candidates.len())
        .into_par_iter()
        .map(|i| {
            let x = candidates.point(i);
            let cand = &nodes[i];
            let m = means.point(i);
            let pm = phi_means[i];
            let head = pm * (1.0 - pm) * dist.effective_density(x, m);
            let tail = cand
                .nodes
                .iter()
                .zip(&cand.phi)
                .map(|(s, &p)| p * (1.0 - p) * dist.effective_density(x, s));
            let (k, v) = argmax_first(std::iter::once(head).chain(tail));
            if k == 0 {
                (m.to_vec(), v, None)
            } else {
                (cand.nodes.point(k - 1).to_vec(), v, Some(k - 1))
            }
        })
        .collect();

    let mut points = PointSet::with_capacity(dim, picks.len());
    let mut integrand = Vec::with_capacity(picks.len());
    let mut source = Vec::with_capacity(picks.len());
    for (p, v, src) in picks {
        points.push(&p).expect("dimension");
        integrand.push(v);
        source.push(src);
    }
    SbarSet {
        points,
        integrand,
        source,
    }
}

/// Probability over `y*` that the fantasy classifies one representative point
/// into the upper set.
#[inline]
pub fn gain_term(h: f64, z_c: f64, kappa_min: f64, base_mean: f64, base_var: f64, star_pred_var: f64, cross_cov: f64) -> f64 {
    let cond_var = (base_var - cross_cov * cross_cov / star_pred_var).max(0.0);
    let margin = h - base_mean - z_c * cond_var.sqrt();
    if cross_cov.abs() < kappa_min {
        return if margin > 0.0 { 1.0 } else { 0.0 };
    }
    normal::cdf(margin * star_pred_var.sqrt() / cross_cov.abs())
}

/// Representative points pushed through the posterior once per trial, ready
/// to score any number of hypothetical observation sites.
pub struct GainContext<'a> {
    gp: &'a GpPosterior,
    sbar: Projection,
    h: f64,
    c: f64,
    z_c: f64,
    kappa_min: f64,
}

impl<'a> GainContext<'a> {
    pub fn new(gp: &'a GpPosterior, sbar_points: &PointSet, h: f64, c: f64) -> Self {
        GainContext {
            gp,
            sbar: gp.project(sbar_points),
            h,
            c,
            z_c: normal::quantile(c),
            kappa_min: KAPPA_MIN * gp.kernel().signal_variance,
        }
    }

    /// `Σ_{s̄} E_{y*}[1{Φ_{s̄|y*} > c}]` for every site in `stars`.
    pub fn inner_gains(&self, stars: &PointSet) -> Vec<f64> {
        let star = self.gp.project(stars);
        let block = self.sbar.cross_cov_block(&star, self.gp.kernel());
        let noise = self.gp.effective_noise();
        let m = star.len();
        let mut sums = vec![0.0; m];
        for i in 0..self.sbar.len() {
            let (mu, var) = (self.sbar.means[i], self.sbar.variances[i]);
            let row = &block[i * m..(i + 1) * m];
            for (j, (sum, &kt)) in sums.iter_mut().zip(row).enumerate() {
                *sum += gain_term(self.h, self.z_c, self.kappa_min, mu, var, star.variances[j] + noise, kt);
            }
        }
        sums
    }

    /// Current count of representative points with `Φ_s̄ > c`.
    pub fn baseline(&self) -> f64 {
        self.sbar
            .means
            .iter()
            .zip(&self.sbar.variances)
            .filter(|(m, v)| normal::cdf((self.h - **m) / v.sqrt()) > self.c)
            .count() as f64
    }
}

/// Inner sum of the proposed score for a single site `s*`.
pub fn inner_gain(gp: &GpPosterior, s_star: &[f64], sbar: &SbarSet, h: f64, c: f64) -> f64 {
    let stars = PointSet::from_flat(s_star.len(), s_star.to_vec()).expect("dimension");
    GainContext::new(gp, &sbar.points, h, c).inner_gains(&stars)[0]
}

/// Score of one candidate with per-site diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionEvaluation {
    pub candidate: usize,
    pub score: f64,
    /// Inner sums per outer site (proposed / MILE only).
    pub inner_sums: Vec<f64>,
    /// Candidate-independent offset subtracted from the score.
    pub baseline: f64,
    pub method: Method,
}

/// Proposed score for candidate `index` with outer sites `outer_nodes`.
#[allow(clippy::too_many_arguments)]
pub fn a_hat(
    gp: &GpPosterior,
    candidates: &PointSet,
    index: usize,
    sbar: &SbarSet,
    h: f64,
    c: f64,
    outer_nodes: &PointSet,
) -> AcquisitionEvaluation {
    debug_assert!(index < candidates.len());
    let ctx = GainContext::new(gp, &sbar.points, h, c);
    proposed_score(&ctx, index, outer_nodes)
}

fn proposed_score(ctx: &GainContext<'_>, index: usize, outer_nodes: &PointSet) -> AcquisitionEvaluation {
    let inner = ctx.inner_gains(outer_nodes);
    let baseline = ctx.baseline();
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    AcquisitionEvaluation {
        candidate: index,
        score: mean - baseline,
        inner_sums: inner,
        baseline,
        method: Method::Proposed,
    }
}

/// `κ σ_t(x) - |μ_t(x) - h|`.
pub fn straddle(gp: &GpPosterior, x: &[f64], h: f64, kappa: f64) -> f64 {
    let p = gp.posterior(x);
    kappa * p.sd() - (p.mean - h).abs()
}

/// Input-certain specialisation: `s* = x` and `S̄ = X`.
pub fn mile(gp: &GpPosterior, candidates: &PointSet, x: &[f64], h: f64, c: f64) -> f64 {
    let ctx = GainContext::new(gp, candidates, h, c);
    let star = PointSet::from_flat(x.len(), x.to_vec()).expect("dimension");
    ctx.inner_gains(&star)[0] - ctx.baseline()
}

/// Everything a candidate sweep needs for one trial.
pub struct ScoringInputs<'a> {
    pub gp: &'a GpPosterior,
    pub dist: &'a InputDistribution,
    pub candidates: &'a PointSet,
    pub h: f64,
    pub c: f64,
    /// Required for the proposed method.
    pub sbar: Option<&'a SbarSet>,
    /// Shared outer shifts (common random numbers across candidates).
    pub outer_shifts: &'a PointSet,
    pub straddle_kappa: f64,
    pub seed: u64,
    pub trial: u64,
}

/// Scores every candidate with `method`.
pub fn score_all(method: Method, inp: &ScoringInputs<'_>) -> Result<Vec<AcquisitionEvaluation>> {
    let n = inp.candidates.len();
    if n == 0 {
        return Err(Error::EmptyCandidates);
    }
    let out = match method {
        Method::Proposed => {
            let sbar = inp
                .sbar
                .ok_or_else(|| Error::param("sbar", "proposed method requires representative points"))?;
            let ctx = GainContext::new(inp.gp, &sbar.points, inp.h, inp.c);
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let stars = PointSet::translated(inp.candidates.point(i), inp.outer_shifts);
                    proposed_score(&ctx, i, &stars)
                })
                .collect()
        }
        Method::Mile => {
            let ctx = GainContext::new(inp.gp, inp.candidates, inp.h, inp.c);
            let inner = ctx.inner_gains(inp.candidates);
            let baseline = ctx.baseline();
            inner
                .into_iter()
                .enumerate()
                .map(|(i, g)| AcquisitionEvaluation {
                    candidate: i,
                    score: g - baseline,
                    inner_sums: vec![g],
                    baseline,
                    method: Method::Mile,
                })
                .collect()
        }
        Method::Straddle => {
            let preds = inp.gp.posterior_batch(inp.candidates);
            preds
                .iter()
                .enumerate()
                .map(|(i, p)| AcquisitionEvaluation {
                    candidate: i,
                    score: inp.straddle_kappa * p.sd() - (p.mean - inp.h).abs(),
                    inner_sums: Vec::new(),
                    baseline: 0.0,
                    method: Method::Straddle,
                })
                .collect()
        }
        Method::Random => {
            let mut rng = stream_rng(inp.seed, Stream::RandomScore, inp.trial, 0);
            (0..n)
                .map(|i| AcquisitionEvaluation {
                    candidate: i,
                    score: rng.gen::<f64>(),
                    inner_sums: Vec::new(),
                    baseline: 0.0,
                    method: Method::Random,
                })
                .collect()
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelSpec;
    use approx::assert_abs_diff_eq;

    /// Root of `Φ - β^{1/2} sqrt(Φ(1-Φ)) = a` on `(a, 1]` by bisection.
    fn bisect_c(a: f64, beta: f64) -> f64 {
        let g = |p: f64| p - beta.sqrt() * (p * (1.0 - p)).max(0.0).sqrt() - a;
        let (mut lo, mut hi) = (a, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn threshold_c_examples() {
        assert_eq!(threshold_c(0.95, 0.0, 0.0).unwrap().c, 0.95);
        let c = threshold_c(0.95, 0.0, 9.0).unwrap().c;
        assert_abs_diff_eq!(c, bisect_c(0.95, 9.0), epsilon = 1e-12);
        assert_abs_diff_eq!(c, (1.9 + 9.0 + (81.0f64 + 34.2 - 32.49).sqrt()) / 20.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c, 0.99972, epsilon = 1e-5);
        let c = threshold_c(0.5, 0.0, 1.0).unwrap().c;
        assert_abs_diff_eq!(c, (2.0 + 2f64.sqrt()) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c, bisect_c(0.5, 1.0), epsilon = 1e-12);
        assert!(threshold_c(0.95, 0.96, 1.0).is_err());
        assert!(threshold_c(1.2, 0.0, 1.0).is_err());
    }

    #[test]
    fn gain_term_edge_cases() {
        // uncorrelated site: y*-independent indicator
        assert_eq!(gain_term(8.0, 1.0, 1e-10, -50.0, 1.0, 1.0, 0.0), 1.0);
        assert_eq!(gain_term(8.0, 1.0, 1e-10, 50.0, 1.0, 1.0, 0.0), 0.0);
        // zero margin with correlation: Φ(0)
        let (h, zc, mu, var, c, kt) = (1.0, 0.5, 0.2, 2.0, 3.0, 1.2);
        let cond = var - kt * kt / c;
        let h_tied = mu + zc * f64::sqrt(cond);
        assert_abs_diff_eq!(gain_term(h_tied, zc, 1e-10, mu, var, c, kt), 0.5, epsilon = 1e-12);
        let _ = h;
    }

    #[test]
    fn straddle_examples() {
        let gp = GpPosterior::prior(KernelSpec::new(100.0, 0.5).unwrap(), 1e-4, 1).unwrap();
        assert_abs_diff_eq!(straddle(&gp, &[1.0], 8.0, 1.96), 11.6, epsilon = 1e-12);
        assert_abs_diff_eq!(straddle(&gp, &[1.0], 0.0, 1.96), 19.6, epsilon = 1e-12);
    }

    #[test]
    fn method_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("ucb".parse::<Method>().is_err());
    }

    #[test]
    fn mile_equals_a_hat_with_point_mass() {
        let kernel = KernelSpec::new(100.0, 0.5).unwrap();
        let gp = GpPosterior::fit(kernel, 1e-4, PointSet::from_scalars(&[0.3, 1.9, 4.0]), vec![-5.0, 2.0, 9.0]).unwrap();
        let cands = PointSet::from_scalars(&[0.0, 0.8, 1.6, 2.4, 3.2, 4.0, 4.8]);
        let sbar = SbarSet {
            points: cands.clone(),
            integrand: vec![0.0; cands.len()],
            source: vec![None; cands.len()],
        };
        let c = threshold_c(0.95, 0.0, 9.0).unwrap().c;
        for i in 0..cands.len() {
            let x = cands.point(i);
            let outer = PointSet::from_flat(1, x.to_vec()).unwrap();
            let a = a_hat(&gp, &cands, i, &sbar, 8.0, c, &outer);
            assert_abs_diff_eq!(a.score, mile(&gp, &cands, x, 8.0, c), epsilon = 1e-12);
        }
    }

    #[test]
    fn saturated_posterior_gives_flat_scores() {
        // far below threshold everywhere with tiny variance
        let kernel = KernelSpec::new(1.0, 0.5).unwrap();
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let gp = GpPosterior::fit(kernel, 1e-6, PointSet::from_scalars(&xs), vec![-1.0; 30]).unwrap();
        let cands = PointSet::from_scalars(&[0.5, 1.0, 1.5, 2.0]);
        let c = threshold_c(0.95, 0.0, 9.0).unwrap().c;
        let scores: Vec<f64> = (0..4).map(|i| mile(&gp, &cands, cands.point(i), 100.0, c)).collect();
        for s in &scores {
            assert_abs_diff_eq!(*s, scores[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn random_scores_are_seeded() {
        let gp = GpPosterior::prior(KernelSpec::new(1.0, 1.0).unwrap(), 1e-4, 1).unwrap();
        let cands = PointSet::from_scalars(&[0.0, 1.0, 2.0]);
        let dist = InputDistribution::iid_gaussian(1, 0.0, 0.1).unwrap();
        let shifts = PointSet::from_scalars(&[0.0]);
        let inp = ScoringInputs {
            gp: &gp,
            dist: &dist,
            candidates: &cands,
            h: 0.0,
            c: 0.9,
            sbar: None,
            outer_shifts: &shifts,
            straddle_kappa: 1.96,
            seed: 5,
            trial: 2,
        };
        let a = score_all(Method::Random, &inp).unwrap();
        let b = score_all(Method::Random, &inp).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|e| (0.0..1.0).contains(&e.score)));
        assert!(score_all(Method::Proposed, &inp).is_err());
    }
}
