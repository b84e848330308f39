//! Input perturbation laws `S(x) = x + Z` and Bayesian estimation of an
//! unknown shift parameter.
//!
//! All supported laws are shift families: a realised input is the requested
//! point plus an independent shift vector. Sampling therefore draws shift
//! vectors, which lets callers reuse one set of shifts across candidates
//! (common random numbers).

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::normal;
use crate::points::PointSet;

/// One-dimensional shift law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shift1d {
    Gaussian { mean: f64, sd: f64 },
    /// Shape / scale parameterisation (mean = shape · scale).
    Gamma { shape: f64, scale: f64 },
}

impl Shift1d {
    fn validate(&self) -> Result<()> {
        match *self {
            Shift1d::Gaussian { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::param("mean", "must be finite"));
                }
                if !(sd >= 0.0 && sd.is_finite()) {
                    return Err(Error::param("sd", "must be non-negative"));
                }
            }
            Shift1d::Gamma { shape, scale } => {
                if !(shape > 0.0 && shape.is_finite()) {
                    return Err(Error::param("shape", "must be positive"));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::param("scale", "must be positive"));
                }
            }
        }
        Ok(())
    }

    fn mean(&self) -> f64 {
        match *self {
            Shift1d::Gaussian { mean, .. } => mean,
            Shift1d::Gamma { shape, scale } => shape * scale,
        }
    }

    fn density(&self, z: f64) -> f64 {
        match *self {
            Shift1d::Gaussian { mean, sd } => {
                if sd == 0.0 {
                    return if z == mean { f64::INFINITY } else { 0.0 };
                }
                normal::pdf((z - mean) / sd) / sd
            }
            Shift1d::Gamma { shape, scale } => {
                if z < 0.0 || (z == 0.0 && shape > 1.0) {
                    return 0.0;
                }
                let ln = (shape - 1.0) * z.ln() - z / scale - ln_gamma(shape) - shape * scale.ln();
                ln.exp()
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Shift1d::Gaussian { mean, sd } => {
                if sd == 0.0 {
                    return mean;
                }
                Normal::new(mean, sd).expect("validated").sample(rng)
            }
            Shift1d::Gamma { shape, scale } => Gamma::new(shape, scale).expect("validated").sample(rng),
        }
    }
}

/// Conjugate posterior over the unknown part `ξ` of a Gaussian shift.
///
/// Stores sufficient statistics so that batch and one-at-a-time updates
/// agree exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiPosterior {
    /// Unknown shift mean with a normal prior; the shift variance is known.
    NormalMeanKnownVar {
        prior_mean: f64,
        prior_var: f64,
        known_var: f64,
        #[serde(default)]
        count: u64,
        #[serde(default)]
        sum: f64,
    },
    /// Unknown shift precision with a gamma(shape, rate) prior; the shift mean is known.
    GammaPrecision {
        known_mean: f64,
        prior_shape: f64,
        prior_rate: f64,
        #[serde(default)]
        count: u64,
        #[serde(default)]
        sum_sq: f64,
    },
}

impl XiPosterior {
    pub fn normal_mean(prior_mean: f64, prior_var: f64, known_var: f64) -> Result<Self> {
        let p = XiPosterior::NormalMeanKnownVar {
            prior_mean,
            prior_var,
            known_var,
            count: 0,
            sum: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gamma_precision(known_mean: f64, prior_shape: f64, prior_rate: f64) -> Result<Self> {
        let p = XiPosterior::GammaPrecision {
            known_mean,
            prior_shape,
            prior_rate,
            count: 0,
            sum_sq: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            XiPosterior::NormalMeanKnownVar {
                prior_mean,
                prior_var,
                known_var,
                ..
            } => {
                if !prior_mean.is_finite() {
                    return Err(Error::param("prior_mean", "must be finite"));
                }
                if !(prior_var > 0.0) || !(known_var > 0.0) {
                    return Err(Error::param("prior_var", "variances must be positive"));
                }
            }
            XiPosterior::GammaPrecision {
                known_mean,
                prior_shape,
                prior_rate,
                ..
            } => {
                if !known_mean.is_finite() {
                    return Err(Error::param("known_mean", "must be finite"));
                }
                if !(prior_shape > 0.0) || !(prior_rate > 0.0) {
                    return Err(Error::param("prior_shape", "shape and rate must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        match *self {
            XiPosterior::NormalMeanKnownVar { count, .. } | XiPosterior::GammaPrecision { count, .. } => count,
        }
    }

    /// Conjugate update with realised shifts `s - x`.
    pub fn update(&self, shifts: &[f64]) -> XiPosterior {
        let mut next = self.clone();
        match &mut next {
            XiPosterior::NormalMeanKnownVar { count, sum, .. } => {
                for &z in shifts {
                    *sum += z;
                    *count += 1;
                }
            }
            XiPosterior::GammaPrecision {
                known_mean,
                count,
                sum_sq,
                ..
            } => {
                for &z in shifts {
                    let d = z - *known_mean;
                    *sum_sq += d * d;
                    *count += 1;
                }
            }
        }
        next
    }

    /// Posterior `(mean, variance)` of the shift mean. Only for the normal-mean model.
    pub fn normal_params(&self) -> Option<(f64, f64)> {
        match *self {
            XiPosterior::NormalMeanKnownVar {
                prior_mean,
                prior_var,
                known_var,
                count,
                sum,
            } => {
                let var = 1.0 / (1.0 / prior_var + count as f64 / known_var);
                let mean = var * (prior_mean / prior_var + sum / known_var);
                Some((mean, var))
            }
            _ => None,
        }
    }

    /// Posterior `(shape, rate)` of the shift precision. Only for the gamma-precision model.
    pub fn gamma_params(&self) -> Option<(f64, f64)> {
        match *self {
            XiPosterior::GammaPrecision {
                prior_shape,
                prior_rate,
                count,
                sum_sq,
                ..
            } => Some((prior_shape + 0.5 * count as f64, prior_rate + 0.5 * sum_sq)),
            _ => None,
        }
    }

    /// Mean of the posterior predictive shift.
    pub fn predictive_mean(&self) -> f64 {
        match *self {
            XiPosterior::NormalMeanKnownVar { .. } => self.normal_params().unwrap().0,
            XiPosterior::GammaPrecision { known_mean, .. } => known_mean,
        }
    }

    /// Posterior predictive density of one shift value.
    ///
    /// Normal for the unknown-mean model; Student-t with `2a` degrees of
    /// freedom and scale `sqrt(b / a)` for the unknown-precision model.
    pub fn predictive_shift_density(&self, z: f64) -> f64 {
        match *self {
            XiPosterior::NormalMeanKnownVar { known_var, .. } => {
                let (m, v) = self.normal_params().unwrap();
                let sd = (v + known_var).sqrt();
                normal::pdf((z - m) / sd) / sd
            }
            XiPosterior::GammaPrecision { known_mean, .. } => {
                let (a, b) = self.gamma_params().unwrap();
                let nu = 2.0 * a;
                let scale = (b / a).sqrt();
                let u = (z - known_mean) / scale;
                let ln = ln_gamma(0.5 * (nu + 1.0))
                    - ln_gamma(0.5 * nu)
                    - 0.5 * (nu * std::f64::consts::PI).ln()
                    - 0.5 * (nu + 1.0) * (1.0 + u * u / nu).ln();
                ln.exp() / scale
            }
        }
    }

    fn sample_shift<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            XiPosterior::NormalMeanKnownVar { known_var, .. } => {
                let (m, v) = self.normal_params().unwrap();
                Normal::new(m, (v + known_var).sqrt()).expect("validated").sample(rng)
            }
            XiPosterior::GammaPrecision { known_mean, .. } => {
                let (a, b) = self.gamma_params().unwrap();
                let t: f64 = StudentT::new(2.0 * a).expect("validated").sample(rng);
                known_mean + (b / a).sqrt() * t
            }
        }
    }
}

/// Conjugate update of `post` with realised shifts.
pub fn update_xi(post: &XiPosterior, observed_shifts: &[f64]) -> XiPosterior {
    post.update(observed_shifts)
}

/// Perturbation law `g(s | θ_x)` of the realised input around a requested point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDistribution {
    /// Independent normal shifts per dimension.
    GaussianShift { offsets: Vec<f64>, sds: Vec<f64> },
    /// Independent gamma(shape, scale) shifts per dimension.
    GammaShift { shapes: Vec<f64>, scales: Vec<f64> },
    /// One independent 1-D law per dimension.
    ProductIndependent { components: Vec<Shift1d> },
    /// One-dimensional Gaussian shift whose unknown parameter is marginalised
    /// over its current posterior.
    EstimatedShift { posterior: XiPosterior },
}

impl InputDistribution {
    pub fn gaussian(offsets: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let d = InputDistribution::GaussianShift { offsets, sds };
        d.validate()?;
        Ok(d)
    }

    pub fn gamma(shapes: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        let d = InputDistribution::GammaShift { shapes, scales };
        d.validate()?;
        Ok(d)
    }

    /// Same Gaussian shift law in every one of `dim` dimensions.
    pub fn iid_gaussian(dim: usize, mean: f64, sd: f64) -> Result<Self> {
        Self::gaussian(vec![mean; dim], vec![sd; dim])
    }

    pub fn iid_gamma(dim: usize, shape: f64, scale: f64) -> Result<Self> {
        Self::gamma(vec![shape; dim], vec![scale; dim])
    }

    /// No perturbation at all (`S(x) = x`). Density is a point mass.
    pub fn point_mass(dim: usize) -> Self {
        InputDistribution::GaussianShift {
            offsets: vec![0.0; dim],
            sds: vec![0.0; dim],
        }
    }

    pub fn estimated(posterior: XiPosterior) -> Result<Self> {
        posterior.validate()?;
        Ok(InputDistribution::EstimatedShift { posterior })
    }

    pub fn dim(&self) -> usize {
        match self {
            InputDistribution::GaussianShift { offsets, .. } => offsets.len(),
            InputDistribution::GammaShift { shapes, .. } => shapes.len(),
            InputDistribution::ProductIndependent { components } => components.len(),
            InputDistribution::EstimatedShift { .. } => 1,
        }
    }

    /// Checks parameters. A zero Gaussian sd is allowed and means no
    /// perturbation along that axis.
    pub fn validate(&self) -> Result<()> {
        match self {
            InputDistribution::GaussianShift { offsets, sds } => {
                if offsets.is_empty() || offsets.len() != sds.len() {
                    return Err(Error::param("sds", "need one offset and one sd per dimension"));
                }
                for (&m, &s) in offsets.iter().zip(sds) {
                    Shift1d::Gaussian { mean: m, sd: s }.validate()?;
                }
            }
            InputDistribution::GammaShift { shapes, scales } => {
                if shapes.is_empty() || shapes.len() != scales.len() {
                    return Err(Error::param("scales", "need one shape and one scale per dimension"));
                }
                for (&a, &b) in shapes.iter().zip(scales) {
                    Shift1d::Gamma { shape: a, scale: b }.validate()?;
                }
            }
            InputDistribution::ProductIndependent { components } => {
                if components.is_empty() {
                    return Err(Error::param("components", "must not be empty"));
                }
                for c in components {
                    c.validate()?;
                }
            }
            InputDistribution::EstimatedShift { posterior } => posterior.validate()?,
        }
        Ok(())
    }

    fn component(&self, k: usize) -> Shift1d {
        match self {
            InputDistribution::GaussianShift { offsets, sds } => Shift1d::Gaussian {
                mean: offsets[k],
                sd: sds[k],
            },
            InputDistribution::GammaShift { shapes, scales } => Shift1d::Gamma {
                shape: shapes[k],
                scale: scales[k],
            },
            InputDistribution::ProductIndependent { components } => components[k].clone(),
            InputDistribution::EstimatedShift { .. } => unreachable!("estimated shift has no fixed component"),
        }
    }

    /// `n` shift vectors, draw-major.
    pub fn sample_shifts<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> PointSet {
        let d = self.dim();
        let mut coords = Vec::with_capacity(n * d);
        match self {
            InputDistribution::EstimatedShift { posterior } => {
                for _ in 0..n {
                    coords.push(posterior.sample_shift(rng));
                }
            }
            _ => {
                let comps: Vec<Shift1d> = (0..d).map(|k| self.component(k)).collect();
                for _ in 0..n {
                    for c in &comps {
                        coords.push(c.sample(rng));
                    }
                }
            }
        }
        PointSet::from_flat(d, coords).expect("consistent dimension")
    }

    /// `n` i.i.d. realised inputs around `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, n: usize) -> PointSet {
        PointSet::translated(x, &self.sample_shifts(rng, n))
    }

    /// Density `g(s | θ_x)`. Estimated shifts must go through
    /// [`predictive_density`] instead.
    pub fn density(&self, x: &[f64], s: &[f64]) -> Result<f64> {
        if let InputDistribution::EstimatedShift { .. } = self {
            return Err(Error::NeedsMarginalization);
        }
        if x.len() != self.dim() || s.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.len(),
            });
        }
        Ok(self.shift_density(x, s))
    }

    /// Density used by the learner: the fixed law, or the posterior
    /// predictive for an estimated shift.
    pub fn effective_density(&self, x: &[f64], s: &[f64]) -> f64 {
        match self {
            InputDistribution::EstimatedShift { posterior } => posterior.predictive_shift_density(s[0] - x[0]),
            _ => self.shift_density(x, s),
        }
    }

    fn shift_density(&self, x: &[f64], s: &[f64]) -> f64 {
        let mut p = 1.0;
        for k in 0..self.dim() {
            p *= self.component(k).density(s[k] - x[k]);
            if p == 0.0 {
                break;
            }
        }
        p
    }

    /// Mean shift vector.
    pub fn mean_shift(&self) -> Vec<f64> {
        match self {
            InputDistribution::EstimatedShift { posterior } => vec![posterior.predictive_mean()],
            _ => (0..self.dim()).map(|k| self.component(k).mean()).collect(),
        }
    }

    /// `E[S(x)]`.
    pub fn mean_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean_shift()).map(|(a, b)| a + b).collect()
    }

    /// The posterior over `ξ`, when the law has an estimated part.
    pub fn xi(&self) -> Option<&XiPosterior> {
        match self {
            InputDistribution::EstimatedShift { posterior } => Some(posterior),
            _ => None,
        }
    }

    /// Copy with the `ξ` posterior updated by new shifts; fixed laws are unchanged.
    pub fn with_observed_shifts(&self, shifts: &[f64]) -> InputDistribution {
        match self {
            InputDistribution::EstimatedShift { posterior } => InputDistribution::EstimatedShift {
                posterior: posterior.update(shifts),
            },
            other => other.clone(),
        }
    }
}

/// Posterior predictive density `g_t(s | θ_x) = ∫ g(s | θ_x, ξ) π_t(ξ) dξ`.
pub fn predictive_density(post: &XiPosterior, x: &[f64], s: &[f64]) -> Result<f64> {
    if x.len() != 1 || s.len() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: s.len(),
        });
    }
    Ok(post.predictive_shift_density(s[0] - x[0]))
}
