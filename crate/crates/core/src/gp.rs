//! Exact Gaussian-process regression with a zero prior mean and a Gaussian
//! kernel, plus one-step-ahead conditioning on a hypothetical observation.
//!
//! The posterior keeps a packed lower Cholesky factor of `K + (σ² + jitter) I`
//! so that new observations extend the factor by one row instead of
//! refactorising. Queries are evaluated in batches: the kernel block
//! `K(train, queries)` is pushed through a forward substitution row by row,
//! which keeps the inner loops contiguous over the query axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{sq_dist, PointSet};

/// Relative variance floor applied to predictive variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// First non-zero jitter level, relative to the signal variance.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter level tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Gaussian kernel `σ_f² exp(-‖a - b‖² / L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub signal_variance: f64,
    pub length_scale: f64,
}

impl KernelSpec {
    pub fn new(signal_variance: f64, length_scale: f64) -> Result<Self> {
        let spec = KernelSpec {
            signal_variance,
            length_scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::param("signal_variance", "must be positive and finite"));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::param("length_scale", "must be positive and finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance * (-sq_dist(a, b) / self.length_scale).exp()
    }
}

/// Predictive mean and (floored) variance of the latent function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    #[inline]
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Query points pushed through the current posterior.
///
/// Holds `V = L⁻¹ K(train, queries)` (row-major, one row per training
/// point) so that posterior cross-covariances between two projections cost
/// one inner product each.
#[derive(Clone, Debug)]
pub struct Projection {
    points: PointSet,
    v: Vec<f64>,
    pub means: Vec<f64>,
    /// `k(q, q) - vᵀv` before clamping.
    pub raw_variances: Vec<f64>,
    /// Variances clamped to `[floor, σ_f²]`.
    pub variances: Vec<f64>,
}

impl Projection {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn prediction(&self, i: usize) -> Prediction {
        Prediction {
            mean: self.means[i],
            variance: self.variances[i],
        }
    }

    /// Posterior covariance between query `i` of `self` and query `j` of `other`.
    pub fn cross_cov(&self, i: usize, other: &Projection, j: usize, kernel: &KernelSpec) -> f64 {
        let n_a = self.len();
        let n_b = other.len();
        let t = self.v.len() / n_a.max(1);
        let mut acc = 0.0;
        for r in 0..t {
            acc += self.v[r * n_a + i] * other.v[r * n_b + j];
        }
        kernel.eval(self.points.point(i), other.points.point(j)) - acc
    }

    /// Full block of posterior covariances, `out[i * other.len() + j]`.
    pub fn cross_cov_block(&self, other: &Projection, kernel: &KernelSpec) -> Vec<f64> {
        let n_a = self.len();
        let n_b = other.len();
        let mut out = vec![0.0; n_a * n_b];
        if n_a == 0 || n_b == 0 {
            return out;
        }
        let t = self.v.len() / n_a;
        for r in 0..t {
            let row_a = &self.v[r * n_a..(r + 1) * n_a];
            let row_b = &other.v[r * n_b..(r + 1) * n_b];
            for (i, &va) in row_a.iter().enumerate() {
                let dst = &mut out[i * n_b..(i + 1) * n_b];
                for (d, &vb) in dst.iter_mut().zip(row_b) {
                    *d += va * vb;
                }
            }
        }
        for i in 0..n_a {
            let a = self.points.point(i);
            for j in 0..n_b {
                let k = kernel.eval(a, other.points.point(j));
                out[i * n_b + j] = k - out[i * n_b + j];
            }
        }
        out
    }
}

/// Mean and variance of the posterior after a hypothetical observation at
/// `s*`, expressed as a function of the unseen value `y*`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneStepAhead {
    /// `k_t(s̄, s*) / (σ_t²(s*) + σ²)`
    pub slope: f64,
    /// `σ_t(s̄ | s*)`
    pub conditional_sd: f64,
    /// `μ_t(s̄)`
    pub base_mean: f64,
    /// `σ_t²(s̄)`
    pub base_variance: f64,
    /// `μ_t(s*)`
    pub star_mean: f64,
    /// `σ_t²(s*) + σ²`
    pub star_predictive_var: f64,
    /// `k_t(s̄, s*)`
    pub cross_cov: f64,
}

impl OneStepAhead {
    #[inline]
    pub fn fantasy_mean(&self, y_star: f64) -> f64 {
        self.base_mean + self.slope * (y_star - self.star_mean)
    }

    #[inline]
    pub fn fantasy_variance(&self) -> f64 {
        self.conditional_sd * self.conditional_sd
    }
}

#[derive(Clone, Debug)]
pub struct GpPosterior {
    kernel: KernelSpec,
    noise_variance: f64,
    jitter: f64,
    inputs: PointSet,
    outputs: Vec<f64>,
    /// Packed rows of the lower Cholesky factor; row `i` starts at `i(i+1)/2`.
    chol: Vec<f64>,
    /// `L⁻¹ y`
    whitened: Vec<f64>,
    /// `C⁻¹ y`
    alpha: Vec<f64>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..n {
        s += a[k] * b[k];
    }
    s
}

fn jitter_levels(signal_variance: f64) -> impl Iterator<Item = f64> {
    let mut levels = vec![0.0];
    let mut j = JITTER_START;
    while j <= JITTER_MAX * (1.0 + 1e-9) {
        levels.push(j * signal_variance);
        j *= 10.0;
    }
    levels.into_iter()
}

fn cholesky_packed(inputs: &PointSet, kernel: &KernelSpec, diag: f64) -> Option<Vec<f64>> {
    let n = inputs.len();
    let mut l = vec![0.0; row_start(n)];
    for i in 0..n {
        let xi = inputs.point(i);
        let ri = row_start(i);
        for j in 0..=i {
            let rj = row_start(j);
            let mut s = kernel.eval(xi, inputs.point(j));
            if i == j {
                s += diag;
            }
            s -= dot(&l[ri..ri + j], &l[rj..rj + j]);
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[ri + i] = s.sqrt();
            } else {
                l[ri + j] = s / l[rj + j];
            }
        }
    }
    Some(l)
}

impl GpPosterior {
    /// Posterior with no data.
    pub fn prior(kernel: KernelSpec, noise_variance: f64, dim: usize) -> Result<Self> {
        Self::fit(kernel, noise_variance, PointSet::new(dim), Vec::new())
    }

    /// Batch fit with jitter escalation.
    pub fn fit(
        kernel: KernelSpec,
        noise_variance: f64,
        inputs: PointSet,
        outputs: Vec<f64>,
    ) -> Result<Self> {
        Self::fit_from_level(kernel, noise_variance, inputs, outputs, 0.0)
    }

    fn fit_from_level(
        kernel: KernelSpec,
        noise_variance: f64,
        inputs: PointSet,
        outputs: Vec<f64>,
        min_jitter: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::param("noise_variance", "must be positive and finite"));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::param(
                "outputs",
                format!("{} outputs for {} inputs", outputs.len(), inputs.len()),
            ));
        }
        if outputs.iter().any(|y| !y.is_finite()) || inputs.as_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::param("observations", "must be finite"));
        }
        let mut last = 0.0;
        for jitter in jitter_levels(kernel.signal_variance).filter(|&j| j >= min_jitter) {
            last = jitter;
            if let Some(chol) = cholesky_packed(&inputs, &kernel, noise_variance + jitter) {
                let mut gp = GpPosterior {
                    kernel,
                    noise_variance,
                    jitter,
                    inputs,
                    outputs,
                    chol,
                    whitened: Vec::new(),
                    alpha: Vec::new(),
                };
                gp.whitened = gp.forward_single(&gp.outputs);
                gp.alpha = gp.back_solve(&gp.whitened);
                return Ok(gp);
            }
        }
        Err(Error::IllConditioned { jitter: last })
    }

    /// New posterior including the observation `(s, y)`.
    ///
    /// Extends the Cholesky factor by one row; falls back to a refit at the
    /// next jitter level if the new pivot is not positive.
    pub fn add_observation(&self, s: &[f64], y: f64) -> Result<Self> {
        if s.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.len(),
            });
        }
        if !y.is_finite() || s.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("observation", "must be finite"));
        }
        let t = self.len();
        let k: Vec<f64> = self.inputs.iter().map(|xi| self.kernel.eval(xi, s)).collect();
        let l = self.forward_single(&k);
        let pivot = self.kernel.signal_variance + self.effective_noise() - dot(&l, &l);

        let mut inputs = self.inputs.clone();
        inputs.push(s)?;
        let mut outputs = self.outputs.clone();
        outputs.push(y);

        if !(pivot > 0.0) || !pivot.is_finite() {
            let next = jitter_levels(self.kernel.signal_variance)
                .find(|&j| j > self.jitter)
                .ok_or(Error::IllConditioned { jitter: self.jitter })?;
            return Self::fit_from_level(self.kernel, self.noise_variance, inputs, outputs, next);
        }

        let d = pivot.sqrt();
        let mut chol = Vec::with_capacity(row_start(t + 1));
        chol.extend_from_slice(&self.chol);
        chol.extend_from_slice(&l);
        chol.push(d);

        let mut whitened = self.whitened.clone();
        whitened.push((y - dot(&l, &self.whitened)) / d);

        let mut gp = GpPosterior {
            kernel: self.kernel,
            noise_variance: self.noise_variance,
            jitter: self.jitter,
            inputs,
            outputs,
            chol,
            whitened,
            alpha: Vec::new(),
        };
        gp.alpha = gp.back_solve(&gp.whitened);
        Ok(gp)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Diagonal jitter currently added on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Variance of a fresh observation around the latent value, as seen by the factor.
    pub fn effective_noise(&self) -> f64 {
        self.noise_variance + self.jitter
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn inputs(&self) -> &PointSet {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn variance_floor(&self) -> f64 {
        VARIANCE_FLOOR * self.kernel.signal_variance
    }

    /// Dense copy of the lower Cholesky factor (row-major `t × t`).
    pub fn cholesky_dense(&self) -> Vec<f64> {
        let t = self.len();
        let mut out = vec![0.0; t * t];
        for i in 0..t {
            let r = row_start(i);
            out[i * t..i * t + i + 1].copy_from_slice(&self.chol[r..r + i + 1]);
        }
        out
    }

    fn forward_single(&self, b: &[f64]) -> Vec<f64> {
        let mut v = b.to_vec();
        self.forward_in_place(&mut v, 1);
        v
    }

    /// Solves `L V = B` in place for `B` stored as `t × n` row-major.
    fn forward_in_place(&self, v: &mut [f64], n: usize) {
        let t = self.len();
        for i in 0..t {
            let ri = row_start(i);
            let (head, tail) = v.split_at_mut(i * n);
            let row_i = &mut tail[..n];
            for j in 0..i {
                let lij = self.chol[ri + j];
                let row_j = &head[j * n..(j + 1) * n];
                for (a, &b) in row_i.iter_mut().zip(row_j) {
                    *a -= lij * b;
                }
            }
            let inv = 1.0 / self.chol[ri + i];
            for a in row_i.iter_mut() {
                *a *= inv;
            }
        }
    }

    /// Solves `Lᵀ x = z`.
    fn back_solve(&self, z: &[f64]) -> Vec<f64> {
        let t = self.len();
        let mut x = z.to_vec();
        for j in (0..t).rev() {
            let rj = row_start(j);
            x[j] /= self.chol[rj + j];
            let xj = x[j];
            for i in 0..j {
                x[i] -= self.chol[rj + i] * xj;
            }
        }
        x
    }

    /// Pushes a batch of query points through the posterior.
    pub fn project(&self, queries: &PointSet) -> Projection {
        let t = self.len();
        let n = queries.len();
        let sf2 = self.kernel.signal_variance;
        let floor = self.variance_floor();
        let mut v = vec![0.0; t * n];
        for (i, xi) in self.inputs.iter().enumerate() {
            let row = &mut v[i * n..(i + 1) * n];
            for (dst, q) in row.iter_mut().zip(queries.iter()) {
                *dst = self.kernel.eval(xi, q);
            }
        }
        let mut means = vec![0.0; n];
        for i in 0..t {
            let a = self.alpha[i];
            for (m, &k) in means.iter_mut().zip(&v[i * n..(i + 1) * n]) {
                *m += k * a;
            }
        }
        self.forward_in_place(&mut v, n);
        let mut explained = vec![0.0; n];
        for i in 0..t {
            for (e, &x) in explained.iter_mut().zip(&v[i * n..(i + 1) * n]) {
                *e += x * x;
            }
        }
        let raw_variances: Vec<f64> = explained.iter().map(|e| sf2 - e).collect();
        let variances = raw_variances.iter().map(|&r| r.clamp(floor, sf2)).collect();
        Projection {
            points: queries.clone(),
            v,
            means,
            raw_variances,
            variances,
        }
    }

    /// Predictive mean and variance at `x`.
    pub fn posterior(&self, x: &[f64]) -> Prediction {
        let q = PointSet::from_flat(x.len(), x.to_vec()).expect("query dimension");
        self.project(&q).prediction(0)
    }

    /// Predictions for every point of `queries`.
    pub fn posterior_batch(&self, queries: &PointSet) -> Vec<Prediction> {
        let p = self.project(queries);
        (0..p.len()).map(|i| p.prediction(i)).collect()
    }

    /// Posterior covariance `k_t(x, x')` (not clamped).
    pub fn posterior_cov(&self, x: &[f64], x2: &[f64]) -> f64 {
        let a = PointSet::from_flat(x.len(), x.to_vec()).expect("query dimension");
        let b = PointSet::from_flat(x2.len(), x2.to_vec()).expect("query dimension");
        let pa = self.project(&a);
        if x == x2 {
            return pa.raw_variances[0];
        }
        let pb = self.project(&b);
        pa.cross_cov(0, &pb, 0, &self.kernel)
    }

    /// Posterior covariance matrix over `points`, row-major.
    pub fn posterior_cov_matrix(&self, points: &PointSet) -> Vec<f64> {
        let p = self.project(points);
        let mut m = p.cross_cov_block(&p, &self.kernel);
        let n = p.len();
        for i in 0..n {
            m[i * n + i] = p.raw_variances[i];
        }
        m
    }

    /// Fantasy quantities for conditioning on a hypothetical observation at `s_star`.
    pub fn one_step_ahead(&self, s_bar: &[f64], s_star: &[f64]) -> OneStepAhead {
        let mut q = PointSet::with_capacity(s_bar.len(), 2);
        q.push(s_bar).expect("query dimension");
        q.push(s_star).expect("query dimension");
        let p = self.project(&q);
        let cross = if s_bar == s_star {
            p.raw_variances[0]
        } else {
            p.cross_cov(0, &p, 1, &self.kernel)
        };
        one_step_from_parts(
            p.means[0],
            p.variances[0],
            p.means[1],
            p.variances[1],
            cross,
            self.effective_noise(),
        )
    }
}

/// Assembles [`OneStepAhead`] from projected quantities.
#[inline]
pub fn one_step_from_parts(
    base_mean: f64,
    base_variance: f64,
    star_mean: f64,
    star_variance: f64,
    cross_cov: f64,
    noise: f64,
) -> OneStepAhead {
    let c = star_variance + noise;
    let cond_var = (base_variance - cross_cov * cross_cov / c).max(0.0);
    OneStepAhead {
        slope: cross_cov / c,
        conditional_sd: cond_var.sqrt(),
        base_mean,
        base_variance,
        star_mean,
        star_predictive_var: c,
        cross_cov,
    }
}
