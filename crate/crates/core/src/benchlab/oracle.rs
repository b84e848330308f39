//! Monte-Carlo ground truth `p*(x) = P(f(x + ξ) < h)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::InputDistribution;
use crate::points::PointSet;
use crate::seed::{stream_rng, Stream};

pub const DEFAULT_ORACLE_SAMPLES: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleTable {
    pub benchmark: String,
    pub case: String,
    pub threshold: f64,
    pub samples: usize,
    pub seed: u64,
    pub p_star: Vec<f64>,
}

impl OracleTable {
    pub fn true_high(&self, alpha: f64) -> Vec<bool> {
        self.p_star.iter().map(|&p| p > alpha).collect()
    }
}

/// Estimate for candidate `index`; draws come from its own stream.
pub fn oracle_p_star<F: Fn(&[f64]) -> f64>(
    f: F,
    dist: &InputDistribution,
    x: &[f64],
    h: f64,
    samples: usize,
    seed: u64,
    index: usize,
) -> f64 {
    let mut rng = stream_rng(seed, Stream::Oracle, 0, index as u64);
    let pts = dist.sample(x, &mut rng, samples);
    let hits = pts.iter().filter(|s| f(s) < h).count();
    hits as f64 / samples as f64
}

pub fn oracle_values<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    dist: &InputDistribution,
    candidates: &PointSet,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::param("samples", "must be positive"));
    }
    if let InputDistribution::EstimatedShift { .. } = dist {
        return Err(Error::param("dist", "oracle needs the true (fully specified) input law"));
    }
    dist.validate()?;
    Ok((0..candidates.len())
        .into_par_iter()
        .map(|i| oracle_p_star(&f, dist, candidates.point(i), h, samples, seed, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;

    #[test]
    fn linear_function_matches_closed_form() {
        let dist = InputDistribution::iid_gaussian(1, 0.0, 0.5).unwrap();
        let cands = PointSet::from_scalars(&[-0.5, 0.0, 0.3, 1.0]);
        let p = oracle_values(|s| s[0], &dist, &cands, 0.2, 200_000, 9).unwrap();
        for (i, x) in [-0.5, 0.0, 0.3, 1.0].iter().enumerate() {
            let exact = normal::cdf((0.2 - x) / 0.5);
            assert!((p[i] - exact).abs() < 4e-3, "{} vs {}", p[i], exact);
        }
    }

    #[test]
    fn per_candidate_streams() {
        let dist = InputDistribution::iid_gaussian(1, 0.0, 0.5).unwrap();
        let all = PointSet::from_scalars(&[0.0, 0.4, 0.8]);
        let full = oracle_values(|s| s[0], &dist, &all, 0.3, 1000, 2).unwrap();
        let single = oracle_p_star(|s: &[f64]| s[0], &dist, &[0.8], 0.3, 1000, 2, 2);
        assert_eq!(full[2], single);
    }
}
