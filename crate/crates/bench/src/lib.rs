//! Shared fixtures for the criterion benches.

use iurlse_core::benchlab::{BenchmarkFunction, InputCase};
use iurlse_core::gp::GpPosterior;
use iurlse_core::points::PointSet;
use iurlse_core::seed::{stream_rng, Stream};
use iurlse_core::Observer;
use rand::Rng;

/// A benchmark problem with a posterior fitted to `n` observations.
pub struct Snapshot {
    pub bench: BenchmarkFunction,
    pub case: InputCase,
    pub gp: GpPosterior,
}

/// Fits the benchmark's GP to `n` noisy observations at random candidates.
pub fn snapshot(name: &str, case: &str, n: usize) -> Snapshot {
    let bench = BenchmarkFunction::builtin(name).expect("builtin benchmark");
    let case = bench.case(case).expect("case");
    let mut rng = stream_rng(5, Stream::InitialDesign, 0, 0);
    let picks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..bench.candidates.len())).collect();
    let mut xs = PointSet::with_capacity(bench.dim(), n);
    let mut ys = Vec::with_capacity(n);
    {
        let mut obs = bench.observer(&case.truth, 5);
        for (k, &i) in picks.iter().enumerate() {
            let o = obs.observe(bench.candidates.point(i), k as u64).expect("observe");
            xs.push(&o.s).expect("dimension");
            ys.push(o.y);
        }
    }
    let gp = GpPosterior::fit(bench.kernel, bench.noise_variance, xs, ys).expect("fit");
    Snapshot { bench, case, gp }
}
