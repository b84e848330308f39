use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iurlse_bench::snapshot;
use iurlse_core::acquisition::{adaptive_sbar_cached, score_all, threshold_c, Method, ScoringInputs};
use iurlse_core::reliability::{sweep, QuadratureSpec};
use iurlse_core::seed::{stream_rng, Stream};

fn projection(c: &mut Criterion) {
    let mut g = c.benchmark_group("project");
    for n in [10usize, 50, 100] {
        let s = snapshot("quartic1d", "case2", n);
        let quad = QuadratureSpec::new(1000, 1).unwrap();
        let nodes = quad.nodes_for(&s.case.learner, s.bench.candidates.point(20), 0, 20);
        g.bench_with_input(BenchmarkId::from_parameter(n), &nodes, |b, nodes| b.iter(|| s.gp.project(nodes)));
    }
    g.finish();
}

fn reliability_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for (name, case) in [("quartic1d", "case2"), ("sinusoidal", "case1")] {
        let s = snapshot(name, case, 30);
        let quad = QuadratureSpec::new(1000, 1).unwrap();
        g.bench_function(name, |b| {
            b.iter(|| sweep(&s.gp, &s.case.learner, &s.bench.candidates, s.bench.threshold, 3.0, &quad, 1))
        });
    }
    g.finish();
}

fn acquisition(c: &mut Criterion) {
    let mut g = c.benchmark_group("score_all");
    g.sample_size(10);
    let s = snapshot("quartic1d", "case2", 30);
    let quad = QuadratureSpec::new(1000, 1).unwrap();
    let sw = sweep(&s.gp, &s.case.learner, &s.bench.candidates, s.bench.threshold, 3.0, &quad, 1);
    let sbar = adaptive_sbar_cached(&s.gp, &s.case.learner, &s.bench.candidates, s.bench.threshold, &sw.nodes);
    let cth = threshold_c(0.95, 0.0, 9.0).unwrap().c;
    let shifts = s.case.learner.sample_shifts(&mut stream_rng(1, Stream::OuterNodes, 1, 0), 64);
    for method in Method::ALL {
        let inp = ScoringInputs {
            gp: &s.gp,
            dist: &s.case.learner,
            candidates: &s.bench.candidates,
            h: s.bench.threshold,
            c: cth,
            sbar: Some(&sbar),
            outer_shifts: &shifts,
            straddle_kappa: 1.96,
            seed: 1,
            trial: 1,
        };
        g.bench_function(method.to_string(), |b| b.iter(|| score_all(method, &inp).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, projection, reliability_sweep, acquisition);
criterion_main!(benches);
