use iurlse_core::acquisition::{
    a_hat, adaptive_sbar, gain_term, inner_gain, mile, score_all, straddle, threshold_c, Method, SbarSet,
    ScoringInputs, KAPPA_MIN,
};
use iurlse_core::benchlab::BenchmarkFunction;
use iurlse_core::engine::{run, select_point, AlgorithmConfig};
use iurlse_core::gp::{GpPosterior, KernelSpec};
use iurlse_core::input::InputDistribution;
use iurlse_core::normal;
use iurlse_core::points::PointSet;
use iurlse_core::reliability::QuadratureSpec;
use iurlse_core::seed::{stream_rng, Stream};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `E_{y*}[1{Φ((h - m(y*)) / sd) > c}]` with `y* ~ N(μ*, C)`, integrated on a
/// midpoint grid in probability space (`y* = μ* + √C Φ⁻¹(u)`). The fantasy
/// mean line and variance come from two real refits.
fn quadrature_term(gp: &GpPosterior, sbar: &[f64], star: &[f64], h: f64, c: f64, nodes: usize) -> f64 {
    let p = gp.posterior(star);
    let big_c = p.variance + gp.effective_noise();
    let at0 = gp.add_observation(star, p.mean).unwrap().posterior(sbar);
    let at1 = gp.add_observation(star, p.mean + 1.0).unwrap().posterior(sbar);
    let slope = at1.mean - at0.mean;
    let sd = at0.variance.sqrt();
    let mut hits = 0usize;
    for i in 0..nodes {
        let u = (i as f64 + 0.5) / nodes as f64;
        let dy = big_c.sqrt() * normal::quantile(u);
        let m = at0.mean + slope * dy;
        if normal::cdf((h - m) / sd) > c {
            hits += 1;
        }
    }
    hits as f64 / nodes as f64
}

fn single(point: &[f64]) -> SbarSet {
    SbarSet {
        points: PointSet::from_flat(point.len(), point.to_vec()).unwrap(),
        integrand: vec![0.0],
        source: vec![None],
    }
}

fn random_gp(rng: &mut ChaCha8Rng, n: usize) -> GpPosterior {
    let sf2: f64 = rng.gen_range(0.5..50.0);
    let l = rng.gen_range(0.2..2.0);
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| sf2.sqrt() * (1.7 * x).sin() + rng.gen_range(-0.3..0.3)).collect();
    GpPosterior::fit(KernelSpec::new(sf2, l).unwrap(), rng.gen_range(1e-4..0.2), PointSet::from_scalars(&xs), ys).unwrap()
}

#[test]
fn inner_gain_matches_y_star_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..120 {
        let gp = random_gp(&mut rng, 5);
        let sbar = [rng.gen_range(-0.5..4.5)];
        let star = [sbar[0] + rng.gen_range(-0.8..0.8)];
        let p = gp.posterior(&sbar);
        let h = p.mean + p.sd() * rng.gen_range(-2.5..2.5);
        let c = rng.gen_range(0.05..0.999);
        let analytic = inner_gain(&gp, &star, &single(&sbar), h, c);
        let oracle = quadrature_term(&gp, &sbar, &star, h, c, 20_000);
        worst = worst.max((analytic - oracle).abs());
    }
    assert!(worst < 1e-4, "max abs error {worst}");
}

#[test]
fn gain_term_special_values() {
    let z = normal::quantile(0.9);
    // uncorrelated site and clear margin
    assert_eq!(gain_term(8.0, z, KAPPA_MIN, 0.0, 1.0, 2.0, 0.0), 1.0);
    assert_eq!(gain_term(8.0, z, KAPPA_MIN, 20.0, 1.0, 2.0, 0.0), 0.0);
    // zero margin
    let (var, pv, k) = (1.0, 2.0, 0.8);
    let cond = var - k * k / pv;
    let mu = 8.0 - z * f64::sqrt(cond);
    assert!((gain_term(8.0, z, KAPPA_MIN, mu, var, pv, k) - 0.5).abs() < 1e-12);
    // tie in the degenerate branch counts as a miss
    assert_eq!(gain_term(8.0, 0.0, KAPPA_MIN, 8.0, 1.0, 2.0, 0.0), 0.0);
}

fn bisect_c(a: f64, beta_sqrt: f64) -> f64 {
    let g = |p: f64| p - beta_sqrt * (p * (1.0 - p)).max(0.0).sqrt() - a;
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
fn threshold_c_matches_bisection() {
    for i in 0..20 {
        let a = 0.02 + 0.96 * i as f64 / 19.0;
        for j in 0..20 {
            let beta = if j == 0 { 0.0 } else { 0.01 * 1.5f64.powi(j) };
            let t = threshold_c(a, 0.0, beta).unwrap();
            if beta == 0.0 {
                assert_eq!(t.c, a);
            }
            let b = bisect_c(a, beta.sqrt());
            assert!((t.c - b).abs() < 1e-10, "a={a} beta={beta}: {} vs {b}", t.c);
            let back = t.c - beta.sqrt() * (t.c * (1.0 - t.c)).sqrt();
            assert!((back - a).abs() < 1e-10);
        }
    }
    let direct = (1.9 + 9.0 + (81.0f64 + 34.2 - 32.49).sqrt()) / 20.0;
    assert!((threshold_c(0.95, 0.0, 9.0).unwrap().c - direct).abs() < 1e-12);
    assert!((direct - 0.999_72).abs() < 1e-5);
    assert!((threshold_c(0.5, 0.0, 1.0).unwrap().c - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-12);
    assert!(threshold_c(0.05, 0.1, 1.0).is_err());
}

#[test]
fn straddle_prior_value() {
    let gp = GpPosterior::prior(KernelSpec::new(100.0, 0.5).unwrap(), 1e-4, 1).unwrap();
    assert!((straddle(&gp, &[1.0], 8.0, 1.96) - 11.6).abs() < 1e-12);
}

/// Quartic Case 2 posterior after five proposed-method trials.
fn snapshot(seed: u64) -> (BenchmarkFunction, InputDistribution, GpPosterior) {
    let bench = BenchmarkFunction::quartic1d();
    let case = bench.case("case2").unwrap();
    let cfg = AlgorithmConfig {
        t_max: 5,
        quad_nodes: 16,
        outer_nodes: 16,
        seed,
        ..Default::default()
    };
    let r = {
        let mut obs = bench.observer(&case.truth, seed);
        run(&cfg, bench.gp_prior().unwrap(), &case.learner, &bench.candidates, bench.threshold, &mut obs, None).unwrap()
    };
    (bench, case.learner, r.final_gp.unwrap())
}

#[test]
fn a_hat_matches_brute_force_sweep() {
    let seed = 17;
    let (bench, dist, gp) = snapshot(seed);
    let x = &bench.candidates;
    let h = bench.threshold;
    let c = threshold_c(0.95, 0.0, 9.0).unwrap().c;
    let quad = QuadratureSpec::new(16, seed).unwrap();
    let nodes: Vec<PointSet> = (0..x.len()).map(|i| quad.nodes_for(&dist, x.point(i), 6, i)).collect();
    let sbar = adaptive_sbar(&gp, &dist, x, h, &nodes).unwrap();

    // exhaustive scan of the same node sets
    for i in 0..x.len() {
        let score = |s: &[f64]| {
            let p = gp.posterior(s);
            let phi = normal::cdf((h - p.mean) / p.sd());
            phi * (1.0 - phi) * dist.density(x.point(i), s).unwrap()
        };
        let mut best = (dist.mean_point(x.point(i)), score(&dist.mean_point(x.point(i))));
        for s in nodes[i].iter() {
            if score(s) > best.1 {
                best = (s.to_vec(), score(s));
            }
        }
        assert_eq!(sbar.points.point(i), best.0.as_slice(), "candidate {i}");
    }

    let shifts = dist.sample_shifts(&mut stream_rng(seed, Stream::OuterNodes, 6, 0), 16);
    let inputs = ScoringInputs {
        gp: &gp,
        dist: &dist,
        candidates: x,
        h,
        c,
        sbar: Some(&sbar),
        outer_shifts: &shifts,
        straddle_kappa: 1.96,
        seed,
        trial: 6,
    };
    let evals = score_all(Method::Proposed, &inputs).unwrap();
    let scores: Vec<f64> = evals.iter().map(|e| e.score).collect();

    let baseline = sbar
        .points
        .iter()
        .filter(|s| {
            let p = gp.posterior(s);
            normal::cdf((h - p.mean) / p.sd()) > c
        })
        .count() as f64;
    let nodes_y = 4000;
    let brute: Vec<f64> = (0..x.len())
        .map(|i| {
            let mut total = 0.0;
            for z in shifts.iter() {
                let star = [x.point(i)[0] + z[0]];
                for s in sbar.points.iter() {
                    total += quadrature_term(&gp, s, &star, h, c, nodes_y);
                }
            }
            total / shifts.len() as f64 - baseline
        })
        .collect();

    let tol = x.len() as f64 / nodes_y as f64;
    for (a, b) in scores.iter().zip(&brute) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }
    let pick = select_point(&scores).unwrap();
    let best = brute.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(brute[pick] >= best - 2.0 * tol);

    let single = a_hat(&gp, x, pick, &sbar, h, c, &PointSet::translated(x.point(pick), &shifts));
    assert!((single.score - scores[pick]).abs() < 1e-12);
    assert_eq!(single.baseline, baseline);
}

#[test]
fn baseline_does_not_change_selection() {
    let (bench, dist, gp) = snapshot(4);
    let x = &bench.candidates;
    let c = threshold_c(0.95, 0.0, 9.0).unwrap().c;
    let nodes: Vec<PointSet> = (0..x.len())
        .map(|i| QuadratureSpec::new(32, 4).unwrap().nodes_for(&dist, x.point(i), 6, i))
        .collect();
    let sbar = adaptive_sbar(&gp, &dist, x, bench.threshold, &nodes).unwrap();
    let shifts = dist.sample_shifts(&mut stream_rng(4, Stream::OuterNodes, 6, 0), 32);
    let inputs = ScoringInputs {
        gp: &gp,
        dist: &dist,
        candidates: x,
        h: bench.threshold,
        c,
        sbar: Some(&sbar),
        outer_shifts: &shifts,
        straddle_kappa: 1.96,
        seed: 4,
        trial: 6,
    };
    let evals = score_all(Method::Proposed, &inputs).unwrap();
    let with_b: Vec<f64> = evals.iter().map(|e| e.score).collect();
    let without_b: Vec<f64> = evals.iter().map(|e| e.score + e.baseline).collect();
    assert_eq!(select_point(&with_b).unwrap(), select_point(&without_b).unwrap());
}

#[test]
fn mile_matches_quadrature_and_point_mass_a_hat() {
    let (bench, _, gp) = snapshot(9);
    let x = &bench.candidates;
    let h = bench.threshold;
    let c = threshold_c(0.95, 0.0, 9.0).unwrap().c;
    let all = SbarSet {
        points: x.clone(),
        integrand: vec![0.0; x.len()],
        source: vec![None; x.len()],
    };
    let pm = InputDistribution::point_mass(1);
    let zero = pm.sample_shifts(&mut stream_rng(0, Stream::OuterNodes, 0, 0), 1);
    for i in [0, 7, 20, 33, 40] {
        let m = mile(&gp, x, x.point(i), h, c);
        let a = a_hat(&gp, x, i, &all, h, c, &PointSet::translated(x.point(i), &zero));
        assert!((m - a.score).abs() < 1e-12);
        let base = all
            .points
            .iter()
            .filter(|s| {
                let p = gp.posterior(s);
                normal::cdf((h - p.mean) / p.sd()) > c
            })
            .count() as f64;
        let q: f64 = x.iter().map(|s| quadrature_term(&gp, s, x.point(i), h, c, 20_000)).sum::<f64>() - base;
        assert!((m - q).abs() < x.len() as f64 * 5e-5, "{m} vs {q}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_c_never_raises_gain(seed in 0u64..10_000, c1 in 0.05f64..0.99, dc in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gp = random_gp(&mut rng, 4);
        let sbar = [rng.gen_range(0.0..4.0)];
        let star = [rng.gen_range(0.0..4.0)];
        let h = rng.gen_range(-3.0..3.0);
        let c2 = (c1 + dc).min(0.999);
        let g1 = inner_gain(&gp, &star, &single(&sbar), h, c1);
        let g2 = inner_gain(&gp, &star, &single(&sbar), h, c2);
        prop_assert!(g2 <= g1 + 1e-15);
    }
}
