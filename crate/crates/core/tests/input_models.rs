use iurlse_core::input::{predictive_density, InputDistribution, Shift1d, XiPosterior};
use iurlse_core::seed::{stream_rng, Stream};
use iurlse_core::Error;
use rand::Rng;

/// Uniform-box Monte Carlo estimate of `∫ g(s | x) ds`.
fn box_integral(dist: &InputDistribution, x: &[f64], lo: &[f64], hi: &[f64], n: usize) -> f64 {
    let mut rng = stream_rng(99, Stream::Quadrature, 0, 0);
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let mut acc = 0.0;
    let mut s = vec![0.0; x.len()];
    for _ in 0..n {
        for k in 0..x.len() {
            s[k] = rng.gen_range(lo[k]..hi[k]);
        }
        acc += dist.density(x, &s).unwrap();
    }
    vol * acc / n as f64
}

#[test]
fn densities_integrate_to_one() {
    let g = InputDistribution::iid_gamma(1, 5.0, 0.03).unwrap();
    let v = box_integral(&g, &[2.0], &[2.0], &[3.0], 200_000);
    assert!((v - 1.0).abs() < 0.01, "gamma 1-D: {v}");

    let n2 = InputDistribution::iid_gaussian(2, 0.0, 0.5).unwrap();
    let v = box_integral(&n2, &[1.0, -1.0], &[-2.0, -4.0], &[4.0, 2.0], 400_000);
    assert!((v - 1.0).abs() < 0.01, "gaussian 2-D: {v}");

    let mixed = InputDistribution::ProductIndependent {
        components: vec![Shift1d::Gamma { shape: 5.0, scale: 0.15 }, Shift1d::Gaussian { mean: 0.2, sd: 0.3 }],
    };
    let v = box_integral(&mixed, &[0.0, 0.0], &[0.0, -1.5], &[3.5, 2.0], 400_000);
    assert!((v - 1.0).abs() < 0.01, "product: {v}");
}

#[test]
fn sample_moments_match_parameters() {
    let mut rng = stream_rng(1, Stream::Perturb, 0, 0);
    let g = InputDistribution::iid_gamma(2, 5.0, 0.03).unwrap();
    let s = g.sample_shifts(&mut rng, 100_000);
    for k in 0..2 {
        let col: Vec<f64> = s.iter().map(|p| p[k]).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let v = col.iter().map(|z| (z - m).powi(2)).sum::<f64>() / col.len() as f64;
        assert!((m - 0.15).abs() < 4.0 * (0.0045f64 / 1e5).sqrt(), "mean {m}");
        assert!((v - 0.0045).abs() < 0.03 * 0.0045, "var {v}");
        assert!(col.iter().all(|z| *z > 0.0));
    }
    assert_eq!(g.mean_point(&[1.0, 2.0]), vec![1.15, 2.15]);
}

#[test]
fn estimated_law_requires_marginalisation() {
    let d = InputDistribution::estimated(XiPosterior::normal_mean(0.0, 0.64, 0.16).unwrap()).unwrap();
    assert!(matches!(d.density(&[0.0], &[0.1]), Err(Error::NeedsMarginalization)));
    assert!(predictive_density(d.xi().unwrap(), &[0.0], &[0.1]).unwrap() > 0.0);
}

/// Grid posterior over the unknown shift mean, from the unnormalised
/// prior × likelihood.
fn grid_normal_mean(prior_mean: f64, prior_var: f64, known_var: f64, data: &[f64]) -> (f64, f64) {
    let (lo, hi, n) = (-4.0, 4.0, 80_001);
    let step = (hi - lo) / (n - 1) as f64;
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let mu = lo + i as f64 * step;
        let mut ln = -0.5 * (mu - prior_mean).powi(2) / prior_var;
        for z in data {
            ln -= 0.5 * (z - mu).powi(2) / known_var;
        }
        let p = ln.exp();
        w += p;
        m1 += p * mu;
        m2 += p * mu * mu;
    }
    let mean = m1 / w;
    (mean, m2 / w - mean * mean)
}

#[test]
fn normal_mean_update_matches_grid_posterior() {
    let data = [0.31, 0.52, 0.11, 0.77, 0.42, -0.05];
    let post = XiPosterior::normal_mean(0.0, 0.64, 0.16).unwrap().update(&data);
    let (m, v) = post.normal_params().unwrap();
    let (gm, gv) = grid_normal_mean(0.0, 0.64, 0.16, &data);
    assert!((m - gm).abs() < 1e-6, "{m} vs {gm}");
    assert!((v - gv).abs() < 1e-6, "{v} vs {gv}");
}

/// Stirling series with recurrence shift; plenty for the shapes used here.
fn ln_gamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    acc + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + inv / 12.0 - inv.powi(3) / 360.0
        + inv.powi(5) / 1260.0
}

#[test]
fn gamma_precision_predictive_matches_numeric_marginal() {
    let data = [0.3, -0.5, 0.1, 0.45, -0.2];
    let post = XiPosterior::gamma_precision(0.0, 3.0, 0.48).unwrap().update(&data);
    let (a, b) = post.gamma_params().unwrap();
    assert!((a - 5.5).abs() < 1e-12);
    let ss: f64 = data.iter().map(|z| z * z).sum();
    assert!((b - (0.48 + 0.5 * ss)).abs() < 1e-12);

    for z in [-1.0, -0.3, 0.0, 0.2, 0.9] {
        // ∫ N(z; 0, 1/τ) Gamma(τ; a, rate b) dτ by midpoint rule on a wide τ range
        let n = 200_000;
        let hi = 60.0;
        let dt = hi / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let tau = (i as f64 + 0.5) * dt;
            let ln_g = a * b.ln() - ln_gamma(a) + (a - 1.0) * tau.ln() - b * tau;
            let ln_n = 0.5 * (tau / (2.0 * std::f64::consts::PI)).ln() - 0.5 * tau * z * z;
            acc += (ln_g + ln_n).exp() * dt;
        }
        let got = post.predictive_shift_density(z);
        assert!((got - acc).abs() < 1e-6 * acc.max(1.0), "z={z}: {got} vs {acc}");
    }
}

#[test]
fn predictive_concentrates_on_truth() {
    let mut rng = stream_rng(4, Stream::Perturb, 0, 0);
    let truth = InputDistribution::iid_gaussian(1, 0.4, 0.4).unwrap();
    let shifts: Vec<f64> = truth.sample_shifts(&mut rng, 20_000).as_flat().to_vec();
    let post = XiPosterior::normal_mean(0.0, 0.64, 0.16).unwrap().update(&shifts);
    for z in [0.0, 0.4, 0.9] {
        let want = truth.density(&[0.0], &[z]).unwrap();
        assert!((post.predictive_shift_density(z) - want).abs() < 0.02 * want);
    }

    let truth = InputDistribution::iid_gaussian(1, 0.0, 0.4).unwrap();
    let shifts: Vec<f64> = truth.sample_shifts(&mut rng, 20_000).as_flat().to_vec();
    let post = XiPosterior::gamma_precision(0.0, 3.0, 0.48).unwrap().update(&shifts);
    for z in [0.0, 0.3, -0.8] {
        let want = truth.density(&[0.0], &[z]).unwrap();
        assert!((post.predictive_shift_density(z) - want).abs() < 0.03 * want);
    }
}

#[test]
fn estimated_sampler_matches_predictive_variance() {
    let post = XiPosterior::gamma_precision(0.0, 3.0, 0.48).unwrap();
    let d = InputDistribution::estimated(post.clone()).unwrap();
    let mut rng = stream_rng(6, Stream::OuterNodes, 0, 0);
    let s = d.sample_shifts(&mut rng, 200_000);
    let v = s.as_flat().iter().map(|z| z * z).sum::<f64>() / s.len() as f64;
    let (a, b) = post.gamma_params().unwrap();
    let nu = 2.0 * a;
    let want = b / a * nu / (nu - 2.0);
    assert!((v - want).abs() < 0.03 * want, "{v} vs {want}");
}
