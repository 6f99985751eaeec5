mod common;

use bolab::measures::*;
use bolab::FourierField;

fn re_coeff1(u: &FourierField) -> bolab::Result<f64> {
    Ok(u.coeff(1).re)
}

#[test]
fn bit_identical_across_pool_sizes() {
    let spec = GaussianSpec::new(6, 32, 42);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let s = sample_mu(&spec, 300).unwrap();
            let w = weighted_ensemble(&spec, 16, 8.0, 300).unwrap();
            (s, w.weights, w.ess)
        })
    };
    let (s1, w1, e1) = run(1);
    let (s4, w4, e4) = run(4);
    assert_eq!(s1, s4);
    assert_eq!(w1, w4);
    assert_eq!(e1.to_bits(), e4.to_bits());
}

#[test]
fn per_mode_second_moment() {
    let k = 6;
    let spec = GaussianSpec::new(k, 4, 3);
    let m = 100_000;
    let samples = sample_mu(&spec, m).unwrap();
    for n in 1..=4usize {
        let v: Vec<f64> = samples.iter().map(|u| u.coeff(n as i64).norm_sqr()).collect();
        let mean = v.iter().sum::<f64>() / m as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        let expected = 1.0 / (2.0 * (n as f64).powi(k as i32));
        assert_eq!(spec.mode_variance(n), expected);
        assert!((mean - expected).abs() < 3.0 * se, "n = {n}: {mean} vs {expected} ± {se}");
    }
}

#[test]
fn critical_norm_mean_is_alpha() {
    let k = 4;
    let n = 16;
    let spec = GaussianSpec::new(k, n, 8);
    let m = 20_000;
    let v: Vec<f64> = sample_mu(&spec, m)
        .unwrap()
        .iter()
        .map(|u| u.sobolev_norm_sq((k as f64 - 1.0) / 2.0, true))
        .collect();
    let mean = v.iter().sum::<f64>() / m as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    assert!((mean - alpha(n)).abs() < 3.0 * se, "{mean} vs {} ± {se}", alpha(n));
}

#[test]
fn lq_of_real_part_matches_gaussian_moments() {
    let spec = GaussianSpec::new(6, 4, 21);
    let sd = spec.component_sd(1);
    assert_eq!(sd, 0.5);
    let two = lq_norm_mc(re_coeff1, &spec, 2.0, 50_000).unwrap();
    assert!((two.mean - sd).abs() < 3.0 * two.se, "{two:?}");
    let one = lq_norm_mc(re_coeff1, &spec, 1.0, 50_000).unwrap();
    let expected = sd * (2.0 / std::f64::consts::PI).sqrt();
    assert!((one.mean - expected).abs() < 3.0 * one.se, "{one:?} vs {expected}");
}

#[test]
fn standard_error_shrinks_like_inverse_root() {
    let spec = GaussianSpec::new(6, 4, 17);
    let se: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&m| lq_norm_mc(re_coeff1, &spec, 2.0, m).unwrap().se)
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
    }
}

#[test]
fn constant_observable_has_mean_one() {
    let w = weighted_ensemble(&GaussianSpec::new(6, 16, 4), 8, 8.0, 500).unwrap();
    let ones = vec![1.0; w.len()];
    let e = w.weighted_mean(&ones);
    assert_eq!(e.mean, 1.0);
    assert!(w.weights.iter().all(|x| *x >= 0.0));
    assert!(w.ess <= w.len() as f64 * (1.0 + 1e-12));
}

#[test]
fn diagnostic_weights_reproduce_gaussian_statistics() {
    let spec = GaussianSpec::new(6, 16, 4);
    let w = weighted_ensemble_with(&spec, 8, 8.0, 500, DensityOptions::diagnostic()).unwrap();
    assert!(w.weights.iter().all(|x| *x == 1.0));
    assert!((w.ess - 500.0).abs() < 1e-9);
    let v: Vec<f64> = w.samples.iter().map(|u| u.coeff(2).re).collect();
    let plain = v.iter().sum::<f64>() / v.len() as f64;
    assert!((w.weighted_mean(&v).mean - plain).abs() < 1e-15);
}

#[test]
fn ess_grows_with_radius() {
    let spec = GaussianSpec::new(6, 16, 9);
    let ess: Vec<f64> = [1.0, 4.0, 16.0]
        .iter()
        .map(|&r| weighted_ensemble(&spec, 8, r, 2000).map(|w| w.ess).unwrap_or(0.0))
        .collect();
    assert!(ess[0] < ess[1] && ess[1] < ess[2], "{ess:?}");
}

#[test]
fn density_is_nonnegative_and_supported() {
    let spec = GaussianSpec::new(6, 16, 2);
    for u in sample_mu(&spec, 200).unwrap() {
        let d = density_f(&u, 6, 16, 8.0, spec.alpha_constant(), DensityOptions::default()).unwrap();
        assert!(d.value >= 0.0);
    }
    assert!(cutoff_chi(1.5, 1.0) > 0.0 && cutoff_chi(1.5, 1.0) < 1.0);
}
