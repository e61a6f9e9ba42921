use pnpkit::score_oracle::{tweedie_check, GmmPrior};
use pnpkit::{Rng, Signal};
use std::f64::consts::PI;

fn prior() -> GmmPrior {
    GmmPrior::new(vec![0.35, 0.65], vec![vec![-1.5], vec![1.0]], vec![0.2, 0.6]).unwrap()
}

fn normal_pdf(x: f64, m: f64, v: f64) -> f64 {
    (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

/// Trapezoid quadrature of `∫ h(u) p(u) N(x; u, σ²) du`.
fn quadrature(x: f64, sigma: f64, h: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi, n) = (-20.0, 20.0, 400_000);
    let du = (hi - lo) / n as f64;
    let p = prior();
    (0..=n)
        .map(|i| {
            let u = lo + i as f64 * du;
            let prior_u: f64 = (0..2)
                .map(|j| p.weights()[j] * normal_pdf(u, p.means()[j][0], p.variances()[j]))
                .sum();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * h(u) * prior_u * normal_pdf(x, u, sigma * sigma)
        })
        .sum::<f64>()
        * du
}

#[test]
fn smoothed_density_and_posterior_mean_match_quadrature() {
    let p = prior();
    for sigma in [0.3, 1.0] {
        for x in [-3.0, -0.4, 0.0, 1.7, 4.0] {
            let s = Signal::from_vec(vec![x]).unwrap();
            let density = quadrature(x, sigma, |_| 1.0);
            let logpdf = p.smoothed_logpdf(&s, sigma).unwrap();
            assert!((logpdf.exp() - density).abs() <= 1e-8 * density.max(1e-3));
            let mean = quadrature(x, sigma, |u| u) / density;
            assert!((p.posterior_mean(&s, sigma).unwrap().data()[0] - mean).abs() <= 1e-8);
        }
    }
}

#[test]
fn score_matches_finite_difference_of_log_density() {
    let p = prior();
    let h = 1e-5;
    for x in [-2.0, 0.1, 2.5] {
        let at = |v: f64| p.smoothed_logpdf(&Signal::from_vec(vec![v]).unwrap(), 0.5).unwrap();
        let fd = (at(x + h) - at(x - h)) / (2.0 * h);
        let score = p.smoothed_score(&Signal::from_vec(vec![x]).unwrap(), 0.5).unwrap().data()[0];
        assert!((fd - score).abs() <= 1e-7);
    }
}

#[test]
fn tweedie_identity_holds_on_samples() {
    let mut rng = Rng::new(2);
    for sigma in [0.05, 0.5, 3.0] {
        assert!(tweedie_check(&prior(), sigma, 200, &mut rng).unwrap() <= 1e-10);
    }
}

#[test]
fn prior_json_roundtrip() {
    let p = prior();
    assert_eq!(GmmPrior::from_json(&p.to_json()).unwrap(), p);
    assert!(GmmPrior::new(vec![0.5, 0.6], vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).is_err());
    assert!(GmmPrior::new(vec![1.0], vec![vec![0.0]], vec![-1.0]).is_err());
}
