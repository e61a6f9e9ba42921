//! Image-quality metrics and noise injection.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::signal::Signal;

/// Value reported by [`psnr`] for identical signals.
pub const PSNR_CAP_DB: f64 = 300.0;

/// Peak signal-to-noise ratio `10 log10(peak² / MSE)` in dB, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(a: &Signal, b: &Signal, peak: f64) -> Result<f64> {
    a.check_same_shape(b)?;
    if !(peak > 0.0) {
        return Err(Error::param(format!("psnr peak must be positive, got {peak}")));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// `x + sigma * w` with `w` i.i.d. standard normal drawn from `rng`.
pub fn add_gaussian_noise(x: &Signal, sigma: f64, rng: &mut Rng) -> Result<Signal> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let mut out = x.clone();
    for v in out.data_mut() {
        *v += sigma * rng.normal();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_psnr(a: &[f64], b: &[f64], peak: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..a.len() {
            for j in 0..a.len() {
                if i == j {
                    acc += (a[i] - b[j]).powi(2);
                }
            }
        }
        10.0 * (peak * peak / (acc / a.len() as f64)).log10()
    }

    #[test]
    fn identical_signals_hit_cap() {
        let a = Signal::from_vec(vec![0.3, 0.7, 0.1]).unwrap();
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn constant_offset_gives_20db() {
        let a = Signal::zeros(&[10]);
        let b = Signal::filled(&[10], 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_sum() {
        let mut rng = Rng::new(3);
        let a = rng.uniform_signal(&[7, 5]);
        let b = rng.uniform_signal(&[7, 5]);
        let expect = naive_psnr(a.data(), b.data(), 1.0);
        assert!((psnr(&a, &b, 1.0).unwrap() - expect).abs() < 1e-12);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn errors() {
        let a = Signal::zeros(&[3]);
        let b = Signal::zeros(&[4]);
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
        assert!(add_gaussian_noise(&a, -1.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn zero_sigma_is_identity_and_seed_is_deterministic() {
        let x = Rng::new(1).uniform_signal(&[16]);
        assert_eq!(add_gaussian_noise(&x, 0.0, &mut Rng::new(5)).unwrap(), x);
        let a = add_gaussian_noise(&x, 0.2, &mut Rng::new(5)).unwrap();
        let b = add_gaussian_noise(&x, 0.2, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_variance_law_of_large_numbers() {
        let n = 1_000_000;
        let x = Signal::zeros(&[n]);
        let mut rng = Rng::new(11);
        let sigma = 0.3;
        let y = add_gaussian_noise(&x, sigma, &mut rng).unwrap();
        let var = y.norm_sq() / n as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.01);
        // two successive injections add their variances
        let z = add_gaussian_noise(&y, 0.4, &mut rng).unwrap();
        let var2 = z.norm_sq() / n as f64;
        assert!((var2 / (0.09 + 0.16) - 1.0).abs() < 0.01);
    }
}
