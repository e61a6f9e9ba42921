//! Plug-and-play unadjusted Langevin sampling, its exact Gaussian reference
//! and streaming sample statistics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::operators::LinearOp;
use crate::rng::Rng;
use crate::signal::Signal;
use crate::solvers::DIVERGENCE_NORM;

/// Largest dimension handled by [`gaussian_posterior_oracle`].
pub const ORACLE_MAX_DIM: usize = 256;

/// Coordinates whose full chains are kept for the effective sample size.
pub const ESS_TRACKED: usize = 64;

/// Scale of the Gaussian increment per step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// `√(2δ)ξ`, the Euler–Maruyama step of `dx = ∇log p dt + √2 dW`.
    #[default]
    Sqrt2Delta,
    /// `√δ ξ`
    SqrtDelta,
    /// Noise-free drift iteration.
    Zero,
}

impl NoiseScale {
    fn factor(&self, delta: f64) -> f64 {
        match self {
            NoiseScale::Sqrt2Delta => (2.0 * delta).sqrt(),
            NoiseScale::SqrtDelta => delta.sqrt(),
            NoiseScale::Zero => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UlaConfig {
    pub delta: f64,
    /// Denoiser level.
    pub sigma: f64,
    /// Likelihood noise level.
    pub sigma_w: f64,
    /// Steps discarded before the first kept sample; defaults to `n_samples`.
    pub burn_in: Option<usize>,
    pub n_samples: usize,
    pub thin: usize,
    pub seed: u64,
    pub noise: NoiseScale,
    /// Keep the thinned samples in memory.
    pub store_samples: bool,
}

impl Default for UlaConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            sigma: 0.5,
            sigma_w: 0.1,
            burn_in: None,
            n_samples: 1000,
            thin: 1,
            seed: 0,
            noise: NoiseScale::default(),
            store_samples: false,
        }
    }
}

impl UlaConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.n_samples)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta", self.delta), ("sigma", self.sigma), ("sigma_w", self.sigma_w)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_samples < 2 {
            return Err(Error::param("at least two samples are needed"));
        }
        if self.thin == 0 || self.burn_in == Some(0) {
            return Err(Error::param("thinning stride and burn-in must be at least 1"));
        }
        Ok(())
    }

    /// `δ(1/σ² + ‖K‖²/σ_w²)`; the linearized chain is stable below 2.
    pub fn stability_product(&self, k_norm: f64) -> f64 {
        self.delta * (1.0 / (self.sigma * self.sigma) + k_norm * k_norm / (self.sigma_w * self.sigma_w))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleStats {
    pub mean: Signal,
    /// Unbiased per-coordinate variance.
    pub variance: Signal,
    /// Smallest effective sample size over the tracked coordinates.
    pub ess: f64,
    /// `(coordinate, effective sample size)` for each tracked coordinate.
    pub ess_per_coordinate: Vec<(usize, f64)>,
    pub count: usize,
}

impl SampleStats {
    /// `√(variance_i / ESS_i)` for a tracked coordinate, using the minimum
    /// ESS for the others.
    pub fn standard_error(&self, i: usize) -> f64 {
        let ess = self
            .ess_per_coordinate
            .iter()
            .find(|(c, _)| *c == i)
            .map(|&(_, e)| e)
            .unwrap_or(self.ess);
        (self.variance.data()[i] / ess.max(1.0)).sqrt()
    }

    /// `coordinate,mean,variance` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coordinate,mean,variance\n");
        for (i, (m, v)) in self.mean.data().iter().zip(self.variance.data()).enumerate() {
            out.push_str(&format!("{i},{m:e},{v:e}\n"));
        }
        out
    }
}

/// Welford accumulator that also records the chains of a few coordinates.
#[derive(Clone, Debug)]
pub struct SampleAccumulator {
    shape: Vec<usize>,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    tracked: Vec<usize>,
    chains: Vec<Vec<f64>>,
}

impl SampleAccumulator {
    pub fn new(shape: &[usize], tracked: usize) -> Self {
        let n: usize = shape.iter().product();
        let t = tracked.clamp(1, n);
        let coords: Vec<usize> = (0..t).map(|j| j * n / t).collect();
        Self {
            shape: shape.to_vec(),
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
            chains: vec![Vec::new(); coords.len()],
            tracked: coords,
        }
    }

    pub fn push(&mut self, x: &Signal) -> Result<()> {
        if x.shape() != self.shape.as_slice() {
            return Err(Error::shape(&self.shape, x.shape()));
        }
        self.count += 1;
        let c = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x.data()) {
            let d = v - *m;
            *m += d / c;
            *s += d * (v - *m);
        }
        for (chain, &i) in self.chains.iter_mut().zip(&self.tracked) {
            chain.push(x.data()[i]);
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<SampleStats> {
        if self.count < 2 {
            return Err(Error::param("statistics need at least two samples"));
        }
        let denom = (self.count - 1) as f64;
        let mean = Signal::new(self.mean.clone(), self.shape.clone())?;
        let variance = Signal::new(self.m2.iter().map(|s| (s / denom).max(0.0)).collect(), self.shape.clone())?;
        let ess_per_coordinate: Vec<(usize, f64)> = self
            .tracked
            .iter()
            .zip(&self.chains)
            .map(|(&i, chain)| (i, effective_sample_size(chain)))
            .collect();
        let ess = ess_per_coordinate.iter().fold(f64::INFINITY, |m, &(_, e)| m.min(e));
        Ok(SampleStats {
            mean,
            variance,
            ess,
            ess_per_coordinate,
            count: self.count,
        })
    }
}

/// Streaming mean, variance and effective sample size of `samples`.
pub fn sample_stats(samples: &[Signal]) -> Result<SampleStats> {
    let first = samples
        .first()
        .ok_or_else(|| Error::param("statistics need at least two samples"))?;
    let mut acc = SampleAccumulator::new(first.shape(), first.len());
    for s in samples {
        acc.push(s)?;
    }
    acc.finish()
}

/// Effective sample size `n/τ` with `τ` from Geyer's initial positive
/// sequence of FFT autocorrelations. A constant chain has ESS `n`.
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 2 {
        return n as f64;
    }
    let acf = autocorrelation(chain);
    if !(acf[0] > 0.0) {
        return n as f64;
    }
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (acf[2 * m] + acf[2 * m + 1]) / acf[0];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64 * (n as f64).log10().max(1.0))
}

/// Autocovariance of a chain at all lags, normalized by `n`.
fn autocorrelation(chain: &[f64]) -> Vec<f64> {
    let n = chain.len();
    let mean = chain.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = chain.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in &mut buf {
        *c = Complex64::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (len as f64 * n as f64)).collect()
}

#[derive(Clone, Debug)]
pub struct UlaOutput {
    pub stats: SampleStats,
    /// Thinned kept samples when requested.
    pub samples: Vec<Signal>,
    pub last: Signal,
    /// `δ(1/σ² + ‖K‖²/σ_w²)`
    pub stability_product: f64,
    pub steps: usize,
}

/// PnP-ULA with a fixed denoiser level:
///
/// ```text
/// x⁺ = x + δ[(D_σ(x) − x)/σ² + Kᵀ(y − Kx)/σ_w²] + s ξ
/// ```
///
/// with `s` set by [`NoiseScale`]. `x0` defaults to `Kᵀy`.
pub fn run_pnp_ula(
    k: &LinearOp,
    y: &Signal,
    d: &dyn Denoiser,
    cfg: &UlaConfig,
    x0: Option<&Signal>,
) -> Result<UlaOutput> {
    cfg.validate()?;
    let kty = k.adjoint(y)?;
    let mut x = match x0 {
        Some(x0) => {
            x0.check_same_shape(&kty)?;
            x0.clone()
        }
        None => kty.clone(),
    };
    let stability_product = cfg.stability_product(k.spectral_norm());
    let mut rng = Rng::new(cfg.seed);
    let scale = cfg.noise.factor(cfg.delta);
    let prior_w = cfg.delta / (cfg.sigma * cfg.sigma);
    let like_w = cfg.delta / (cfg.sigma_w * cfg.sigma_w);
    let burn_in = cfg.burn_in();
    let steps = burn_in + cfg.n_samples * cfg.thin;
    let mut acc = SampleAccumulator::new(x.shape(), ESS_TRACKED);
    let mut samples = Vec::new();
    let mut noise = vec![0.0; x.len()];
    for step in 0..steps {
        let dx = d.denoise(&x, cfg.sigma)?;
        let data = k.adjoint(&k.apply(&x)?)?;
        if scale > 0.0 {
            rng.fill_normal(&mut noise);
        }
        let next: Vec<f64> = (0..x.len())
            .map(|i| {
                let xi = x.data()[i];
                xi + prior_w * (dx.data()[i] - xi) + like_w * (kty.data()[i] - data.data()[i]) + scale * noise[i]
            })
            .collect();
        let next = x.with_data(next);
        if !next.is_finite() || next.norm() > DIVERGENCE_NORM {
            return Err(Error::Diverged {
                iteration: step,
                last_finite: Box::new(x),
            });
        }
        x = next;
        if step >= burn_in && (step + 1 - burn_in) % cfg.thin == 0 {
            acc.push(&x)?;
            if cfg.store_samples {
                samples.push(x.clone());
            }
        }
    }
    Ok(UlaOutput {
        stats: acc.finish()?,
        samples,
        last: x,
        stability_product,
        steps,
    })
}

/// Exact posterior for a Gaussian prior `N(0, γ²I)` smoothed at level `σ`
/// and Gaussian likelihood with noise `σ_w`.
#[derive(Clone, Debug)]
pub struct GaussianPosterior {
    pub mean: Signal,
    pub covariance: DMatrix<f64>,
    /// Condition number of the precision matrix.
    pub condition_number: f64,
}

/// `C = (KᵀK/σ_w² + I/(γ² + σ²))⁻¹`, `m = C Kᵀy/σ_w²`.
pub fn gaussian_posterior_oracle(k: &LinearOp, y: &Signal, gamma: f64, sigma: f64, sigma_w: f64) -> Result<GaussianPosterior> {
    if !(gamma > 0.0) || !(sigma >= 0.0) || !(sigma_w > 0.0) {
        return Err(Error::param("oracle needs γ > 0, σ ≥ 0 and σ_w > 0"));
    }
    let n = k.in_len();
    if n > ORACLE_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "Gaussian oracle limited to {ORACLE_MAX_DIM} unknowns, got {n}"
        )));
    }
    let kd = k.to_dense()?;
    let prior_var = gamma * gamma + sigma * sigma;
    let w = 1.0 / (sigma_w * sigma_w);
    let precision = kd.transpose() * &kd * w + DMatrix::identity(n, n) / prior_var;
    let eig = SymmetricEigen::new(precision.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let covariance = precision
        .cholesky()
        .ok_or_else(|| Error::param("posterior precision is not positive definite"))?
        .inverse();
    let kty = DVector::from_column_slice(k.adjoint(y)?.data());
    let mean = &covariance * kty * w;
    Ok(GaussianPosterior {
        mean: Signal::new(mean.as_slice().to_vec(), k.in_shape().to_vec())?,
        covariance,
        condition_number: hi / lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn scalar_oracle() {
        let post = gaussian_posterior_oracle(&LinearOp::identity(&[1]), &sig(&[1.0]), 1.0, 1.0, 1.0).unwrap();
        assert!((post.covariance[(0, 0)] - 1.0 / 1.5).abs() < 1e-15);
        assert!((post.mean.data()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_operator_gives_smoothed_prior() {
        let post = gaussian_posterior_oracle(&LinearOp::zero(&[3]), &Signal::zeros(&[3]), 0.5, 0.3, 0.2).unwrap();
        assert!(post.mean.norm_inf() == 0.0);
        assert!((post.covariance[(1, 1)] - 0.34).abs() < 1e-14);
        assert!(post.covariance[(0, 1)].abs() < 1e-15);
        assert!((post.condition_number - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_likelihood_noise_recovers_observation() {
        let y = sig(&[0.3, -1.2]);
        let post = gaussian_posterior_oracle(&LinearOp::identity(&[2]), &y, 1.0, 0.5, 1e-6).unwrap();
        assert!(post.mean.max_abs_diff(&y) < 1e-10);
    }

    #[test]
    fn stats_of_simple_streams() {
        let c = vec![sig(&[2.0, -1.0]); 5];
        let s = sample_stats(&c).unwrap();
        assert_eq!(s.variance.data(), &[0.0, 0.0]);
        assert_eq!(s.count, 5);
        let s = sample_stats(&[sig(&[1.0]), sig(&[4.0])]).unwrap();
        assert_eq!(s.mean.data(), &[2.5]);
        assert!((s.variance.data()[0] - 4.5).abs() < 1e-15);
        assert!(sample_stats(&[sig(&[1.0])]).is_err());
    }

    #[test]
    fn iid_ess_close_to_count() {
        let mut rng = Rng::new(11);
        let chain: Vec<f64> = (0..20_000).map(|_| rng.normal()).collect();
        let ess = effective_sample_size(&chain);
        assert!((ess / 20_000.0 - 1.0).abs() < 0.2, "ess {ess}");
    }

    #[test]
    fn ar1_ess_matches_theory() {
        let phi: f64 = 0.9;
        let mut rng = Rng::new(3);
        let mut v = 0.0;
        let chain: Vec<f64> = (0..200_000)
            .map(|_| {
                v = phi * v + rng.normal();
                v
            })
            .collect();
        let expected = 200_000.0 * (1.0 - phi) / (1.0 + phi);
        let ess = effective_sample_size(&chain);
        assert!((ess / expected - 1.0).abs() < 0.2, "ess {ess} vs {expected}");
    }

    #[test]
    fn stability_product_formula() {
        let cfg = UlaConfig {
            delta: 0.01,
            sigma: 0.5,
            sigma_w: 0.2,
            ..UlaConfig::default()
        };
        assert!((cfg.stability_product(2.0) - 0.01 * (4.0 + 100.0)).abs() < 1e-12);
    }
}
