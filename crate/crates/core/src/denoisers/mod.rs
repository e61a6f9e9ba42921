//! Denoisers `D_σ` and the diagnostics that decide which convergence
//! guarantees apply to them.

mod classical;
mod diagnostics;
mod gs;
mod spectral;

pub use classical::{gaussian_kernel, GaussianFilter, Nlm, TvDenoiser, WaveletDenoiser};
pub use diagnostics::{
    default_fd_step, estimate_residual_lipschitz, fd_jacobian, homogeneity_defect,
    jacobian_asymmetry, red_regularizer, red_true_gradient, LipschitzEstimate, LipschitzMethod,
    DENSE_JACOBIAN_MAX_DIM,
};
pub use gs::GsDenoiser;
pub use spectral::{dct_forward, dct_inverse, LinearSpectral, ShrinkRule, SpectralTransform};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::LinearOp;
use crate::proximal::Prox;
use crate::score_oracle::GmmPrior;
use crate::signal::Signal;

pub trait Denoiser: Send + Sync {
    fn name(&self) -> &str;

    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal>;

    fn is_linear(&self) -> bool {
        false
    }

    /// Potential `g` of a gradient-step denoiser `D = id − ∇g`.
    fn potential(&self, _x: &Signal, _sigma: f64) -> Option<Result<f64>> {
        None
    }

    /// Function `φ` with `D = prox_φ`, when the denoiser is known to be one.
    fn prox_potential(&self, _x: &Signal, _sigma: f64) -> Option<Result<f64>> {
        None
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be nonnegative, got {sigma}")));
    }
    Ok(())
}

impl<T: Denoiser + ?Sized> Denoiser for Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        (**self).denoise(x, sigma)
    }
    fn is_linear(&self) -> bool {
        (**self).is_linear()
    }
    fn potential(&self, x: &Signal, sigma: f64) -> Option<Result<f64>> {
        (**self).potential(x, sigma)
    }
    fn prox_potential(&self, x: &Signal, sigma: f64) -> Option<Result<f64>> {
        (**self).prox_potential(x, sigma)
    }
}

/// `D(x) = prox_{c σ² f}(x)` for a proximable `f`.
pub struct ProxDenoiser {
    prox: Box<dyn Prox>,
    scale: f64,
    name: String,
}

impl ProxDenoiser {
    pub fn new(prox: Box<dyn Prox>, scale: f64) -> Self {
        let name = format!("prox-{}", prox.name());
        Self { prox, scale, name }
    }
}

impl Denoiser for ProxDenoiser {
    fn name(&self) -> &str {
        &self.name
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        let lambda = self.scale * sigma * sigma;
        if lambda == 0.0 {
            return Ok(x.clone());
        }
        self.prox.prox(x, lambda)
    }
    fn prox_potential(&self, x: &Signal, sigma: f64) -> Option<Result<f64>> {
        let lambda = self.scale * sigma * sigma;
        self.prox.value(x).map(|v| Ok(lambda * v))
    }
}

/// `D(x) = α x`
#[derive(Clone, Copy, Debug)]
pub struct ScaledIdentity {
    pub alpha: f64,
}

impl Denoiser for ScaledIdentity {
    fn name(&self) -> &str {
        "scaled-identity"
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        Ok(x.scale(self.alpha))
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn prox_potential(&self, x: &Signal, _sigma: f64) -> Option<Result<f64>> {
        // αx = prox of ½(1/α − 1)‖x‖² for α ∈ (0, 1]
        (self.alpha > 0.0 && self.alpha <= 1.0)
            .then(|| Ok(0.5 * (1.0 / self.alpha - 1.0) * x.norm_sq()))
    }
}

/// `D(x) = A x` for a fixed linear operator, independent of `σ`.
#[derive(Clone, Debug)]
pub struct MatrixDenoiser {
    op: LinearOp,
}

impl MatrixDenoiser {
    pub fn new(op: LinearOp) -> Result<Self> {
        if op.in_shape() != op.out_shape() {
            return Err(Error::param("denoiser operator must be square"));
        }
        Ok(Self { op })
    }

    pub fn operator(&self) -> &LinearOp {
        &self.op
    }
}

impl Denoiser for MatrixDenoiser {
    fn name(&self) -> &str {
        "matrix"
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        self.op.apply(x)
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// Exact MMSE denoiser `E[x | x_σ]` under a Gaussian-mixture prior.
#[derive(Clone, Debug)]
pub struct MmseGmm {
    prior: GmmPrior,
}

impl MmseGmm {
    pub fn new(prior: GmmPrior) -> Self {
        Self { prior }
    }

    pub fn prior(&self) -> &GmmPrior {
        &self.prior
    }
}

impl Denoiser for MmseGmm {
    fn name(&self) -> &str {
        "mmse-gmm"
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        self.prior.posterior_mean(x, sigma)
    }
    fn is_linear(&self) -> bool {
        self.prior.num_components() == 1 && self.prior.means()[0].iter().all(|&m| m == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proximal::L1;
    use crate::rng::Rng;

    #[test]
    fn prox_denoiser_uses_sigma_squared() {
        let d = ProxDenoiser::new(Box::new(L1 { weight: 1.0 }), 2.0);
        let x = Signal::from_vec(vec![1.0, -0.1]).unwrap();
        let out = d.denoise(&x, 0.5).unwrap();
        assert_eq!(out.data(), &[0.5, 0.0]);
        assert_eq!(d.denoise(&x, 0.0).unwrap(), x);
    }

    #[test]
    fn mmse_limits() {
        let p = GmmPrior::new(vec![0.4, 0.6], vec![vec![1.0, -1.0], vec![0.5, 2.0]], vec![0.2, 0.4]).unwrap();
        let d = MmseGmm::new(p.clone());
        let x = Signal::from_vec(vec![0.3, 0.7]).unwrap();
        assert_eq!(d.denoise(&x, 0.0).unwrap(), x);
        let far = d.denoise(&x, 1e5).unwrap();
        let mean = Signal::from_vec(p.mean()).unwrap();
        assert!(far.max_abs_diff(&mean) < 1e-6);
        let mut rng = Rng::new(1);
        let near = p.sample_smoothed(0.0, &mut rng);
        assert!(d.denoise(&near, 1e-4).unwrap().max_abs_diff(&near) <= 1e-3);
    }
}
