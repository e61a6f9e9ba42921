use crate::error::{Error, Result};
use crate::operators::{conjugate_gradient, power_iteration, LinearOp};
use crate::rng::Rng;
use crate::signal::Signal;

use super::{check_sigma, Denoiser};

/// Gradient-step denoiser `D = id − ∇g` with the explicit potential
/// `g(x) = (w/2)‖x − A x‖²` for a symmetric linear smoother `A`.
/// The noise level passed to `denoise` is not used.
#[derive(Clone, Debug)]
pub struct GsDenoiser {
    smoother: LinearOp,
    weight: f64,
    lipschitz: f64,
}

impl GsDenoiser {
    pub fn new(smoother: LinearOp, weight: f64) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::param(format!("weight must be positive, got {weight}")));
        }
        if !smoother.is_self_adjoint(1e-10) {
            return Err(Error::param("gradient-step smoother must be symmetric"));
        }
        let norm_sq = match smoother.frequency_response() {
            Some(h) => h.iter().fold(0.0_f64, |m, hk| m.max((1.0 - hk.re).powi(2))),
            None => {
                let x0 = Rng::new(0x65).normal_signal(smoother.in_shape());
                let r = |v: &Signal| v.sub(&smoother.apply(v).expect("shape"));
                power_iteration(|v| r(&r(v)), &x0, 1e-14, 50_000)
            }
        };
        Ok(Self {
            smoother,
            weight,
            lipschitz: weight * norm_sq,
        })
    }

    pub fn smoother(&self) -> &LinearOp {
        &self.smoother
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Lipschitz constant of `∇g`, `w‖I − A‖²`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn residual(&self, x: &Signal) -> Result<Signal> {
        Ok(x.sub(&self.smoother.apply(x)?))
    }

    pub fn g(&self, x: &Signal) -> Result<f64> {
        Ok(0.5 * self.weight * self.residual(x)?.norm_sq())
    }

    /// `∇g(x) = w (I − A)ᵀ(I − A) x`
    pub fn grad_g(&self, x: &Signal) -> Result<Signal> {
        let r = self.residual(x)?;
        Ok(self.residual(&r)?.scale(self.weight))
    }

    /// `D⁻¹x`, defined while `∇g` is a contraction.
    pub fn inverse(&self, x: &Signal) -> Result<Signal> {
        if self.lipschitz >= 1.0 {
            return Err(Error::Unsupported(
                "denoiser is not invertible when Lip(∇g) ≥ 1".into(),
            ));
        }
        if let LinearOp::Circulant(c) = &self.smoother {
            let w = self.weight;
            return Ok(c.filter(x, |h| {
                let m = (1.0 - h.re).powi(2);
                num_complex::Complex64::new(1.0 / (1.0 - w * m), 0.0)
            }));
        }
        let apply = |v: &Signal| {
            let gv = self.grad_g(v).expect("shape checked");
            v.sub(&gv)
        };
        Ok(conjugate_gradient(apply, x, None, 1e-13, 10 * x.len().max(1))?.x)
    }

    /// `φ(x) = g(z) − ½‖∇g(z)‖²` at `z = D⁻¹x`, for which `D = prox_φ`.
    pub fn phi(&self, x: &Signal) -> Result<f64> {
        let z = self.inverse(x)?;
        Ok(self.g(&z)? - 0.5 * self.grad_g(&z)?.norm_sq())
    }
}

impl Denoiser for GsDenoiser {
    fn name(&self) -> &str {
        "gradient-step"
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        Ok(x.sub(&self.grad_g(x)?))
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn potential(&self, x: &Signal, _sigma: f64) -> Option<Result<f64>> {
        Some(self.g(x))
    }
    fn prox_potential(&self, x: &Signal, _sigma: f64) -> Option<Result<f64>> {
        (self.lipschitz < 1.0).then(|| self.phi(x))
    }
}
