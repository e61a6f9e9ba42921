use super::{stop_for, Recorder, SolverConfig, SolverOutput};
use crate::denoisers::GsDenoiser;
use crate::error::{Error, Result};
use crate::proximal::{LeastSquares, Prox, Smooth};
use crate::signal::Signal;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GsPnpOptions {
    /// Regularization weight `λ` in `F = f + λg`.
    pub lambda: f64,
    /// Step `τ`, the initial trial when backtracking.
    pub tau: f64,
    pub backtracking: bool,
    /// Sufficient-decrease constant `γ` in `F(x) − F(x⁺) ≥ (γ/τ)‖x⁺ − x‖²`.
    pub gamma: f64,
    pub max_halvings: usize,
}

impl GsPnpOptions {
    pub fn new(lambda: f64, tau: f64) -> Self {
        Self {
            lambda,
            tau,
            backtracking: false,
            gamma: 0.25,
            max_halvings: 60,
        }
    }

    pub fn with_backtracking(mut self) -> Self {
        self.backtracking = true;
        self
    }
}

/// Gradient-step plug-and-play: `x⁺ = prox_{τf}(x − τλ∇g(x))` on
/// `F = f + λg`, where `g` is the potential of the gradient-step denoiser.
///
/// Without backtracking `τ` must satisfy `τλLip(∇g) < 1`. With backtracking
/// the trial step starts at `τ` every iteration and is halved until the
/// sufficient-decrease test passes. The fixed-point column holds `‖∇F(x⁺)‖`.
pub fn run_gs_pnp(
    f: &LeastSquares,
    gs: &GsDenoiser,
    opts: GsPnpOptions,
    cfg: &SolverConfig,
    x0: Option<&Signal>,
) -> Result<SolverOutput> {
    let GsPnpOptions { lambda, tau, .. } = opts;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param(format!("weight must be nonnegative, got {lambda}")));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::param(format!("step must be positive, got {tau}")));
    }
    if !(opts.gamma > 0.0) {
        return Err(Error::param("sufficient-decrease constant must be positive"));
    }
    if !opts.backtracking && tau * lambda * gs.lipschitz() >= 1.0 {
        return Err(Error::param(format!(
            "step {tau} violates τλL < 1 with λ = {lambda}, L = {}",
            gs.lipschitz()
        )));
    }
    let big_f = |x: &Signal| -> Result<f64> { Ok(Smooth::value(f, x) + lambda * gs.g(x)?) };
    let mut x = match x0 {
        Some(x0) => x0.clone(),
        None => f.operator().adjoint(f.observation())?,
    };
    let mut rec = Recorder::new(cfg, &x)?;
    let mut grad = gs.grad_g(&x)?;
    let mut fx = big_f(&x)?;
    for it in 0..cfg.max_iter {
        let mut trial = tau;
        let mut halvings = 0;
        let (next, f_next) = loop {
            let cand = f.prox(&x.axpy(-trial * lambda, &grad), trial)?;
            rec.guard(it, &cand)?;
            let f_cand = big_f(&cand)?;
            if !opts.backtracking {
                break (cand, f_cand);
            }
            let slack = 4.0 * f64::EPSILON * fx.abs();
            if fx - f_cand + slack >= opts.gamma / trial * cand.distance(&x).powi(2) {
                break (cand, f_cand);
            }
            if halvings == opts.max_halvings {
                return Err(Error::BacktrackingExhausted {
                    halvings,
                    f_before: fx,
                    f_after: f_cand,
                });
            }
            halvings += 1;
            trial *= 0.5;
        };
        let grad_next = gs.grad_g(&next)?;
        let grad_f = Smooth::gradient(f, &next)?;
        let stationarity = grad_f.axpy(lambda, &grad_next).norm();
        let step = next.distance(&x);
        let done = rec.row(it, &next, step, f_next, stationarity);
        x = next;
        grad = grad_next;
        fx = f_next;
        if done {
            return Ok(rec.finish(x, stop_for(true), it + 1));
        }
    }
    Ok(rec.finish(x, stop_for(false), cfg.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::LinearOp;

    fn sig(v: &[f64]) -> Signal {
        Signal::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn identity_smoother_is_proximal_point() {
        let gs = GsDenoiser::new(LinearOp::identity(&[2]), 1.0).unwrap();
        let k = LinearOp::diagonal(sig(&[1.0, 2.0]));
        let y = sig(&[1.0, 1.0]);
        let f = LeastSquares::new(k, y).unwrap();
        let cfg = SolverConfig::default().with_max_iter(4).with_tol(0.0);
        let out = run_gs_pnp(&f, &gs, GsPnpOptions::new(1.0, 0.5), &cfg, Some(&sig(&[0.0, 0.0]))).unwrap();
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..4 {
            a = (a + 0.5 * 1.0) / (1.0 + 0.5);
            b = (b + 0.5 * 2.0) / (1.0 + 0.5 * 4.0);
        }
        assert!((out.x.data()[0] - a).abs() < 1e-14 && (out.x.data()[1] - b).abs() < 1e-14);
    }

    #[test]
    fn step_bound_enforced_without_backtracking() {
        let a = LinearOp::diagonal(sig(&[0.0, 0.5]));
        let gs = GsDenoiser::new(a, 1.0).unwrap();
        let f = LeastSquares::new(LinearOp::identity(&[2]), sig(&[1.0, 1.0])).unwrap();
        let cfg = SolverConfig::default();
        assert!(run_gs_pnp(&f, &gs, GsPnpOptions::new(2.0, 0.6), &cfg, None).is_err());
        assert!(run_gs_pnp(&f, &gs, GsPnpOptions::new(2.0, 0.6).with_backtracking(), &cfg, None).is_ok());
    }
}
