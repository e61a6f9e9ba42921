use super::{stop_for, Recorder, SolverConfig, SolverOutput, StopReason};
use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::operators::LinearOp;
use crate::proximal::prox_quadratic_fidelity;
use crate::signal::Signal;

/// Regularization weight `λ` and denoiser level `σ`; the RED term enters with
/// weight `λ/σ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RedParams {
    pub lambda: f64,
    pub sigma: f64,
}

impl RedParams {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param(format!("RED weight must be nonnegative, got {lambda}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("denoiser level must be positive, got {sigma}")));
        }
        Ok(Self { lambda, sigma })
    }

    pub fn weight(&self) -> f64 {
        self.lambda / (self.sigma * self.sigma)
    }
}

struct RedState<'a> {
    k: &'a LinearOp,
    y: &'a Signal,
    d: &'a dyn Denoiser,
    params: RedParams,
}

impl RedState<'_> {
    fn denoise(&self, x: &Signal) -> Result<Signal> {
        self.d.denoise(x, self.params.sigma)
    }

    /// `Kᵀ(Kx − y) + (λ/σ²)(x − D(x))` given `D(x)`.
    fn fixed_point_map(&self, x: &Signal, dx: &Signal) -> Result<Signal> {
        let data = self.k.adjoint(&self.k.apply(x)?.sub(self.y))?;
        Ok(data.axpy(self.params.weight(), &x.sub(dx)))
    }

    /// `½‖Kx − y‖² + (λ/σ²)·½xᵀ(x − D(x))`
    fn objective(&self, x: &Signal, dx: &Signal) -> Result<f64> {
        let r = self.k.apply(x)?.sub(self.y);
        Ok(0.5 * r.norm_sq() + 0.5 * self.params.weight() * x.dot(&x.sub(dx)))
    }

    fn row(&self, rec: &mut Recorder, k: usize, x: &Signal, dx: &Signal, step: f64) -> Result<bool> {
        let fc = self.fixed_point_map(x, dx)?.norm();
        let objective = if rec.tracking() {
            self.objective(x, dx)?
        } else {
            f64::NAN
        };
        Ok(rec.row(k, x, step, objective, fc))
    }
}

fn initial(k: &LinearOp, y: &Signal, x0: Option<&Signal>) -> Result<Signal> {
    let kty = k.adjoint(y)?;
    match x0 {
        Some(x0) => {
            x0.check_same_shape(&kty)?;
            Ok(x0.clone())
        }
        None => Ok(kty),
    }
}

/// RED by gradient descent with step `η = cfg.step`:
/// `x⁺ = x − η[Kᵀ(Kx − y) + (λ/σ²)(x − D(x))]`.
///
/// The fixed-point column is the norm of the bracket at `x⁺`.
pub fn run_red_gd(
    k: &LinearOp,
    y: &Signal,
    d: &dyn Denoiser,
    params: RedParams,
    cfg: &SolverConfig,
    x0: Option<&Signal>,
) -> Result<SolverOutput> {
    let state = RedState { k, y, d, params };
    let mut x = initial(k, y, x0)?;
    let mut rec = Recorder::new(cfg, &x)?;
    let mut dx = state.denoise(&x)?;
    for it in 0..cfg.max_iter {
        let grad = state.fixed_point_map(&x, &dx)?;
        let next = x.axpy(-cfg.step, &grad);
        rec.guard(it, &next)?;
        let d_next = state.denoise(&next)?;
        let step = next.distance(&x);
        let done = state.row(&mut rec, it, &next, &d_next, step)?;
        x = next;
        dx = d_next;
        if done {
            return Ok(rec.finish(x, stop_for(true), it + 1));
        }
    }
    Ok(rec.finish(x, stop_for(false), cfg.max_iter))
}

fn check_l(l: f64) -> Result<()> {
    if !(l > 1.0) || !l.is_finite() {
        return Err(Error::param(format!("RED proximal gradient needs L > 1, got {l}")));
    }
    Ok(())
}

/// RED proximal gradient:
///
/// ```text
/// x_k = argmin ½‖Kx − y‖² + (λL/2)‖x − v_{k−1}‖²
/// v_k = (1/L) D(x_k) − ((1 − L)/L) x_k
/// ```
///
/// with `λ` the effective weight `λ/σ²` of [`RedParams`]. Returns the `x`
/// sequence.
pub fn run_red_pg(
    k: &LinearOp,
    y: &Signal,
    d: &dyn Denoiser,
    params: RedParams,
    l: f64,
    cfg: &SolverConfig,
    v0: Option<&Signal>,
) -> Result<SolverOutput> {
    check_l(l)?;
    red_pg_loop(k, y, d, params, l, cfg, v0, false)
}

/// RED with Nesterov momentum:
///
/// ```text
/// x_k = argmin ½‖Kx − y‖² + (λL/2)‖x − v_{k−1}‖²
/// t_k = (1 + √(1 + 4t²_{k−1}))/2
/// z_k = x_k + ((t_{k−1} − 1)/t_k)(x_k − x_{k−1})
/// v_k = (1/L) D(x_k) − ((1 − L)/L) z_k
/// ```
///
/// with `t₀ = 1` and `x₀ = v₀`. Divergence ends the run with
/// [`StopReason::Diverged`] instead of an error.
pub fn run_red_apg(
    k: &LinearOp,
    y: &Signal,
    d: &dyn Denoiser,
    params: RedParams,
    l: f64,
    cfg: &SolverConfig,
    v0: Option<&Signal>,
) -> Result<SolverOutput> {
    check_l(l)?;
    red_pg_loop(k, y, d, params, l, cfg, v0, true)
}

/// `t_0, …, t_n` of the momentum sequence starting at `t₀ = 1`.
pub fn red_apg_momentum(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(1.0);
    for i in 0..n {
        let prev: f64 = t[i];
        t.push((1.0 + (1.0 + 4.0 * prev * prev).sqrt()) / 2.0);
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn red_pg_loop(
    k: &LinearOp,
    y: &Signal,
    d: &dyn Denoiser,
    params: RedParams,
    l: f64,
    cfg: &SolverConfig,
    v0: Option<&Signal>,
    momentum: bool,
) -> Result<SolverOutput> {
    let state = RedState { k, y, d, params };
    let weight = params.weight();
    if !(weight > 0.0) {
        return Err(Error::param("RED proximal gradient needs a positive weight"));
    }
    let mut v = initial(k, y, v0)?;
    let mut x = v.clone();
    let mut rec = Recorder::new(cfg, &x)?;
    let mut t = 1.0_f64;
    for it in 0..cfg.max_iter {
        let next = prox_quadratic_fidelity(&v, 1.0 / (weight * l), k, y)?;
        if momentum {
            if rec.diverged(&next) {
                let last = rec.last_finite().clone();
                return Ok(rec.finish(last, StopReason::Diverged, it));
            }
        } else {
            rec.guard(it, &next)?;
        }
        let dx = state.denoise(&next)?;
        let z = if momentum {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let z = next.axpy((t - 1.0) / t_next, &next.sub(&x));
            t = t_next;
            z
        } else {
            next.clone()
        };
        v = dx.lincomb(1.0 / l, &z, -(1.0 - l) / l);
        let step = next.distance(&x);
        let done = state.row(&mut rec, it, &next, &dx, step)?;
        x = next;
        if done {
            return Ok(rec.finish(x, stop_for(true), it + 1));
        }
    }
    Ok(rec.finish(x, stop_for(false), cfg.max_iter))
}
