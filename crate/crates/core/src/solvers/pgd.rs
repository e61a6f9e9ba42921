use super::{opt, stop_for, Recorder, RegSlot, SolverConfig, SolverOutput};
use crate::error::{Error, Result};
use crate::proximal::{Prox, Smooth};
use crate::signal::Signal;

/// Proximal gradient: `x⁺ = prox_{λg}(x − λ∇f(x))`, or `D_σ(x − λ∇f(x))`.
pub fn run_pgd(f: &dyn Smooth, reg: RegSlot, cfg: &SolverConfig, x0: &Signal) -> Result<SolverOutput> {
    let mut rec = Recorder::new(cfg, x0)?;
    let lambda = cfg.step;
    let mut x = x0.clone();
    for k in 0..cfg.max_iter {
        let grad = f.gradient(&x)?;
        let next = reg.apply(&x.axpy(-lambda, &grad), lambda)?;
        rec.guard(k, &next)?;
        let step = next.distance(&x);
        let objective = if rec.tracking() {
            f.value(&next) + opt(reg.objective(&next, lambda))
        } else {
            f64::NAN
        };
        let done = rec.row(k, &next, step, objective, step / lambda);
        x = next;
        if done {
            return Ok(rec.finish(x, stop_for(true), k + 1));
        }
    }
    Ok(rec.finish(x, stop_for(false), cfg.max_iter))
}

/// Proximal gradient in the metric of a fixed positive diagonal `B`:
/// `x⁺ = prox_g^B(x − B⁻¹∇f(x))`. `cfg.step` is ignored.
pub fn run_pgd_preconditioned(
    f: &dyn Smooth,
    reg: &dyn Prox,
    b: &Signal,
    cfg: &SolverConfig,
    x0: &Signal,
) -> Result<SolverOutput> {
    x0.check_same_shape(b)?;
    if b.data().iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::param("preconditioner entries must be positive"));
    }
    let first = b.data()[0];
    let scalar = b.data().iter().all(|&v| v == first);
    let steps: Vec<f64> = b.data().iter().map(|&v| 1.0 / v).collect();
    if !scalar && reg.prox_separable(x0, &steps).is_none() {
        return Err(Error::Unsupported(format!(
            "scaled prox of non-separable {} needs a scalar preconditioner",
            reg.name()
        )));
    }
    let mut rec = Recorder::new(cfg, x0)?;
    let mut x = x0.clone();
    for k in 0..cfg.max_iter {
        let grad = f.gradient(&x)?;
        let next = if scalar {
            let lambda = 1.0 / first;
            reg.prox(&x.axpy(-lambda, &grad), lambda)?
        } else {
            let v = x.with_data(
                x.data()
                    .iter()
                    .zip(grad.data())
                    .zip(&steps)
                    .map(|((xi, gi), si)| xi - si * gi)
                    .collect(),
            );
            reg.prox_separable(&v, &steps)
                .expect("separability checked above")?
        };
        rec.guard(k, &next)?;
        let step = next.distance(&x);
        let objective = if rec.tracking() {
            f.value(&next) + opt(reg.value(&next))
        } else {
            f64::NAN
        };
        let done = rec.row(k, &next, step, objective, step);
        x = next;
        if done {
            return Ok(rec.finish(x, stop_for(true), k + 1));
        }
    }
    Ok(rec.finish(x, stop_for(false), cfg.max_iter))
}

/// Relaxed proximal gradient (αPGD):
///
/// ```text
/// q   = (1 − α) x + α y
/// y⁺  = prox_{λg}(y − λ∇f(q))
/// x⁺  = (1 − α) x + α y⁺
/// ```
///
/// The objective column holds `F(x⁺) + (α/2)(1 − 1/α)²‖x⁺ − x‖²`.
pub fn run_apgd(
    f: &dyn Smooth,
    reg: RegSlot,
    cfg: &SolverConfig,
    x0: &Signal,
    y0: Option<&Signal>,
) -> Result<SolverOutput> {
    let mut rec = Recorder::new(cfg, x0)?;
    let (lambda, alpha) = (cfg.step, cfg.alpha);
    let mut x = x0.clone();
    let mut y = match y0 {
        Some(y0) => {
            x0.check_same_shape(y0)?;
            y0.clone()
        }
        None => x0.clone(),
    };
    let weight = 0.5 * alpha * (1.0 - 1.0 / alpha).powi(2);
    for k in 0..cfg.max_iter {
        let q = x.lincomb(1.0 - alpha, &y, alpha);
        let grad = f.gradient(&q)?;
        let y_next = reg.apply(&y.axpy(-lambda, &grad), lambda)?;
        let next = x.lincomb(1.0 - alpha, &y_next, alpha);
        rec.guard(k, &next)?;
        let step = next.distance(&x);
        let objective = if rec.tracking() {
            f.value(&next) + opt(reg.objective(&next, lambda)) + weight * step * step
        } else {
            f64::NAN
        };
        let fp = next.distance(&y_next);
        let done = rec.row(k, &next, step, objective, fp);
        x = next;
        y = y_next;
        if done {
            return Ok(rec.finish(x, stop_for(true), k + 1));
        }
    }
    Ok(rec.finish(x, stop_for(false), cfg.max_iter))
}
