use super::{is_diverged, opt, stop_for, Recorder, RegSlot, SolverConfig, SolverOutput, StopReason};
use crate::error::{Error, Result};
use crate::operators::{solve_shifted_normal, LinearOp};
use crate::proximal::prox_quadratic_fidelity;
use crate::signal::Signal;

/// Douglas–Rachford splitting with the maps applied in the given order:
///
/// ```text
/// y  = A(x)
/// z  = B(2y − x)
/// x⁺ = x + z − y
/// ```
///
/// `A = prox_{λf}`, `B = prox_{λg}` is the classical scheme; putting the
/// denoiser first or second gives the two plug-and-play orders. The returned
/// signal is `A(x)` at the final `x`, which is also kept as the auxiliary
/// output.
pub fn run_drs(first: RegSlot, second: RegSlot, cfg: &SolverConfig, x0: &Signal) -> Result<SolverOutput> {
    let mut rec = Recorder::new(cfg, x0)?;
    let lambda = cfg.step;
    let mut x = x0.clone();
    let mut stop = StopReason::MaxIterations;
    let mut iterations = cfg.max_iter;
    for k in 0..cfg.max_iter {
        let y = first.apply(&x, lambda)?;
        let z = second.apply(&y.lincomb(2.0, &x, -1.0), lambda)?;
        let next = x.add(&z).sub(&y);
        rec.guard(k, &next)?;
        let residual = z.distance(&y);
        let objective = if rec.tracking() {
            opt(first.objective(&y, lambda)) + opt(second.objective(&y, lambda))
        } else {
            f64::NAN
        };
        let done = rec.row(k, &y, residual, objective, residual);
        x = next;
        if done {
            stop = StopReason::Converged;
            iterations = k + 1;
            break;
        }
    }
    let y = first.apply(&x, lambda)?;
    let mut out = rec.finish(y, stop, iterations);
    out.auxiliary = Some(x);
    Ok(out)
}

/// Scaled-form ADMM for `½‖Kx − y‖² + g(x)`:
///
/// ```text
/// x⁺ = (KᵀK + ρI)⁻¹(Kᵀy + ρ(z − u))
/// z⁺ = prox_{g/ρ}(x⁺ + u)
/// u⁺ = u + x⁺ − z⁺
/// ```
///
/// Stops when both `‖x⁺ − x‖` and the primal residual `‖x⁺ − z⁺‖` are below
/// the tolerance. The scaled dual is returned as the auxiliary output.
pub fn run_admm(
    k: &LinearOp,
    y: &Signal,
    reg: RegSlot,
    cfg: &SolverConfig,
    x0: Option<&Signal>,
    z0: Option<&Signal>,
    u0: Option<&Signal>,
) -> Result<SolverOutput> {
    let kty = k.adjoint(y)?;
    let mut x = start(x0, &kty)?;
    let mut z = start(z0, &x)?;
    let mut u = match u0 {
        Some(u0) => start(Some(u0), &x)?,
        None => Signal::zeros(x.shape()),
    };
    let mut rec = Recorder::new(cfg, &x)?;
    let rho = cfg.rho;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = cfg.max_iter;
    for it in 0..cfg.max_iter {
        let rhs = kty.axpy(rho, &z.sub(&u));
        let x_next = solve_shifted_normal(k, rho, &rhs)?;
        rec.guard(it, &x_next)?;
        let z_next = reg.apply(&x_next.add(&u), 1.0 / rho)?;
        rec.guard(it, &z_next)?;
        let u_next = u.add(&x_next).sub(&z_next);
        let step = x_next.distance(&x);
        let primal = x_next.distance(&z_next);
        let objective = if rec.tracking() {
            0.5 * k.apply(&x_next)?.sub(y).norm_sq() + opt(reg.objective(&x_next, 1.0 / rho))
        } else {
            f64::NAN
        };
        rec.row(it, &x_next, step, objective, primal);
        x = x_next;
        z = z_next;
        u = u_next;
        if step.max(primal) <= cfg.tol {
            stop = StopReason::Converged;
            iterations = it + 1;
            break;
        }
    }
    let mut out = rec.finish(x, stop, iterations);
    out.auxiliary = Some(u);
    Ok(out)
}

fn start(given: Option<&Signal>, default: &Signal) -> Result<Signal> {
    match given {
        Some(s) => {
            s.check_same_shape(default)?;
            Ok(s.clone())
        }
        None => Ok(default.clone()),
    }
}

/// Penalty (and optional denoiser level) per half-quadratic-splitting
/// iteration. The last entry repeats once the schedule runs out.
#[derive(Clone, Debug, PartialEq)]
pub struct HqsSchedule {
    pub rhos: Vec<f64>,
    pub sigmas: Option<Vec<f64>>,
}

impl HqsSchedule {
    pub fn fixed(rho: f64) -> Self {
        Self {
            rhos: vec![rho],
            sigmas: None,
        }
    }

    /// Geometrically decreasing denoiser levels from `sigma_start` to
    /// `sigma_end` over `steps` iterations with `ρ_k = λσ_w²/σ_k²`.
    pub fn decreasing(sigma_w: f64, lambda: f64, sigma_start: f64, sigma_end: f64, steps: usize) -> Result<Self> {
        if !(sigma_w > 0.0 && lambda > 0.0 && sigma_start > 0.0 && sigma_end > 0.0) || steps == 0 {
            return Err(Error::param("decreasing schedule needs positive levels and steps"));
        }
        let sigmas: Vec<f64> = (0..steps)
            .map(|i| {
                let t = if steps == 1 { 1.0 } else { i as f64 / (steps - 1) as f64 };
                sigma_start * (sigma_end / sigma_start).powf(t)
            })
            .collect();
        let rhos = sigmas.iter().map(|s| lambda * sigma_w * sigma_w / (s * s)).collect();
        Ok(Self {
            rhos,
            sigmas: Some(sigmas),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.rhos.is_empty() || self.rhos.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::param("penalty schedule must be nonempty and positive"));
        }
        if let Some(s) = &self.sigmas {
            if s.len() != self.rhos.len() || s.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::param("sigma schedule must be positive and match the penalties"));
            }
        }
        Ok(())
    }

    fn at(&self, k: usize) -> (f64, Option<f64>) {
        let i = k.min(self.rhos.len() - 1);
        (self.rhos[i], self.sigmas.as_ref().map(|s| s[i]))
    }
}

/// Half-quadratic splitting:
///
/// ```text
/// x⁺ = argmin ½‖Kx − y‖² + (ρ_k/2)‖x − z‖²
/// z⁺ = prox_{g/ρ_k}(x⁺)   (or D_{σ_k}(x⁺))
/// ```
///
/// Returns the `z` sequence. Divergence ends the run with
/// [`StopReason::Diverged`] and the last finite iterate instead of an error.
pub fn run_hqs(
    k: &LinearOp,
    y: &Signal,
    reg: RegSlot,
    schedule: &HqsSchedule,
    cfg: &SolverConfig,
    x0: Option<&Signal>,
) -> Result<SolverOutput> {
    schedule.validate()?;
    let kty = k.adjoint(y)?;
    let mut z = start(x0, &kty)?;
    let mut rec = Recorder::new(cfg, &z)?;
    for it in 0..cfg.max_iter {
        let (rho, sigma) = schedule.at(it);
        let slot = match sigma {
            Some(s) => reg.with_sigma(s),
            None => reg,
        };
        let x = prox_quadratic_fidelity(&z, 1.0 / rho, k, y)?;
        if is_diverged(&x) {
            let last = rec.last_finite().clone();
            return Ok(rec.finish(last, StopReason::Diverged, it));
        }
        let next = slot.apply(&x, 1.0 / rho)?;
        if rec.diverged(&next) {
            let last = rec.last_finite().clone();
            return Ok(rec.finish(last, StopReason::Diverged, it));
        }
        let step = next.distance(&z);
        let objective = if rec.tracking() {
            0.5 * k.apply(&next)?.sub(y).norm_sq() + opt(slot.objective(&next, 1.0 / rho))
        } else {
            f64::NAN
        };
        let done = rec.row(it, &next, step, objective, next.distance(&x));
        z = next;
        if done {
            return Ok(rec.finish(z, stop_for(true), it + 1));
        }
    }
    Ok(rec.finish(z, stop_for(false), cfg.max_iter))
}
