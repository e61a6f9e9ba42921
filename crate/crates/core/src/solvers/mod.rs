//! Iterative schemes for `min f(x) + g(x)` and their plug-and-play variants.
//!
//! Every run records one [`TraceRow`] per iteration: row `k` describes the
//! iterate produced by iteration `k`.

mod drs;
mod fixed_point;
mod gs_pnp;
mod pgd;
mod red;

pub use drs::{run_admm, run_drs, run_hqs, HqsSchedule};
pub use fixed_point::{run_fixed_point, FixedPointOutput, FixedPointProblem, CONTRACTION_TAIL};
pub use gs_pnp::{run_gs_pnp, GsPnpOptions};
pub use pgd::{run_apgd, run_pgd, run_pgd_preconditioned};
pub use red::{red_apg_momentum, run_red_apg, run_red_gd, run_red_pg, RedParams};

use std::time::Instant;

use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::proximal::Prox;
use crate::signal::Signal;
use crate::trace::{Trace, TraceRow};

/// Iterates with a non-finite entry or a norm above this count as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Step size `λ` (or `τ`, `η` depending on the scheme).
    pub step: f64,
    /// Relaxation `α` of αPGD.
    pub alpha: f64,
    /// ADMM / HQS penalty `ρ`.
    pub rho: f64,
    pub max_iter: usize,
    /// Stop once the step residual is at most this.
    pub tol: f64,
    pub track_objective: bool,
    pub record_time: bool,
    /// Ground truth for the PSNR column.
    pub reference: Option<Signal>,
    pub peak: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            alpha: 0.5,
            rho: 1.0,
            max_iter: 500,
            tol: 1e-9,
            track_objective: true,
            record_time: false,
            reference: None,
            peak: 1.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_reference(mut self, reference: Signal) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::param(format!("step must be positive, got {}", self.step)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::param(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("tolerance must be nonnegative"));
        }
        if !(self.peak > 0.0) {
            return Err(Error::param("peak must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    Diverged,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iterations",
            StopReason::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverOutput {
    pub x: Signal,
    pub trace: Trace,
    pub stop: StopReason,
    pub iterations: usize,
    /// Auxiliary variable of splitting schemes: the governing `x_k` of
    /// Douglas–Rachford, the scaled dual `u_k` of ADMM.
    pub auxiliary: Option<Signal>,
}

/// Regularization step: an exact proximal map or a denoiser standing in for it.
#[derive(Clone, Copy)]
pub enum RegSlot<'a> {
    Prox(&'a dyn Prox),
    Denoiser { denoiser: &'a dyn Denoiser, sigma: f64 },
}

impl<'a> RegSlot<'a> {
    pub fn denoiser(denoiser: &'a dyn Denoiser, sigma: f64) -> Self {
        RegSlot::Denoiser { denoiser, sigma }
    }

    /// `prox_{λg}(v)` or `D_σ(v)`.
    pub fn apply(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        match self {
            RegSlot::Prox(p) => p.prox(v, lambda),
            RegSlot::Denoiser { denoiser, sigma } => denoiser.denoise(v, *sigma),
        }
    }

    /// `g(x)` for a prox slot; `φ(x)/λ` when the denoiser is `prox_φ`, so
    /// that the slot acts as `prox_{λ (φ/λ)}`.
    pub fn objective(&self, x: &Signal, lambda: f64) -> Option<f64> {
        match self {
            RegSlot::Prox(p) => p.value(x),
            RegSlot::Denoiser { denoiser, sigma } => denoiser
                .prox_potential(x, *sigma)
                .and_then(|r| r.ok())
                .map(|phi| phi / lambda),
        }
    }

    pub(crate) fn with_sigma(&self, sigma: f64) -> RegSlot<'a> {
        match *self {
            RegSlot::Prox(p) => RegSlot::Prox(p),
            RegSlot::Denoiser { denoiser, .. } => RegSlot::Denoiser { denoiser, sigma },
        }
    }
}

pub(crate) fn is_diverged(x: &Signal) -> bool {
    !x.is_finite() || x.norm() > DIVERGENCE_NORM
}

/// Shared bookkeeping: divergence checks, trace rows, stopping.
pub(crate) struct Recorder<'c> {
    cfg: &'c SolverConfig,
    trace: Trace,
    start: Instant,
    last_finite: Signal,
}

impl<'c> Recorder<'c> {
    pub(crate) fn new(cfg: &'c SolverConfig, x0: &Signal) -> Result<Self> {
        cfg.validate()?;
        if let Some(r) = &cfg.reference {
            x0.check_same_shape(r)?;
        }
        Ok(Self {
            cfg,
            trace: Trace::new(),
            start: Instant::now(),
            last_finite: x0.clone(),
        })
    }

    /// Fails with [`Error::Diverged`] if `x` left the finite region.
    pub(crate) fn guard(&mut self, iteration: usize, x: &Signal) -> Result<()> {
        if is_diverged(x) {
            return Err(Error::Diverged {
                iteration,
                last_finite: Box::new(self.last_finite.clone()),
            });
        }
        self.last_finite = x.clone();
        Ok(())
    }

    /// Like [`Recorder::guard`] but reports instead of failing.
    pub(crate) fn diverged(&mut self, x: &Signal) -> bool {
        if is_diverged(x) {
            return true;
        }
        self.last_finite = x.clone();
        false
    }

    pub(crate) fn last_finite(&self) -> &Signal {
        &self.last_finite
    }

    pub(crate) fn tracking(&self) -> bool {
        self.cfg.track_objective
    }

    /// Pushes row `k` and reports whether the step residual met the tolerance.
    pub(crate) fn row(&mut self, k: usize, x: &Signal, step: f64, objective: f64, fp: f64) -> bool {
        let psnr_value = match &self.cfg.reference {
            Some(r) => psnr(x, r, self.cfg.peak).unwrap_or(f64::NAN),
            None => f64::NAN,
        };
        let seconds = if self.cfg.record_time {
            self.start.elapsed().as_secs_f64()
        } else {
            f64::NAN
        };
        self.trace.push(TraceRow {
            iter: k,
            objective,
            step_residual: step,
            fp_residual: fp,
            psnr: psnr_value,
            seconds,
        });
        step <= self.cfg.tol
    }

    pub(crate) fn finish(self, x: Signal, stop: StopReason, iterations: usize) -> SolverOutput {
        SolverOutput {
            x,
            trace: self.trace,
            stop,
            iterations,
            auxiliary: None,
        }
    }
}

pub(crate) fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// `max_iter` reached or converged at iteration `k`.
pub(crate) fn stop_for(converged: bool) -> StopReason {
    if converged {
        StopReason::Converged
    } else {
        StopReason::MaxIterations
    }
}
