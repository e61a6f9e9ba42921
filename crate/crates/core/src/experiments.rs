//! Built-in test images, the deblurring benchmark instance and convergence
//! bookkeeping shared by the command-line harness and the test suites.

use crate::denoisers::LinearSpectral;
use crate::error::{Error, Result};
use crate::metrics::add_gaussian_noise;
use crate::operators::{make_blur, naive_svd_solve, uniform_kernel, LinearOp};
use crate::proximal::LeastSquares;
use crate::rng::Rng;
use crate::signal::Signal;
use crate::solvers::{run_pgd, RegSlot, SolverConfig, SolverOutput, StopReason};
use crate::trace::Trace;

pub const BUILTIN_IMAGES: [&str; 3] = ["shapes", "bars", "rings"];

/// Side length of the built-in images.
pub const BUILTIN_SIZE: usize = 64;

/// A run counts as convergent when its residual decays at least this fast in
/// log-log scale (or it met its tolerance).
pub const CONVERGENCE_SLOPE: f64 = -0.35;

/// Piecewise-constant shapes over smooth ramps, values in `[0, 1]`.
pub fn builtin_image(name: &str, size: usize) -> Result<Signal> {
    if size < 8 {
        return Err(Error::param("built-in images need a side of at least 8"));
    }
    let s = size as f64;
    let pixel = |r: usize, c: usize| -> f64 {
        let (y, x) = (r as f64 / s, c as f64 / s);
        match name {
            "shapes" => {
                let mut v = 0.15 + 0.3 * x;
                if (0.15..0.5).contains(&y) && (0.2..0.65).contains(&x) {
                    v = 0.8;
                }
                if (y - 0.68).powi(2) + (x - 0.62).powi(2) < 0.19f64.powi(2) {
                    v = 0.1;
                }
                if y > 0.6 && x < 0.35 && (x - 0.05) > (0.95 - y) {
                    v = 0.95;
                }
                v
            }
            "bars" => {
                let base = if ((x * 8.0) as usize) % 2 == 0 { 0.25 } else { 0.7 };
                base + 0.2 * (y - 0.5)
            }
            "rings" => {
                let d = ((y - 0.5).powi(2) + (x - 0.5).powi(2)).sqrt();
                let band = if ((d * 10.0) as usize) % 2 == 0 { 0.65 } else { 0.3 };
                band + 0.1 * (x + y - 1.0)
            }
            _ => f64::NAN,
        }
    };
    if !BUILTIN_IMAGES.contains(&name) {
        return Err(Error::param(format!(
            "unknown built-in image '{name}', expected one of {}",
            BUILTIN_IMAGES.join(", ")
        )));
    }
    let data = (0..size * size).map(|i| pixel(i / size, i % size).clamp(0.0, 1.0)).collect();
    Ok(Signal::new(data, vec![size, size])?.with_range_hint(0.0, 1.0))
}

/// Blurred and noisy observation of a known image.
#[derive(Clone, Debug)]
pub struct DeblurInstance {
    pub truth: Signal,
    pub operator: LinearOp,
    pub observed: Signal,
    pub noise_sigma: f64,
}

impl DeblurInstance {
    /// `y = k * x + σξ` with a uniform `kernel_size²` blur and `σ` a fraction
    /// of the unit peak.
    pub fn new(truth: Signal, kernel_size: usize, noise_fraction: f64, seed: u64) -> Result<Self> {
        let operator = make_blur(&uniform_kernel(kernel_size)?, truth.shape())?;
        let clean = operator.apply(&truth)?;
        let observed = add_gaussian_noise(&clean, noise_fraction, &mut Rng::new(seed))?;
        Ok(Self {
            truth,
            operator,
            observed,
            noise_sigma: noise_fraction,
        })
    }

    /// 64×64 built-in image, 9×9 uniform blur, 3% noise.
    pub fn standard(name: &str, seed: u64) -> Result<Self> {
        Self::new(builtin_image(name, BUILTIN_SIZE)?, 9, 0.03, seed)
    }
}

/// Least-squares slope of `log r_k` against `log k` (`k` counted from 1) over
/// the last decade of iterations, ignoring zero residuals. `None` with fewer
/// than three usable points.
pub fn residual_slope(trace: &Trace) -> Option<f64> {
    let rows = trace.rows();
    let last = rows.last()?.iter + 1;
    let first = (last / 10).max(1);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.iter + 1 >= first && r.step_residual > 0.0 && r.step_residual.is_finite())
        .map(|r| (((r.iter + 1) as f64).ln(), r.step_residual.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn min_residual(trace: &Trace) -> f64 {
    trace
        .step_residuals()
        .into_iter()
        .filter(|r| r.is_finite())
        .fold(f64::INFINITY, f64::min)
}

/// Not diverged, and either stopped at tolerance or decaying faster than
/// [`CONVERGENCE_SLOPE`].
pub fn is_convergent(out: &SolverOutput) -> bool {
    match out.stop {
        StopReason::Diverged => false,
        StopReason::Converged => true,
        StopReason::MaxIterations => residual_slope(&out.trace).is_some_and(|s| s <= CONVERGENCE_SLOPE),
    }
}

/// Noise ladder `δ_k = 2⁻ᵏ`, `k = 1..=levels`.
pub fn dyadic_deltas(levels: usize) -> Vec<f64> {
    (1..=levels).map(|k| 0.5f64.powi(k as i32)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    /// `λ(δ) = c√δ`
    pub c: f64,
    /// Gradient step of the plug-and-play iteration.
    pub eta: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            deltas: dyadic_deltas(8),
            c: 0.5,
            eta: 0.25,
            seed: 0,
            tol: 1e-13,
            max_iter: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub lambda: f64,
    pub error: f64,
}

/// Reconstruction error against the minimum-norm solution `x† = K⁺Kx`
/// as noise `δ` and denoiser strength `λ(δ)` shrink together.
///
/// Each observation is `y⁰ + δe` with one fixed random unit direction `e`.
/// The reconstruction is the limit of `x⁺ = D_λ(x − ηKᵀ(Kx − y))`; a zero
/// `λ` falls back to the pseudoinverse.
pub fn regularization_sweep(
    k: &LinearOp,
    x: &Signal,
    family: &LinearSpectral,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if cfg.deltas.is_empty() || cfg.deltas.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::param("noise ladder must be nonempty and nonnegative"));
    }
    if !(cfg.c >= 0.0) {
        return Err(Error::param("λ rule constant must be nonnegative"));
    }
    let y0 = k.apply(x)?;
    let x_dagger = naive_svd_solve(k, &y0, None)?;
    let e = Rng::new(cfg.seed).normal_signal(y0.shape());
    let e = e.scale(1.0 / e.norm());
    let solver = SolverConfig::default()
        .with_step(cfg.eta)
        .with_tol(cfg.tol)
        .with_max_iter(cfg.max_iter);
    let solver = SolverConfig {
        track_objective: false,
        ..solver
    };
    cfg.deltas
        .iter()
        .map(|&delta| {
            let y = y0.axpy(delta, &e);
            let lambda = cfg.c * delta.sqrt();
            let rec = if lambda == 0.0 {
                naive_svd_solve(k, &y, None)?
            } else {
                let d = family.with_lambda(lambda)?;
                let f = LeastSquares::new(k.clone(), y.clone())?;
                run_pgd(&f, RegSlot::denoiser(&d, 1.0), &solver, &k.adjoint(&y)?)?.x
            };
            Ok(SweepRow {
                delta,
                lambda,
                error: rec.distance(&x_dagger),
            })
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("delta,lambda,error\n");
    for r in rows {
        out.push_str(&format!("{:e},{:e},{:e}\n", r.delta, r.lambda, r.error));
    }
    out
}

pub fn strictly_decreasing(rows: &[SweepRow]) -> bool {
    rows.windows(2).all(|w| w[1].error < w[0].error)
}
