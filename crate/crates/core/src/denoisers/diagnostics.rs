use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::signal::Signal;

use super::Denoiser;

/// Largest signal for which a dense finite-difference Jacobian is assembled.
pub const DENSE_JACOBIAN_MAX_DIM: usize = 4096;
const DENSE_LIPSCHITZ_MAX_DIM: usize = 1024;

pub fn default_fd_step(x: &Signal) -> f64 {
    1e-4 * (1.0 + x.norm_inf())
}

fn checked(d: &dyn Denoiser, x: &Signal, sigma: f64) -> Result<Signal> {
    let out = d.denoise(x, sigma)?;
    if !out.is_finite() {
        return Err(Error::InvalidSignal(format!(
            "{} produced non-finite output",
            d.name()
        )));
    }
    Ok(out)
}

/// Central-difference Jacobian of `D_σ` at `x`, column `j` being `∂D/∂x_j`.
pub fn fd_jacobian(d: &dyn Denoiser, x: &Signal, sigma: f64, fd_step: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    if n > DENSE_JACOBIAN_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "dense Jacobian limited to {DENSE_JACOBIAN_MAX_DIM} entries, signal has {n}"
        )));
    }
    if !(fd_step > 0.0) {
        return Err(Error::param("finite-difference step must be positive"));
    }
    let mut jac = DMatrix::zeros(n, n);
    let mut p = x.clone();
    for j in 0..n {
        let xj = x.data()[j];
        p.data_mut()[j] = xj + fd_step;
        let plus = checked(d, &p, sigma)?;
        p.data_mut()[j] = xj - fd_step;
        let minus = checked(d, &p, sigma)?;
        p.data_mut()[j] = xj;
        for i in 0..n {
            jac[(i, j)] = (plus.data()[i] - minus.data()[i]) / (2.0 * fd_step);
        }
    }
    Ok(jac)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LipschitzMethod {
    /// Singular values of the assembled finite-difference Jacobian of `D − id`.
    DenseJacobian,
    /// Power iteration with central-difference Jacobian-vector products.
    PowerIteration,
}

#[derive(Clone, Debug)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub fd_step: f64,
    pub method: LipschitzMethod,
    pub per_probe: Vec<f64>,
}

/// Estimate of `ε = Lip(D − id)` as the largest `‖J_{D−id}(x_p)‖₂` over probe
/// points `x_0 = base`, `x_p = base + σ ξ_p`.
pub fn estimate_residual_lipschitz(
    d: &dyn Denoiser,
    base: &Signal,
    sigma: f64,
    probes: usize,
    fd_step: Option<f64>,
    rng: &mut Rng,
) -> Result<LipschitzEstimate> {
    if probes == 0 {
        return Err(Error::param("need at least one probe"));
    }
    let n = base.len();
    let method = if n <= DENSE_LIPSCHITZ_MAX_DIM {
        LipschitzMethod::DenseJacobian
    } else {
        LipschitzMethod::PowerIteration
    };
    let mut per_probe = Vec::with_capacity(probes);
    let mut step_used = 0.0;
    for p in 0..probes {
        let x = if p == 0 {
            base.clone()
        } else {
            base.axpy(sigma, &rng.normal_signal(base.shape()))
        };
        let h = fd_step.unwrap_or_else(|| default_fd_step(&x));
        step_used = h;
        let value = match method {
            LipschitzMethod::DenseJacobian => {
                let r = fd_jacobian(d, &x, sigma, h)? - DMatrix::<f64>::identity(n, n);
                if n <= crate::operators::SVD_MAX_DIM {
                    r.singular_values().iter().fold(0.0_f64, |m, &s| m.max(s))
                } else {
                    let rtr = r.transpose() * &r;
                    let x0 = rng.normal_signal(&[n]);
                    crate::operators::power_iteration(
                        |v| {
                            let w = &rtr * DVector::from_column_slice(v.data());
                            v.with_data(w.as_slice().to_vec())
                        },
                        &x0,
                        1e-14,
                        100_000,
                    )
                    .sqrt()
                }
            }
            LipschitzMethod::PowerIteration => jvp_power_iteration(d, &x, sigma, h, rng)?,
        };
        per_probe.push(value);
    }
    let value = per_probe.iter().fold(0.0_f64, |m, &v| m.max(v));
    Ok(LipschitzEstimate {
        value,
        fd_step: step_used,
        method,
        per_probe,
    })
}

fn jvp_power_iteration(d: &dyn Denoiser, x: &Signal, sigma: f64, h: f64, rng: &mut Rng) -> Result<f64> {
    let mut v = rng.normal_signal(x.shape());
    v = v.scale(1.0 / v.norm());
    let mut est = 0.0;
    for _ in 0..5000 {
        let plus = checked(d, &x.axpy(h, &v), sigma)?;
        let minus = checked(d, &x.axpy(-h, &v), sigma)?;
        let rv = plus.sub(&minus).scale(0.5 / h).sub(&v);
        let norm = rv.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let converged = (norm - est).abs() <= 1e-12 * norm;
        est = norm;
        v = rv.scale(1.0 / norm);
        if converged {
            break;
        }
    }
    Ok(est)
}

/// `‖J − Jᵀ‖_F / ‖J‖_F` for the finite-difference Jacobian of `D_σ` at `x`.
pub fn jacobian_asymmetry(d: &dyn Denoiser, x: &Signal, sigma: f64, fd_step: Option<f64>) -> Result<f64> {
    let h = fd_step.unwrap_or_else(|| default_fd_step(x));
    let j = fd_jacobian(d, x, sigma, h)?;
    let asym = (&j - j.transpose()).norm();
    Ok(asym / j.norm().max(f64::MIN_POSITIVE))
}

/// `‖D((1+δ)x) − (1+δ)D(x)‖ / (δ‖D(x)‖)`; zero when `δ = 0`.
pub fn homogeneity_defect(d: &dyn Denoiser, x: &Signal, sigma: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Ok(0.0);
    }
    let dx = checked(d, x, sigma)?;
    let scaled = checked(d, &x.scale(1.0 + delta), sigma)?;
    let defect = scaled.sub(&dx.scale(1.0 + delta)).norm();
    Ok(defect / (delta.abs() * dx.norm() + f64::MIN_POSITIVE))
}

/// Explicit regularizer `R(x) = ½ xᵀ(x − D(x))`.
pub fn red_regularizer(d: &dyn Denoiser, x: &Signal, sigma: f64) -> Result<f64> {
    let dx = checked(d, x, sigma)?;
    Ok(0.5 * x.dot(&x.sub(&dx)))
}

/// `∇R(x) = x − ½D(x) − ½J(x)ᵀx`, which equals `x − D(x)` only for
/// homogeneous denoisers with symmetric Jacobian.
pub fn red_true_gradient(d: &dyn Denoiser, x: &Signal, sigma: f64, fd_step: Option<f64>) -> Result<Signal> {
    let h = fd_step.unwrap_or_else(|| default_fd_step(x));
    let j = fd_jacobian(d, x, sigma, h)?;
    let jtx = j.tr_mul(&DVector::from_column_slice(x.data()));
    let dx = checked(d, x, sigma)?;
    Ok(x.with_data(
        x.data()
            .iter()
            .zip(dx.data())
            .zip(jtx.iter())
            .map(|((xi, di), ji)| xi - 0.5 * di - 0.5 * ji)
            .collect(),
    ))
}
