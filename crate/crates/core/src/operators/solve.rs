use crate::error::{Error, Result};
use crate::signal::Signal;

use super::LinearOp;

/// Relative residual target for every linear sub-problem.
pub const CG_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Signal,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite map. Stops when
/// `‖b − A x‖ ≤ tol ‖b‖`.
pub fn conjugate_gradient(
    apply: impl Fn(&Signal) -> Signal,
    b: &Signal,
    x0: Option<&Signal>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: Signal::zeros(b.shape()),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut x = x0.cloned().unwrap_or_else(|| Signal::zeros(b.shape()));
    let mut r = b.sub(&apply(&x));
    let mut p = r.clone();
    let mut rr = r.norm_sq();
    let mut rel = rr.sqrt() / bnorm;
    for k in 0..max_iter {
        if rel <= tol {
            return Ok(CgOutcome {
                x,
                iterations: k,
                relative_residual: rel,
            });
        }
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x = x.axpy(alpha, &p);
        r = r.axpy(-alpha, &ap);
        let rr_next = r.norm_sq();
        p = r.axpy(rr_next / rr, &p);
        rr = rr_next;
        rel = rr.sqrt() / bnorm;
    }
    // the recursive residual drifts; confirm with a true one before failing
    let true_rel = b.sub(&apply(&x)).norm() / bnorm;
    if true_rel <= tol {
        return Ok(CgOutcome {
            x,
            iterations: max_iter,
            relative_residual: true_rel,
        });
    }
    Err(Error::NotConverged {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: true_rel,
    })
}

/// `(KᵀK + rho I)^{-1} b`, exact for diagonal, mask and circulant operators
/// and by conjugate gradients otherwise.
pub fn solve_shifted_normal(k: &LinearOp, rho: f64, b: &Signal) -> Result<Signal> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    if b.shape() != k.in_shape() {
        return Err(Error::shape(k.in_shape(), b.shape()));
    }
    match k {
        LinearOp::Diagonal(d) | LinearOp::Mask(d) => Ok(b.zip_map(d, |bi, di| bi / (di * di + rho))),
        LinearOp::Circulant(c) => Ok(c.solve_shifted_normal(rho, b)),
        _ => {
            let n = b.len();
            let out = conjugate_gradient(
                |v| k.gram(v).expect("shape checked").axpy(rho, v),
                b,
                None,
                CG_TOL,
                10 * n.max(1),
            )?;
            Ok(out.x)
        }
    }
}

/// Tikhonov reconstruction `x_α = (KᵀK + αI)^{-1} Kᵀy`.
pub fn tikhonov_solve(k: &LinearOp, y: &Signal, alpha: f64) -> Result<Signal> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("alpha must be positive, got {alpha}")));
    }
    let kty = k.adjoint(y)?;
    solve_shifted_normal(k, alpha, &kty)
}
