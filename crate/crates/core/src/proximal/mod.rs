//! Proximal maps `prox_{λf}(v) = argmin_x f(x) + ‖x − v‖²/(2λ)` and smooth
//! data terms.

mod tv;
mod wavelet;

pub use tv::{project_tv_dual_ball, prox_tv, prox_tv_detailed, tv_norm, TvSolution};
pub use wavelet::{haar_forward, haar_inverse, max_haar_levels};

use crate::error::{Error, Result};
use crate::operators::{solve_shifted_normal, LinearOp};
use crate::signal::Signal;

pub trait Prox: Send + Sync {
    fn name(&self) -> &str;

    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal>;

    /// `f(x)`, possibly `+∞`, when it can be evaluated.
    fn value(&self, _x: &Signal) -> Option<f64> {
        None
    }

    /// Coordinate-wise prox with per-entry step `lambdas[i]`. Only separable
    /// functions implement this.
    fn prox_separable(&self, _v: &Signal, _lambdas: &[f64]) -> Option<Result<Signal>> {
        None
    }

    fn is_convex(&self) -> bool {
        true
    }
}

/// Differentiable term `f` with `L`-Lipschitz gradient.
pub trait Smooth: Send + Sync {
    fn value(&self, x: &Signal) -> f64;
    fn gradient(&self, x: &Signal) -> Result<Signal>;
    fn lipschitz(&self) -> f64;
    /// Strong convexity modulus, when known.
    fn strong_convexity(&self) -> Option<f64> {
        None
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::param(format!("prox step must be positive, got {lambda}")));
    }
    Ok(())
}

fn check_separable(v: &Signal, lambdas: &[f64]) -> Result<()> {
    if lambdas.len() != v.len() {
        return Err(Error::param(format!(
            "{} steps for a signal of length {}",
            lambdas.len(),
            v.len()
        )));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::param("separable prox steps must be positive"));
    }
    Ok(())
}

/// `sign(v)·max(|v| − τ, 0)` entrywise.
pub fn soft_threshold(v: &Signal, tau: f64) -> Signal {
    v.map(|x| shrink(x, tau))
}

fn shrink(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

pub fn prox_box(v: &Signal, lo: f64, hi: f64) -> Result<Signal> {
    if !(lo <= hi) {
        return Err(Error::param(format!("empty box [{lo}, {hi}]")));
    }
    Ok(v.map(|x| x.clamp(lo, hi)))
}

/// `Wᵀ soft_threshold(W v, τ)` with the orthonormal Haar transform `W`.
pub fn prox_wavelet_l1(v: &Signal, tau: f64, levels: usize) -> Result<Signal> {
    if !(tau >= 0.0) {
        return Err(Error::param(format!("threshold must be nonnegative, got {tau}")));
    }
    let c = haar_forward(v, levels)?;
    haar_inverse(&soft_threshold(&c, tau), levels)
}

/// Prox of `½‖Kx − y‖²`: `(I + λKᵀK)^{-1}(v + λKᵀy)`.
pub fn prox_quadratic_fidelity(v: &Signal, lambda: f64, k: &LinearOp, y: &Signal) -> Result<Signal> {
    check_lambda(lambda)?;
    let kty = k.adjoint(y)?;
    v.check_same_shape(&kty)?;
    let rhs = kty.axpy(1.0 / lambda, v);
    solve_shifted_normal(k, 1.0 / lambda, &rhs)
}

/// `‖prox_f(v) + prox_{f*}(v) − v‖∞` at unit step.
pub fn moreau_check(p: &dyn Prox, p_conj: &dyn Prox, v: &Signal) -> Result<f64> {
    let a = p.prox(v, 1.0)?;
    let b = p_conj.prox(v, 1.0)?;
    Ok(a.add(&b).sub(v).norm_inf())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl Prox for Zero {
    fn name(&self) -> &str {
        "zero"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        check_lambda(lambda)?;
        Ok(v.clone())
    }
    fn value(&self, _x: &Signal) -> Option<f64> {
        Some(0.0)
    }
    fn prox_separable(&self, v: &Signal, lambdas: &[f64]) -> Option<Result<Signal>> {
        Some(check_separable(v, lambdas).map(|_| v.clone()))
    }
}

/// `weight·‖x‖₁`
#[derive(Clone, Copy, Debug)]
pub struct L1 {
    pub weight: f64,
}

impl Prox for L1 {
    fn name(&self) -> &str {
        "l1"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        check_lambda(lambda)?;
        Ok(soft_threshold(v, lambda * self.weight))
    }
    fn value(&self, x: &Signal) -> Option<f64> {
        Some(self.weight * x.data().iter().map(|v| v.abs()).sum::<f64>())
    }
    fn prox_separable(&self, v: &Signal, lambdas: &[f64]) -> Option<Result<Signal>> {
        Some(check_separable(v, lambdas).map(|_| {
            v.with_data(
                v.data()
                    .iter()
                    .zip(lambdas)
                    .map(|(&x, &l)| shrink(x, l * self.weight))
                    .collect(),
            )
        }))
    }
}

/// Indicator of `[lo, hi]ⁿ`.
#[derive(Clone, Copy, Debug)]
pub struct BoxIndicator {
    pub lo: f64,
    pub hi: f64,
}

impl Prox for BoxIndicator {
    fn name(&self) -> &str {
        "box"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        check_lambda(lambda)?;
        prox_box(v, self.lo, self.hi)
    }
    fn value(&self, x: &Signal) -> Option<f64> {
        let inside = x.data().iter().all(|&v| v >= self.lo && v <= self.hi);
        Some(if inside { 0.0 } else { f64::INFINITY })
    }
    fn prox_separable(&self, v: &Signal, lambdas: &[f64]) -> Option<Result<Signal>> {
        Some(check_separable(v, lambdas).and_then(|_| prox_box(v, self.lo, self.hi)))
    }
}

/// `½‖x − center‖²`; with no center this is `½‖x‖²`, its own conjugate.
#[derive(Clone, Debug, Default)]
pub struct SquaredDistance {
    pub center: Option<Signal>,
}

impl SquaredDistance {
    pub fn half_squared_norm() -> Self {
        Self { center: None }
    }

    pub fn to(center: Signal) -> Self {
        Self {
            center: Some(center),
        }
    }

    fn offset(&self, x: &Signal) -> Result<Signal> {
        match &self.center {
            Some(c) => {
                x.check_same_shape(c)?;
                Ok(x.sub(c))
            }
            None => Ok(x.clone()),
        }
    }
}

impl Prox for SquaredDistance {
    fn name(&self) -> &str {
        "squared-distance"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        check_lambda(lambda)?;
        let l = vec![lambda; v.len()];
        self.prox_separable(v, &l).expect("separable")
    }
    fn value(&self, x: &Signal) -> Option<f64> {
        self.offset(x).ok().map(|d| 0.5 * d.norm_sq())
    }
    fn prox_separable(&self, v: &Signal, lambdas: &[f64]) -> Option<Result<Signal>> {
        let run = || -> Result<Signal> {
            check_separable(v, lambdas)?;
            let data = match &self.center {
                Some(c) => {
                    v.check_same_shape(c)?;
                    v.data()
                        .iter()
                        .zip(c.data())
                        .zip(lambdas)
                        .map(|((&x, &ci), &l)| (x + l * ci) / (1.0 + l))
                        .collect()
                }
                None => v.data().iter().zip(lambdas).map(|(&x, &l)| x / (1.0 + l)).collect(),
            };
            Ok(v.with_data(data))
        };
        Some(run())
    }
}

impl Smooth for SquaredDistance {
    fn value(&self, x: &Signal) -> f64 {
        Prox::value(self, x).unwrap_or(f64::NAN)
    }
    fn gradient(&self, x: &Signal) -> Result<Signal> {
        self.offset(x)
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn strong_convexity(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `½ Σ_i w_i (x_i − c_i)²` with positive weights.
#[derive(Clone, Debug)]
pub struct WeightedQuadratic {
    weights: Signal,
    center: Signal,
}

impl WeightedQuadratic {
    pub fn new(weights: Signal, center: Signal) -> Result<Self> {
        weights.check_same_shape(&center)?;
        if weights.data().iter().any(|&w| !(w > 0.0)) {
            return Err(Error::param("quadratic weights must be positive"));
        }
        Ok(Self { weights, center })
    }

    pub fn weights(&self) -> &Signal {
        &self.weights
    }

    pub fn center(&self) -> &Signal {
        &self.center
    }
}

impl Smooth for WeightedQuadratic {
    fn value(&self, x: &Signal) -> f64 {
        x.data()
            .iter()
            .zip(self.center.data())
            .zip(self.weights.data())
            .map(|((&xi, &ci), &wi)| 0.5 * wi * (xi - ci) * (xi - ci))
            .sum()
    }
    fn gradient(&self, x: &Signal) -> Result<Signal> {
        x.check_same_shape(&self.center)?;
        let d = x.sub(&self.center);
        Ok(d.zip_map(&self.weights, |a, b| a * b))
    }
    fn lipschitz(&self) -> f64 {
        self.weights.norm_inf()
    }
    fn strong_convexity(&self) -> Option<f64> {
        Some(self.weights.data().iter().fold(f64::INFINITY, |m, &w| m.min(w)))
    }
}

impl Prox for WeightedQuadratic {
    fn name(&self) -> &str {
        "weighted-quadratic"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        check_lambda(lambda)?;
        let l = vec![lambda; v.len()];
        self.prox_separable(v, &l).expect("separable")
    }
    fn value(&self, x: &Signal) -> Option<f64> {
        Some(Smooth::value(self, x))
    }
    fn prox_separable(&self, v: &Signal, lambdas: &[f64]) -> Option<Result<Signal>> {
        let run = || -> Result<Signal> {
            check_separable(v, lambdas)?;
            v.check_same_shape(&self.center)?;
            Ok(v.with_data(
                v.data()
                    .iter()
                    .zip(self.center.data())
                    .zip(self.weights.data())
                    .zip(lambdas)
                    .map(|(((&x, &c), &w), &l)| (x + l * w * c) / (1.0 + l * w))
                    .collect(),
            ))
        };
        Some(run())
    }
}

/// `weight·‖W x‖₁` for the orthonormal Haar transform `W`.
#[derive(Clone, Copy, Debug)]
pub struct WaveletL1 {
    pub weight: f64,
    pub levels: usize,
}

impl Prox for WaveletL1 {
    fn name(&self) -> &str {
        "wavelet-l1"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        check_lambda(lambda)?;
        prox_wavelet_l1(v, lambda * self.weight, self.levels)
    }
    fn value(&self, x: &Signal) -> Option<f64> {
        haar_forward(x, self.levels)
            .ok()
            .map(|c| self.weight * c.data().iter().map(|v| v.abs()).sum::<f64>())
    }
}

/// `weight·‖∇x‖₁` (anisotropic).
#[derive(Clone, Copy, Debug)]
pub struct TotalVariation {
    pub weight: f64,
    /// Duality-gap target; `None` means `1e-6·n`.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl TotalVariation {
    pub fn new(weight: f64) -> Self {
        Self {
            weight,
            tol: None,
            max_iter: 100_000,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }
}

impl Prox for TotalVariation {
    fn name(&self) -> &str {
        "tv"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        check_lambda(lambda)?;
        let tol = self.tol.unwrap_or(1e-6 * v.len() as f64);
        prox_tv(v, lambda * self.weight, tol, self.max_iter)
    }
    fn value(&self, x: &Signal) -> Option<f64> {
        Some(self.weight * tv_norm(x))
    }
}

/// Conjugate of `weight·TV`: the indicator of `{∇ᵀp : ‖p‖∞ ≤ weight}`.
#[derive(Clone, Copy, Debug)]
pub struct TvConjugate {
    pub weight: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl TvConjugate {
    pub fn new(weight: f64) -> Self {
        Self {
            weight,
            tol: 1e-12,
            max_iter: 1_000_000,
        }
    }
}

impl Prox for TvConjugate {
    fn name(&self) -> &str {
        "tv-conjugate"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        check_lambda(lambda)?;
        project_tv_dual_ball(v, self.weight, self.tol, self.max_iter)
    }
}

/// `½‖Kx − y‖²`
#[derive(Clone, Debug)]
pub struct LeastSquares {
    k: LinearOp,
    y: Signal,
    lipschitz: f64,
}

impl LeastSquares {
    pub fn new(k: LinearOp, y: Signal) -> Result<Self> {
        if y.shape() != k.out_shape() {
            return Err(Error::shape(k.out_shape(), y.shape()));
        }
        let l = k.spectral_norm();
        Ok(Self {
            k,
            y,
            lipschitz: l * l,
        })
    }

    pub fn operator(&self) -> &LinearOp {
        &self.k
    }

    pub fn observation(&self) -> &Signal {
        &self.y
    }

    pub fn residual(&self, x: &Signal) -> Result<Signal> {
        Ok(self.k.apply(x)?.sub(&self.y))
    }
}

impl Smooth for LeastSquares {
    fn value(&self, x: &Signal) -> f64 {
        self.residual(x).map(|r| 0.5 * r.norm_sq()).unwrap_or(f64::NAN)
    }
    fn gradient(&self, x: &Signal) -> Result<Signal> {
        self.k.adjoint(&self.residual(x)?)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

impl Prox for LeastSquares {
    fn name(&self) -> &str {
        "least-squares"
    }
    fn prox(&self, v: &Signal, lambda: f64) -> Result<Signal> {
        prox_quadratic_fidelity(v, lambda, &self.k, &self.y)
    }
    fn value(&self, x: &Signal) -> Option<f64> {
        Some(Smooth::value(self, x))
    }
}
