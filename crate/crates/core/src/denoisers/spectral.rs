//! Linear denoisers diagonal in an orthonormal basis: `D = Wᵀ diag(φ_λ) W`.

use crate::error::{Error, Result};
use crate::proximal::{haar_forward, haar_inverse};
use crate::signal::Signal;

use super::{check_sigma, Denoiser};

fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let a = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            m[k * n + i] =
                a * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    m
}

fn dct_apply(x: &Signal, inverse: bool) -> Signal {
    let (h, w, c) = x.dims3();
    let mut out = x.data().to_vec();
    let mut line = Vec::new();
    for (size, stride, count, outer) in [(w, c, h, w * c), (h, w * c, w, c)] {
        if size < 2 {
            continue;
        }
        let m = dct_matrix(size);
        for o in 0..count {
            for ch in 0..c {
                let base = o * outer + ch;
                line.clear();
                line.extend((0..size).map(|i| out[base + i * stride]));
                for k in 0..size {
                    let v: f64 = if inverse {
                        (0..size).map(|i| m[i * size + k] * line[i]).sum()
                    } else {
                        (0..size).map(|i| m[k * size + i] * line[i]).sum()
                    };
                    out[base + k * stride] = v;
                }
            }
        }
    }
    x.with_data(out)
}

/// Separable orthonormal DCT-II over the spatial axes.
pub fn dct_forward(x: &Signal) -> Signal {
    dct_apply(x, false)
}

pub fn dct_inverse(c: &Signal) -> Signal {
    dct_apply(c, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralTransform {
    Haar { levels: usize },
    Dct,
}

impl SpectralTransform {
    fn forward(&self, x: &Signal) -> Result<Signal> {
        match *self {
            SpectralTransform::Haar { levels } => haar_forward(x, levels),
            SpectralTransform::Dct => Ok(dct_forward(x)),
        }
    }

    fn inverse(&self, c: &Signal) -> Result<Signal> {
        match *self {
            SpectralTransform::Haar { levels } => haar_inverse(c, levels),
            SpectralTransform::Dct => Ok(dct_inverse(c)),
        }
    }
}

/// Coefficient shrinkage `φ_i = 1/(1 + λ w_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShrinkRule {
    /// `w_i = 1`
    Uniform,
    /// `w_i = 1 + r/h + c/w` at coefficient position `(r, c)`, so finer
    /// coefficients are damped harder.
    Graded,
}

pub const SPECTRAL_LAMBDA_MAX: f64 = 1e6;

#[derive(Clone, Copy, Debug)]
pub struct LinearSpectral {
    pub transform: SpectralTransform,
    pub rule: ShrinkRule,
    lambda: f64,
}

impl LinearSpectral {
    pub fn new(transform: SpectralTransform, rule: ShrinkRule, lambda: f64) -> Result<Self> {
        if !(0.0..=SPECTRAL_LAMBDA_MAX).contains(&lambda) {
            return Err(Error::param(format!(
                "lambda {lambda} outside [0, {SPECTRAL_LAMBDA_MAX}]"
            )));
        }
        Ok(Self {
            transform,
            rule,
            lambda,
        })
    }

    /// `x/(1 + λ)` written in the DCT basis.
    pub fn uniform(lambda: f64) -> Result<Self> {
        Self::new(SpectralTransform::Dct, ShrinkRule::Uniform, lambda)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.transform, self.rule, lambda)
    }

    fn coefficient_weights(&self, shape: &[usize]) -> Vec<f64> {
        let (h, w, c) = crate::signal::dims3(shape);
        match self.rule {
            ShrinkRule::Uniform => vec![1.0; h * w * c],
            ShrinkRule::Graded => (0..h * w * c)
                .map(|i| {
                    let p = i / c;
                    1.0 + (p / w) as f64 / h as f64 + (p % w) as f64 / w as f64
                })
                .collect(),
        }
    }

    /// Per-coefficient multipliers `φ_λ` for signals of this shape.
    pub fn multipliers(&self, shape: &[usize]) -> Vec<f64> {
        self.coefficient_weights(shape)
            .into_iter()
            .map(|w| 1.0 / (1.0 + self.lambda * w))
            .collect()
    }

    /// Exact Lipschitz constant of `id − D`, `max_i (1 − φ_i)`.
    pub fn residual_norm(&self, shape: &[usize]) -> f64 {
        self.multipliers(shape)
            .iter()
            .fold(0.0_f64, |m, &p| m.max(1.0 - p))
    }

    /// Exact spectral norm of `D`, `max_i φ_i`.
    pub fn spectral_norm(&self, shape: &[usize]) -> f64 {
        self.multipliers(shape).iter().fold(0.0_f64, |m, &p| m.max(p))
    }
}

impl Denoiser for LinearSpectral {
    fn name(&self) -> &str {
        "linear-spectral"
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        let c = self.transform.forward(x)?;
        let phi = self.multipliers(x.shape());
        let shrunk = c.with_data(c.data().iter().zip(&phi).map(|(a, p)| a * p).collect());
        self.transform.inverse(&shrunk)
    }
    fn is_linear(&self) -> bool {
        true
    }
    /// `D = prox_φ` with `φ(x) = ½ Σ λ w_i (W x)_i²`.
    fn prox_potential(&self, x: &Signal, _sigma: f64) -> Option<Result<f64>> {
        let weights = self.coefficient_weights(x.shape());
        Some(self.transform.forward(x).map(|c| {
            0.5 * self.lambda
                * c.data()
                    .iter()
                    .zip(&weights)
                    .map(|(v, w)| w * v * v)
                    .sum::<f64>()
        }))
    }
}
