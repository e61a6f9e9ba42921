//! Isotropic Gaussian-mixture priors: exact smoothed densities, scores and
//! posterior means, used to verify Tweedie's formula.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::signal::Signal;

pub const GMM_MAX_DIM: usize = 64;

/// `p(x) = Σ_j π_j N(x; μ_j, γ_j² I)`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmPrior {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl GmmPrior {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        let p = Self {
            weights,
            means,
            variances,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let j = self.weights.len();
        if j == 0 || self.means.len() != j || self.variances.len() != j {
            return Err(Error::param(
                "mixture needs matching nonempty weights, means and variances",
            ));
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::param("mixture weights must be positive"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("mixture weights sum to {total}, not 1")));
        }
        if self.variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::param("component variances must be positive"));
        }
        let n = self.means[0].len();
        if n == 0 || n > GMM_MAX_DIM {
            return Err(Error::param(format!(
                "mixture dimension must be in 1..={GMM_MAX_DIM}, got {n}"
            )));
        }
        if self
            .means
            .iter()
            .any(|m| m.len() != n || m.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::param("component means must be finite and of equal length"));
        }
        Ok(())
    }

    /// Single isotropic Gaussian `N(mean, γ² I)`.
    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("prior serializes")
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Weighted mean of the component means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            for (a, b) in m.iter_mut().zip(mu) {
                *a += w * b;
            }
        }
        m
    }

    fn check(&self, x: &Signal, sigma: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape(&[self.dim()], x.shape()));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("sigma must be nonnegative, got {sigma}")));
        }
        Ok(())
    }

    /// `log π_j + log N(x; μ_j, (γ_j² + σ²) I)` per component.
    fn log_terms(&self, x: &Signal, sigma: f64) -> Vec<f64> {
        let n = self.dim() as f64;
        let s2 = sigma * sigma;
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, mu), g2)| {
                let v = g2 + s2;
                let d2: f64 = x.data().iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
                w.ln() - 0.5 * n * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * d2 / v
            })
            .collect()
    }

    /// Posterior component probabilities given `x_σ`.
    pub fn responsibilities(&self, x: &Signal, sigma: f64) -> Result<Vec<f64>> {
        self.check(x, sigma)?;
        let t = self.log_terms(x, sigma);
        let z = log_sum_exp(&t);
        Ok(t.iter().map(|v| (v - z).exp()).collect())
    }

    /// `log p_σ(x)` with `p_σ = p * N(0, σ² I)`.
    pub fn smoothed_logpdf(&self, x: &Signal, sigma: f64) -> Result<f64> {
        self.check(x, sigma)?;
        Ok(log_sum_exp(&self.log_terms(x, sigma)))
    }

    /// `∇ log p_σ(x)`; requires `σ > 0`.
    pub fn smoothed_score(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        if !(sigma > 0.0) {
            return Err(Error::param(
                "smoothed score needs sigma > 0; use mixture_score for the prior itself",
            ));
        }
        self.score_at(x, sigma)
    }

    /// `∇ log p(x)` of the unsmoothed mixture.
    pub fn mixture_score(&self, x: &Signal) -> Result<Signal> {
        self.score_at(x, 0.0)
    }

    fn score_at(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        let r = self.responsibilities(x, sigma)?;
        let s2 = sigma * sigma;
        let mut out = vec![0.0; self.dim()];
        for ((rj, mu), g2) in r.iter().zip(&self.means).zip(&self.variances) {
            let v = g2 + s2;
            for ((o, m), xi) in out.iter_mut().zip(mu).zip(x.data()) {
                *o += rj * (m - xi) / v;
            }
        }
        Ok(x.with_data(out))
    }

    /// `E[x | x_σ]`: responsibilities times the conjugate component means
    /// `(σ² μ_j + γ_j² x_σ)/(γ_j² + σ²)`. Identity at `σ = 0`.
    pub fn posterior_mean(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        self.check(x, sigma)?;
        if sigma == 0.0 {
            return Ok(x.clone());
        }
        let r = self.responsibilities(x, sigma)?;
        let s2 = sigma * sigma;
        let mut out = vec![0.0; self.dim()];
        for ((rj, mu), g2) in r.iter().zip(&self.means).zip(&self.variances) {
            let v = g2 + s2;
            for ((o, m), xi) in out.iter_mut().zip(mu).zip(x.data()) {
                *o += rj * (s2 * m + g2 * xi) / v;
            }
        }
        Ok(x.with_data(out))
    }

    /// Draw from `p_σ`.
    pub fn sample_smoothed(&self, sigma: f64, rng: &mut Rng) -> Signal {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut j = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                j = i;
                break;
            }
        }
        let sd = (self.variances[j] + sigma * sigma).sqrt();
        let data = self.means[j].iter().map(|m| m + sd * rng.normal()).collect();
        Signal::from_vec(data).expect("finite sample")
    }
}

/// `max ‖(E[x|x_σ] − x_σ) − σ² ∇log p_σ(x_σ)‖∞` over points drawn from `p_σ`.
pub fn tweedie_check(prior: &GmmPrior, sigma: f64, num_points: usize, rng: &mut Rng) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..num_points {
        let x = prior.sample_smoothed(sigma, rng);
        let lhs = prior.posterior_mean(&x, sigma)?.sub(&x);
        let rhs = prior.smoothed_score(&x, sigma)?.scale(sigma * sigma);
        worst = worst.max(lhs.max_abs_diff(&rhs));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_comp() -> GmmPrior {
        GmmPrior::new(vec![0.3, 0.7], vec![vec![-1.0], vec![2.0]], vec![0.25, 0.5]).unwrap()
    }

    #[test]
    fn gaussian_logpdf_examples() {
        let p = GmmPrior::gaussian(vec![0.0], 1.0).unwrap();
        let zero = Signal::from_vec(vec![0.0]).unwrap();
        let want = (1.0 / (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((p.smoothed_logpdf(&zero, 0.0).unwrap() - want).abs() < 1e-15);
        let want2 = (1.0 / (4.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((p.smoothed_logpdf(&zero, 1.0).unwrap() - want2).abs() < 1e-15);
    }

    #[test]
    fn gaussian_score_and_mean() {
        let p = GmmPrior::gaussian(vec![0.0, 0.0], 1.0).unwrap();
        let x = Signal::from_vec(vec![2.0, 0.0]).unwrap();
        let m = p.posterior_mean(&x, 1.0).unwrap();
        assert!((m.data()[0] - 1.0).abs() < 1e-15 && m.data()[1] == 0.0);
        let g = GmmPrior::gaussian(vec![0.0; 3], 0.7).unwrap();
        let x = Signal::from_vec(vec![0.3, -1.2, 2.0]).unwrap();
        let s = g.smoothed_score(&x, 0.4).unwrap();
        let want = x.scale(-1.0 / (0.7 + 0.16));
        assert!(s.max_abs_diff(&want) < 1e-14);
        assert!(g.smoothed_score(&x, 0.0).is_err());
    }

    #[test]
    fn symmetric_midpoint_score_vanishes() {
        let p = GmmPrior::new(vec![0.5, 0.5], vec![vec![-1.0, 2.0], vec![1.0, 2.0]], vec![0.3, 0.3]).unwrap();
        let mid = Signal::from_vec(vec![0.0, 2.0]).unwrap();
        assert!(p.smoothed_score(&mid, 0.5).unwrap().norm_inf() < 1e-15);
    }

    #[test]
    fn score_matches_finite_differences() {
        let p = two_comp();
        for &x0 in &[-2.0, 0.1, 1.3, 3.0] {
            let x = Signal::from_vec(vec![x0]).unwrap();
            let h = 1e-5;
            let f = |t: f64| p.smoothed_logpdf(&Signal::from_vec(vec![t]).unwrap(), 0.8).unwrap();
            let fd = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
            let s = p.smoothed_score(&x, 0.8).unwrap().data()[0];
            assert!((fd - s).abs() <= 1e-7 * s.abs().max(1.0));
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = two_comp();
        assert_eq!(GmmPrior::from_json(&p.to_json()).unwrap(), p);
        let text = r#"{"weights":[0.5,0.5],"means":[[0.0],[1.0]],"variances":[1.0,2.0]}"#;
        assert_eq!(GmmPrior::from_json(text).unwrap().dim(), 1);
        assert!(GmmPrior::from_json(r#"{"weights":[0.5],"means":[[0.0]],"variances":[1.0]}"#).is_err());
        assert!(GmmPrior::from_json(r#"{"weights":[1.0],"means":[[0.0]],"variances":[1.0],"x":1}"#).is_err());
        assert!(GmmPrior::gaussian(vec![0.0; 65], 1.0).is_err());
    }

    #[test]
    fn single_gaussian_tweedie_is_exact() {
        let p = GmmPrior::gaussian(vec![0.5, -0.5, 1.0], 0.8).unwrap();
        let mut rng = Rng::new(4);
        assert!(tweedie_check(&p, 0.6, 100, &mut rng).unwrap() <= 1e-12);
    }
}
