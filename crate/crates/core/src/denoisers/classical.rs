use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::operators::{make_blur, LinearOp};
use crate::proximal::{haar_forward, max_haar_levels, prox_tv, prox_wavelet_l1, tv_norm};
use crate::signal::Signal;

use super::{check_sigma, Denoiser};

/// Normalized Gaussian taps of radius `ceil(3σ)`; 1-D for `dims == 1`,
/// otherwise a square 2-D kernel.
pub fn gaussian_kernel(kernel_sigma: f64, dims: usize) -> Result<Signal> {
    if !(kernel_sigma > 0.0) || !kernel_sigma.is_finite() {
        return Err(Error::param(format!(
            "kernel sigma must be positive, got {kernel_sigma}"
        )));
    }
    let r = (3.0 * kernel_sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * kernel_sigma * kernel_sigma)).exp())
        .collect();
    let side = taps.len();
    let (data, shape) = if dims == 1 {
        (taps.clone(), vec![side])
    } else {
        let mut d = Vec::with_capacity(side * side);
        for a in &taps {
            for b in &taps {
                d.push(a * b);
            }
        }
        (d, vec![side, side])
    };
    let total: f64 = data.iter().sum();
    Signal::new(data.iter().map(|v| v / total).collect(), shape)
}

/// Periodic convolution with a truncated Gaussian. The kernel width is fixed
/// at construction; the noise level passed to `denoise` is not used.
#[derive(Debug)]
pub struct GaussianFilter {
    kernel_sigma: f64,
    cache: Mutex<Option<LinearOp>>,
}

impl GaussianFilter {
    pub fn new(kernel_sigma: f64) -> Result<Self> {
        gaussian_kernel(kernel_sigma, 1)?;
        Ok(Self {
            kernel_sigma,
            cache: Mutex::new(None),
        })
    }

    pub fn kernel_sigma(&self) -> f64 {
        self.kernel_sigma
    }

    /// The filter as a circulant operator on signals of the given shape.
    pub fn operator(&self, shape: &[usize]) -> Result<LinearOp> {
        let mut cache = self.cache.lock().expect("filter cache poisoned");
        if let Some(op) = cache.as_ref() {
            if op.in_shape() == shape {
                return Ok(op.clone());
            }
        }
        let dims = if shape.len() == 1 { 1 } else { 2 };
        let op = make_blur(&gaussian_kernel(self.kernel_sigma, dims)?, shape)?;
        *cache = Some(op.clone());
        Ok(op)
    }
}

impl Denoiser for GaussianFilter {
    fn name(&self) -> &str {
        "gaussian"
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        self.operator(x.shape())?.apply(x)
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// Non-local means with periodic boundaries:
/// `D(x)_i = Σ_j w_ij x_j`, `w_ij ∝ exp(−‖P_i − P_j‖²/h²)` over the search
/// window, patch distances summed over channels.
#[derive(Clone, Copy, Debug)]
pub struct Nlm {
    pub patch_radius: usize,
    pub window_radius: usize,
    pub h: f64,
}

impl Nlm {
    pub fn new(patch_radius: usize, window_radius: usize, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::param(format!("NLM h must be positive, got {h}")));
        }
        Ok(Self {
            patch_radius,
            window_radius,
            h,
        })
    }
}

fn offsets(radius: usize, h: usize, w: usize) -> Vec<(isize, isize)> {
    let ry = if h > 1 { radius as isize } else { 0 };
    let rx = if w > 1 { radius as isize } else { 0 };
    let mut out = Vec::new();
    for dy in -ry..=ry {
        for dx in -rx..=rx {
            out.push((dy, dx));
        }
    }
    out
}

impl Denoiser for Nlm {
    fn name(&self) -> &str {
        "nlm"
    }

    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        let (h, w, c) = x.dims3();
        let at = |r: usize, col: usize, dy: isize, dx: isize| -> usize {
            let rr = (r as isize + dy).rem_euclid(h as isize) as usize;
            let cc = (col as isize + dx).rem_euclid(w as isize) as usize;
            rr * w + cc
        };
        let d = x.data();
        let npix = h * w;
        let inv_h2 = 1.0 / (self.h * self.h);
        let patch = offsets(self.patch_radius, h, w);
        let mut num = vec![0.0; npix * c];
        let mut den = vec![0.0; npix];
        let mut sq = vec![0.0; npix];
        for &(wy, wx) in &offsets(self.window_radius, h, w) {
            // per-pixel squared difference to the shifted image
            for r in 0..h {
                for col in 0..w {
                    let p = r * w + col;
                    let q = at(r, col, wy, wx);
                    sq[p] = (0..c)
                        .map(|ch| {
                            let t = d[p * c + ch] - d[q * c + ch];
                            t * t
                        })
                        .sum();
                }
            }
            for r in 0..h {
                for col in 0..w {
                    let dist: f64 = patch.iter().map(|&(py, px)| sq[at(r, col, py, px)]).sum();
                    let wt = (-dist * inv_h2).exp();
                    let p = r * w + col;
                    let q = at(r, col, wy, wx);
                    den[p] += wt;
                    for ch in 0..c {
                        num[p * c + ch] += wt * d[q * c + ch];
                    }
                }
            }
        }
        let out = num
            .iter()
            .enumerate()
            .map(|(i, v)| v / den[i / c])
            .collect();
        Ok(x.with_data(out))
    }
}

/// `prox_{λ TV}` with `λ = c σ²`.
#[derive(Clone, Copy, Debug)]
pub struct TvDenoiser {
    pub c: f64,
    /// Duality-gap target; `None` means `1e-6·n`.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl TvDenoiser {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            tol: None,
            max_iter: 100_000,
        }
    }

    pub fn lambda(&self, sigma: f64) -> f64 {
        self.c * sigma * sigma
    }
}

impl Default for TvDenoiser {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl Denoiser for TvDenoiser {
    fn name(&self) -> &str {
        "tv"
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        let tol = self.tol.unwrap_or(1e-6 * x.len() as f64);
        prox_tv(x, self.lambda(sigma), tol, self.max_iter)
    }
    fn prox_potential(&self, x: &Signal, sigma: f64) -> Option<Result<f64>> {
        Some(Ok(self.lambda(sigma) * tv_norm(x)))
    }
}

/// Haar soft-thresholding at the universal threshold `τ = σ√(2 ln n)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct WaveletDenoiser {
    /// `None` uses as many levels as the shape allows, at most 4.
    pub levels: Option<usize>,
}

impl WaveletDenoiser {
    fn levels_for(&self, shape: &[usize]) -> usize {
        self.levels.unwrap_or_else(|| max_haar_levels(shape).min(4))
    }

    pub fn threshold(sigma: f64, n: usize) -> f64 {
        sigma * (2.0 * (n as f64).ln()).sqrt()
    }
}

impl Denoiser for WaveletDenoiser {
    fn name(&self) -> &str {
        "wavelet"
    }
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        prox_wavelet_l1(x, Self::threshold(sigma, x.len()), self.levels_for(x.shape()))
    }
    fn prox_potential(&self, x: &Signal, sigma: f64) -> Option<Result<f64>> {
        let tau = Self::threshold(sigma, x.len());
        Some(
            haar_forward(x, self.levels_for(x.shape()))
                .map(|c| tau * c.data().iter().map(|v| v.abs()).sum::<f64>()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn naive_nlm(x: &Signal, pr: isize, wr: isize, hh: f64) -> Signal {
        let (h, w, _) = x.dims3();
        let (hi, wi) = (h as isize, w as isize);
        let px = |r: isize, c: isize| x.data()[(r.rem_euclid(hi) * wi + c.rem_euclid(wi)) as usize];
        let mut out = vec![0.0; h * w];
        for r in 0..hi {
            for c in 0..wi {
                let (mut num, mut den) = (0.0, 0.0);
                for dy in -wr..=wr {
                    for dx in -wr..=wr {
                        let mut d2 = 0.0;
                        for py in -pr..=pr {
                            for pxo in -pr..=pr {
                                let t = px(r + py, c + pxo) - px(r + dy + py, c + dx + pxo);
                                d2 += t * t;
                            }
                        }
                        let wt = (-d2 / (hh * hh)).exp();
                        num += wt * px(r + dy, c + dx);
                        den += wt;
                    }
                }
                out[(r * wi + c) as usize] = num / den;
            }
        }
        x.with_data(out)
    }

    #[test]
    fn nlm_matches_quadruple_loop() {
        let x = Rng::new(2).uniform_signal(&[6, 6]);
        let d = Nlm::new(1, 2, 0.4).unwrap();
        let got = d.denoise(&x, 0.1).unwrap();
        assert!(got.max_abs_diff(&naive_nlm(&x, 1, 2, 0.4)) <= 1e-12);
    }

    #[test]
    fn nlm_limits() {
        let c = Signal::filled(&[7, 5], 0.3);
        assert!(Nlm::new(1, 2, 0.1).unwrap().denoise(&c, 0.1).unwrap().max_abs_diff(&c) < 1e-15);
        let x = Rng::new(3).uniform_signal(&[9, 9]);
        let wide = Nlm::new(1, 1, 1e9).unwrap().denoise(&x, 0.1).unwrap();
        let mean = make_blur(&Signal::filled(&[3, 3], 1.0 / 9.0), &[9, 9]).unwrap().apply(&x).unwrap();
        assert!(wide.max_abs_diff(&mean) < 1e-12);
        assert!(Nlm::new(1, 1, 0.0).is_err());
    }

    #[test]
    fn gaussian_filter_basics() {
        let g = GaussianFilter::new(1.2).unwrap();
        let c = Signal::filled(&[16, 16], 0.8);
        assert!(g.denoise(&c, 0.0).unwrap().max_abs_diff(&c) < 1e-14);
        let mut delta = Signal::zeros(&[16, 16]);
        delta.data_mut()[0] = 1.0;
        let out = g.denoise(&delta, 0.0).unwrap();
        let k = gaussian_kernel(1.2, 2).unwrap();
        // kernel centre lands on the origin and wraps around
        let r = 4;
        assert!((out.data()[0] - k.data()[r * 9 + r]).abs() < 1e-14);
        assert!((out.data()[1] - k.data()[r * 9 + r + 1]).abs() < 1e-14);
        assert!((out.data()[15 * 16 + 15] - k.data()[(r - 1) * 9 + r - 1]).abs() < 1e-14);
    }

    #[test]
    fn white_noise_variance_ratio() {
        let g = GaussianFilter::new(1.0).unwrap();
        let x = Rng::new(8).normal_signal(&[1000, 1000]);
        let out = g.denoise(&x, 0.0).unwrap();
        let ratio = out.norm_sq() / x.norm_sq();
        let k = gaussian_kernel(1.0, 2).unwrap();
        let h2 = k.norm_sq();
        assert!((ratio / h2 - 1.0).abs() < 0.01, "{ratio} vs {h2}");
    }

    #[test]
    fn tv_denoiser_delegates() {
        let d = TvDenoiser::new(2.0);
        let x = Rng::new(4).normal_signal(&[8, 8]);
        assert_eq!(d.denoise(&x, 0.0).unwrap(), x);
        let direct = prox_tv(&x, 2.0 * 0.09, 1e-6 * 64.0, 100_000).unwrap();
        assert_eq!(d.denoise(&x, 0.3).unwrap(), direct);
        let v = Signal::from_vec(vec![1.0, -1.0]).unwrap();
        let two = TvDenoiser { c: 2.0, tol: Some(1e-14), max_iter: 100_000 };
        let out = two.denoise(&v, 0.5).unwrap();
        assert!((out.data()[0] - 0.5).abs() < 1e-7 && (out.data()[1] + 0.5).abs() < 1e-7);
    }

    #[test]
    fn wavelet_threshold_rule() {
        let d = WaveletDenoiser::default();
        let x = Rng::new(5).normal_signal(&[16, 16]);
        let tau = 0.1 * (2.0 * 256f64.ln()).sqrt();
        assert_eq!(d.denoise(&x, 0.1).unwrap(), prox_wavelet_l1(&x, tau, 4).unwrap());
        assert!(d.denoise(&x, 0.0).unwrap().max_abs_diff(&x) < 1e-14);
    }
}
