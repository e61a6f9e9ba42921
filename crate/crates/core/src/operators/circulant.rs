//! Periodic convolution diagonalized by the 2-D DFT.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::{dims3, Signal};

/// Forward and inverse plans for an `h x w` grid.
#[derive(Clone)]
pub(crate) struct Fft2 {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
        }
    }

    fn run(&self, buf: &mut Vec<Complex64>, rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        rows.process(buf);
        if self.h > 1 {
            let mut t = transpose(buf, self.h, self.w);
            cols.process(&mut t);
            *buf = transpose(&t, self.w, self.h);
        }
    }

    pub(crate) fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut buf, &self.row_fwd, &self.col_fwd);
        buf
    }

    /// Inverse transform keeping the real part, normalized by `1/(h w)`.
    pub(crate) fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.run(&mut buf, &self.row_inv, &self.col_inv);
        let s = 1.0 / (self.h * self.w) as f64;
        buf.iter().map(|c| c.re * s).collect()
    }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

/// Convolution with a centered odd-sized kernel under periodic boundaries.
/// Multichannel images are filtered channel by channel.
#[derive(Clone)]
pub struct Circulant {
    shape: Vec<usize>,
    kernel: Signal,
    response: Vec<Complex64>,
    fft: Fft2,
}

impl fmt::Debug for Circulant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Circulant")
            .field("shape", &self.shape)
            .field("kernel_shape", &self.kernel.shape())
            .finish()
    }
}

impl Circulant {
    pub fn new(kernel: &Signal, image_shape: &[usize]) -> Result<Self> {
        if image_shape.is_empty() || image_shape.len() > 3 || image_shape.contains(&0) {
            return Err(Error::param(format!("bad image shape {image_shape:?}")));
        }
        let (h, w, _) = dims3(image_shape);
        let (kh, kw, kc) = kernel.dims3();
        if kc != 1 {
            return Err(Error::param("blur kernel must be single-channel"));
        }
        if kernel.shape().len() > 1 && image_shape.len() == 1 {
            return Err(Error::param("2-D kernel on a 1-D signal"));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::param(format!(
                "kernel sides must be odd, got {:?}",
                kernel.shape()
            )));
        }
        let (ch, cw) = (kh / 2, kw / 2);
        let mut wrapped = vec![0.0; h * w];
        for i in 0..kh {
            for j in 0..kw {
                let r = (i as isize - ch as isize).rem_euclid(h as isize) as usize;
                let c = (j as isize - cw as isize).rem_euclid(w as isize) as usize;
                wrapped[r * w + c] += kernel.data()[i * kw + j];
            }
        }
        let fft = Fft2::new(h, w);
        let response = fft.forward_real(&wrapped);
        Ok(Self {
            shape: image_shape.to_vec(),
            kernel: kernel.clone(),
            response,
            fft,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn kernel(&self) -> &Signal {
        &self.kernel
    }

    /// DFT of the periodized kernel, row-major over the `h x w` grid.
    pub fn frequency_response(&self) -> &[Complex64] {
        &self.response
    }

    pub fn spectral_norm(&self) -> f64 {
        self.response.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Applies the per-frequency multiplier `f(H_k)` to each channel of `x`.
    pub(crate) fn filter(&self, x: &Signal, f: impl Fn(Complex64) -> Complex64) -> Signal {
        let (h, w, c) = dims3(&self.shape);
        let mult: Vec<Complex64> = self.response.iter().map(|&hk| f(hk)).collect();
        let mut out = vec![0.0; h * w * c];
        let mut chan = vec![0.0; h * w];
        for ch in 0..c {
            for (p, v) in chan.iter_mut().enumerate() {
                *v = x.data()[p * c + ch];
            }
            let mut spec = self.fft.forward_real(&chan);
            for (s, m) in spec.iter_mut().zip(&mult) {
                *s *= m;
            }
            for (p, v) in self.fft.inverse_real(spec).into_iter().enumerate() {
                out[p * c + ch] = v;
            }
        }
        x.with_data(out)
    }

    pub(crate) fn apply(&self, x: &Signal) -> Signal {
        self.filter(x, |hk| hk)
    }

    pub(crate) fn adjoint(&self, x: &Signal) -> Signal {
        self.filter(x, |hk| hk.conj())
    }

    /// `(KᵀK + rho I)^{-1} b` by division in the frequency domain.
    pub(crate) fn solve_shifted_normal(&self, rho: f64, b: &Signal) -> Signal {
        self.filter(b, |hk| Complex64::new(1.0 / (hk.norm_sqr() + rho), 0.0))
    }
}
