//! Real-valued signals with shape metadata.
//!
//! A [`Signal`] is a flat row-major `f64` buffer plus a shape: `[n]` for
//! vectors, `[h, w]` for grayscale images and `[h, w, c]` for multichannel
//! images with the channel index fastest. Intensities are conventionally
//! stored in `[0, 1]`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    data: Vec<f64>,
    shape: Vec<usize>,
    range_hint: Option<[f64; 2]>,
}

impl Signal {
    /// Builds a signal, checking that the shape matches the buffer and that
    /// every entry is finite.
    pub fn new(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 || shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidSignal(format!(
                "shape must have 1 to 3 positive dimensions, got {shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::InvalidSignal(format!(
                "shape {shape:?} holds {n} entries but buffer has {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!("entry {i} is not finite")));
        }
        Ok(Self {
            data,
            shape,
            range_hint: None,
        })
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(data, vec![n])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            data: vec![value; n],
            shape: shape.to_vec(),
            range_hint: None,
        }
    }

    /// Signal of the same shape as `self` holding `data`. Entries are not
    /// re-validated; iterative code checks finiteness explicitly.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), self.data.len(), "buffer length mismatch");
        Self {
            data,
            shape: self.shape.clone(),
            range_hint: self.range_hint,
        }
    }

    pub fn with_range_hint(mut self, lo: f64, hi: f64) -> Self {
        self.range_hint = Some([lo, hi]);
        self
    }

    pub fn range_hint(&self) -> Option<[f64; 2]> {
        self.range_hint
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(rows, cols, channels)` view of the shape; vectors are a single row.
    pub fn dims3(&self) -> (usize, usize, usize) {
        dims3(&self.shape)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_same_shape(&self, other: &Signal) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(&self.shape, &other.shape));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Signal {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Signal, f: impl Fn(f64, f64) -> f64) -> Signal {
        debug_assert_eq!(self.shape, other.shape);
        self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Signal) -> Signal {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Signal) -> Signal {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Signal {
        self.map(|v| s * v)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Signal) -> Signal {
        self.zip_map(other, |x, y| x + a * y)
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &Signal, b: f64) -> Signal {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &Signal) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Signal) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

pub(crate) fn dims3(shape: &[usize]) -> (usize, usize, usize) {
    match *shape {
        [n] => (1, n, 1),
        [h, w] => (h, w, 1),
        [h, w, c] => (h, w, c),
        _ => panic!("unsupported shape {shape:?}"),
    }
}
