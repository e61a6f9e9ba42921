//! Linear forward operators `K` with adjoints, plus the linear solvers used
//! by Tikhonov regularization and the splitting schemes.

mod circulant;
mod solve;
mod svd;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use circulant::Circulant;
pub use solve::{conjugate_gradient, solve_shifted_normal, tikhonov_solve, CgOutcome, CG_TOL};
pub use svd::{naive_svd_solve, SvdFactors, SVD_MAX_DIM};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::signal::Signal;

/// Largest operator that [`LinearOp::to_dense`] will assemble.
pub const DENSE_MAX_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Dense,
    Circulant,
    Diagonal,
    Mask,
    Composite,
}

#[derive(Clone, Debug)]
pub enum LinearOp {
    Dense {
        matrix: DMatrix<f64>,
        in_shape: Vec<usize>,
        out_shape: Vec<usize>,
    },
    Circulant(Circulant),
    Diagonal(Signal),
    /// Entries are exactly 0 or 1.
    Mask(Signal),
    /// `ops[0]` is applied first.
    Composite(Vec<LinearOp>),
}

impl LinearOp {
    pub fn dense(matrix: DMatrix<f64>) -> Self {
        let (m, n) = matrix.shape();
        LinearOp::Dense {
            matrix,
            in_shape: vec![n],
            out_shape: vec![m],
        }
    }

    pub fn dense_with_shapes(
        matrix: DMatrix<f64>,
        in_shape: Vec<usize>,
        out_shape: Vec<usize>,
    ) -> Result<Self> {
        let (m, n) = matrix.shape();
        if in_shape.iter().product::<usize>() != n || out_shape.iter().product::<usize>() != m {
            return Err(Error::param(format!(
                "{m}x{n} matrix cannot map {in_shape:?} to {out_shape:?}"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("matrix has non-finite entries"));
        }
        Ok(LinearOp::Dense {
            matrix,
            in_shape,
            out_shape,
        })
    }

    /// Dense operator from a `[m, n]` signal, as stored in raw files.
    pub fn dense_from_signal(s: &Signal) -> Result<Self> {
        match *s.shape() {
            [m, n] => Self::dense_with_shapes(
                DMatrix::from_row_slice(m, n, s.data()),
                vec![n],
                vec![m],
            ),
            _ => Err(Error::param(format!(
                "dense operator needs a [m, n] signal, got {:?}",
                s.shape()
            ))),
        }
    }

    pub fn identity(shape: &[usize]) -> Self {
        LinearOp::Diagonal(Signal::filled(shape, 1.0))
    }

    pub fn zero(shape: &[usize]) -> Self {
        LinearOp::Diagonal(Signal::zeros(shape))
    }

    pub fn diagonal(d: Signal) -> Self {
        LinearOp::Diagonal(d)
    }

    pub fn composite(ops: Vec<LinearOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::param("composite operator needs at least one factor"));
        }
        for pair in ops.windows(2) {
            if pair[0].out_shape() != pair[1].in_shape() {
                return Err(Error::shape(pair[1].in_shape(), pair[0].out_shape()));
            }
        }
        Ok(LinearOp::Composite(ops))
    }

    pub fn kind(&self) -> OpKind {
        match self {
            LinearOp::Dense { .. } => OpKind::Dense,
            LinearOp::Circulant(_) => OpKind::Circulant,
            LinearOp::Diagonal(_) => OpKind::Diagonal,
            LinearOp::Mask(_) => OpKind::Mask,
            LinearOp::Composite(_) => OpKind::Composite,
        }
    }

    pub fn in_shape(&self) -> &[usize] {
        match self {
            LinearOp::Dense { in_shape, .. } => in_shape,
            LinearOp::Circulant(c) => c.shape(),
            LinearOp::Diagonal(d) | LinearOp::Mask(d) => d.shape(),
            LinearOp::Composite(ops) => ops[0].in_shape(),
        }
    }

    pub fn out_shape(&self) -> &[usize] {
        match self {
            LinearOp::Dense { out_shape, .. } => out_shape,
            LinearOp::Circulant(c) => c.shape(),
            LinearOp::Diagonal(d) | LinearOp::Mask(d) => d.shape(),
            LinearOp::Composite(ops) => ops[ops.len() - 1].out_shape(),
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_shape().iter().product()
    }

    pub fn out_len(&self) -> usize {
        self.out_shape().iter().product()
    }

    pub fn apply(&self, x: &Signal) -> Result<Signal> {
        if x.shape() != self.in_shape() {
            return Err(Error::shape(self.in_shape(), x.shape()));
        }
        Ok(self.apply_unchecked(x))
    }

    pub fn adjoint(&self, y: &Signal) -> Result<Signal> {
        if y.shape() != self.out_shape() {
            return Err(Error::shape(self.out_shape(), y.shape()));
        }
        Ok(self.adjoint_unchecked(y))
    }

    /// `KᵀK x`
    pub fn gram(&self, x: &Signal) -> Result<Signal> {
        let kx = self.apply(x)?;
        Ok(self.adjoint_unchecked(&kx))
    }

    fn apply_unchecked(&self, x: &Signal) -> Signal {
        match self {
            LinearOp::Dense {
                matrix, out_shape, ..
            } => {
                let v = matrix * DVector::from_column_slice(x.data());
                Signal::zeros(out_shape).with_data(v.as_slice().to_vec())
            }
            LinearOp::Circulant(c) => c.apply(x),
            LinearOp::Diagonal(d) | LinearOp::Mask(d) => x.zip_map(d, |a, b| a * b),
            LinearOp::Composite(ops) => {
                let mut v = x.clone();
                for op in ops {
                    v = op.apply_unchecked(&v);
                }
                v
            }
        }
    }

    fn adjoint_unchecked(&self, y: &Signal) -> Signal {
        match self {
            LinearOp::Dense {
                matrix, in_shape, ..
            } => {
                let v = matrix.tr_mul(&DVector::from_column_slice(y.data()));
                Signal::zeros(in_shape).with_data(v.as_slice().to_vec())
            }
            LinearOp::Circulant(c) => c.adjoint(y),
            LinearOp::Diagonal(d) | LinearOp::Mask(d) => y.zip_map(d, |a, b| a * b),
            LinearOp::Composite(ops) => {
                let mut v = y.clone();
                for op in ops.iter().rev() {
                    v = op.adjoint_unchecked(&v);
                }
                v
            }
        }
    }

    pub fn frequency_response(&self) -> Option<&[Complex64]> {
        match self {
            LinearOp::Circulant(c) => Some(c.frequency_response()),
            _ => None,
        }
    }

    /// Largest singular value. Exact for circulant, diagonal and mask
    /// operators, SVD for small dense ones, power iteration on `KᵀK` otherwise.
    pub fn spectral_norm(&self) -> f64 {
        match self {
            LinearOp::Circulant(c) => c.spectral_norm(),
            LinearOp::Diagonal(d) | LinearOp::Mask(d) => d.norm_inf(),
            LinearOp::Dense { matrix, .. } if matrix.nrows().max(matrix.ncols()) <= SVD_MAX_DIM => {
                matrix
                    .singular_values()
                    .iter()
                    .fold(0.0_f64, |m, &s| m.max(s))
            }
            _ => {
                let x0 = Rng::new(0x5eed).normal_signal(self.in_shape());
                power_iteration(|v| self.gram(v).expect("shape checked"), &x0, 1e-13, 20_000).sqrt()
            }
        }
    }

    /// Column-by-column assembly of the matrix of `K` in row-major signal order.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if let LinearOp::Dense { matrix, .. } = self {
            return Ok(matrix.clone());
        }
        let (m, n) = (self.out_len(), self.in_len());
        if m.max(n) > DENSE_MAX_DIM {
            return Err(Error::Unsupported(format!(
                "refusing to densify a {m}x{n} operator"
            )));
        }
        let mut out = DMatrix::zeros(m, n);
        let mut e = Signal::zeros(self.in_shape());
        for j in 0..n {
            e.data_mut()[j] = 1.0;
            let col = self.apply_unchecked(&e);
            out.column_mut(j).copy_from_slice(col.data());
            e.data_mut()[j] = 0.0;
        }
        Ok(out)
    }

    /// Whether `K = Kᵀ` up to relative tolerance `tol`.
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        if self.in_shape() != self.out_shape() {
            return false;
        }
        match self {
            LinearOp::Diagonal(_) | LinearOp::Mask(_) => true,
            LinearOp::Circulant(c) => {
                let scale = c.spectral_norm().max(f64::MIN_POSITIVE);
                c.frequency_response().iter().all(|h| h.im.abs() <= tol * scale)
            }
            _ => match self.to_dense() {
                Ok(a) => (&a - a.transpose()).norm() <= tol * a.norm().max(f64::MIN_POSITIVE),
                Err(_) => {
                    let mut rng = Rng::new(0xad301);
                    (0..8).all(|_| {
                        let x = rng.normal_signal(self.in_shape());
                        let y = rng.normal_signal(self.in_shape());
                        let lhs = self.apply_unchecked(&x).dot(&y);
                        let rhs = x.dot(&self.apply_unchecked(&y));
                        (lhs - rhs).abs() <= tol * (x.norm() * y.norm() * self.spectral_norm())
                    })
                }
            },
        }
    }
}

/// Circulant blur with a centered odd-sized kernel and periodic boundaries.
pub fn make_blur(kernel: &Signal, image_shape: &[usize]) -> Result<LinearOp> {
    Ok(LinearOp::Circulant(Circulant::new(kernel, image_shape)?))
}

/// Inpainting mask: entries flagged zero are removed, others pass through.
/// Any nonzero entry of `mask` counts as observed.
pub fn make_mask(mask: &Signal) -> LinearOp {
    LinearOp::Mask(mask.map(|v| if v != 0.0 { 1.0 } else { 0.0 }))
}

/// `mask` must match `shape`.
pub fn make_mask_for(mask: &Signal, shape: &[usize]) -> Result<LinearOp> {
    if mask.shape() != shape {
        return Err(Error::shape(shape, mask.shape()));
    }
    Ok(make_mask(mask))
}

/// Normalized `size x size` box kernel.
pub fn uniform_kernel(size: usize) -> Result<Signal> {
    if size == 0 {
        return Err(Error::param("kernel size must be positive"));
    }
    Ok(Signal::filled(&[size, size], 1.0 / (size * size) as f64))
}

/// Largest eigenvalue of a symmetric positive semidefinite map.
pub fn power_iteration(
    apply: impl Fn(&Signal) -> Signal,
    x0: &Signal,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let n0 = x0.norm();
    if n0 == 0.0 {
        return 0.0;
    }
    let mut v = x0.scale(1.0 / n0);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = apply(&v);
        let next = v.dot(&w);
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        v = w.scale(1.0 / nw);
        if (next - lambda).abs() <= tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(kernel: &Signal, x: &Signal) -> Signal {
        let (h, w, _) = x.dims3();
        let (kh, kw, _) = kernel.dims3();
        let mut out = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for i in 0..kh {
                    for j in 0..kw {
                        let rr = (r as isize - (i as isize - (kh / 2) as isize)).rem_euclid(h as isize);
                        let cc = (c as isize - (j as isize - (kw / 2) as isize)).rem_euclid(w as isize);
                        acc += kernel.data()[i * kw + j] * x.data()[rr as usize * w + cc as usize];
                    }
                }
                out[r * w + c] = acc;
            }
        }
        x.with_data(out)
    }

    #[test]
    fn blur_matches_naive_convolution() {
        let mut rng = Rng::new(3);
        let kernel = rng.uniform_signal(&[3, 5]);
        let x = rng.normal_signal(&[8, 8]);
        let k = make_blur(&kernel, &[8, 8]).unwrap();
        assert!(k.apply(&x).unwrap().max_abs_diff(&naive_conv(&kernel, &x)) <= 1e-12);
    }

    #[test]
    fn delta_and_constant() {
        let mut delta = Signal::zeros(&[3, 3]);
        delta.data_mut()[4] = 1.0;
        let x = Rng::new(1).normal_signal(&[6, 7]);
        let k = make_blur(&delta, &[6, 7]).unwrap();
        assert!(k.apply(&x).unwrap().max_abs_diff(&x) < 1e-14);
        let b = make_blur(&uniform_kernel(9).unwrap(), &[16, 16]).unwrap();
        let c = Signal::filled(&[16, 16], 0.37);
        assert!(b.apply(&c).unwrap().max_abs_diff(&c) < 1e-14);
        assert!(make_blur(&Signal::filled(&[2, 3], 0.1), &[8, 8]).is_err());
    }

    #[test]
    fn mask_projection() {
        let mut rng = Rng::new(2);
        let x = rng.normal_signal(&[5, 4]);
        let all = make_mask(&Signal::filled(&[5, 4], 1.0));
        assert_eq!(all.apply(&x).unwrap(), x);
        let none = make_mask(&Signal::zeros(&[5, 4]));
        assert_eq!(none.apply(&x).unwrap().norm(), 0.0);
        let m = make_mask(&rng.uniform_signal(&[5, 4]).map(|v| (v > 0.5) as u8 as f64));
        let once = m.apply(&x).unwrap();
        assert_eq!(m.apply(&once).unwrap(), once);
        assert!(make_mask_for(&Signal::zeros(&[3]), &[5, 4]).is_err());
    }

    #[test]
    fn circulant_norm_matches_power_iteration() {
        let kernel = Rng::new(9).uniform_signal(&[5, 5]);
        let k = make_blur(&kernel, &[12, 10]).unwrap();
        let x0 = Rng::new(4).normal_signal(&[12, 10]);
        let pi = power_iteration(|v| k.gram(v).unwrap(), &x0, 1e-15, 100_000).sqrt();
        assert!((pi - k.spectral_norm()).abs() <= 1e-10 * k.spectral_norm());
    }

    #[test]
    fn composite_chains_in_order() {
        let d = LinearOp::diagonal(Signal::from_vec(vec![1.0, 2.0]).unwrap());
        let a = LinearOp::dense(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]));
        let c = LinearOp::composite(vec![d, a]).unwrap();
        let y = c.apply(&Signal::from_vec(vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
        assert_eq!(c.out_shape(), &[3]);
        assert!(LinearOp::composite(vec![LinearOp::identity(&[3]), LinearOp::identity(&[2])]).is_err());
    }

    #[test]
    fn self_adjointness() {
        let sym = make_blur(&uniform_kernel(3).unwrap(), &[8, 8]).unwrap();
        assert!(sym.is_self_adjoint(1e-12));
        let mut k = Signal::zeros(&[3, 3]);
        k.data_mut()[5] = 1.0;
        assert!(!make_blur(&k, &[8, 8]).unwrap().is_self_adjoint(1e-12));
        let a = LinearOp::dense(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        assert!(!a.is_self_adjoint(1e-12));
    }
}
