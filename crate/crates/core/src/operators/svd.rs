use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signal::Signal;

use super::LinearOp;

pub const SVD_MAX_DIM: usize = 512;

/// `K = U diag(σ) Vᵀ` with singular values in descending order.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub singular_values: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    in_shape: Vec<usize>,
    out_shape: Vec<usize>,
}

impl SvdFactors {
    pub fn of(k: &LinearOp) -> Result<Self> {
        let (m, n) = (k.out_len(), k.in_len());
        if m.max(n) > SVD_MAX_DIM {
            return Err(Error::Unsupported(format!(
                "SVD limited to {SVD_MAX_DIM} rows/columns, operator is {m}x{n}"
            )));
        }
        let a = k.to_dense()?;
        let svd = a.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let r = svd.singular_values.len();
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let mut su = DMatrix::zeros(m, r);
        let mut sv = DMatrix::zeros(n, r);
        let mut s = Vec::with_capacity(r);
        for (dst, &src) in order.iter().enumerate() {
            su.set_column(dst, &u.column(src));
            sv.set_column(dst, &vt.row(src).transpose());
            s.push(svd.singular_values[src]);
        }
        Ok(Self {
            singular_values: s,
            u: su,
            v: sv,
            in_shape: k.in_shape().to_vec(),
            out_shape: k.out_shape().to_vec(),
        })
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&DVector::from_column_slice(&self.singular_values)) * self.v.transpose()
    }

    /// `Σ_m ⟨y, u_m⟩/σ_m v_m` over the singular values above `tol`.
    pub fn pseudo_inverse_apply(&self, y: &Signal, tol: f64) -> Result<Signal> {
        if y.shape() != self.out_shape.as_slice() {
            return Err(Error::shape(&self.out_shape, y.shape()));
        }
        let yv = DVector::from_column_slice(y.data());
        let mut x = DVector::zeros(self.v.nrows());
        for (m, &s) in self.singular_values.iter().enumerate() {
            if s > tol && s > 0.0 {
                let c = self.u.column(m).dot(&yv) / s;
                x.axpy(c, &self.v.column(m), 1.0);
            }
        }
        Ok(Signal::zeros(&self.in_shape).with_data(x.as_slice().to_vec()))
    }

    pub fn default_tolerance(&self) -> f64 {
        let dim = self.u.nrows().max(self.v.nrows()) as f64;
        dim * f64::EPSILON * self.singular_values.first().copied().unwrap_or(0.0)
    }
}

/// Unregularized inversion through the SVD. Components whose singular value is
/// at or below `tol` are dropped; by default only numerically zero ones are.
pub fn naive_svd_solve(k: &LinearOp, y: &Signal, tol: Option<f64>) -> Result<Signal> {
    let f = SvdFactors::of(k)?;
    let tol = tol.unwrap_or_else(|| f.default_tolerance());
    f.pseudo_inverse_apply(y, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn amplification_and_truncation() {
        let k = LinearOp::diagonal(Signal::from_vec(vec![1.0, 1e-3]).unwrap());
        let y = Signal::from_vec(vec![1.0, 1.0]).unwrap();
        let x = naive_svd_solve(&k, &y, None).unwrap();
        assert!((x.data()[0] - 1.0).abs() < 1e-12 && (x.data()[1] - 1000.0).abs() < 1e-9);
        let t = naive_svd_solve(&k, &y, Some(1e-2)).unwrap();
        assert!((t.data()[0] - 1.0).abs() < 1e-12 && t.data()[1] == 0.0);
    }

    #[test]
    fn random_square_against_normal_equations() {
        let mut rng = Rng::new(21);
        let a = DMatrix::from_fn(5, 5, |_, _| rng.normal());
        let y = rng.normal_signal(&[5]);
        let x = naive_svd_solve(&LinearOp::dense(a.clone()), &y, None).unwrap();
        let ata = a.transpose() * &a;
        let oracle = ata.lu().solve(&(a.transpose() * DVector::from_column_slice(y.data()))).unwrap();
        for i in 0..5 {
            assert!((x.data()[i] - oracle[i]).abs() <= 1e-8);
        }
    }

    #[test]
    fn factors_reconstruct_and_sort() {
        let mut rng = Rng::new(22);
        let a = DMatrix::from_fn(7, 4, |_, _| rng.normal());
        let f = SvdFactors::of(&LinearOp::dense(a.clone())).unwrap();
        assert!((f.reconstruct() - &a).norm() / a.norm() <= 1e-10);
        assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }
}
