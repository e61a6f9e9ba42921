//! Anisotropic total variation with forward differences and Neumann
//! boundaries, solved through its dual.

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Forward-difference operator `∇` over the spatial axes of a shape.
/// Channels are differenced independently.
pub(crate) struct Grid {
    axes: Vec<(usize, usize)>,
    n: usize,
}

impl Grid {
    pub(crate) fn new(shape: &[usize]) -> Self {
        let (h, w, c) = crate::signal::dims3(shape);
        let mut axes = Vec::new();
        if h > 1 {
            axes.push((w * c, h));
        }
        if w > 1 {
            axes.push((c, w));
        }
        Self { axes, n: h * w * c }
    }

    pub(crate) fn num_axes(&self) -> usize {
        self.axes.len()
    }

    /// `∇x`, one block of length `n` per axis; the last entry along each axis is 0.
    pub(crate) fn grad(&self, x: &[f64], out: &mut [f64]) {
        for (a, &(stride, size)) in self.axes.iter().enumerate() {
            let g = &mut out[a * self.n..(a + 1) * self.n];
            for i in 0..self.n {
                g[i] = if (i / stride) % size + 1 < size {
                    x[i + stride] - x[i]
                } else {
                    0.0
                };
            }
        }
    }

    /// `∇ᵀp`
    pub(crate) fn grad_adjoint(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, &(stride, size)) in self.axes.iter().enumerate() {
            let q = &p[a * self.n..(a + 1) * self.n];
            for i in 0..self.n {
                let k = (i / stride) % size;
                if k + 1 < size {
                    out[i] -= q[i];
                }
                if k > 0 {
                    out[i] += q[i - stride];
                }
            }
        }
    }

    pub(crate) fn dual_len(&self) -> usize {
        self.axes.len() * self.n
    }
}

/// `‖∇x‖₁`
pub fn tv_norm(x: &Signal) -> f64 {
    let grid = Grid::new(x.shape());
    let mut g = vec![0.0; grid.dual_len()];
    grid.grad(x.data(), &mut g);
    g.iter().map(|v| v.abs()).sum()
}

/// Duality gap `Σ λ|∇x|_i − (∇x)_i p_i` of the pair `x = v − ∇ᵀp`, `p`.
fn gap(lambda: f64, g: &[f64], p: &[f64]) -> f64 {
    g.iter().zip(p).map(|(gi, pi)| lambda * gi.abs() - gi * pi).sum()
}

#[derive(Clone, Debug)]
pub struct TvSolution {
    pub x: Signal,
    pub gap: f64,
    pub iterations: usize,
}

/// `argmin_x ½‖x − v‖² + λ‖∇x‖₁` by projected gradient on the dual with step
/// `1/(4·axes)`, stopped once the duality gap is at most `tol`.
pub fn prox_tv_detailed(v: &Signal, lambda: f64, tol: f64, max_iter: usize) -> Result<TvSolution> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("lambda must be nonnegative, got {lambda}")));
    }
    let grid = Grid::new(v.shape());
    if lambda == 0.0 || grid.num_axes() == 0 {
        return Ok(TvSolution {
            x: v.clone(),
            gap: 0.0,
            iterations: 0,
        });
    }
    let tau = 1.0 / (4.0 * grid.num_axes() as f64);
    let n = v.len();
    let mut p = vec![0.0; grid.dual_len()];
    let mut g = vec![0.0; grid.dual_len()];
    let mut x = v.data().to_vec();
    let mut dtp = vec![0.0; n];
    let mut last_gap = f64::INFINITY;
    for it in 0..max_iter {
        grid.grad(&x, &mut g);
        last_gap = gap(lambda, &g, &p);
        if last_gap <= tol {
            return Ok(TvSolution {
                x: v.with_data(x),
                gap: last_gap,
                iterations: it,
            });
        }
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi = (*pi + tau * gi).clamp(-lambda, lambda);
        }
        grid.grad_adjoint(&p, &mut dtp);
        for ((xi, vi), di) in x.iter_mut().zip(v.data()).zip(&dtp) {
            *xi = vi - di;
        }
    }
    grid.grad(&x, &mut g);
    let final_gap = gap(lambda, &g, &p);
    if final_gap <= tol {
        return Ok(TvSolution {
            x: v.with_data(x),
            gap: final_gap,
            iterations: max_iter,
        });
    }
    Err(Error::NotConverged {
        solver: "tv dual projection",
        iterations: max_iter,
        residual: final_gap.min(last_gap),
    })
}

pub fn prox_tv(v: &Signal, lambda: f64, tol: f64, max_iter: usize) -> Result<Signal> {
    prox_tv_detailed(v, lambda, tol, max_iter).map(|s| s.x)
}

/// Euclidean projection of `v` onto `{∇ᵀp : ‖p‖∞ ≤ radius}`, the prox of the
/// conjugate of `radius·TV`. Solved by accelerated projected gradient.
pub fn project_tv_dual_ball(v: &Signal, radius: f64, tol: f64, max_iter: usize) -> Result<Signal> {
    if !(radius >= 0.0) {
        return Err(Error::param(format!("radius must be nonnegative, got {radius}")));
    }
    let grid = Grid::new(v.shape());
    let n = v.len();
    if radius == 0.0 || grid.num_axes() == 0 {
        return Ok(Signal::zeros(v.shape()));
    }
    let step = 1.0 / (4.0 * grid.num_axes() as f64);
    let m = grid.dual_len();
    let (mut p, mut q, mut p_prev) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut g = vec![0.0; m];
    let mut r = vec![0.0; n];
    let mut dtp = vec![0.0; n];
    let mut t = 1.0_f64;
    let residual = |p: &[f64], dtp: &mut [f64], r: &mut [f64]| {
        grid.grad_adjoint(p, dtp);
        for ((ri, vi), di) in r.iter_mut().zip(v.data()).zip(dtp.iter()) {
            *ri = vi - di;
        }
    };
    let mut current_gap = f64::INFINITY;
    for _ in 0..max_iter {
        residual(&q, &mut dtp, &mut r);
        grid.grad(&r, &mut g);
        p_prev.copy_from_slice(&p);
        for ((pi, qi), gi) in p.iter_mut().zip(&q).zip(&g) {
            *pi = (qi + step * gi).clamp(-radius, radius);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for ((qi, pi), pp) in q.iter_mut().zip(&p).zip(&p_prev) {
            *qi = pi + beta * (pi - pp);
        }
        t = t_next;
        residual(&p, &mut dtp, &mut r);
        grid.grad(&r, &mut g);
        current_gap = gap(radius, &g, &p);
        if current_gap <= tol {
            return Ok(v.with_data(dtp));
        }
    }
    Err(Error::NotConverged {
        solver: "tv dual ball projection",
        iterations: max_iter,
        residual: current_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn adjointness_of_differences() {
        let mut rng = Rng::new(1);
        for shape in [vec![9], vec![5, 6], vec![4, 3, 2]] {
            let grid = Grid::new(&shape);
            let x = rng.normal_signal(&shape);
            let p: Vec<f64> = (0..grid.dual_len()).map(|_| rng.normal()).collect();
            let mut g = vec![0.0; grid.dual_len()];
            let mut d = vec![0.0; x.len()];
            grid.grad(x.data(), &mut g);
            grid.grad_adjoint(&p, &mut d);
            let lhs: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(&d).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn two_point_cases() {
        let v = Signal::from_vec(vec![1.0, -1.0]).unwrap();
        // ½(x1−1)² + ½(x2+1)² + λ|x2−x1| pulls both values together by λ
        let x = prox_tv(&v, 0.5, 1e-14, 10_000).unwrap();
        assert!((x.data()[0] - 0.5).abs() < 1e-7 && (x.data()[1] + 0.5).abs() < 1e-7);
        for lambda in [1.0, 3.0] {
            let x = prox_tv(&v, lambda, 1e-14, 10_000).unwrap();
            assert!(x.norm_inf() < 1e-7);
        }
        assert_eq!(prox_tv(&v, 0.0, 1e-9, 1).unwrap(), v);
    }

    #[test]
    fn projection_lies_in_the_ball_and_is_idempotent() {
        let v = Rng::new(3).normal_signal(&[6, 6]);
        let pr = project_tv_dual_ball(&v, 0.3, 1e-13, 200_000).unwrap();
        let again = project_tv_dual_ball(&pr, 0.3, 1e-13, 200_000).unwrap();
        assert!(again.max_abs_diff(&pr) < 1e-5);
    }

    #[test]
    fn iteration_cap_reports_gap() {
        let v = Rng::new(4).normal_signal(&[16, 16]);
        match prox_tv(&v, 1.0, 1e-300, 3) {
            Err(Error::NotConverged { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
