use super::{Recorder, SolverConfig, StopReason};
use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::proximal::Prox;
use crate::signal::Signal;
use crate::trace::Trace;

/// Iterations at the end of a run left out of the contraction estimate.
pub const CONTRACTION_TAIL: usize = 5;

type Map<'a> = Box<dyn Fn(&Signal) -> Result<Signal> + Send + Sync + 'a>;

/// A map `T` iterated as `x_{k+1} = T(x_k)`.
pub struct FixedPointProblem<'a> {
    name: String,
    map: Map<'a>,
}

impl<'a> FixedPointProblem<'a> {
    pub fn new(name: impl Into<String>, map: impl Fn(&Signal) -> Result<Signal> + Send + Sync + 'a) -> Self {
        Self {
            name: name.into(),
            map: Box::new(map),
        }
    }

    /// `T = ½id + ½(2D − id)(2prox_{τf} − id)`
    pub fn pnp_drsdiff(f: &'a dyn Prox, d: &'a dyn Denoiser, sigma: f64, tau: f64) -> Self {
        Self::new("pnp-drsdiff", move |x: &Signal| {
            let r = f.prox(x, tau)?.lincomb(2.0, x, -1.0);
            let s = d.denoise(&r, sigma)?.lincomb(2.0, &r, -1.0);
            Ok(x.lincomb(0.5, &s, 0.5))
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, x: &Signal) -> Result<Signal> {
        (self.map)(x)
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointOutput {
    pub x: Signal,
    pub trace: Trace,
    pub iterations: usize,
    /// `sup_k ‖x_{k+1} − x*‖/‖x_k − x*‖` with the final iterate as `x*`.
    pub contraction: f64,
}

/// Iterates `T` until the step residual meets the tolerance. Fails with
/// [`Error::FixedPointNotConverged`] carrying the contraction estimate
/// otherwise.
pub fn run_fixed_point(t: &FixedPointProblem, cfg: &SolverConfig, x0: &Signal) -> Result<FixedPointOutput> {
    let mut rec = Recorder::new(cfg, x0)?;
    let mut iterates = vec![x0.clone()];
    let mut converged = false;
    for k in 0..cfg.max_iter {
        let x = iterates.last().expect("nonempty");
        let next = t.apply(x)?;
        x.check_same_shape(&next)?;
        rec.guard(k, &next)?;
        let step = next.distance(x);
        converged = rec.row(k, &next, step, f64::NAN, step);
        iterates.push(next);
        if converged {
            break;
        }
    }
    let contraction = contraction_estimate(&iterates);
    let iterations = iterates.len() - 1;
    let out = rec.finish(iterates.pop().expect("nonempty"), StopReason::MaxIterations, iterations);
    if !converged {
        return Err(Error::FixedPointNotConverged {
            iterations,
            contraction,
        });
    }
    Ok(FixedPointOutput {
        x: out.x,
        trace: out.trace,
        iterations,
        contraction,
    })
}

fn contraction_estimate(iterates: &[Signal]) -> f64 {
    let limit = iterates.last().expect("nonempty");
    let usable = iterates.len().saturating_sub(1 + CONTRACTION_TAIL);
    let mut sup = 0.0_f64;
    for k in 0..usable {
        let den = iterates[k].distance(limit);
        if den > 0.0 {
            sup = sup.max(iterates[k + 1].distance(limit) / den);
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_map() {
        let t = FixedPointProblem::new("half", |x: &Signal| Ok(x.scale(0.5)));
        let cfg = SolverConfig::default().with_max_iter(200).with_tol(1e-12);
        let x0 = Signal::from_vec(vec![1.0, -2.0, 3.0]).unwrap();
        let out = run_fixed_point(&t, &cfg, &x0).unwrap();
        assert!(out.x.norm() <= 1e-11);
        assert!((out.contraction - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn non_convergence_carries_estimate() {
        let t = FixedPointProblem::new("slow", |x: &Signal| Ok(x.scale(0.999)));
        let cfg = SolverConfig::default().with_max_iter(50);
        match run_fixed_point(&t, &cfg, &Signal::filled(&[2], 1.0)) {
            Err(Error::FixedPointNotConverged { iterations, contraction }) => {
                assert_eq!(iterations, 50);
                assert!(contraction > 0.9 && contraction < 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
