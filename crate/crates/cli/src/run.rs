//! Maps a solver spec onto the library solvers.

use pnpkit::proximal::LeastSquares;
use pnpkit::solvers::{
    run_admm, run_apgd, run_drs, run_gs_pnp, run_hqs, run_pgd, run_red_apg, run_red_gd, run_red_pg,
    GsPnpOptions, HqsSchedule, RedParams, RegSlot, SolverConfig, SolverOutput,
};

use crate::config::{Algo, DenoiserSpec, Settings, SolverSpec};
use crate::failure::Failure;
use crate::setup::{build_denoiser, build_gs, Problem};

const HQS_LAMBDA: f64 = 0.23;
const HQS_SIGMA_START: f64 = 0.2;
const RED_LIPSCHITZ: f64 = 2.0;

pub fn solver_config(spec: &SolverSpec, settings: &Settings, p: &Problem) -> SolverConfig {
    SolverConfig::default()
        .with_max_iter(spec.max_iter.unwrap_or(settings.max_iter))
        .with_tol(spec.tol.unwrap_or(settings.tol))
        .with_step(spec.step.unwrap_or(settings.step))
        .with_alpha(spec.alpha.unwrap_or(settings.alpha))
        .with_rho(spec.rho.unwrap_or(settings.rho))
        .with_reference(p.truth.clone())
}

pub fn run_solver(
    spec: &SolverSpec,
    denoiser: &DenoiserSpec,
    settings: &Settings,
    p: &Problem,
) -> Result<SolverOutput, Failure> {
    let cfg = solver_config(spec, settings, p);
    let shape = p.truth.shape();
    let sigma = spec.sigma.unwrap_or(p.noise_sigma);
    let f = LeastSquares::new(p.operator.clone(), p.observed.clone())?;
    let x0 = p.initial()?;
    if spec.algo == Algo::GsPnp {
        let DenoiserSpec::Gs { kernel_sigma, weight } = denoiser else {
            return Err(Failure::usage("gs-pnp needs the gs denoiser"));
        };
        let gs = build_gs(*kernel_sigma, *weight, shape)?;
        let lambda = spec.lambda.unwrap_or(1.0);
        let tau = spec.tau.unwrap_or(0.99 / (lambda * gs.lipschitz()));
        let mut opts = GsPnpOptions::new(lambda, tau);
        if spec.backtracking {
            opts = opts.with_backtracking();
        }
        return Ok(run_gs_pnp(&f, &gs, opts, &cfg, Some(&x0))?);
    }
    let d = build_denoiser(denoiser, shape)?;
    let slot = RegSlot::denoiser(d.as_ref(), sigma);
    let f_slot = RegSlot::Prox(&f);
    let red = || RedParams::new(spec.lambda.unwrap_or(1.0), sigma);
    let lipschitz = spec.lipschitz.unwrap_or(RED_LIPSCHITZ);
    let out = match spec.algo {
        Algo::PnpPgd => run_pgd(&f, slot, &cfg, &x0)?,
        Algo::Apgd => run_apgd(&f, slot, &cfg, &x0, None)?,
        Algo::PnpDrs => run_drs(slot, f_slot, &cfg, &x0)?,
        Algo::PnpDrsdiff => run_drs(f_slot, slot, &cfg, &x0)?,
        Algo::PnpAdmm => run_admm(&p.operator, &p.observed, slot, &cfg, Some(&x0), None, None)?,
        Algo::Hqs => {
            let (schedule, start) = match (spec.sigma_start, spec.rho) {
                (None, Some(rho)) => (HqsSchedule::fixed(rho), sigma),
                (start, _) => {
                    let start = start.unwrap_or(HQS_SIGMA_START);
                    let schedule = HqsSchedule::decreasing(
                        p.noise_sigma,
                        spec.lambda.unwrap_or(HQS_LAMBDA),
                        start,
                        spec.sigma_end.unwrap_or(p.noise_sigma),
                        cfg.max_iter,
                    )?;
                    (schedule, start)
                }
            };
            let slot = RegSlot::denoiser(d.as_ref(), start);
            run_hqs(&p.operator, &p.observed, slot, &schedule, &cfg, Some(&x0))?
        }
        Algo::RedGd => run_red_gd(&p.operator, &p.observed, d.as_ref(), red()?, &cfg, Some(&x0))?,
        Algo::RedPg => run_red_pg(&p.operator, &p.observed, d.as_ref(), red()?, lipschitz, &cfg, Some(&x0))?,
        Algo::RedApg => run_red_apg(&p.operator, &p.observed, d.as_ref(), red()?, lipschitz, &cfg, Some(&x0))?,
        Algo::GsPnp => unreachable!(),
    };
    Ok(out)
}
