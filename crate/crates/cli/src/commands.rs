//! The `solve`, `compare`, `sweep`, `diagnose` and `sample` commands.

use pnpkit::denoisers::{estimate_residual_lipschitz, homogeneity_defect, jacobian_asymmetry, LinearSpectral};
use pnpkit::experiments::{
    builtin_image, dyadic_deltas, is_convergent, min_residual, regularization_sweep, residual_slope,
    strictly_decreasing, sweep_to_csv, SweepConfig,
};
use pnpkit::metrics::{add_gaussian_noise, psnr};
use pnpkit::operators::LinearOp;
use pnpkit::sampling::{gaussian_posterior_oracle, run_pnp_ula, UlaConfig};
use pnpkit::solvers::{SolverOutput, StopReason};
use pnpkit::{Rng, Signal};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{
    DenoiserSpec, ExperimentConfig, OperatorSpec, ProbeSpec, RuleSpec, SamplerSpec, SolverSpec, SweepSpec, Task,
    TransformSpec,
};
use crate::failure::Failure;
use crate::output::{config_hash, finite, slug, worker_count, OutDir};
use crate::run::run_solver;
use crate::setup::{build_denoiser, build_prior, default_operator, load_image, Problem};

const DIAGNOSE_PROBE_SIZE: usize = 16;
const ORACLE_SE_FACTOR: f64 = 3.0;
const ORACLE_DELTA_FACTOR: f64 = 2.0;
const ORACLE_VARIANCE_TOL: f64 = 0.1;

/// Everything a command needs: the effective config, seed and output directory.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub out: OutDir,
    pub assert: bool,
}

impl Context {
    fn hash(&self) -> String {
        config_hash(&self.cfg)
    }

    fn denoiser(&self) -> Result<&DenoiserSpec, Failure> {
        self.cfg
            .denoiser
            .as_ref()
            .ok_or_else(|| Failure::usage("config needs a denoiser section"))
    }

    fn operator_spec(&self) -> OperatorSpec {
        self.cfg.operator.clone().unwrap_or_else(|| default_operator(self.cfg.task))
    }

    fn problems(&self) -> Result<Vec<Problem>, Failure> {
        let sigma = self.cfg.noise_sigma()?;
        let op = self.operator_spec();
        self.cfg
            .images_or_default()
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let rng = Rng::new(self.seed.wrapping_add(i as u64));
                Problem::new(spec.label(), load_image(spec)?, &op, sigma, &rng)
            })
            .collect()
    }
}

fn corrupted_psnr(p: &Problem) -> Option<f64> {
    if p.observed.shape() == p.truth.shape() {
        psnr(&p.observed, &p.truth, 1.0).ok()
    } else {
        None
    }
}

pub fn solve(ctx: &Context) -> Result<(), Failure> {
    ctx.cfg
        .expect_task(&[Task::Deblur, Task::Inpaint, Task::Denoise], "solve")?;
    let spec = match (&ctx.cfg.solver, ctx.cfg.solvers.as_slice()) {
        (Some(s), []) => s.clone(),
        (None, [s]) => s.clone(),
        _ => return Err(Failure::usage("solve needs exactly one solver")),
    };
    let mut problems = ctx.problems()?;
    if problems.len() != 1 {
        return Err(Failure::usage("solve needs exactly one image"));
    }
    let p = problems.remove(0);
    let out = run_solver(&spec, ctx.denoiser()?, &ctx.cfg.settings, &p)?;
    let final_psnr = psnr(&out.x, &p.truth, 1.0)?;
    let before = corrupted_psnr(&p);
    ctx.out.write_signal("reconstruction", &out.x)?;
    ctx.out.write_signal("observed", &p.observed)?;
    ctx.out.write("trace.csv", out.trace.to_csv())?;
    ctx.out.write_json(
        "summary.json",
        &json!({
            "command": "solve",
            "solver": spec.label(),
            "image": p.name,
            "seed": ctx.seed,
            "config_hash": ctx.hash(),
            "iters": out.iterations,
            "stop_reason": out.stop.as_str(),
            "final_psnr": finite(final_psnr),
            "corrupted_psnr": before.and_then(finite),
        }),
    )?;
    println!(
        "{} on {}: {} after {} iterations, PSNR {:.2} dB",
        spec.label(),
        p.name,
        out.stop.as_str(),
        out.iterations,
        final_psnr
    );
    if out.stop == StopReason::Diverged {
        return Err(Failure::diverged(format!("{} diverged", spec.label())));
    }
    if ctx.assert {
        if let Some(b) = before {
            if final_psnr <= b {
                return Err(Failure::assertion(format!(
                    "reconstruction PSNR {final_psnr:.2} dB does not exceed the corrupted {b:.2} dB"
                )));
            }
        }
    }
    Ok(())
}

struct CompareRow {
    solver: String,
    provable: bool,
    image: String,
    final_psnr: Option<f64>,
    min_residual: Option<f64>,
    slope: Option<f64>,
    converged: bool,
    trace: String,
    note: Option<String>,
}

fn csv_num(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn compare_row(spec: &SolverSpec, p: &Problem, result: Result<SolverOutput, Failure>) -> Result<CompareRow, Failure> {
    let mut row = CompareRow {
        solver: spec.label(),
        provable: spec.algo.is_provable(),
        image: p.name.clone(),
        final_psnr: None,
        min_residual: None,
        slope: None,
        converged: false,
        trace: pnpkit::Trace::new().to_csv(),
        note: None,
    };
    match result {
        Ok(out) => {
            row.final_psnr = finite(psnr(&out.x, &p.truth, 1.0)?);
            row.min_residual = finite(min_residual(&out.trace));
            row.slope = residual_slope(&out.trace).and_then(finite);
            row.converged = is_convergent(&out);
            row.trace = out.trace.to_csv();
        }
        Err(f) if f.code == crate::failure::EXIT_DIVERGED => row.note = Some(f.message),
        Err(f) => return Err(f),
    }
    Ok(row)
}

pub fn compare(ctx: &Context) -> Result<(), Failure> {
    ctx.cfg
        .expect_task(&[Task::Compare, Task::Deblur, Task::Inpaint, Task::Denoise], "compare")?;
    let solvers = &ctx.cfg.solvers;
    if solvers.len() < 2 {
        return Err(Failure::usage(format!(
            "compare needs at least two solvers, got {}",
            solvers.len()
        )));
    }
    let mut labels: Vec<String> = solvers.iter().map(SolverSpec::label).collect();
    labels.sort();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::usage("solver labels must be unique; set label to distinguish repeats"));
    }
    let denoiser = ctx.denoiser()?;
    let problems = ctx.problems()?;
    let mut names: Vec<&str> = problems.iter().map(|p| p.name.as_str()).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::usage("image names must be unique; set name to distinguish repeats"));
    }
    let jobs: Vec<(&SolverSpec, &Problem)> = problems
        .iter()
        .flat_map(|p| solvers.iter().map(move |s| (s, p)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start workers: {e}")))?;
    let rows: Vec<CompareRow> = pool.install(|| {
        jobs.par_iter()
            .map(|(s, p)| compare_row(s, p, run_solver(s, denoiser, &ctx.cfg.settings, p)))
            .collect::<Result<_, _>>()
    })?;
    let mut table = String::from("solver,image,final_psnr,min_residual,residual_slope,converged\n");
    for r in &rows {
        ctx.out
            .write(&format!("traces/{}__{}.csv", slug(&r.solver), slug(&r.image)), &r.trace)?;
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.solver,
            r.image,
            csv_num(r.final_psnr),
            csv_num(r.min_residual),
            csv_num(r.slope),
            r.converged
        ));
    }
    ctx.out.write("compare.csv", &table)?;
    let summary: Vec<_> = rows
        .iter()
        .map(|r| {
            json!({
                "solver": r.solver,
                "image": r.image,
                "provable": r.provable,
                "converged": r.converged,
                "note": r.note,
            })
        })
        .collect();
    ctx.out.write_json(
        "summary.json",
        &json!({"command": "compare", "seed": ctx.seed, "config_hash": ctx.hash(), "runs": summary}),
    )?;
    print!("{table}");
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.provable && !r.converged)
        .map(|r| format!("{} on {}", r.solver, r.image))
        .collect();
    if ctx.assert && !failed.is_empty() {
        return Err(Failure::assertion(format!(
            "provable methods did not converge: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<(), Failure> {
    ctx.cfg.expect_task(&[Task::Sweep], "sweep")?;
    let spec = ctx.cfg.sweep.clone().unwrap_or_default();
    let SweepSpec {
        diagonal,
        truth,
        deltas,
        levels,
        c,
        eta,
    } = &spec;
    if diagonal.is_empty() {
        return Err(Failure::usage("sweep diagonal must be nonempty"));
    }
    let truth = truth.clone().unwrap_or_else(|| vec![1.0; diagonal.len()]);
    if truth.len() != diagonal.len() {
        return Err(Failure::usage("sweep truth and diagonal lengths differ"));
    }
    let k = LinearOp::diagonal(Signal::from_vec(diagonal.clone())?);
    let family = match &ctx.cfg.denoiser {
        None => LinearSpectral::uniform(1.0)?,
        Some(DenoiserSpec::LinearSpectral { transform, rule, .. }) => {
            if *transform != TransformSpec::Dct || *rule != RuleSpec::Uniform {
                return Err(Failure::usage("the sweep family must be the uniform DCT linear spectral denoiser"));
            }
            LinearSpectral::uniform(1.0)?
        }
        Some(_) => return Err(Failure::usage("the sweep needs a linear spectral denoiser family")),
    };
    let cfg = SweepConfig {
        deltas: deltas.clone().unwrap_or_else(|| dyadic_deltas(*levels)),
        c: *c,
        eta: *eta,
        seed: ctx.seed,
        ..SweepConfig::default()
    };
    let rows = regularization_sweep(&k, &Signal::from_vec(truth)?, &family, &cfg)?;
    let csv = sweep_to_csv(&rows);
    ctx.out.write("sweep.csv", &csv)?;
    let decreasing = strictly_decreasing(&rows);
    let ratio = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if a.error > 0.0 => finite(b.error / a.error),
        _ => None,
    };
    ctx.out.write_json(
        "summary.json",
        &json!({
            "command": "sweep",
            "seed": ctx.seed,
            "config_hash": ctx.hash(),
            "strictly_decreasing": decreasing,
            "final_over_initial": ratio,
        }),
    )?;
    print!("{csv}");
    if ctx.assert && !decreasing {
        return Err(Failure::assertion("sweep error column is not strictly decreasing"));
    }
    Ok(())
}

pub fn diagnose(ctx: &Context) -> Result<(), Failure> {
    ctx.cfg.expect_task(&[Task::Diagnose], "diagnose")?;
    let spec = ctx.denoiser()?;
    let probe = ctx.cfg.probe.clone().unwrap_or_default();
    let ProbeSpec {
        image,
        sigma,
        probes,
        mu,
        fd_step,
        homogeneity_delta,
    } = &probe;
    if !(*mu > 0.0) {
        return Err(Failure::usage(format!("mu must be positive, got {mu}")));
    }
    let base = match image {
        Some(img) => load_image(img)?,
        None => builtin_image("shapes", DIAGNOSE_PROBE_SIZE)?,
    };
    let d = build_denoiser(spec, base.shape())?;
    let mut rng = Rng::new(ctx.seed);
    let eps = estimate_residual_lipschitz(d.as_ref(), &base, *sigma, *probes, *fd_step, &mut rng)?;
    let asymmetry = jacobian_asymmetry(d.as_ref(), &base, *sigma, *fd_step)?;
    let homogeneity = homogeneity_defect(d.as_ref(), &base, *sigma, *homogeneity_delta)?;
    let e = eps.value;
    let gate = if e < 1.0 {
        json!(e / ((1.0 + e - 2.0 * e * e) * mu))
    } else {
        json!("not applicable")
    };
    let report = json!({
        "denoiser": d.name(),
        "sigma": sigma,
        "seed": ctx.seed,
        "config_hash": ctx.hash(),
        "epsilon_hat": finite(e),
        "epsilon_method": format!("{:?}", eps.method),
        "epsilon_per_probe": eps.per_probe.iter().map(|v| finite(*v)).collect::<Vec<_>>(),
        "asymmetry": finite(asymmetry),
        "homogeneity_defect": finite(homogeneity),
        "theorem_gate": {"mu": mu, "pnp_drsdiff_tau_min": gate},
    });
    ctx.out.write_json("diagnose.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if ctx.assert && e >= 1.0 {
        return Err(Failure::assertion(format!(
            "residual Lipschitz estimate {e:.4} is not below 1; the contraction gate does not apply"
        )));
    }
    Ok(())
}

pub fn sample(ctx: &Context) -> Result<(), Failure> {
    ctx.cfg.expect_task(&[Task::Sample], "sample")?;
    let spec = ctx.cfg.sampler.clone().unwrap_or_default();
    let SamplerSpec {
        shape,
        delta,
        sigma,
        sigma_w,
        n_samples,
        thin,
        burn_in,
        noise,
    } = &spec;
    let den = ctx.denoiser()?;
    let rng = Rng::new(ctx.seed);
    let (truth, gamma) = match den {
        DenoiserSpec::GaussianPrior { .. } | DenoiserSpec::Gmm { .. } => {
            if shape.is_empty() || shape.len() > 3 || shape.contains(&0) {
                return Err(Failure::usage(format!("invalid sampler shape {shape:?}")));
            }
            let dim = shape.iter().product();
            let prior = build_prior(den, dim)?.expect("prior spec");
            let draw = prior.sample_smoothed(0.0, &mut rng.fork(1));
            let gamma = match den {
                DenoiserSpec::GaussianPrior { gamma } => Some(*gamma),
                _ => None,
            };
            (Signal::new(draw.into_data(), shape.clone())?, gamma)
        }
        _ => {
            let images = ctx.cfg.images_or_default();
            (load_image(&images[0])?, None)
        }
    };
    let d = build_denoiser(den, truth.shape())?;
    let op = crate::setup::build_operator(&ctx.operator_spec(), truth.shape(), &rng)?;
    let y = add_gaussian_noise(&op.apply(&truth)?, *sigma_w, &mut rng.fork(2))?;
    let ula = UlaConfig {
        delta: *delta,
        sigma: *sigma,
        sigma_w: *sigma_w,
        burn_in: *burn_in,
        n_samples: *n_samples,
        thin: *thin,
        seed: ctx.seed,
        noise: *noise,
        store_samples: false,
    };
    let out = run_pnp_ula(&op, &y, d.as_ref(), &ula, None)?;
    ctx.out.write("stats.csv", out.stats.to_csv())?;
    ctx.out.write_json(
        "summary.json",
        &json!({
            "command": "sample",
            "seed": ctx.seed,
            "config_hash": ctx.hash(),
            "steps": out.steps,
            "samples": out.stats.count,
            "ess": finite(out.stats.ess),
            "stability_product": finite(out.stability_product),
            "noise": noise,
        }),
    )?;
    println!(
        "{} samples after {} steps, min ESS {:.0}",
        out.stats.count, out.steps, out.stats.ess
    );
    let Some(gamma) = gamma else {
        return Ok(());
    };
    let oracle = gaussian_posterior_oracle(&op, &y, gamma, *sigma, *sigma_w)?;
    let n = truth.len();
    let mut worst_mean_ratio = 0.0_f64;
    let mut worst_var = 0.0_f64;
    let mut mean_gap = 0.0_f64;
    for i in 0..n {
        let gap = (out.stats.mean.data()[i] - oracle.mean.data()[i]).abs();
        let tol = (ORACLE_SE_FACTOR * out.stats.standard_error(i)).max(ORACLE_DELTA_FACTOR * delta);
        mean_gap = mean_gap.max(gap);
        worst_mean_ratio = worst_mean_ratio.max(gap / tol);
        let v = oracle.covariance[(i, i)];
        worst_var = worst_var.max((out.stats.variance.data()[i] - v).abs() / v);
    }
    let within = worst_mean_ratio <= 1.0 && worst_var <= ORACLE_VARIANCE_TOL;
    ctx.out.write_json(
        "oracle_gap.json",
        &json!({
            "mean_gap_inf": finite(mean_gap),
            "mean_gap_over_tolerance": finite(worst_mean_ratio),
            "variance_rel_err_max": finite(worst_var),
            "variance_tolerance": ORACLE_VARIANCE_TOL,
            "within_tolerance": within,
        }),
    )?;
    println!("oracle mean gap {mean_gap:.3e} ({worst_mean_ratio:.2} of allowance), variance error {worst_var:.3}");
    if ctx.assert && !within {
        return Err(Failure::assertion("sample statistics fall outside the Gaussian oracle tolerances"));
    }
    Ok(())
}
