//! Builds images, operators, observations and denoisers from config specs.

use nalgebra::DMatrix;
use pnpkit::denoisers::{
    Denoiser, GaussianFilter, GsDenoiser, LinearSpectral, MmseGmm, Nlm, ScaledIdentity, ShrinkRule,
    SpectralTransform, TvDenoiser, WaveletDenoiser,
};
use pnpkit::experiments::{builtin_image, BUILTIN_SIZE};
use pnpkit::io::load_signal;
use pnpkit::metrics::add_gaussian_noise;
use pnpkit::operators::{make_blur, make_mask, uniform_kernel, LinearOp};
use pnpkit::proximal::max_haar_levels;
use pnpkit::score_oracle::GmmPrior;
use pnpkit::{Rng, Signal};

use crate::config::{DenoiserSpec, ImageSpec, OperatorSpec, RuleSpec, Task, TransformSpec};
use crate::failure::Failure;

const NOISE_STREAM: u64 = 0;
const MASK_STREAM: u64 = 1 << 32;

pub fn load_image(spec: &ImageSpec) -> Result<Signal, Failure> {
    match (&spec.builtin, &spec.path) {
        (Some(name), None) => Ok(builtin_image(name, spec.size.unwrap_or(BUILTIN_SIZE))?),
        (None, Some(path)) => {
            if spec.size.is_some() {
                return Err(Failure::usage("image size only applies to built-in images"));
            }
            Ok(load_signal(path)?)
        }
        _ => Err(Failure::usage("each image needs exactly one of builtin or path")),
    }
}

/// Operator for the given task when none is configured.
pub fn default_operator(task: Option<Task>) -> OperatorSpec {
    match task {
        Some(Task::Inpaint) => OperatorSpec::Inpaint { keep: 0.5 },
        Some(Task::Denoise) | Some(Task::Sample) => OperatorSpec::Identity,
        _ => OperatorSpec::Blur { size: 9 },
    }
}

pub fn build_operator(spec: &OperatorSpec, shape: &[usize], rng: &Rng) -> Result<LinearOp, Failure> {
    let n: usize = shape.iter().product();
    let op = match spec {
        OperatorSpec::Blur { size } => {
            if size % 2 == 0 {
                return Err(Failure::usage(format!("blur size must be odd, got {size}")));
            }
            make_blur(&uniform_kernel(*size)?, shape)?
        }
        OperatorSpec::Inpaint { keep } => {
            if !(0.0..=1.0).contains(keep) {
                return Err(Failure::usage(format!("inpaint keep fraction must lie in [0, 1], got {keep}")));
            }
            let mut r = rng.fork(MASK_STREAM);
            let data = (0..n).map(|_| (r.uniform() < *keep) as u8 as f64).collect();
            make_mask(&Signal::zeros(shape).with_data(data))
        }
        OperatorSpec::Identity => LinearOp::identity(shape),
        OperatorSpec::Diagonal { values } => {
            if values.len() != n {
                return Err(Failure::usage(format!(
                    "diagonal operator has {} entries but the signal has {n}",
                    values.len()
                )));
            }
            LinearOp::diagonal(Signal::new(values.clone(), shape.to_vec())?)
        }
        OperatorSpec::Dense { rows } => {
            let m = rows.len();
            if m == 0 || rows.iter().any(|r| r.len() != n) {
                return Err(Failure::usage(format!("dense operator rows must all have {n} columns")));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let matrix = DMatrix::from_row_slice(m, n, &flat);
            LinearOp::dense_with_shapes(matrix, shape.to_vec(), vec![m])?
        }
    };
    Ok(op)
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub truth: Signal,
    pub operator: LinearOp,
    pub observed: Signal,
    pub noise_sigma: f64,
}

impl Problem {
    pub fn new(
        name: String,
        truth: Signal,
        op_spec: &OperatorSpec,
        noise_sigma: f64,
        rng: &Rng,
    ) -> Result<Self, Failure> {
        let operator = build_operator(op_spec, truth.shape(), rng)?;
        let clean = operator.apply(&truth)?;
        let observed = add_gaussian_noise(&clean, noise_sigma, &mut rng.fork(NOISE_STREAM))?;
        Ok(Self {
            name,
            truth,
            operator,
            observed,
            noise_sigma,
        })
    }

    pub fn initial(&self) -> Result<Signal, Failure> {
        Ok(self.operator.adjoint(&self.observed)?)
    }
}

pub fn build_gs(kernel_sigma: f64, weight: f64, shape: &[usize]) -> Result<GsDenoiser, Failure> {
    let smoother = GaussianFilter::new(kernel_sigma)?.operator(shape)?;
    Ok(GsDenoiser::new(smoother, weight)?)
}

pub fn build_prior(spec: &DenoiserSpec, dim: usize) -> Result<Option<GmmPrior>, Failure> {
    let prior = match spec {
        DenoiserSpec::GaussianPrior { gamma } => {
            if !(*gamma > 0.0) {
                return Err(Failure::usage(format!("gamma must be positive, got {gamma}")));
            }
            GmmPrior::gaussian(vec![0.0; dim], gamma * gamma)?
        }
        DenoiserSpec::Gmm {
            path,
            weights,
            means,
            variances,
        } => match (path, weights, means, variances) {
            (Some(p), None, None, None) => GmmPrior::load(p)?,
            (None, Some(w), Some(m), Some(v)) => GmmPrior::new(w.clone(), m.clone(), v.clone())?,
            _ => {
                return Err(Failure::usage(
                    "gmm denoiser needs either path or all of weights, means and variances",
                ))
            }
        },
        _ => return Ok(None),
    };
    if prior.dim() != dim {
        return Err(Failure::usage(format!(
            "prior dimension {} does not match signal size {dim}",
            prior.dim()
        )));
    }
    Ok(Some(prior))
}

pub fn build_denoiser(spec: &DenoiserSpec, shape: &[usize]) -> Result<Box<dyn Denoiser>, Failure> {
    let dim = shape.iter().product();
    let d: Box<dyn Denoiser> = match spec {
        DenoiserSpec::Tv { c } => Box::new(TvDenoiser::new(*c)),
        DenoiserSpec::Gaussian { kernel_sigma } => Box::new(GaussianFilter::new(*kernel_sigma)?),
        DenoiserSpec::Nlm {
            patch_radius,
            window_radius,
            h,
        } => Box::new(Nlm::new(*patch_radius, *window_radius, *h)?),
        DenoiserSpec::Wavelet { levels } => Box::new(WaveletDenoiser { levels: *levels }),
        DenoiserSpec::Gs { kernel_sigma, weight } => Box::new(build_gs(*kernel_sigma, *weight, shape)?),
        DenoiserSpec::LinearSpectral {
            lambda,
            transform,
            levels,
            rule,
        } => {
            let transform = match transform {
                TransformSpec::Dct => SpectralTransform::Dct,
                TransformSpec::Haar => SpectralTransform::Haar {
                    levels: levels.unwrap_or_else(|| max_haar_levels(shape).min(4)),
                },
            };
            let rule = match rule {
                RuleSpec::Uniform => ShrinkRule::Uniform,
                RuleSpec::Graded => ShrinkRule::Graded,
            };
            Box::new(LinearSpectral::new(transform, rule, *lambda)?)
        }
        DenoiserSpec::GaussianPrior { .. } | DenoiserSpec::Gmm { .. } => {
            Box::new(MmseGmm::new(build_prior(spec, dim)?.expect("prior spec")))
        }
        DenoiserSpec::ScaledIdentity { alpha } => Box::new(ScaledIdentity { alpha: *alpha }),
    };
    Ok(d)
}
