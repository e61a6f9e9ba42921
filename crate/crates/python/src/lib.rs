use pnpkit_core::denoisers::{
    estimate_residual_lipschitz, Denoiser, GaussianFilter, GsDenoiser, LinearSpectral, MmseGmm, Nlm,
    ScaledIdentity, TvDenoiser, WaveletDenoiser,
};
use pnpkit_core::experiments::{builtin_image as builtin, dyadic_deltas, regularization_sweep as sweep, SweepConfig};
use pnpkit_core::metrics::{add_gaussian_noise, psnr as psnr_db};
use pnpkit_core::operators::{make_blur, make_mask, uniform_kernel, LinearOp};
use pnpkit_core::proximal::{prox_tv as tv_prox, soft_threshold, LeastSquares};
use pnpkit_core::sampling::{run_pnp_ula, UlaConfig};
use pnpkit_core::score_oracle::GmmPrior;
use pnpkit_core::solvers::{
    run_admm, run_apgd, run_drs, run_pgd, run_red_apg, run_red_gd, run_red_pg, RedParams, RegSlot, SolverConfig,
    SolverOutput,
};
use pnpkit_core::{Error, Rng, Signal, Trace};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(pnpkit, DivergedError, PyRuntimeError);

const ALGOS: [&str; 8] = [
    "pnp-pgd", "apgd", "pnp-drs", "pnp-drsdiff", "pnp-admm", "red-gd", "red-pg", "red-apg",
];

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Diverged { .. } => DivergedError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Real-valued signal: flat row-major data plus a shape of 1 to 3 dimensions.
#[pyclass(name = "Signal", module = "pnpkit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySignal {
    inner: Signal,
}

#[pymethods]
impl PySignal {
    #[new]
    #[pyo3(signature = (data, shape=None))]
    fn new(data: Vec<f64>, shape: Option<Vec<usize>>) -> PyResult<Self> {
        let shape = shape.unwrap_or_else(|| vec![data.len()]);
        Ok(Self {
            inner: Signal::new(data, shape).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn zeros(shape: Vec<usize>) -> Self {
        Self {
            inner: Signal::zeros(&shape),
        }
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn distance(&self, other: &PySignal) -> PyResult<f64> {
        self.inner.check_same_shape(&other.inner).map_err(to_py)?;
        Ok(self.inner.distance(&other.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Signal(shape={:?})", self.inner.shape())
    }
}

fn wrap(inner: Signal) -> PySignal {
    PySignal { inner }
}

/// Linear forward operator.
#[pyclass(name = "LinearOp", module = "pnpkit", frozen, skip_from_py_object)]
struct PyLinearOp {
    inner: LinearOp,
}

#[pymethods]
impl PyLinearOp {
    /// Uniform `size × size` box blur with periodic boundaries.
    #[staticmethod]
    fn blur(size: usize, shape: Vec<usize>) -> PyResult<Self> {
        let k = uniform_kernel(size).map_err(to_py)?;
        Ok(Self {
            inner: make_blur(&k, &shape).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn identity(shape: Vec<usize>) -> Self {
        Self {
            inner: LinearOp::identity(&shape),
        }
    }

    #[staticmethod]
    fn diagonal(values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: LinearOp::diagonal(Signal::from_vec(values).map_err(to_py)?),
        })
    }

    /// Dense matrix given as a list of rows.
    #[staticmethod]
    fn dense(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("rows must be nonempty and of equal length"));
        }
        let s = Signal::new(rows.concat(), vec![m, n]).map_err(to_py)?;
        Ok(Self {
            inner: LinearOp::dense_from_signal(&s).map_err(to_py)?,
        })
    }

    /// Inpainting mask; nonzero entries are observed.
    #[staticmethod]
    fn mask(mask: &PySignal) -> Self {
        Self {
            inner: make_mask(&mask.inner),
        }
    }

    fn apply(&self, x: &PySignal) -> PyResult<PySignal> {
        self.inner.apply(&x.inner).map(wrap).map_err(to_py)
    }

    fn adjoint(&self, y: &PySignal) -> PyResult<PySignal> {
        self.inner.adjoint(&y.inner).map(wrap).map_err(to_py)
    }

    fn spectral_norm(&self) -> f64 {
        self.inner.spectral_norm()
    }

    #[getter]
    fn in_shape(&self) -> Vec<usize> {
        self.inner.in_shape().to_vec()
    }

    #[getter]
    fn out_shape(&self) -> Vec<usize> {
        self.inner.out_shape().to_vec()
    }
}

/// Denoiser `D_σ`.
#[pyclass(name = "Denoiser", module = "pnpkit", frozen, skip_from_py_object)]
struct PyDenoiser {
    inner: Box<dyn Denoiser>,
}

fn den(d: impl Denoiser + 'static) -> PyDenoiser {
    PyDenoiser { inner: Box::new(d) }
}

#[pymethods]
impl PyDenoiser {
    #[staticmethod]
    #[pyo3(signature = (c=1.0))]
    fn tv(c: f64) -> Self {
        den(TvDenoiser::new(c))
    }

    #[staticmethod]
    fn gaussian(kernel_sigma: f64) -> PyResult<Self> {
        Ok(den(GaussianFilter::new(kernel_sigma).map_err(to_py)?))
    }

    #[staticmethod]
    #[pyo3(signature = (h, patch_radius=1, window_radius=3))]
    fn nlm(h: f64, patch_radius: usize, window_radius: usize) -> PyResult<Self> {
        Ok(den(Nlm::new(patch_radius, window_radius, h).map_err(to_py)?))
    }

    #[staticmethod]
    #[pyo3(signature = (levels=None))]
    fn wavelet(levels: Option<usize>) -> Self {
        den(WaveletDenoiser { levels })
    }

    /// Gradient-step denoiser on a Gaussian smoother for signals of `shape`.
    #[staticmethod]
    #[pyo3(signature = (shape, kernel_sigma=2.0, weight=0.9))]
    fn gradient_step(shape: Vec<usize>, kernel_sigma: f64, weight: f64) -> PyResult<Self> {
        let smoother = GaussianFilter::new(kernel_sigma)
            .and_then(|g| g.operator(&shape))
            .map_err(to_py)?;
        Ok(den(GsDenoiser::new(smoother, weight).map_err(to_py)?))
    }

    /// `x/(1 + λ)` in the DCT basis.
    #[staticmethod]
    fn linear_spectral(lam: f64) -> PyResult<Self> {
        Ok(den(LinearSpectral::uniform(lam).map_err(to_py)?))
    }

    /// MMSE denoiser of the prior `N(0, γ²I)` in `dim` dimensions.
    #[staticmethod]
    fn gaussian_prior(gamma: f64, dim: usize) -> PyResult<Self> {
        let prior = GmmPrior::gaussian(vec![0.0; dim], gamma * gamma).map_err(to_py)?;
        Ok(den(MmseGmm::new(prior)))
    }

    #[staticmethod]
    fn scaled_identity(alpha: f64) -> Self {
        den(ScaledIdentity { alpha })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn denoise(&self, py: Python<'_>, x: &PySignal, sigma: f64) -> PyResult<PySignal> {
        py.detach(|| self.inner.denoise(&x.inner, sigma))
            .map(wrap)
            .map_err(to_py)
    }
}

/// Solver output with its per-iteration trace.
#[pyclass(name = "SolverResult", module = "pnpkit", frozen, skip_from_py_object)]
struct PySolverResult {
    #[pyo3(get)]
    x: Py<PySignal>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    stop_reason: String,
    trace: Trace,
}

#[pymethods]
impl PySolverResult {
    #[getter]
    fn objective(&self) -> Vec<f64> {
        self.trace.objectives()
    }

    #[getter]
    fn step_residual(&self) -> Vec<f64> {
        self.trace.step_residuals()
    }

    #[getter]
    fn fp_residual(&self) -> Vec<f64> {
        self.trace.fp_residuals()
    }

    #[getter]
    fn psnr(&self) -> Vec<f64> {
        self.trace.psnrs()
    }

    fn trace_csv(&self) -> String {
        self.trace.to_csv()
    }
}

#[pyfunction]
#[pyo3(signature = (name, size=64))]
fn builtin_image(name: &str, size: usize) -> PyResult<PySignal> {
    builtin(name, size).map(wrap).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (a, b, peak=1.0))]
fn psnr(a: &PySignal, b: &PySignal, peak: f64) -> PyResult<f64> {
    psnr_db(&a.inner, &b.inner, peak).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, sigma, seed=0))]
fn add_noise(x: &PySignal, sigma: f64, seed: u64) -> PyResult<PySignal> {
    add_gaussian_noise(&x.inner, sigma, &mut Rng::new(seed))
        .map(wrap)
        .map_err(to_py)
}

#[pyfunction]
fn prox_l1(v: &PySignal, tau: f64) -> PySignal {
    wrap(soft_threshold(&v.inner, tau))
}

#[pyfunction]
#[pyo3(signature = (v, lam, tol=1e-8, max_iter=100_000))]
fn prox_tv(py: Python<'_>, v: &PySignal, lam: f64, tol: f64, max_iter: usize) -> PyResult<PySignal> {
    py.detach(|| tv_prox(&v.inner, lam, tol, max_iter))
        .map(wrap)
        .map_err(to_py)
}

/// Runs a plug-and-play or RED solver on `½‖Kx − y‖²` with the given denoiser.
#[pyfunction]
#[pyo3(signature = (
    algo, op, y, denoiser, sigma, step=1.0, max_iter=300, tol=1e-9, alpha=0.5, rho=1.0, lam=1.0,
    lipschitz=2.0, reference=None
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    algo: &str,
    op: &PyLinearOp,
    y: &PySignal,
    denoiser: &PyDenoiser,
    sigma: f64,
    step: f64,
    max_iter: usize,
    tol: f64,
    alpha: f64,
    rho: f64,
    lam: f64,
    lipschitz: f64,
    reference: Option<&PySignal>,
) -> PyResult<PySolverResult> {
    if !ALGOS.contains(&algo) {
        return Err(PyValueError::new_err(format!(
            "unknown algorithm {algo:?}; expected one of {}",
            ALGOS.join(", ")
        )));
    }
    let mut cfg = SolverConfig::default()
        .with_step(step)
        .with_max_iter(max_iter)
        .with_tol(tol)
        .with_alpha(alpha)
        .with_rho(rho);
    if let Some(r) = reference {
        cfg = cfg.with_reference(r.inner.clone());
    }
    let (k, y, d) = (&op.inner, &y.inner, denoiser.inner.as_ref());
    let run = || -> pnpkit_core::Result<SolverOutput> {
        let f = LeastSquares::new(k.clone(), y.clone())?;
        let x0 = k.adjoint(y)?;
        let slot = RegSlot::denoiser(d, sigma);
        let red = || RedParams::new(lam, sigma);
        match algo {
            "pnp-pgd" => run_pgd(&f, slot, &cfg, &x0),
            "apgd" => run_apgd(&f, slot, &cfg, &x0, None),
            "pnp-drs" => run_drs(slot, RegSlot::Prox(&f), &cfg, &x0),
            "pnp-drsdiff" => run_drs(RegSlot::Prox(&f), slot, &cfg, &x0),
            "pnp-admm" => run_admm(k, y, slot, &cfg, Some(&x0), None, None),
            "red-gd" => run_red_gd(k, y, d, red()?, &cfg, Some(&x0)),
            "red-pg" => run_red_pg(k, y, d, red()?, lipschitz, &cfg, Some(&x0)),
            _ => run_red_apg(k, y, d, red()?, lipschitz, &cfg, Some(&x0)),
        }
    };
    let out = py.detach(run).map_err(to_py)?;
    Ok(PySolverResult {
        x: Py::new(py, wrap(out.x))?,
        iterations: out.iterations,
        stop_reason: out.stop.as_str().to_string(),
        trace: out.trace,
    })
}

/// Largest Jacobian norm of `D − id` over probes around `base`.
#[pyfunction]
#[pyo3(signature = (denoiser, base, sigma, probes=3, seed=0))]
fn residual_lipschitz(
    py: Python<'_>,
    denoiser: &PyDenoiser,
    base: &PySignal,
    sigma: f64,
    probes: usize,
    seed: u64,
) -> PyResult<f64> {
    py.detach(|| {
        estimate_residual_lipschitz(
            denoiser.inner.as_ref(),
            &base.inner,
            sigma,
            probes,
            None,
            &mut Rng::new(seed),
        )
    })
    .map(|e| e.value)
    .map_err(to_py)
}

/// PnP-ULA chain; returns `(mean, variance, ess)`.
#[pyfunction]
#[pyo3(signature = (op, y, denoiser, delta, sigma, sigma_w, n_samples, thin=1, burn_in=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn sample_ula(
    py: Python<'_>,
    op: &PyLinearOp,
    y: &PySignal,
    denoiser: &PyDenoiser,
    delta: f64,
    sigma: f64,
    sigma_w: f64,
    n_samples: usize,
    thin: usize,
    burn_in: Option<usize>,
    seed: u64,
) -> PyResult<(PySignal, PySignal, f64)> {
    let cfg = UlaConfig {
        delta,
        sigma,
        sigma_w,
        burn_in,
        n_samples,
        thin,
        seed,
        ..UlaConfig::default()
    };
    let out = py
        .detach(|| run_pnp_ula(&op.inner, &y.inner, denoiser.inner.as_ref(), &cfg, None))
        .map_err(to_py)?;
    Ok((wrap(out.stats.mean), wrap(out.stats.variance), out.stats.ess))
}

/// Error against the minimum-norm solution along the ladder `δ_k = 2⁻ᵏ` with
/// `λ = c√δ` and `D_λ(x) = x/(1 + λ)`; returns `(δ, λ, error)` rows.
#[pyfunction]
#[pyo3(signature = (diagonal, truth=None, levels=8, c=0.5, eta=0.25, seed=0))]
fn regularization_sweep(
    diagonal: Vec<f64>,
    truth: Option<Vec<f64>>,
    levels: usize,
    c: f64,
    eta: f64,
    seed: u64,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let truth = truth.unwrap_or_else(|| vec![1.0; diagonal.len()]);
    let k = LinearOp::diagonal(Signal::from_vec(diagonal).map_err(to_py)?);
    let x = Signal::from_vec(truth).map_err(to_py)?;
    let cfg = SweepConfig {
        deltas: dyadic_deltas(levels),
        c,
        eta,
        seed,
        ..SweepConfig::default()
    };
    let family = LinearSpectral::uniform(1.0).map_err(to_py)?;
    let rows = sweep(&k, &x, &family, &cfg).map_err(to_py)?;
    Ok(rows.iter().map(|r| (r.delta, r.lambda, r.error)).collect())
}

#[pymodule]
#[pyo3(name = "pnpkit")]
fn pnpkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySignal>()?;
    m.add_class::<PyLinearOp>()?;
    m.add_class::<PyDenoiser>()?;
    m.add_class::<PySolverResult>()?;
    m.add("DivergedError", m.py().get_type::<DivergedError>())?;
    m.add_function(wrap_pyfunction!(builtin_image, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(prox_l1, m)?)?;
    m.add_function(wrap_pyfunction!(prox_tv, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(residual_lipschitz, m)?)?;
    m.add_function(wrap_pyfunction!(sample_ula, m)?)?;
    m.add_function(wrap_pyfunction!(regularization_sweep, m)?)?;
    Ok(())
}
