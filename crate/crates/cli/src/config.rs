//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use pnpkit::sampling::NoiseScale;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Deblur,
    Inpaint,
    Denoise,
    Sample,
    Sweep,
    Diagnose,
    Compare,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<ImageSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denoiser: Option<DenoiserSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotSpec>,
}

/// Either a built-in synthetic image or a `.pgm`/`.ppm`/`.raw` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl ImageSpec {
    pub fn builtin(name: &str) -> Self {
        Self {
            builtin: Some(name.into()),
            ..Self::default()
        }
    }

    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        if let Some(b) = &self.builtin {
            return b.clone();
        }
        self.path
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// Uniform `size × size` box blur with periodic boundaries.
    Blur {
        #[serde(default = "default_blur")]
        size: usize,
    },
    /// Random pixel mask keeping the given fraction.
    Inpaint {
        #[serde(default = "default_keep")]
        keep: f64,
    },
    Identity,
    Diagonal { values: Vec<f64> },
    Dense { rows: Vec<Vec<f64>> },
}

fn default_blur() -> usize {
    9
}

fn default_keep() -> f64 {
    0.5
}

/// Additive Gaussian noise given as an absolute `sigma` or as a percentage of
/// the unit peak.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percent: Option<f64>,
}

impl NoiseSpec {
    pub fn sigma(&self) -> Result<f64, Failure> {
        let s = match (self.sigma, self.percent) {
            (Some(s), None) => s,
            (None, Some(p)) => p / 100.0,
            (None, None) => DEFAULT_NOISE,
            _ => return Err(Failure::usage("noise: give either sigma or percent, not both")),
        };
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Failure::usage(format!("noise level must be nonnegative, got {s}")));
        }
        Ok(s)
    }
}

pub const DEFAULT_NOISE: f64 = 0.03;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformSpec {
    #[default]
    Dct,
    Haar,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSpec {
    #[default]
    Uniform,
    Graded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenoiserSpec {
    Tv {
        #[serde(default = "one")]
        c: f64,
    },
    Gaussian {
        kernel_sigma: f64,
    },
    Nlm {
        #[serde(default = "one_usize")]
        patch_radius: usize,
        #[serde(default = "three")]
        window_radius: usize,
        h: f64,
    },
    Wavelet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<usize>,
    },
    /// Gradient-step denoiser built on a Gaussian smoother.
    Gs {
        #[serde(default = "two")]
        kernel_sigma: f64,
        #[serde(default = "gs_weight")]
        weight: f64,
    },
    LinearSpectral {
        lambda: f64,
        #[serde(default)]
        transform: TransformSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<usize>,
        #[serde(default)]
        rule: RuleSpec,
    },
    /// MMSE denoiser of a zero-mean isotropic Gaussian prior `N(0, γ²I)`.
    GaussianPrior { gamma: f64 },
    /// MMSE denoiser of a Gaussian mixture prior, inline or from a JSON file.
    Gmm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        means: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variances: Option<Vec<f64>>,
    },
    ScaledIdentity { alpha: f64 },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn one_usize() -> usize {
    1
}

fn three() -> usize {
    3
}

fn gs_weight() -> f64 {
    0.9
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    PnpPgd,
    Apgd,
    PnpDrs,
    PnpDrsdiff,
    PnpAdmm,
    GsPnp,
    Hqs,
    RedGd,
    RedPg,
    RedApg,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::PnpPgd => "pnp-pgd",
            Algo::Apgd => "apgd",
            Algo::PnpDrs => "pnp-drs",
            Algo::PnpDrsdiff => "pnp-drsdiff",
            Algo::PnpAdmm => "pnp-admm",
            Algo::GsPnp => "gs-pnp",
            Algo::Hqs => "hqs",
            Algo::RedGd => "red-gd",
            Algo::RedPg => "red-pg",
            Algo::RedApg => "red-apg",
        }
    }

    /// Methods whose convergence is guaranteed under their step conditions.
    pub fn is_provable(&self) -> bool {
        matches!(
            self,
            Algo::PnpPgd | Algo::Apgd | Algo::PnpDrs | Algo::PnpDrsdiff | Algo::GsPnp
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub algo: Algo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Denoiser level; defaults to the noise level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// RED-PG/APG Lipschitz parameter `L > 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub backtracking: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl SolverSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.algo.as_str().into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "one")]
    pub step: f64,
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub rho: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            tol: default_tol(),
            step: 1.0,
            alpha: 0.5,
            rho: 1.0,
        }
    }
}

fn default_max_iter() -> usize {
    300
}

fn default_tol() -> f64 {
    1e-9
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Diagonal of the forward operator.
    #[serde(default = "default_diagonal")]
    pub diagonal: Vec<f64>,
    /// Ground truth; defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
    /// Explicit noise ladder; defaults to `2⁻ᵏ` for `k = 1..levels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// `λ(δ) = c√δ`
    #[serde(default = "half")]
    pub c: f64,
    #[serde(default = "quarter")]
    pub eta: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            diagonal: default_diagonal(),
            truth: None,
            deltas: None,
            levels: default_levels(),
            c: 0.5,
            eta: 0.25,
        }
    }
}

fn default_diagonal() -> Vec<f64> {
    vec![2.0, 1.0, 0.5, 0.25]
}

fn default_levels() -> usize {
    8
}

fn quarter() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// Base point; defaults to the built-in "shapes" image at 16×16.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageSpec>,
    #[serde(default = "tenth")]
    pub sigma: f64,
    #[serde(default = "three")]
    pub probes: usize,
    /// Strong convexity modulus of the data term for the contraction gate.
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default = "hundredth")]
    pub homogeneity_delta: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            image: None,
            sigma: 0.1,
            probes: 3,
            mu: 1.0,
            fd_step: None,
            homogeneity_delta: 0.01,
        }
    }
}

fn tenth() -> f64 {
    0.1
}

fn hundredth() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    /// Signal shape for prior-based denoisers.
    #[serde(default = "default_shape")]
    pub shape: Vec<usize>,
    #[serde(default = "thousandth")]
    pub delta: f64,
    #[serde(default = "half")]
    pub sigma: f64,
    #[serde(default = "quarter")]
    pub sigma_w: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "one_usize")]
    pub thin: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub noise: NoiseScale,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            shape: default_shape(),
            delta: 1e-3,
            sigma: 0.5,
            sigma_w: 0.25,
            n_samples: default_samples(),
            thin: 1,
            burn_in: None,
            noise: NoiseScale::default(),
        }
    }
}

fn default_shape() -> Vec<usize> {
    vec![16]
}

fn thousandth() -> f64 {
    1e-3
}

fn default_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    pub traces: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::usage(format!("invalid config: {e}")))
    }

    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.check_files()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for img in &mut self.images {
            if let Some(p) = &mut img.path {
                fix(p);
            }
        }
        if let Some(ProbeSpec { image: Some(img), .. }) = &mut self.probe {
            if let Some(p) = &mut img.path {
                fix(p);
            }
        }
        if let Some(DenoiserSpec::Gmm { path: Some(p), .. }) = &mut self.denoiser {
            fix(p);
        }
        if let Some(plot) = &mut self.plot {
            plot.traces.iter_mut().for_each(fix);
        }
        if let Some(out) = &mut self.output {
            fix(out);
        }
    }

    fn check_files(&self) -> Result<(), Failure> {
        let mut files: Vec<&PathBuf> = self.images.iter().filter_map(|i| i.path.as_ref()).collect();
        if let Some(ProbeSpec { image: Some(img), .. }) = &self.probe {
            files.extend(img.path.as_ref());
        }
        if let Some(DenoiserSpec::Gmm { path: Some(p), .. }) = &self.denoiser {
            files.push(p);
        }
        if let Some(plot) = &self.plot {
            files.extend(&plot.traces);
        }
        match files.into_iter().find(|p| !p.is_file()) {
            Some(p) => Err(Failure::usage(format!("referenced file {} does not exist", p.display()))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn images_or_default(&self) -> Vec<ImageSpec> {
        if self.images.is_empty() {
            vec![ImageSpec::builtin("shapes")]
        } else {
            self.images.clone()
        }
    }

    pub fn noise_sigma(&self) -> Result<f64, Failure> {
        self.noise.unwrap_or_default().sigma()
    }

    /// Checks that the optional `task` field agrees with the command.
    pub fn expect_task(&self, allowed: &[Task], command: &str) -> Result<(), Failure> {
        match self.task {
            Some(t) if !allowed.contains(&t) => Err(Failure::usage(format!(
                "task {t:?} cannot be run by the {command} command"
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse(r#"{"seeed": 1}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"operator": {"kind": "blur", "sise": 9}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"solver": {"algo": "pnp-pgd", "stpe": 1}}"#).is_err());
    }

    #[test]
    fn invalid_algo_lists_valid_names() {
        let err = ExperimentConfig::parse(r#"{"solver": {"algo": "magic"}}"#).unwrap_err();
        assert!(err.message.contains("pnp-pgd") && err.message.contains("gs-pnp"));
    }

    #[test]
    fn config_roundtrips() {
        let text = r#"{
            "task": "deblur",
            "images": [{"builtin": "bars", "size": 32}],
            "operator": {"kind": "blur", "size": 5},
            "noise": {"percent": 3},
            "denoiser": {"kind": "linear_spectral", "lambda": 0.1, "rule": "graded"},
            "solvers": [{"algo": "pnp-pgd", "step": 0.5}, {"algo": "hqs", "sigma_start": 0.2}],
            "settings": {"max_iter": 10},
            "seed": 4,
            "sampler": {"noise": "sqrt_delta"}
        }"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(cfg.noise_sigma().unwrap(), 0.03);
    }

    #[test]
    fn noise_needs_one_form() {
        let both = NoiseSpec {
            sigma: Some(0.1),
            percent: Some(3.0),
        };
        assert!(both.sigma().is_err());
        assert_eq!(NoiseSpec::default().sigma().unwrap(), DEFAULT_NOISE);
    }
}
