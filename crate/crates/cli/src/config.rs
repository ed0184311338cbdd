//! Run configuration: one TOML document per run, overridden field by field
//! from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use potts_magic::experiments::{AlphaFit, Symmetrization};
use potts_magic::meanfield::MeanFieldConfig;
use potts_magic::mera::MeraManaParams;
use potts_magic::mps::DmrgConfig;

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Subcommand this document is meant for; checked when present.
    pub command: Option<String>,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Whether missing ground states may be computed on the fly.
    pub allow_compute: Option<bool>,
    pub threads: Option<usize>,
    pub dmrg: DmrgConfig,
    pub groundstate: GroundStateSection,
    pub subsystem: ScanSection,
    pub twopoint: ScanSection,
    pub toy: ToySection,
    pub mera: MeraSection,
    pub meanfield: MeanFieldSection,
    pub selftest: SelfTestSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateSection {
    pub n: usize,
    pub theta: f64,
    pub lambda: f64,
    /// Longitudinal-field sweep; empty skips it.
    pub lambdas: Vec<f64>,
}

impl Default for GroundStateSection {
    fn default() -> Self {
        GroundStateSection { n: 16, theta: std::f64::consts::FRAC_PI_4, lambda: 0.0, lambdas: vec![] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub n: usize,
    pub thetas: Vec<f64>,
    pub ells: Vec<usize>,
    pub dxs: Vec<usize>,
    pub base_site: Option<usize>,
    pub block: usize,
    pub symmetrization: Symmetrization,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            n: 32,
            thetas: uniform_thetas(11),
            ells: vec![1, 2, 3, 4, 5, 6],
            dxs: (1..=16).collect(),
            base_site: None,
            block: 1,
            symmetrization: Symmetrization::Cat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToySection {
    pub alphas: Vec<f64>,
    /// Diagonal of `ρ₁` in the clock basis; the maximally mixed state by default.
    pub rho1_diag: [f64; 3],
    /// Bisection width for the zero-mana edge.
    pub width: f64,
    /// Optional `α(δx)` profile evaluation.
    pub profile: Option<ToyProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyProfile {
    pub theta: f64,
    pub dxs: Vec<f64>,
    pub fit: AlphaFit,
}

impl Default for ToySection {
    fn default() -> Self {
        ToySection {
            alphas: (0..=100).map(|i| i as f64 / 100.0).collect(),
            rho1_diag: [1.0 / 3.0; 3],
            width: 1e-12,
            profile: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeraSection {
    pub params: MeraManaParams,
    /// Largest layer index tabulated from the counting formulas.
    pub k_max: usize,
    /// Extra subsystem sizes for the continuous prediction curve.
    pub ells: Vec<f64>,
    /// θ grid for the quasi-MERA curve; used only when `params.nu` is set.
    pub thetas: Vec<f64>,
}

impl Default for MeraSection {
    fn default() -> Self {
        MeraSection { params: MeraManaParams::new(0.4, 0.3), k_max: 10, ells: vec![], thetas: uniform_thetas(51) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFieldSection {
    pub qs: Vec<usize>,
    pub k: usize,
    pub thetas: Vec<f64>,
    pub alpha_resolution: f64,
    pub refine_tol: f64,
    /// θ step of the coarse transition search.
    pub transition_step: f64,
}

impl Default for MeanFieldSection {
    fn default() -> Self {
        let base = MeanFieldConfig::default();
        MeanFieldSection {
            qs: vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37],
            k: base.k,
            thetas: base.thetas,
            alpha_resolution: base.alpha_resolution,
            refine_tol: base.refine_tol,
            transition_step: 1e-3,
        }
    }
}

impl MeanFieldSection {
    pub fn config_for(&self, q: usize) -> MeanFieldConfig {
        MeanFieldConfig {
            q,
            k: self.k,
            thetas: self.thetas.clone(),
            alpha_resolution: self.alpha_resolution,
            refine_tol: self.refine_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfTestSection {
    pub random_states: usize,
}

impl Default for SelfTestSection {
    fn default() -> Self {
        SelfTestSection { random_states: 200 }
    }
}

/// `count` evenly spaced points on `[0, π/2]`.
pub fn uniform_thetas(count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..count).map(|i| i as f64 * std::f64::consts::FRAC_PI_2 / (count - 1) as f64).collect(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn check_command(&self, name: &str) -> Result<(), CliError> {
        match &self.command {
            Some(c) if c != name => Err(CliError::Validation(format!("config is for `{c}`, not `{name}`"))),
            _ => Ok(()),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
