//! Experiment configuration, its TOML form, and the `η` schedule.

use std::path::{Path, PathBuf};

use abcs::objective::{DataTerm, Evaluation};
use abcs::AbcsConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// `η̂` used when there is no noise (the value the Gaussian schedule gives at σ = 0.1).
pub const NOISELESS_SIGMA: f64 = 0.1;
/// Corrupted fractions with a tabulated `η̂`.
pub const IMPULSIVE_SCHEDULE: [(f64, f64); 2] = [(0.1, 0.08), (0.2, 0.05)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseModel {
    None,
    /// Additive white Gaussian noise; `sigma` in 8-bit gray levels.
    Gaussian { sigma: f64 },
    /// A fraction `fraction` of the measurements replaced by outliers.
    Impulsive { fraction: f64 },
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma,
            _ => 0.0,
        }
    }

    pub fn impulse_fraction(&self) -> f64 {
        match *self {
            NoiseModel::Impulsive { fraction } => fraction,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    SubsampledHadamard,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorFormat {
    Text,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub solver: u64,
    pub measurement: u64,
    pub noise: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            solver: 1,
            measurement: 2,
            noise: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub image: PathBuf,
    pub output_dir: PathBuf,
    /// Measurements written by `abcs sense`; when set, sensing and noise are skipped.
    pub measurements: Option<PathBuf>,
    pub measurement_fraction: f64,
    pub ensemble: EnsembleKind,
    pub noise: NoiseModel,
    pub seeds: Seeds,
    pub patch_side: usize,
    /// Number of atoms `k`; `2n` when unset.
    pub atoms: Option<usize>,
    pub stride: usize,
    /// Overrides the noise schedule.
    pub eta_hat: Option<f64>,
    pub gamma: f64,
    pub kappa: f64,
    pub c: f64,
    pub data_term: DataTerm,
    pub tol: f64,
    pub max_iter: usize,
    /// Omit wall-clock time from the results record so reruns are byte-identical.
    pub deterministic: bool,
    pub evaluation: Evaluation,
    pub operator_format: OperatorFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            image: PathBuf::new(),
            output_dir: PathBuf::from("abcs-out"),
            measurements: None,
            measurement_fraction: 0.25,
            ensemble: EnsembleKind::SubsampledHadamard,
            noise: NoiseModel::None,
            seeds: Seeds::default(),
            patch_side: 7,
            atoms: None,
            stride: 1,
            eta_hat: None,
            gamma: 20.0,
            kappa: 1000.0,
            c: 1e4,
            data_term: DataTerm::SquaredL2,
            tol: 1e-6,
            max_iter: 500,
            deterministic: false,
            evaluation: Evaluation::Parallel,
            operator_format: OperatorFormat::Text,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.unwrap_or(2 * self.patch_dim())
    }

    /// `M` for an image of `num_pixels` pixels, at least one.
    pub fn measurement_count(&self, num_pixels: usize) -> usize {
        ((self.measurement_fraction * num_pixels as f64).round() as usize).clamp(1, num_pixels)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.measurement_fraction > 0.0 && self.measurement_fraction <= 1.0) {
            return bad(format!("measurement_fraction must lie in (0, 1], got {}", self.measurement_fraction));
        }
        if self.patch_side == 0 || self.stride == 0 {
            return bad("patch_side and stride must be positive".into());
        }
        if self.atom_count() < self.patch_dim() {
            return bad(format!("atoms ({}) must be at least n = {}", self.atom_count(), self.patch_dim()));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        match self.noise {
            NoiseModel::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return bad(format!("noise sigma must be finite and >= 0, got {sigma}"));
            }
            NoiseModel::Impulsive { fraction } if !(0.0..=1.0).contains(&fraction) => {
                return bad(format!("impulse fraction must lie in [0, 1], got {fraction}"));
            }
            _ => {}
        }
        if let Some(e) = self.eta_hat {
            if !(e >= 0.0 && e.is_finite()) {
                return bad(format!("eta_hat must be finite and >= 0, got {e}"));
            }
        }
        self.abcs_config(1.0).validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Solver hyperparameters for a given `η`.
    pub fn abcs_config(&self, eta: f64) -> AbcsConfig<f64> {
        AbcsConfig {
            gamma: self.gamma,
            kappa: self.kappa,
            eta,
            eta_hat: self.eta_hat,
            c: self.c,
            data_term: self.data_term,
            evaluation: self.evaluation,
        }
    }
}

/// `η̂` from the configuration: the explicit value if given, otherwise the
/// noise schedule (`1000/σ` for Gaussian noise, tabulated for impulsive noise).
pub fn resolve_eta_hat(cfg: &ExperimentConfig) -> CliResult<f64> {
    if let Some(e) = cfg.eta_hat {
        return Ok(e);
    }
    match cfg.noise {
        NoiseModel::None => Ok(1000.0 / NOISELESS_SIGMA),
        NoiseModel::Gaussian { sigma: 0.0 } => Ok(1000.0 / NOISELESS_SIGMA),
        NoiseModel::Gaussian { sigma } => Ok(1000.0 / sigma),
        NoiseModel::Impulsive { fraction } => IMPULSIVE_SCHEDULE
            .iter()
            .find(|(d, _)| (d - fraction).abs() < 1e-9)
            .map(|&(_, e)| e)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "no eta_hat schedule for impulse fraction {fraction}; set eta_hat explicitly"
                ))
            }),
    }
}

/// `(η̂, η)` for an image of `num_pixels` pixels, `η = η̂ (k / (L n))²`, `L = √N / 256`.
pub fn resolve_eta(cfg: &ExperimentConfig, num_pixels: usize) -> CliResult<(f64, f64)> {
    let eta_hat = resolve_eta_hat(cfg)?;
    let eta = AbcsConfig::<f64>::eta_from_hat(eta_hat, cfg.patch_dim(), cfg.atom_count(), num_pixels);
    Ok((eta_hat, eta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_schedule_at_unit_scale() {
        let cfg = ExperimentConfig {
            noise: NoiseModel::Gaussian { sigma: 5.1 },
            ..Default::default()
        };
        let (eta_hat, eta) = resolve_eta(&cfg, 256 * 256).unwrap();
        assert!((eta_hat - 1000.0 / 5.1).abs() < 1e-12);
        // L = 1 and k/n = 2
        assert!((eta - 4000.0 / 5.1).abs() < 1e-9);
        assert!((eta - 784.3137254901961).abs() < 1e-9);
    }

    #[test]
    fn size_normalization_scales_eta() {
        let cfg = ExperimentConfig {
            eta_hat: Some(3.0),
            ..Default::default()
        };
        let (_, small) = resolve_eta(&cfg, 256 * 256).unwrap();
        let (_, large) = resolve_eta(&cfg, 512 * 512).unwrap();
        assert!((large - small / 4.0).abs() < 1e-12);
    }

    #[test]
    fn impulsive_and_noiseless_schedules() {
        let mut cfg = ExperimentConfig {
            noise: NoiseModel::Impulsive { fraction: 0.1 },
            ..Default::default()
        };
        assert_eq!(resolve_eta_hat(&cfg).unwrap(), 0.08);
        cfg.noise = NoiseModel::Impulsive { fraction: 0.2 };
        assert_eq!(resolve_eta_hat(&cfg).unwrap(), 0.05);
        cfg.noise = NoiseModel::Impulsive { fraction: 0.3 };
        assert!(matches!(resolve_eta_hat(&cfg), Err(CliError::Config(_))));
        cfg.noise = NoiseModel::Gaussian { sigma: 0.0 };
        assert_eq!(resolve_eta_hat(&cfg).unwrap(), 1000.0 / 0.1);
        cfg.noise = NoiseModel::None;
        assert_eq!(resolve_eta_hat(&cfg).unwrap(), 1000.0 / 0.1);
        cfg.eta_hat = Some(7.0);
        assert_eq!(resolve_eta_hat(&cfg).unwrap(), 7.0);
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
            image = "girl.pgm"
            measurement_fraction = 0.1
            data_term = "sparse-g"
            [noise]
            kind = "impulsive"
            fraction = 0.2
            [seeds]
            solver = 9
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.noise, NoiseModel::Impulsive { fraction: 0.2 });
        assert_eq!(cfg.seeds.solver, 9);
        assert_eq!(cfg.seeds.noise, Seeds::default().noise);
        assert_eq!(cfg.data_term, DataTerm::SparseG);
        assert_eq!(cfg.atom_count(), 98);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml_str("etta = 3").is_err());
        let cfg = ExperimentConfig {
            measurement_fraction: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            atoms: Some(10),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn measurement_count_rounds() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.measurement_count(64 * 64), 1024);
        let cfg = ExperimentConfig {
            measurement_fraction: 0.1,
            ..Default::default()
        };
        assert_eq!(cfg.measurement_count(256 * 256), 6554);
    }
}
