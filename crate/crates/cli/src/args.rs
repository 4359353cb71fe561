//! Command-line overrides of [`ExperimentConfig`]; every field has a flag.

use std::path::PathBuf;

use abcs::objective::{DataTerm, Evaluation};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;

use crate::config::{EnsembleKind, ExperimentConfig, NoiseModel, OperatorFormat};
use crate::error::{CliError, CliResult};
use crate::record::config_from_record;

/// Parses a kebab-case enum through its serde representation.
fn parse_kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    None,
    Gaussian,
    Impulsive,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reuse the configuration echoed in a results record.
    #[arg(long, conflicts_with = "config")]
    pub from_record: Option<PathBuf>,
    /// 8-bit grayscale reference image (PGM or PNG).
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
    /// Measurements written by `abcs sense`.
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    /// M/N in (0, 1].
    #[arg(long)]
    pub measurement_fraction: Option<f64>,
    #[arg(long, value_parser = parse_kebab::<EnsembleKind>)]
    pub ensemble: Option<EnsembleKind>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseKind>,
    /// Gaussian noise level in gray levels (implies --noise gaussian).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Fraction of corrupted measurements (implies --noise impulsive).
    #[arg(long)]
    pub impulse_fraction: Option<f64>,
    #[arg(long)]
    pub solver_seed: Option<u64>,
    #[arg(long)]
    pub measurement_seed: Option<u64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    #[arg(long)]
    pub patch_side: Option<usize>,
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub eta_hat: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// squared-l2 or sparse-g.
    #[arg(long, value_parser = parse_kebab::<DataTerm>)]
    pub data_term: Option<DataTerm>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Leave wall-clock time out of the results record.
    #[arg(long)]
    pub deterministic: bool,
    /// sequential or parallel.
    #[arg(long, value_parser = parse_kebab::<Evaluation>)]
    pub evaluation: Option<Evaluation>,
    /// text or binary.
    #[arg(long, value_parser = parse_kebab::<OperatorFormat>)]
    pub operator_format: Option<OperatorFormat>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = if let Some(path) = &self.from_record {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            config_from_record(&text)?
        } else if let Some(path) = &self.config {
            ExperimentConfig::load(path)?
        } else {
            ExperimentConfig::default()
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) -> CliResult<()> {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            image => cfg.image,
            output_dir => cfg.output_dir,
            measurement_fraction => cfg.measurement_fraction,
            ensemble => cfg.ensemble,
            solver_seed => cfg.seeds.solver,
            measurement_seed => cfg.seeds.measurement,
            noise_seed => cfg.seeds.noise,
            patch_side => cfg.patch_side,
            stride => cfg.stride,
            gamma => cfg.gamma,
            kappa => cfg.kappa,
            c => cfg.c,
            data_term => cfg.data_term,
            tol => cfg.tol,
            max_iter => cfg.max_iter,
            evaluation => cfg.evaluation,
            operator_format => cfg.operator_format,
        }
        if self.measurements.is_some() {
            cfg.measurements = self.measurements.clone();
        }
        if self.atoms.is_some() {
            cfg.atoms = self.atoms;
        }
        if self.eta_hat.is_some() {
            cfg.eta_hat = self.eta_hat;
        }
        if self.deterministic {
            cfg.deterministic = true;
        }
        cfg.noise = self.noise_model(cfg.noise)?;
        Ok(())
    }

    fn noise_model(&self, current: NoiseModel) -> CliResult<NoiseModel> {
        let kind = match (self.noise, self.sigma, self.impulse_fraction) {
            (Some(k), _, _) => k,
            (None, Some(_), None) => NoiseKind::Gaussian,
            (None, None, Some(_)) => NoiseKind::Impulsive,
            (None, None, None) => return Ok(current),
            (None, Some(_), Some(_)) => {
                return Err(CliError::Config("--sigma and --impulse-fraction are mutually exclusive".into()))
            }
        };
        match kind {
            NoiseKind::None => Ok(NoiseModel::None),
            NoiseKind::Gaussian => {
                let sigma = self.sigma.or(match current {
                    NoiseModel::Gaussian { sigma } => Some(sigma),
                    _ => None,
                });
                sigma
                    .map(|sigma| NoiseModel::Gaussian { sigma })
                    .ok_or_else(|| CliError::Config("gaussian noise needs --sigma".into()))
            }
            NoiseKind::Impulsive => {
                let fraction = self.impulse_fraction.or(match current {
                    NoiseModel::Impulsive { fraction } => Some(fraction),
                    _ => None,
                });
                fraction
                    .map(|fraction| NoiseModel::Impulsive { fraction })
                    .ok_or_else(|| CliError::Config("impulsive noise needs --impulse-fraction".into()))
            }
        }
    }
}
