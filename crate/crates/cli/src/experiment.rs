//! End-to-end runs: load, sense, corrupt, reconstruct, score, write artifacts.
//!
//! The solver works on intensities scaled to `[0, 1]`; noise levels are given
//! in 8-bit gray levels and metrics are computed on the 8-bit scale after
//! clipping.

use std::path::{Path, PathBuf};
use std::time::Instant;

use abcs::metrics::clip_to_range;
use abcs::objective::DataTerm;
use abcs::{
    add_gaussian_noise, add_impulsive_noise, mssim, psnr, EnsembleSpec, ImageVector, MeasurementOperator,
    MeasurementSet, Objective, PatchGeometry, SolverOptions, SolverOutput, SolverState, StoppingRule,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{resolve_eta, EnsembleKind, ExperimentConfig, NoiseModel};
use crate::error::{CliError, CliResult};
use crate::image_io::{read_gray, write_gray};
use crate::operator_io::{file_name, write_operator};
use crate::record::{flatten, metric_value, to_pretty_json, CONFIG_PREFIX};
use crate::tv::{finite_difference_operator, TV_OPERATOR_NAME};

pub const PEAK: f64 = 255.0;
pub const RECORD_FILE: &str = "results.json";
pub const MEASUREMENTS_FILE: &str = "measurements.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Joint image and operator estimation.
    Abcs,
    /// Same solver with a frozen finite-difference operator.
    BaselineTv,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Abcs => "abcs",
            Mode::BaselineTv => "baseline-tv",
        }
    }
}

/// Output of `abcs sense`: the (possibly corrupted) measurements of the image
/// scaled to `[0, 1]` plus everything needed to rebuild `Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensedMeasurements {
    pub width: usize,
    pub height: usize,
    pub ensemble: EnsembleSpec,
    pub noise: NoiseModel,
    pub noise_seed: u64,
    /// Indices replaced by impulsive noise.
    pub corrupted: Vec<usize>,
    pub y: Vec<f64>,
}

fn core_config_err(e: abcs::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn ensemble_spec(cfg: &ExperimentConfig, num_pixels: usize) -> EnsembleSpec {
    let (seed, m, n) = (cfg.seeds.measurement, cfg.measurement_count(num_pixels), num_pixels);
    match cfg.ensemble {
        EnsembleKind::SubsampledHadamard => EnsembleSpec::SubsampledHadamard { seed, m, n },
        EnsembleKind::Gaussian => EnsembleSpec::Gaussian { seed, m, n },
    }
}

/// Measures `truth` (8-bit scale) and applies the configured noise.
pub fn sense_image(cfg: &ExperimentConfig, truth: &ImageVector<f64>) -> CliResult<SensedMeasurements> {
    let spec = ensemble_spec(cfg, truth.len());
    let op = MeasurementOperator::<f64>::from_spec(spec).map_err(core_config_err)?;
    let clean = op
        .measure(&truth.data().mapv(|v| v / PEAK))
        .map_err(core_config_err)?;
    let (y, corrupted) = match cfg.noise {
        NoiseModel::None => (clean, Vec::new()),
        NoiseModel::Gaussian { sigma } => (
            add_gaussian_noise(&clean, sigma / PEAK, cfg.seeds.noise).map_err(core_config_err)?,
            Vec::new(),
        ),
        NoiseModel::Impulsive { fraction } => {
            add_impulsive_noise(&clean, fraction, cfg.seeds.noise).map_err(core_config_err)?
        }
    };
    Ok(SensedMeasurements {
        width: truth.width(),
        height: truth.height(),
        ensemble: spec,
        noise: cfg.noise,
        noise_seed: cfg.seeds.noise,
        corrupted,
        y: y.to_vec(),
    })
}

pub fn write_measurements(path: &Path, sensed: &SensedMeasurements) -> CliResult<()> {
    let text = serde_json::to_string(sensed).expect("measurements serialize");
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_measurements(path: &Path) -> CliResult<SensedMeasurements> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
}

/// `abcs sense`: writes `measurements.json` into the output directory.
pub fn run_sense(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    cfg.validate()?;
    let truth = read_gray(&cfg.image)?;
    let sensed = sense_image(cfg, &truth)?;
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(MEASUREMENTS_FILE);
    write_measurements(&path, &sensed)?;
    Ok(path)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Everything produced by one reconstruction.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub record: Map<String, Value>,
    pub output: SolverOutput<f64>,
    /// Reconstruction on the 8-bit scale, clipped.
    pub reconstruction: ImageVector<f64>,
    pub backprojection: ImageVector<f64>,
    pub psnr_db: f64,
    pub mssim: f64,
    pub backprojection_psnr_db: f64,
    pub runtime_s: f64,
}

/// Runs the reconstruction without touching the file system.
pub fn reconstruct(
    cfg: &ExperimentConfig,
    mode: Mode,
    truth: &ImageVector<f64>,
    sensed: &SensedMeasurements,
) -> CliResult<ExperimentOutcome> {
    cfg.validate()?;
    if (sensed.width, sensed.height) != (truth.width(), truth.height()) {
        return Err(CliError::Config(format!(
            "measurements are for a {}x{} image but the reference is {}x{}",
            sensed.width,
            sensed.height,
            truth.width(),
            truth.height()
        )));
    }
    let num_pixels = truth.len();
    let op = MeasurementOperator::<f64>::from_spec(sensed.ensemble).map_err(core_config_err)?;
    let meas = MeasurementSet::new(ndarray::Array1::from(sensed.y.clone()), op).map_err(core_config_err)?;
    let (eta_hat, eta) = resolve_eta(cfg, num_pixels)?;
    let mut abcs_cfg = cfg.abcs_config(eta);
    abcs_cfg.eta_hat = Some(eta_hat);
    let x0 = match mode {
        Mode::Abcs => None,
        Mode::BaselineTv => {
            // rank n − 1, so both penalties are off
            abcs_cfg.gamma = 0.0;
            abcs_cfg.kappa = 0.0;
            Some(finite_difference_operator(cfg.patch_side).map_err(core_config_err)?)
        }
    };
    let geom = PatchGeometry::new(cfg.patch_side, cfg.stride).map_err(core_config_err)?;
    let obj = Objective::new(&meas, geom, truth.width(), truth.height(), &abcs_cfg).map_err(core_config_err)?;
    let solver_err = |e: abcs::Error| CliError::Solver(e.to_string());
    let state = match x0 {
        None => SolverState::initialize(&obj, cfg.atom_count(), cfg.seeds.solver).map_err(solver_err)?,
        Some(x) => SolverState::with_operator(&obj, x, true).map_err(solver_err)?,
    };
    let backprojection = clip_to_range(&state.s.map(|v| v * PEAK));
    let opts = SolverOptions {
        stop: StoppingRule::new(cfg.tol, cfg.max_iter).map_err(core_config_err)?,
        freeze_operator: mode == Mode::BaselineTv,
        ..Default::default()
    };
    let start = Instant::now();
    let output = abcs::run(&obj, state, &opts, |row, _| {
        if row.iter % 50 == 0 {
            log::info!(
                "iter {:>5}  f = {:.6e}  alpha = {:.2e}  beta = {:.3}  |dX| = {:.2e}",
                row.iter,
                row.f,
                row.alpha,
                row.beta,
                row.op_change
            );
        }
    })
    .map_err(solver_err)?;
    let runtime_s = start.elapsed().as_secs_f64();

    let reconstruction = clip_to_range(&output.s.map(|v| v * PEAK));
    let metric_err = |e: abcs::Error| CliError::Config(format!("metrics: {e}"));
    let psnr_db = psnr(truth, &reconstruction).map_err(metric_err)?;
    let mssim_v = mssim(truth, &reconstruction).map_err(metric_err)?;
    let backprojection_psnr_db = psnr(truth, &backprojection).map_err(metric_err)?;

    let (n, k) = (output.x.n(), output.x.k());
    let mut rec = Map::new();
    let mut put = |key: &str, v: Value| {
        rec.insert(key.to_string(), v);
    };
    put("psnr_db", metric_value(psnr_db));
    put("mssim", metric_value(mssim_v));
    put("m_over_n", Value::from(meas.m() as f64 / num_pixels as f64));
    put("sigma_noise", Value::from(sensed.noise.sigma()));
    put("impulse_fraction", Value::from(sensed.noise.impulse_fraction()));
    put("eta", Value::from(eta));
    put("eta_hat", Value::from(eta_hat));
    put("gamma", Value::from(abcs_cfg.gamma));
    put("kappa", Value::from(abcs_cfg.kappa));
    put("c", Value::from(abcs_cfg.c));
    put("n", Value::from(n));
    put("k", Value::from(k));
    put("iters", Value::from(output.trace.len()));
    put(
        "runtime_s",
        if cfg.deterministic { Value::Null } else { Value::from(runtime_s) },
    );
    put("termination", Value::from(output.termination.as_str()));
    put("seeds.solver", Value::from(cfg.seeds.solver));
    put("seeds.measurement", Value::from(ensemble_seed(&sensed.ensemble)));
    put("seeds.noise", Value::from(sensed.noise_seed));
    put("mode", Value::from(mode.as_str()));
    put(
        "operator",
        Value::from(match mode {
            Mode::Abcs => "learned",
            Mode::BaselineTv => TV_OPERATOR_NAME,
        }),
    );
    put("data_term", serde_json::to_value(cfg.data_term).expect("serializes"));
    put("final_cost", metric_value(output.f));
    put("backprojection_psnr_db", metric_value(backprojection_psnr_db));
    put("width", Value::from(truth.width()));
    put("height", Value::from(truth.height()));
    put("m", Value::from(meas.m()));
    put("metrics_on_clipped_estimate", Value::from(true));
    rec.extend(flatten(CONFIG_PREFIX, cfg));

    Ok(ExperimentOutcome {
        record: rec,
        output,
        reconstruction,
        backprojection,
        psnr_db,
        mssim: mssim_v,
        backprojection_psnr_db,
        runtime_s,
    })
}

fn ensemble_seed(spec: &EnsembleSpec) -> u64 {
    match *spec {
        EnsembleSpec::SubsampledHadamard { seed, .. } | EnsembleSpec::Gaussian { seed, .. } => seed,
    }
}

/// Loads the image, obtains measurements (from file or by sensing), runs the
/// solver and writes all artifacts into `cfg.output_dir`. A solver that stops
/// on a failed line search still writes its last iterate before the error is
/// returned.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> CliResult<ExperimentOutcome> {
    cfg.validate()?;
    let truth = read_gray(&cfg.image)?;
    let sensed = match &cfg.measurements {
        Some(path) => read_measurements(path)?,
        None => sense_image(cfg, &truth)?,
    };
    let outcome = reconstruct(cfg, mode, &truth, &sensed)?;
    write_artifacts(cfg, mode, &outcome)?;
    if outcome.output.termination.is_failure() {
        return Err(CliError::Solver(format!(
            "stopped with status {} after {} iterations; last iterate written to {}",
            outcome.output.termination.as_str(),
            outcome.output.trace.len(),
            cfg.output_dir.display()
        )));
    }
    Ok(outcome)
}

pub fn write_artifacts(cfg: &ExperimentConfig, mode: Mode, outcome: &ExperimentOutcome) -> CliResult<()> {
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_gray(&dir.join("reconstruction.pgm"), &outcome.reconstruction)?;
    write_gray(&dir.join("backprojection.pgm"), &outcome.backprojection)?;
    write_operator(
        &dir.join(file_name(cfg.operator_format)),
        outcome.output.x.matrix(),
        cfg.operator_format,
    )?;

    let trace_path = dir.join("trace.csv");
    let mut wtr = csv::Writer::from_path(&trace_path).map_err(|e| csv_err(&trace_path, e))?;
    for row in &outcome.output.trace {
        wtr.serialize(row).map_err(|e| csv_err(&trace_path, e))?;
    }
    wtr.flush().map_err(|e| CliError::io(&trace_path, e))?;

    let record_path = dir.join(RECORD_FILE);
    std::fs::write(&record_path, to_pretty_json(&outcome.record)).map_err(|e| CliError::io(&record_path, e))?;

    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, summary_text(cfg, mode, outcome)).map_err(|e| CliError::io(&summary_path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::format(path, e.to_string())
}

pub fn summary_text(cfg: &ExperimentConfig, mode: Mode, o: &ExperimentOutcome) -> String {
    let data_term = match cfg.data_term {
        DataTerm::SquaredL2 => "squared l2",
        DataTerm::SparseG => "log sparsity (robust)",
    };
    format!(
        "mode          {}\n\
         image         {}\n\
         size          {}x{}, M/N = {:.4}\n\
         noise         sigma = {}, impulse fraction = {}\n\
         data term     {data_term}\n\
         patch         {}x{} (n = {}), k = {}\n\
         PSNR          {:.2} dB (backprojection {:.2} dB)\n\
         MSSIM         {:.4}\n\
         iterations    {} ({})\n\
         runtime       {:.1} s\n",
        mode.as_str(),
        cfg.image.display(),
        o.reconstruction.width(),
        o.reconstruction.height(),
        o.record["m_over_n"].as_f64().unwrap_or(f64::NAN),
        o.record["sigma_noise"],
        o.record["impulse_fraction"],
        cfg.patch_side,
        cfg.patch_side,
        o.output.x.n(),
        o.output.x.k(),
        o.psnr_db,
        o.backprojection_psnr_db,
        o.mssim,
        o.output.trace.len(),
        o.output.termination.as_str(),
        o.runtime_s,
    )
}
