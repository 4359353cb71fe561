use std::path::PathBuf;
use std::process::ExitCode;

use abcs::metrics::clip_to_range;
use abcs_cli::args::ConfigArgs;
use abcs_cli::error::{CliError, CliResult};
use abcs_cli::experiment::{run_experiment, run_sense, Mode};
use abcs_cli::image_io::{read_gray, write_gray};
use abcs_cli::record::metric_value;
use abcs_cli::synthetic::{generate, SyntheticKind};
use clap::{Parser, Subcommand};

/// Environment variable selecting the number of worker threads.
const THREADS_ENV: &str = "ABCS_THREADS";

#[derive(Parser)]
#[command(name = "abcs", version, about = "Compressive sensing reconstruction with a learned analysis operator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure an image and write measurements.json.
    Sense(ConfigArgs),
    /// Reconstruct while learning the analysis operator.
    Reconstruct(ConfigArgs),
    /// Reconstruct with a fixed finite-difference operator.
    BaselineTv(ConfigArgs),
    /// Score an estimate against a reference image.
    Metrics { reference: PathBuf, estimate: PathBuf },
    /// Write a synthetic test image.
    Synth {
        #[arg(value_enum)]
        kind: SyntheticKind,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print the resolved configuration as TOML.
    PrintConfig(ConfigArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a thread count, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("{THREADS_ENV}: {e}")))
}

fn require_image(args: &ConfigArgs) -> CliResult<abcs_cli::ExperimentConfig> {
    let cfg = args.resolve()?;
    if cfg.image.as_os_str().is_empty() {
        return Err(CliError::Config("no image given (use --image or set `image` in the config)".into()));
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Sense(args) => {
            let path = run_sense(&require_image(&args)?)?;
            println!("{}", path.display());
        }
        Command::Reconstruct(args) => reconstruct(&args, Mode::Abcs)?,
        Command::BaselineTv(args) => reconstruct(&args, Mode::BaselineTv)?,
        Command::Metrics { reference, estimate } => {
            let a = read_gray(&reference)?;
            let b = clip_to_range(&read_gray(&estimate)?);
            let err = |e: abcs::Error| CliError::Config(e.to_string());
            let out = serde_json::json!({
                "psnr_db": metric_value(abcs::psnr(&a, &b).map_err(err)?),
                "mssim": metric_value(abcs::mssim(&a, &b).map_err(err)?),
            });
            println!("{out}");
        }
        Command::Synth { kind, width, height, out } => {
            if width == 0 || height == 0 {
                return Err(CliError::Config("image dimensions must be positive".into()));
            }
            write_gray(&out, &generate(kind, width, height))?;
        }
        Command::PrintConfig(args) => print!("{}", args.resolve()?.to_toml_string()),
    }
    Ok(())
}

fn reconstruct(args: &ConfigArgs, mode: Mode) -> CliResult<()> {
    let cfg = require_image(args)?;
    let outcome = run_experiment(&cfg, mode)?;
    log::info!("artifacts written to {}", cfg.output_dir.display());
    println!(
        "PSNR {:.2} dB  MSSIM {:.4}  ({} iterations, {})",
        outcome.psnr_db,
        outcome.mssim,
        outcome.output.trace.len(),
        outcome.output.termination.as_str()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
