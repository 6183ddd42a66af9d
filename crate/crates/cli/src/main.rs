//! `wm`: convergence studies and samples of Whittle–Matérn fields on (0, 1).

mod config;
mod output;
mod sample;
mod validate;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use wm_core::study::{run_cov_study, run_field_study, StudyConfig};

use config::{FileConfig, Overrides};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(wm_core::Error),
    Io(std::io::Error),
    ValidationFailed(Vec<&'static str>),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(_) => 2,
            CliError::ValidationFailed(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::ValidationFailed(s) => write!(f, "validation failed: {}", s.join(", ")),
        }
    }
}

/// Parameter errors become config errors whose message leads with the key.
pub fn config_error(e: wm_core::Error) -> CliError {
    match e {
        wm_core::Error::InvalidParameter(m) => CliError::Config(m),
        other => CliError::Config(other.to_string()),
    }
}

impl From<wm_core::Error> for CliError {
    fn from(e: wm_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser)]
#[command(name = "wm", version, about = "Sinc-Galerkin Whittle-Matern field experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo convergence study of the field errors.
    FieldStudy(StudyArgs),
    /// Convergence study of the covariance function errors.
    CovStudy(StudyArgs),
    /// Writes one field realization on the evaluation grid.
    Sample(sample::SampleArgs),
    /// Runs the validation suites.
    Validate(validate::ValidateArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "wm-output")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

fn run_study(args: &StudyArgs, covariance: bool) -> Result<(), CliError> {
    let file = args.config.as_deref().map(FileConfig::load).transpose()?;
    let defaults = if covariance {
        StudyConfig::cov_default()
    } else {
        StudyConfig::field_default()
    };
    let cfg = config::resolve(defaults, file, &args.overrides)?;
    cfg.validate(covariance).map_err(config_error)?;

    let t0 = Instant::now();
    let (name, out) = if covariance {
        ("cov", run_cov_study(&cfg)?)
    } else {
        ("field", run_field_study(&cfg)?)
    };
    let files = output::write_study(name, &args.out, &cfg, &out, t0.elapsed().as_secs_f64())?;
    for f in &out.fits {
        println!(
            "{:<8} p={} beta={:<4} observed {:>6.3} expected {}",
            f.norm.as_str(),
            f.p,
            f.beta,
            f.observed_rate,
            f.expected_rate.map_or("--".into(), |e| format!("{e:.2}"))
        );
    }
    println!("wrote {} files to {}", files.len(), args.out.display());
    Ok(())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("WM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("WM_THREADS: expected a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("WM_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::FieldStudy(a) => run_study(&a, false),
        Command::CovStudy(a) => run_study(&a, true),
        Command::Sample(a) => sample::run(&a),
        Command::Validate(a) => validate::run(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::ValidationFailed(vec!["eig"]).exit_code(), 3);
        assert_eq!(CliError::Core(wm_core::Error::NotPositiveDefinite("L")).exit_code(), 4);
        assert_eq!(CliError::Core(wm_core::Error::NonFinite("z")).exit_code(), 4);
        assert_eq!(CliError::Core(wm_core::Error::InvalidBeta(-1.0)).exit_code(), 2);
    }

    #[test]
    fn config_errors_lead_with_key() {
        let e = config_error(wm_core::Error::InvalidParameter("n_kl: too small".into()));
        assert_eq!(e.to_string(), "n_kl: too small");
    }
}
