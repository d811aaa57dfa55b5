//! Command-line front end for S3 sensitivity runs on the perturbed Baker's
//! map: sensitivities, finite-difference validation, and plot-ready CSVs.
//!
//! Exit codes: 0 success, 1 failed validation or I/O error, 2 configuration
//! error, 3 numerical failure.

pub mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use s3_core::export;
use s3_core::validation::{self, Comparison};
use s3_core::*;

pub use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(s3_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) | Self::Failed(_) => 1,
        }
    }
}

impl From<s3_core::Error> for CliError {
    fn from(e: s3_core::Error) -> Self {
        match e {
            e if e.is_numerical() => Self::Numerical(e),
            s3_core::Error::Io(e) => Self::Io(e.to_string()),
            s3_core::Error::Json(e) => Self::Io(e.to_string()),
            e => Self::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "s3",
    version,
    about = "Space-split sensitivity for chaotic maps"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// S3 derivative of the observable's mean (JSON)
    Sensitivity,
    /// S3 against the finite-difference oracle at each grid offset (JSON)
    Validate,
    /// SRB histogram of one orbit (CSV)
    Histogram,
    /// Mean of the observable along the direction (CSV)
    ResponseCurve,
    /// Per-lag mean and variance of the direct Ruelle terms (CSV)
    VarianceProfile,
    /// Orbit points including the run-up (CSV)
    Trajectory,
    /// Tangent recursion states along one orbit (CSV)
    Frames,
}

/// Default offsets for `response-curve` when no grid is given.
const CURVE_GRID: [f64; 9] = [-0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2];

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::from_sources(&cli.overrides)?;
    if let Some(n) = cli.overrides.workers {
        if n == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        // fails only if a pool already exists, in which case it is reused
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Sensitivity => cmd_sensitivity(&cfg),
        Command::Validate => cmd_validate(&cfg),
        Command::Histogram => cmd_histogram(&cfg),
        Command::ResponseCurve => cmd_response_curve(&cfg),
        Command::VarianceProfile => cmd_variance_profile(&cfg),
        Command::Trajectory => cmd_trajectory(&cfg),
        Command::Frames => cmd_frames(&cfg),
    }
}

/// Human-readable lines go to stdout, or to stderr when stdout carries the
/// JSON result.
struct Summary {
    to_stderr: bool,
}

impl Summary {
    fn line(&self, text: impl AsRef<str>) {
        if self.to_stderr {
            eprintln!("{}", text.as_ref());
        } else {
            println!("{}", text.as_ref());
        }
    }
}

fn write_json(out: Option<&Path>, value: &impl Serialize) -> Result<Summary, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(Summary { to_stderr: false })
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(Summary { to_stderr: true })
        }
    }
}

fn csv_path(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.out
        .as_deref()
        .ok_or_else(|| CliError::Config("--out is required for CSV output".into()))
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

/// Write a CSV artifact plus `<out>.config.json` holding the configuration.
fn write_csv(
    cfg: &RunConfig,
    body: impl FnOnce(&mut BufWriter<File>) -> s3_core::Result<()>,
) -> Result<PathBuf, CliError> {
    let path = csv_path(cfg)?;
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    let mut text = serde_json::to_string_pretty(&serde_json::json!({ "config": cfg }))?;
    text.push('\n');
    std::fs::write(sidecar_path(path), text)?;
    Ok(path.to_path_buf())
}

#[derive(Serialize)]
struct SensitivityOutput<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    param_index: Option<usize>,
    #[serde(flatten)]
    result: &'a SensitivityResult,
    config: &'a RunConfig,
}

pub fn cmd_sensitivity(cfg: &RunConfig) -> Result<(), CliError> {
    let result = s3_sensitivity(
        &PerturbedBaker,
        &cfg.params()?,
        &cfg.param_direction()?,
        &cfg.observable(),
        &cfg.s3(),
    )?;
    let out = SensitivityOutput {
        param_index: cfg.param_index,
        result: &result,
        config: cfg,
    };
    let say = write_json(cfg.out.as_deref(), &out)?;
    say.line(format!(
        "total {} +- {} (stable {}, unstable {}) with N={} K={} seed={}",
        export::fmt17(result.total),
        export::fmt17(result.stderr_total),
        export::fmt17(result.stable),
        export::fmt17(result.unstable),
        result.samples,
        result.truncation,
        result.seed
    ));
    Ok(())
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    comparisons: &'a [Comparison],
    all_pass: bool,
    config: &'a RunConfig,
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<(), CliError> {
    let base = cfg.params()?;
    let direction = cfg.param_direction()?;
    let observable = cfg.observable();
    let grid = cfg.grid.clone().unwrap_or_else(|| vec![0.0]);
    let sampling = cfg.sampling();
    let comparisons: Vec<Comparison> = grid
        .par_iter()
        .map(|&t| {
            let s = base.shifted(&direction, t)?;
            let r = s3_sensitivity(&PerturbedBaker, &s, &direction, &observable, &cfg.s3())?;
            let fd = validation::central_difference(
                &PerturbedBaker,
                &s,
                &direction,
                cfg.oracle_delta,
                &observable,
                &sampling,
            )?;
            Ok(validation::compare(&r, &fd))
        })
        .collect::<Result<_, s3_core::Error>>()?;
    let all_pass = comparisons.iter().all(|c| c.pass);
    let say = write_json(
        cfg.out.as_deref(),
        &ValidationReport {
            comparisons: &comparisons,
            all_pass,
            config: cfg,
        },
    )?;
    for c in &comparisons {
        say.line(format!(
            "s={:?}: s3 {} fd {} |diff| {} tol {} {}",
            c.s.as_slice(),
            export::fmt17(c.s3_total),
            export::fmt17(c.fd),
            export::fmt17((c.s3_total - c.fd).abs()),
            export::fmt17(c.tol),
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    if all_pass {
        Ok(())
    } else {
        let failed = comparisons.iter().filter(|c| !c.pass).count();
        Err(CliError::Failed(format!(
            "{failed} of {} grid points failed",
            comparisons.len()
        )))
    }
}

pub fn cmd_histogram(cfg: &RunConfig) -> Result<(), CliError> {
    let traj = generate_trajectory(
        &PerturbedBaker,
        &cfg.params()?,
        cfg.seed,
        cfg.runup,
        cfg.samples,
    )?;
    let hist = srb_histogram(&traj, cfg.bins[0], cfg.bins[1])?;
    let path = write_csv(cfg, |w| export::write_histogram_csv(w, &hist))?;
    println!(
        "histogram {}x{} of {} samples -> {}",
        hist.bins_x,
        hist.bins_y,
        hist.samples,
        path.display()
    );
    Ok(())
}

pub fn cmd_response_curve(cfg: &RunConfig) -> Result<(), CliError> {
    csv_path(cfg)?;
    let grid = cfg.grid.clone().unwrap_or_else(|| CURVE_GRID.to_vec());
    let curve = validation::response_curve(
        &PerturbedBaker,
        &cfg.params()?,
        &cfg.param_direction()?,
        &grid,
        &cfg.observable(),
        &cfg.sampling(),
    )?;
    let path = write_csv(cfg, |w| export::write_response_curve_csv(w, &curve))?;
    for ((t, m), e) in curve.grid.iter().zip(&curve.means).zip(&curve.stderrs) {
        println!("t={t}: mean {} +- {}", export::fmt17(*m), export::fmt17(*e));
    }
    println!("-> {}", path.display());
    Ok(())
}

pub fn cmd_variance_profile(cfg: &RunConfig) -> Result<(), CliError> {
    csv_path(cfg)?;
    let result = direct_ruelle_estimate(
        &PerturbedBaker,
        &cfg.params()?,
        &cfg.param_direction()?,
        &cfg.observable(),
        cfg.truncation,
        cfg.ensemble,
        cfg.runup,
        cfg.seed,
    )?;
    let path = write_csv(cfg, |w| export::write_variance_profile_csv(w, &result))?;
    println!(
        "direct estimate {} over K={} with {} members",
        export::fmt17(result.value),
        cfg.truncation,
        result.ensemble_size
    );
    if cfg.truncation >= 5 {
        match result.variance_log_slope(2..cfg.truncation) {
            Ok(slope) => println!(
                "variance log-slope over k in [2, {}): {slope:.4}",
                cfg.truncation
            ),
            Err(_) => println!("all term variances are zero"),
        }
    }
    println!("-> {}", path.display());
    Ok(())
}

pub fn cmd_trajectory(cfg: &RunConfig) -> Result<(), CliError> {
    let traj = generate_trajectory(
        &PerturbedBaker,
        &cfg.params()?,
        cfg.seed,
        cfg.runup,
        cfg.samples,
    )?;
    let path = write_csv(cfg, |w| export::write_trajectory_csv(w, &traj))?;
    println!(
        "{} points (run-up {}) -> {}",
        traj.all().len(),
        traj.runup(),
        path.display()
    );
    Ok(())
}

pub fn cmd_frames(cfg: &RunConfig) -> Result<(), CliError> {
    let s = cfg.params()?;
    let traj = generate_trajectory(&PerturbedBaker, &s, cfg.seed, cfg.runup, cfg.samples)?;
    let frames = run_tangent_stack(
        &traj,
        &PerturbedBaker,
        &s,
        &cfg.param_direction()?,
        cfg.diagnostics,
    )?;
    let path = write_csv(cfg, |w| export::write_frames_csv(w, &frames))?;
    println!("{} frames -> {}", frames.len(), path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Failed(String::new()).exit_code(), 1);
        let num: CliError = s3_core::Error::DegenerateTangent { step: 3, norm: 0.0 }.into();
        assert_eq!(num.exit_code(), 3);
        let cfg: CliError = s3_core::Error::InvalidArgument("x".into()).into();
        assert_eq!(cfg.exit_code(), 2);
    }

    #[test]
    fn sidecar_sits_next_to_output() {
        assert_eq!(
            sidecar_path(Path::new("a/b.csv")),
            PathBuf::from("a/b.csv.config.json")
        );
    }

    #[test]
    fn flags_parse_after_subcommand() {
        let cli = Cli::try_parse_from([
            "s3",
            "sensitivity",
            "--map",
            "baker",
            "--s",
            "-0.1,0,0,0",
            "--param",
            "1",
            "--N",
            "10",
        ])
        .unwrap();
        assert_eq!(cli.command, Command::Sensitivity);
        assert_eq!(cli.overrides.s, Some(vec![-0.1, 0.0, 0.0, 0.0]));
        assert_eq!(cli.overrides.samples, Some(10));
    }
}
