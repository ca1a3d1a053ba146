//! Command-line front end. Every subcommand prints one JSON document on
//! stdout; diagnostics go to stderr. Exit codes: 0 ok, 1 runtime failure,
//! 2 usage or configuration error.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::data::{augment, load_csv, save_csv, synthesize, AugmentConfig, DataError};
use crate::domain::split_train_test;
use crate::eval::{contribution_csv, evaluate_model, physics_contribution_report, REPORT_FILES};
use crate::experiment::train_and_evaluate;
use crate::models::{self, Architecture};
use crate::service::{self, AppState, LoadedModel, PredictRequest, ServiceConfig, ServiceError};
use crate::training::{LossHistory, TrainConfig, TrainError};
use crate::vision::{self, PipelineConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidConfig(m) => CliError::Usage(m),
            other => runtime(other),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Usage(m),
            other => runtime(other),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Field { .. } | ServiceError::BadRequest(_) => CliError::Usage(e.to_string()),
            other => runtime(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bridge-pinn", version, about = "Spaghetti bridge weight prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic bridges as CSV.
    Synthesize {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 15)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Expand a dataset with jittered, physically rescaled variants.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Noise σ as a fraction of each column's std (0 disables noise).
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
    },
    /// Train a model, write it with its held-out metrics, and write the loss history.
    Train(TrainArgs),
    /// Write the evaluation report files for a model on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Loss history for the physics-contribution table.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Evaluate only the held-out split produced with this fraction and `--seed`.
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Predict one design read as JSON from `--input` or stdin.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Extract beam parameters from a PNG or PPM drawing.
    Extract {
        #[arg(long)]
        image: PathBuf,
        /// Millimetres per pixel.
        #[arg(long)]
        scale: f64,
        /// Write the seven intermediate stage images here.
        #[arg(long)]
        stages: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Regenerate plot-ready CSVs from a loss history.
    Report {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "pikan")]
    pub arch: Architecture,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Physics weight; the data weight becomes `1 - lambda_physics`.
    #[arg(long)]
    pub lambda_physics: Option<f64>,
    /// Disable early stopping.
    #[arg(long)]
    pub no_early_stopping: bool,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        let mut cfg = TrainConfig::for_arch(self.arch, self.seed);
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            cfg.learning_rate = lr;
        }
        if let Some(lp) = self.lambda_physics {
            cfg.lambda_physics = lp;
            cfg.lambda_data = 1.0 - lp;
        }
        if self.no_early_stopping {
            cfg.early_stopping_patience = None;
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "BRIDGE_MODEL_PATH")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "BRIDGE_BIND", default_value = service::DEFAULT_BIND)]
    pub bind: SocketAddr,
    /// Static UI assets served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = service::DEFAULT_MAX_UPLOAD_BYTES)]
    pub max_upload_bytes: usize,
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<(), CliError> {
    writeln!(out, "{}", serde_json::to_string_pretty(v).map_err(runtime)?).map_err(runtime)
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} not found: {}", path.display())))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        // Help and version text go to stderr so stdout stays JSON-only.
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            eprint!("{}", e.render());
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    execute(cli.command, stdin, stdout)
}

pub fn execute(command: Command, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Synthesize { out, count, seed } => {
            let ds = synthesize(seed, count)?;
            save_csv(&ds, &out)?;
            emit(stdout, &json!({ "rows": ds.len(), "seed": seed, "out": out }))
        }
        Command::Augment { input, out, count, seed, noise } => {
            require_file(&input, "input data")?;
            let ds = load_csv(&input)?;
            let aug = augment(&ds, &AugmentConfig { target_count: count, seed, noise_sigma_fraction: noise, ..Default::default() })?;
            save_csv(&aug, &out)?;
            emit(stdout, &json!({ "source_rows": ds.len(), "output_rows": aug.len(), "seed": seed, "out": out }))
        }
        Command::Train(args) => {
            require_file(&args.data, "training data")?;
            let cfg = args.config();
            cfg.validate()?;
            let ds = load_csv(&args.data)?;
            let ds = split_train_test(ds, args.test_fraction, args.seed).map_err(|e| CliError::Usage(e.to_string()))?;
            let run = train_and_evaluate(&ds, &cfg).map_err(|e| match e {
                crate::experiment::ExperimentError::Train(t) => CliError::from(t),
                other => runtime(other),
            })?;
            models::save(&run.model, &args.out).map_err(runtime)?;
            run.history.save_csv(&args.history)?;
            emit(
                stdout,
                &json!({
                    "arch": cfg.arch,
                    "model": args.out,
                    "history": args.history,
                    "epochs_run": run.history.epochs.len(),
                    "best_epoch": run.history.best_epoch,
                    "test": run.report.summary,
                }),
            )
        }
        Command::Evaluate { model, data, report, history, test_fraction, seed } => {
            require_file(&model, "model file")?;
            require_file(&data, "evaluation data")?;
            let model = models::load(&model).map_err(runtime)?;
            let ds = load_csv(&data).map_err(runtime)?;
            let samples = match test_fraction {
                Some(f) => split_train_test(ds, f, seed).map_err(|e| CliError::Usage(e.to_string()))?.test_samples().unwrap_or_default(),
                None => ds.samples,
            };
            let history = match history {
                Some(h) => LossHistory::load_csv(&h).map_err(runtime)?,
                None => LossHistory::new(match model.architecture() {
                    Architecture::Pinn => crate::physics::PhysicsLossKind::Pinn,
                    Architecture::Pikan => crate::physics::PhysicsLossKind::Pikan,
                }),
            };
            let r = evaluate_model(&model, &samples, &history).map_err(runtime)?;
            r.write_dir(&report).map_err(runtime)?;
            let files: Vec<PathBuf> = REPORT_FILES.iter().map(|f| report.join(f)).collect();
            emit(stdout, &json!({ "metrics": r.summary, "files": files }))
        }
        Command::Predict { model, input } => {
            require_file(&model, "model file")?;
            let loaded = LoadedModel::from_path(&model).map_err(runtime)?;
            let mut text = String::new();
            match input {
                Some(p) => text = std::fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
                None => {
                    stdin.read_to_string(&mut text).map_err(runtime)?;
                }
            }
            let req: PredictRequest = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed request: {e}")))?;
            let resp = loaded.predict(&req.design)?;
            emit(stdout, &serde_json::to_value(resp).map_err(runtime)?)
        }
        Command::Extract { image, scale, stages } => {
            require_file(&image, "image")?;
            let rgb = vision::load_image(&image).map_err(runtime)?;
            let cfg = PipelineConfig { keep_stages: stages.is_some(), ..Default::default() };
            let params = vision::extract_parameters(&rgb, scale, &cfg).map_err(|e| match e {
                vision::VisionError::InvalidConfig(m) => CliError::Usage(m),
                other => runtime(other),
            })?;
            if let (Some(dir), Some(imgs)) = (&stages, &params.stages) {
                imgs.write_to(dir).map_err(runtime)?;
            }
            emit(stdout, &serde_json::to_value(&params).map_err(runtime)?)
        }
        Command::Serve(args) => {
            let model = match &args.model {
                Some(p) => {
                    require_file(p, "model file")?;
                    Some(LoadedModel::from_path(p).map_err(runtime)?)
                }
                None => {
                    log::warn!("no model path given; prediction endpoints will answer 503");
                    None
                }
            };
            let mut config = ServiceConfig { max_upload_bytes: args.max_upload_bytes, static_dir: args.static_dir.clone(), ..Default::default() };
            if let Some(w) = args.workers {
                config.extract_workers = w;
            }
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            emit(stdout, &json!({ "listening": args.bind.to_string(), "model": model.as_ref().map(|m| m.id.clone()) }))?;
            stdout.flush().map_err(runtime)?;
            rt.block_on(service::serve(args.bind, AppState::new(model, config))).map_err(runtime)
        }
        Command::Report { history, out } => {
            require_file(&history, "loss history")?;
            let h = LossHistory::load_csv(&history).map_err(runtime)?;
            std::fs::create_dir_all(&out).map_err(runtime)?;
            let curves = out.join("loss_curves.csv");
            let mut text = String::from("epoch,data_loss,physics_loss,total_loss,val_loss\n");
            for e in &h.epochs {
                text.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.data_loss, e.physics_loss, e.total_loss, e.val_loss));
            }
            std::fs::write(&curves, text).map_err(runtime)?;
            let contrib = out.join(REPORT_FILES[4]);
            std::fs::write(&contrib, contribution_csv(&physics_contribution_report(&h).map_err(runtime)?)).map_err(runtime)?;
            emit(stdout, &json!({ "epochs": h.epochs.len(), "best_epoch": h.best_epoch, "files": [curves, contrib] }))
        }
    }
}

/// Entry point for the binary: runs with process arguments and maps errors to exit codes.
pub fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).target(env_logger::Target::Stderr).init();
    let stdin = &mut std::io::stdin();
    let stdout = &mut std::io::stdout();
    match run(std::env::args_os(), stdin, stdout) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            std::process::ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (Result<(), CliError>, String) {
        let mut out = Vec::new();
        let r = run(std::iter::once("bridge-pinn").chain(args.iter().copied()), &mut std::io::empty(), &mut out);
        (r, String::from_utf8(out).unwrap())
    }

    #[test]
    fn unknown_subcommand_is_usage() {
        let (r, out) = run_args(&["frobnicate"]);
        assert_eq!(r.unwrap_err().exit_code(), 2);
        assert!(out.is_empty());
    }

    #[test]
    fn train_flags_override_defaults() {
        let Cli { command: Command::Train(a) } =
            Cli::try_parse_from(["x", "train", "--data", "d.csv", "--arch", "pinn", "--out", "m.json", "--history", "h.csv", "--epochs", "5"]).unwrap()
        else {
            panic!("not train")
        };
        let cfg = a.config();
        assert_eq!((cfg.epochs, cfg.batch_size, cfg.arch), (5, 32, Architecture::Pinn));
        let Cli { command: Command::Train(a) } = Cli::try_parse_from(["x", "train", "--data", "d", "--out", "m", "--history", "h"]).unwrap() else {
            panic!("not train")
        };
        assert_eq!(a.config(), TrainConfig::pikan(42));
    }

    #[test]
    fn augment_below_source_count_is_usage() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.csv");
        let (r, _) = run_args(&["synthesize", "--out", src.to_str().unwrap(), "--count", "15"]);
        r.unwrap();
        let (r, _) = run_args(&["augment", "--in", src.to_str().unwrap(), "--out", dir.path().join("a.csv").to_str().unwrap(), "--count", "10"]);
        assert_eq!(r.unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_model_is_usage() {
        let (r, _) = run_args(&["evaluate", "--model", "/nonexistent/m.json", "--data", "d.csv", "--report", "/tmp/x"]);
        assert_eq!(r.unwrap_err().exit_code(), 2);
    }
}
