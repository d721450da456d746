//! The `odr` command line: packaging, validation, inference, benchmarking,
//! dataset inspection, training and the active-perception simulation.
//!
//! [`run`] is the whole program minus process setup, so tests can drive it
//! in-process with their own registry and output buffers.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use odr_core::active::{run_episode, ActiveBearingLearner, ActiveError, SphereBearingEnv, SphereEnvConfig};
use odr_core::bench::{bench_run, budget_check, has_blocking, BenchConfig, BenchError, Severity};
use odr_core::datasets::{DatasetError, DatasetType, ExternalDataset};
use odr_core::engine::{
    draw_bounding_boxes, image_open, image_save, BoundingBox, Data, EngineError, Target, Timeseries,
    Vector,
};
use odr_core::learner::{Hyperparams, LearnerError, Metric, Registry};
use odr_core::package::{check_relative_path, package_validate, package_write, Manifest, PackageError};
use odr_core::Scalar;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Budget(String),
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("Io: {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("BadInput: {0}")]
    BadInput(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Budget(_) => EXIT_BUDGET,
            _ => EXIT_ERROR,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Parser, Debug)]
#[command(name = "odr", version, about = "Package, run and benchmark perception learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a model package from a manifest and a payload directory
    Package {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        payload_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a package's manifest and payload checksums
    Validate { package: PathBuf },
    /// Load a package and print the learner's output for one input
    Infer {
        #[command(flatten)]
        model: ModelArgs,
        /// Write the input image with predicted boxes drawn on it
        #[arg(long)]
        draw: Option<PathBuf>,
    },
    /// Measure inference latency, throughput and memory against budgets
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 25.0)]
        min_fps: f64,
        #[arg(long, default_value_t = 1 << 30)]
        max_mem: u64,
        /// Whether a memory violation fails the run (strict) or only warns
        #[arg(long, default_value = "strict")]
        mem_policy: Severity,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long)]
        json: PathBuf,
    },
    /// Run one active-perception episode in the sphere-bearing simulator
    Sim {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        noise: f64,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Dataset utilities
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Train a learner on a dataset and save it as a package
    Fit {
        #[arg(long)]
        learner: String,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "type")]
        dataset_type: DatasetType,
        #[arg(long)]
        out: PathBuf,
        /// Hyperparameter as key=value; repeatable
        #[arg(long = "hp", value_parser = parse_hp)]
        hyperparams: Vec<(String, Scalar)>,
    },
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// Print the length and class table of a dataset
    Inspect {
        #[arg(long)]
        path: PathBuf,
        #[arg(long = "type")]
        dataset_type: DatasetType,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    learner: String,
    /// A PPM/PGM image, or a JSON array (vector) or array of arrays (timeseries)
    #[arg(long)]
    input: PathBuf,
}

fn parse_hp(s: &str) -> Result<(String, Scalar), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    if k.is_empty() {
        return Err(format!("empty key in {s:?}"));
    }
    Ok((k.to_string(), Scalar::parse(v)))
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, S>(args: I, registry: &Registry, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, registry, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(
    command: Command,
    registry: &Registry,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    match command {
        Command::Package {
            manifest,
            payload_dir,
            out: dest,
        } => cmd_package(&manifest, &payload_dir, &dest, out),
        Command::Validate { package } => cmd_validate(&package, out),
        Command::Infer { model, draw } => cmd_infer(&model, draw.as_deref(), registry, out),
        Command::Bench {
            model,
            min_fps,
            max_mem,
            mem_policy,
            warmup,
            iters,
            json,
        } => {
            let cfg = BenchConfig {
                warmup_iters: warmup,
                measure_iters: iters,
                min_fps,
                max_mem_bytes: max_mem,
                mem_severity: mem_policy,
            };
            if let Err(e) = cfg.validate() {
                return Err(CliError::Usage(e.to_string()));
            }
            cmd_bench(&model, &cfg, &json, registry, out, err)
        }
        Command::Sim {
            seed,
            steps,
            noise,
            trace,
        } => cmd_sim(seed, steps, noise, &trace, out),
        Command::Dataset {
            command: DatasetCommand::Inspect { path, dataset_type },
        } => cmd_dataset_inspect(&path, dataset_type, out),
        Command::Fit {
            learner,
            dataset,
            dataset_type,
            out: dest,
            hyperparams,
        } => {
            let hp: Hyperparams = hyperparams.into_iter().collect();
            cmd_fit(&learner, &dataset, dataset_type, &dest, &hp, registry, out)
        }
    }
}

fn write_out(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(io_err(Path::new("<stdout>")))
}

macro_rules! outln {
    ($out:expr, $($arg:tt)*) => { write_out($out, format_args!($($arg)*)) };
}

fn cmd_package(manifest: &Path, payload_dir: &Path, dest: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(manifest).map_err(io_err(manifest))?;
    let manifest = Manifest::from_json(&text)?;
    let mut payloads = BTreeMap::new();
    for rel in &manifest.model_paths {
        check_relative_path(rel)?;
        let path = payload_dir.join(rel);
        let bytes = fs::read(&path).map_err(|_| PackageError::MissingPayload(rel.clone()))?;
        payloads.insert(rel.clone(), bytes);
    }
    let pkg = package_write(&manifest, &payloads, dest)?;
    outln!(out, "{}", pkg.root().display())
}

fn cmd_validate(package: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let m = package_validate(package)?;
    outln!(out, "name: {}", m.name)?;
    outln!(out, "format: {}", m.model_format.as_str())?;
    outln!(out, "optimized: {}", m.optimized)?;
    for p in &m.model_paths {
        outln!(out, "path: {p}")?;
    }
    if let Some(classes) = &m.classes {
        outln!(out, "classes: {}", classes.join(", "))?;
    }
    Ok(())
}

/// Reads an inference input: PNM images by content, JSON numbers otherwise.
pub fn read_input(path: &Path) -> Result<Data, CliError> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        return Ok(Data::Image(image_open(path)?));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
    let bad = || CliError::BadInput(format!("{}: expected an array of numbers or of arrays", path.display()));
    let numbers = |v: &serde_json::Value| -> Option<Vec<f64>> {
        v.as_array()?.iter().map(serde_json::Value::as_f64).collect()
    };
    match value.as_array() {
        Some(rows) if rows.first().is_some_and(serde_json::Value::is_array) => {
            let samples = rows.iter().map(numbers).collect::<Option<Vec<_>>>().ok_or_else(bad)?;
            Ok(Data::Timeseries(Timeseries::new(samples)?))
        }
        Some(_) => Ok(Data::Vector(Vector::new(numbers(&value).ok_or_else(bad)?)?)),
        None => Err(bad()),
    }
}

fn load_learner(model: &ModelArgs, registry: &Registry) -> Result<(Box<dyn odr_core::learner::Learner>, Data), CliError> {
    let mut learner = registry.create(&model.learner, &Hyperparams::new())?;
    learner.load(&model.model)?;
    let data = read_input(&model.input)?;
    Ok((learner, data))
}

fn cmd_infer(model: &ModelArgs, draw: Option<&Path>, registry: &Registry, out: &mut dyn Write) -> Result<(), CliError> {
    let (mut learner, data) = load_learner(model, registry)?;
    let targets = learner.infer(&data)?;
    if let Some(draw_path) = draw {
        let boxes: Vec<BoundingBox> = targets
            .iter()
            .filter_map(|t| match t {
                Target::BoundingBox(b) => Some(b.clone()),
                _ => None,
            })
            .collect();
        if boxes.is_empty() {
            return Err(CliError::Usage("--draw requires box outputs".into()));
        }
        let Data::Image(img) = &data else {
            return Err(CliError::Usage("--draw requires an image input".into()));
        };
        let names = package_validate(&model.model)?.classes.unwrap_or_else(|| {
            let n = boxes.iter().map(|b| b.category.index + 1).max().unwrap_or(0);
            (0..n).map(|i| i.to_string()).collect()
        });
        image_save(&draw_bounding_boxes(img, &boxes, &names)?, draw_path)?;
    }
    for t in &targets {
        outln!(out, "{t}")?;
    }
    Ok(())
}

fn cmd_bench(
    model: &ModelArgs,
    cfg: &BenchConfig,
    json: &Path,
    registry: &Registry,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let (mut learner, data) = load_learner(model, registry)?;
    let report = bench_run(|| learner.infer(&data), cfg)?;
    fs::write(json, report.to_json() + "\n").map_err(io_err(json))?;
    let violations = budget_check(&report, cfg);
    for v in &violations {
        let _ = writeln!(
            err,
            "{}: {v}",
            if v.severity == Severity::Strict { "violation" } else { "warning" }
        );
    }
    outln!(out, "report: {}", json.display())?;
    outln!(out, "mem_method: {}", report.mem_method.as_str())?;
    if has_blocking(&violations) {
        let metrics: Vec<&str> = violations.iter().map(|v| v.metric).collect();
        outln!(out, "verdict: fail")?;
        return Err(CliError::Budget(format!("budget violated: {}", metrics.join(", "))));
    }
    outln!(out, "verdict: pass")
}

fn cmd_sim(seed: u64, steps: usize, noise: f64, trace: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    if steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(CliError::Usage(format!("--noise must be finite and non-negative, got {noise}")));
    }
    let mut env = SphereBearingEnv::new(SphereEnvConfig {
        noise_sigma: noise,
        max_steps: steps,
        ..Default::default()
    })?;
    let mut learner = ActiveBearingLearner::new(&Hyperparams::new())?;
    let result = run_episode(&mut env, &mut learner, seed, steps)?;
    let file = fs::File::create(trace).map_err(io_err(trace))?;
    let mut w = std::io::BufWriter::new(file);
    result
        .write_jsonl(&mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(trace))?;
    let final_error = result.final_angular_error().expect("episode has observations");
    outln!(out, "steps: {}", result.steps.len() - 1)?;
    outln!(out, "final_angular_error: {final_error:.6}")
}

fn cmd_dataset_inspect(path: &Path, dataset_type: DatasetType, out: &mut dyn Write) -> Result<(), CliError> {
    let (ds, table) = ExternalDataset {
        path: path.to_path_buf(),
        dataset_type,
    }
    .open()?;
    outln!(out, "length: {}", ds.len())?;
    for (index, name) in table {
        outln!(out, "{index} {name}")?;
    }
    Ok(())
}

fn cmd_fit(
    learner: &str,
    dataset: &Path,
    dataset_type: DatasetType,
    dest: &Path,
    hp: &Hyperparams,
    registry: &Registry,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (ds, _) = ExternalDataset {
        path: dataset.to_path_buf(),
        dataset_type,
    }
    .open()?;
    let mut l = registry.create(learner, hp)?;
    let stats = l.fit(ds.as_ref())?;
    for (k, m) in stats.iter() {
        match m {
            Metric::Scalar(v) => outln!(out, "{k}: {v}")?,
            Metric::Series(s) => outln!(out, "{k}: series of {}", s.len())?,
        }
    }
    let pkg = l.save(dest)?;
    outln!(out, "package: {}", pkg.root().display())
}
