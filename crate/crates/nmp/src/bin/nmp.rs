//! Command-line front end: dataset generation, training, evaluation, and
//! raster dumps. Every artifact a run writes is a pure function of its
//! effective config plus the input data, so reruns reproduce outputs
//! byte for byte.
//!
//! Exit codes: 0 success, 1 usage, 2 bad data or I/O, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use nmp::bev::{dump_bevt, rasterize_input};
use nmp::config::{ConfigError, RunConfig};
use nmp::evaluator::{evaluate_dataset, rows_csv, EvalError};
use nmp::net::store::{load_checkpoint, save_checkpoint, ParamStore, StoreError};
use nmp::scenario::{load_dir, ScenarioError};
use nmp::scenario_gen::write_set;
use nmp::trainer::{train, TrainError, STEP_CSV_HEADER};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "nmp", version, about = "Interpretable neural motion planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario dataset (train/val/test partitions).
    Gen(GenArgs),
    /// Train a model and write checkpoints plus a per-step loss log.
    Train(TrainArgs),
    /// Evaluate a checkpoint and the baselines over a scenario directory.
    Eval(EvalArgs),
    /// Rasterize one scenario to a BEVT tensor file.
    Dump(DumpArgs),
    /// Run a small end-to-end pipeline in a temporary directory.
    Selfcheck,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration TOML; defaults to the desk-scale preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the number of input LiDAR sweeps.
    #[arg(long)]
    sweeps: Option<usize>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig, AppError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::desk(),
        };
        if let Some(sweeps) = self.sweeps {
            cfg.roi.t_prime = sweeps;
            cfg.gen.roi.t_prime = sweeps;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Output dataset root; partitions go to train/, val/, test/.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    train: usize,
    #[arg(long, default_value_t = 5)]
    val: usize,
    #[arg(long, default_value_t = 50)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Directory of training scenario JSON files.
    #[arg(long)]
    data: PathBuf,
    /// Run directory for config, loss log, and checkpoints.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Drop the traffic-rule penalty from the planning margin.
    #[arg(long)]
    no_penalty: bool,
    /// Train without the max-margin planning term.
    #[arg(long)]
    no_plan_loss: bool,
    /// Train without the detection and regression terms.
    #[arg(long)]
    no_perception_loss: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Directory of evaluation scenario JSON files.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to evaluate.
    #[arg(long)]
    model: PathBuf,
    /// Output directory for eval.json and rows.csv.
    #[arg(long)]
    out: PathBuf,
    /// Manual baseline reads ground-truth actor boxes instead of detections.
    #[arg(long)]
    manual_ground_truth: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output BEVT path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Bev(#[from] nmp::bev::BevError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Train(TrainError::NonFinite { .. }) => 3,
            _ => 2,
        }
    }
}

fn main() {
    if let Ok(v) = std::env::var("NMP_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, bad usage is not.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("nmp: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Dump(a) => cmd_dump(a),
        Command::Selfcheck => cmd_selfcheck(),
    }
}

fn cmd_gen(a: GenArgs) -> Result<(), AppError> {
    let cfg = a.config.load()?;
    std::fs::create_dir_all(&a.out)?;
    cfg.save(&a.out.join("config.toml"))?;
    let summary = write_set(&cfg.gen, &a.out, (a.train, a.val, a.test), a.seed)?;
    println!(
        "generated {} train, {} val, {} test scenarios in {}",
        summary.train,
        summary.val,
        summary.test,
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    config_hash: String,
    scenarios: usize,
    steps: usize,
    best_epoch: usize,
    best_epoch_mean: f64,
    final_total: f64,
}

fn cmd_train(a: TrainArgs) -> Result<(), AppError> {
    let mut cfg = a.config.load()?;
    if let Some(steps) = a.steps {
        cfg.train.steps = steps;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    cfg.loss.use_penalty &= !a.no_penalty;
    cfg.loss.use_plan_loss &= !a.no_plan_loss;
    cfg.loss.use_perception_loss &= !a.no_perception_loss;

    let scenarios = load_dir(&a.data)?;
    std::fs::create_dir_all(&a.out)?;
    cfg.save(&a.out.join("config.toml"))?;

    let log_every = cfg.train.log_every.max(1);
    let report = train(&cfg, &scenarios, |log| {
        if log.step % log_every == 0 || log.step + 1 == cfg.train.steps {
            eprintln!(
                "step {:>5}  total {:>9.4}  cls {:>8.4}  reg {:>8.4}  plan {}",
                log.step,
                log.total,
                log.cls,
                log.reg,
                log.plan.map_or("     -".to_string(), |p| format!("{p:>9.4}")),
            );
        }
    })?;

    let mut csv = String::from(STEP_CSV_HEADER);
    csv.push('\n');
    for log in &report.history {
        csv.push_str(&log.csv_row());
        csv.push('\n');
    }
    std::fs::write(a.out.join("steps.csv"), csv)?;
    save_checkpoint(&report.store, &a.out.join("model_last.ckpt"))?;
    save_checkpoint(&report.best_store, &a.out.join("model_best.ckpt"))?;
    let summary = TrainSummary {
        config_hash: format!("{:016x}", cfg.hash()),
        scenarios: scenarios.len(),
        steps: report.history.len(),
        best_epoch: report.best_epoch,
        best_epoch_mean: report.best_epoch_mean,
        final_total: report.history.last().map_or(0.0, |l| l.total),
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    println!(
        "trained {} steps on {} scenarios; final total {:.4}; artifacts in {}",
        summary.steps,
        summary.scenarios,
        summary.final_total,
        a.out.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), AppError> {
    let mut cfg = a.config.load()?;
    cfg.eval.manual_use_ground_truth |= a.manual_ground_truth;
    let scenarios = load_dir(&a.data)?;
    let store: ParamStore<f32> = load_checkpoint(&a.model, cfg.train.seed)?;
    let out = evaluate_dataset(&cfg, &store, &scenarios)?;
    std::fs::create_dir_all(&a.out)?;
    cfg.save(&a.out.join("config.toml"))?;
    write_json(&a.out.join("eval.json"), &out)?;
    std::fs::write(a.out.join("rows.csv"), rows_csv(&out))?;
    for m in &out.methods {
        let k = m.metrics.horizons.len() - 1;
        println!(
            "{:<22} l2@3s {:>6.3} m  collision {:>5.1}%  lane-violation {:>5.1}%",
            m.method,
            m.metrics.l2_at[k],
            100.0 * m.metrics.collision_rate_at[k],
            100.0 * m.metrics.lane_violation_at[k],
        );
    }
    println!("detection AP {:.3}  ({} scenarios)", out.detection_ap, out.n_scenarios);
    Ok(())
}

fn cmd_dump(a: DumpArgs) -> Result<(), AppError> {
    let cfg = a.config.load()?;
    let scenario = nmp::scenario::load(&a.scenario)?;
    let raster = rasterize_input::<f32>(&scenario, &cfg.roi, &cfg.cloud)?;
    dump_bevt(&raster, &a.out)?;
    println!(
        "wrote {} ({} channels, {}x{})",
        a.out.display(),
        raster.c,
        raster.h,
        raster.w
    );
    Ok(())
}

fn cmd_selfcheck() -> Result<(), AppError> {
    let root = std::env::temp_dir().join(format!("nmp-selfcheck-{}", std::process::id()));
    if root.exists() {
        std::fs::remove_dir_all(&root)?;
    }
    std::fs::create_dir_all(&root)?;
    let root = root.as_path();
    let mut cfg = RunConfig::desk();
    cfg.roi.cell = 0.8;
    cfg.roi.t_prime = 2;
    cfg.model.block_layers = [1, 1, 1, 1, 1];
    cfg.model.block_filters = [4, 4, 4, 4, 8];
    cfg.model.cost_channels = [4, 4];
    cfg.sampler.n_negatives = 8;
    cfg.sampler.n_samples = 40;
    cfg.gen.roi = cfg.roi;
    cfg.train.steps = 4;
    cfg.validate()?;
    let cfg_path = root.join("config.toml");
    cfg.save(&cfg_path)?;

    run(Cli::parse_from([
        "nmp", "gen",
        "--config", cfg_path.to_str().unwrap(),
        "--out", root.join("data").to_str().unwrap(),
        "--train", "2", "--val", "1", "--test", "2",
    ]))?;
    run(Cli::parse_from([
        "nmp", "train",
        "--config", cfg_path.to_str().unwrap(),
        "--data", root.join("data/train").to_str().unwrap(),
        "--out", root.join("run").to_str().unwrap(),
    ]))?;
    run(Cli::parse_from([
        "nmp", "eval",
        "--config", cfg_path.to_str().unwrap(),
        "--data", root.join("data/test").to_str().unwrap(),
        "--model", root.join("run/model_last.ckpt").to_str().unwrap(),
        "--out", root.join("run/eval").to_str().unwrap(),
    ]))?;
    for artifact in ["run/steps.csv", "run/model_last.ckpt", "run/eval/eval.json"] {
        if !root.join(artifact).exists() {
            return Err(AppError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("selfcheck artifact missing: {artifact}"),
            )));
        }
    }
    std::fs::remove_dir_all(root)?;
    println!("selfcheck ok");
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
