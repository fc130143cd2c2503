//! Command-line front end: generate synthetic datasets, train the four
//! method variants, curate an existing sample file against a checkpoint, and
//! evaluate checkpoints. All outputs are deterministic given (config, seed);
//! exit codes are 0 = success, 2 = config/format error, 3 = numerical
//! divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use synthaug::augment::{filter_by_entropy, load_batch, write_entropy_grid};
use synthaug::coreset::{compute_proxies, save_selection, select, CoresetSelection};
use synthaug::data::{load_dataset, make_synthetic, save_dataset, SynthSpec};
use synthaug::model::{load_checkpoint, save_checkpoint, ModelConfig};
use synthaug::trainer::{evaluate, train, TrainSchedule};
use synthaug::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "synthaug", version, about = "Semi-supervised training with entropy-filtered, coreset-weighted synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-mixture dataset file.
    GenData(GenDataArgs),
    /// Train a model variant on a dataset file.
    Train(TrainArgs),
    /// Filter and coreset-select an existing sample file with a checkpoint.
    Curate(CurateArgs),
    /// Report test accuracy of a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
}

/// The four method variants: plain semi-supervised training, entropy-filtered
/// augmentation, entropy + coreset selection, and entropy + coreset +
/// pseudo-labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Variant {
    Baseline,
    Entropy,
    EntropyCraig,
    EntropyCraigPl,
}

/// Full run description; every field can come from a JSON config file and be
/// overridden by a flag.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    data: SynthSpec,
    model: ModelConfig,
    schedule: TrainSchedule,
    variant: Option<Variant>,
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, Error> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                offset: 0,
                detail: format!("config {}: {e}", p.display()),
            })
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for all outputs (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Size of the internal thread pool (default: all cores). Results are
    /// identical for any value.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long)]
    data_dim: Option<usize>,
    #[arg(long)]
    num_labeled: Option<usize>,
    #[arg(long)]
    num_unlabeled: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Output file name inside out-dir.
    #[arg(long, default_value = "dataset.bin")]
    name: String,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset file produced by gen-data.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total training iterations T.
    #[arg(long)]
    total_iters: Option<usize>,
    /// Iteration at which augmentation starts.
    #[arg(long = "t-a")]
    t_a: Option<usize>,
    /// Langevin steps per synthesis chain.
    #[arg(long = "t-ld")]
    t_ld: Option<usize>,
    #[arg(long)]
    langevin_step_size: Option<f64>,
    #[arg(long)]
    entropy_threshold: Option<f64>,
    #[arg(long)]
    coreset_fraction: Option<f64>,
    /// Synthetic samples generated per refresh.
    #[arg(long)]
    num_synthetic: Option<usize>,
    #[arg(long)]
    refresh_every: Option<usize>,
    #[arg(long)]
    aug_loss_coefficient: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Args)]
struct CurateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sample file in the augmentation format.
    #[arg(long)]
    samples: PathBuf,
    /// Model checkpoint used for proxies.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Entropy threshold; samples at or above it are dropped.
    #[arg(long, default_value_t = f64::INFINITY)]
    threshold: f64,
    /// Fraction of surviving samples to keep as the coreset.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    n_mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::ChainDiverged { .. }
        | Error::TrainingDiverged { .. }
        | Error::NonFiniteGradient { .. } => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

fn prepare_common(common: &CommonArgs) -> Result<RunConfig, Error> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&common.out_dir)?;
    load_config(common.config.as_ref())
}

fn apply_variant(schedule: &mut TrainSchedule, variant: Variant) {
    match variant {
        Variant::Baseline => {
            // never reaches the augmentation phase
            schedule.augment_at = schedule.total_iters + 1;
            schedule.pseudo_label_enabled = false;
        }
        Variant::Entropy => {
            schedule.coreset_fraction = 1.0;
            schedule.pseudo_label_enabled = false;
        }
        Variant::EntropyCraig => {
            schedule.pseudo_label_enabled = false;
        }
        Variant::EntropyCraigPl => {
            schedule.pseudo_label_enabled = true;
        }
    }
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<(), Error> {
    let config = prepare_common(&args.common)?;
    let mut spec = config.data;
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.num_classes {
        spec.num_classes = v;
    }
    if let Some(v) = args.data_dim {
        spec.data_dim = v;
    }
    if let Some(v) = args.num_labeled {
        spec.num_labeled = v;
    }
    if let Some(v) = args.num_unlabeled {
        spec.num_unlabeled = v;
    }
    if let Some(v) = args.test_size {
        spec.test_size = v;
    }
    let split = make_synthetic(&spec)?;
    let path = args.common.out_dir.join(&args.name);
    save_dataset(&split, &path)?;
    println!(
        "wrote {} ({} labeled, {} unlabeled, {} test, D={}, K={})",
        path.display(),
        split.labeled.len(),
        split.unlabeled.len(),
        split.test.len(),
        split.data_dim,
        split.num_classes
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), Error> {
    let config = prepare_common(&args.common)?;
    let mut schedule = config.schedule;
    if let Some(v) = args.seed {
        schedule.seed = v;
    }
    if let Some(v) = args.total_iters {
        schedule.total_iters = v;
    }
    if let Some(v) = args.t_a {
        schedule.augment_at = v;
    }
    if let Some(v) = args.t_ld {
        schedule.langevin_steps = v;
    }
    if let Some(v) = args.langevin_step_size {
        schedule.langevin_step_size = v;
    }
    if let Some(v) = args.entropy_threshold {
        schedule.entropy_threshold = v;
    }
    if let Some(v) = args.coreset_fraction {
        schedule.coreset_fraction = v;
    }
    if let Some(v) = args.num_synthetic {
        schedule.num_synthetic = v;
    }
    if let Some(v) = args.refresh_every {
        schedule.coreset_refresh_every = v;
    }
    if let Some(v) = args.aug_loss_coefficient {
        schedule.aug_loss_coefficient = v;
    }
    if let Some(v) = args.eval_every {
        schedule.eval_every = v;
    }
    if let Some(variant) = args.variant.or(config.variant) {
        apply_variant(&mut schedule, variant);
    }
    let data = load_dataset(&args.dataset)?;
    let (params, report) = train(&data, &config.model, &schedule)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    save_checkpoint(&params, &args.common.out_dir.join("checkpoint.bin"))?;
    report.write_csv(&args.common.out_dir.join("report.csv"))?;
    report.write_json(&args.common.out_dir.join("report.json"))?;
    if let Some(acc) = report.final_accuracy() {
        println!("final accuracy {acc}");
    }
    Ok(())
}

fn cmd_curate(args: &CurateArgs) -> Result<(), Error> {
    prepare_common(&args.common)?;
    let batch = load_batch(&args.samples)?;
    let params = load_checkpoint(&args.checkpoint)?;
    let filtered = filter_by_entropy(&batch, args.threshold)?;
    let selection_path = args.common.out_dir.join("selection.tsv");
    if filtered.is_empty() {
        let empty = CoresetSelection {
            indices: vec![],
            weights: vec![],
            budget: 0,
            residual: 0.0,
        };
        save_selection(&empty, &selection_path)?;
        println!("0 of {} samples survived the filter", batch.len());
        return Ok(());
    }
    let pairs: Vec<(Vec<f64>, usize)> = filtered
        .samples
        .iter()
        .map(|s| (s.x.clone(), s.y))
        .collect();
    let proxies = compute_proxies(&params, &pairs)?;
    let budget = ((args.fraction * filtered.len() as f64).ceil() as usize)
        .clamp(1, filtered.len());
    let selection = select(&proxies, budget)?;
    save_selection(&selection, &selection_path)?;
    let d = filtered.samples[0].x.len();
    let side = (d as f64).sqrt() as usize;
    if side * side == d {
        write_entropy_grid(&filtered, &args.common.out_dir.join("grid.pgm"))?;
    }
    println!(
        "selected {} of {} survivors (residual {})",
        selection.indices.len(),
        filtered.len(),
        selection.residual
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    prepare_common(&args.common)?;
    let params = load_checkpoint(&args.checkpoint)?;
    let data = load_dataset(&args.dataset)?;
    let accuracy = evaluate(&params, &data.test, args.n_mc, args.seed)?;
    println!("{accuracy}");
    println!(
        "{}",
        serde_json::json!({
            "accuracy": accuracy,
            "test_size": data.test.len(),
            "n_mc": args.n_mc,
            "seed": args.seed,
        })
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Curate(a) => cmd_curate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
