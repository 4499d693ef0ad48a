use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use ccmt_core::baselines::{Fuser, FuserKind, FuserSpec};
use ccmt_core::ccmt::{scan_checkpoint, CcmtConfig, CHECKPOINT_MAGIC};
use ccmt_core::synthgen::{write_dataset, ModalityAmplitudes, SynthConfig, DEFAULT_ORACLE_SAMPLES};
use ccmt_core::tokenstore::{
    load_manifest, scan_embeddings, Modality, SampleRecord, Split, EMBEDDING_MAGIC,
};
use ccmt_core::trainer::{
    evaluate, fuser_grad_check, load_checkpoint, save_checkpoint, train, write_history,
    TrainConfig, EVAL_SEED,
};

const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "ccmt",
    version,
    about = "Cascaded cross-modal transformer toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with oracle metadata
    Synth(SynthArgs),
    /// Train a fuser on a manifest's train split
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a manifest
    Eval(EvalArgs),
    /// Finite-difference gradient check of a fuser
    Gradcheck(GradcheckArgs),
    /// Dump the headers of an embedding file or checkpoint
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_dev: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    flip_prob: Option<f64>,
    #[arg(long)]
    injection_prob: Option<f64>,
    /// Plant no signal at all (every amplitude 0)
    #[arg(long)]
    zero_signal: bool,
    #[arg(long, default_value_t = DEFAULT_ORACLE_SAMPLES)]
    oracle_samples: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON-lines manifest with train and dev entries
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = FusionArg::Ccmt)]
    fusion: FusionArg,
    /// Comma-separated subset of fr, en, audio
    #[arg(long, default_value = "fr,en,audio", value_parser = parse_modalities)]
    modalities: Modalities,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    #[arg(long, default_value_t = 1)]
    heads: usize,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    /// Checkpoint path; the history goes next to it as `<out>.history.jsonl`
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Dev)]
    split: SplitArg,
}

#[derive(Args)]
struct GradcheckArgs {
    /// `tiny` or a JSON model config file
    #[arg(long, default_value = "tiny")]
    config: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FusionArg::Ccmt)]
    fusion: FusionArg,
    #[arg(long, default_value = "fr,en,audio", value_parser = parse_modalities)]
    modalities: Modalities,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    file: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Ccmt,
    Transformer,
    Mlp,
    Voting,
}

impl From<FusionArg> for FuserKind {
    fn from(f: FusionArg) -> Self {
        match f {
            FusionArg::Ccmt => FuserKind::Ccmt,
            FusionArg::Transformer => FuserKind::Transformer,
            FusionArg::Mlp => FuserKind::Mlp,
            FusionArg::Voting => FuserKind::Voting,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Dev,
    Test,
}

#[derive(Clone)]
struct Modalities(Vec<Modality>);

fn parse_modalities(s: &str) -> Result<Modalities, String> {
    s.split(',')
        .map(|p| p.trim().parse::<Modality>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map(Modalities)
}

fn emit(value: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_split(manifest: &Path, split: Split) -> anyhow::Result<Vec<SampleRecord>> {
    let entries = load_manifest(manifest)?;
    let records = entries
        .par_iter()
        .filter(|e| e.split == split)
        .map(|e| e.load())
        .collect::<Result<Vec<_>, _>>()?;
    info!(
        "{}: {} {split:?} samples",
        manifest.display(),
        records.len()
    );
    Ok(records)
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut cfg = SynthConfig {
        seed: args.seed,
        ..SynthConfig::default()
    };
    if let Some(n) = args.n_train {
        cfg.n_train = n;
    }
    if let Some(n) = args.n_dev {
        cfg.n_dev = n;
    }
    if let Some(d) = args.dim {
        cfg.dim = d;
    }
    if let Some(s) = args.noise_sigma {
        cfg.noise_sigma = s;
    }
    if let Some(p) = args.flip_prob {
        cfg.label_flip_prob = p;
    }
    if let Some(p) = args.injection_prob {
        cfg.injection_prob = p;
    }
    if args.zero_signal {
        cfg.amplitudes.request = ModalityAmplitudes::ZERO;
        cfg.amplitudes.complaint = ModalityAmplitudes::ZERO;
    }
    cfg.validate()?;
    info!(
        "synth config (seed {}): {}",
        cfg.seed,
        serde_json::to_string(&cfg)?
    );
    let meta = write_dataset(&cfg, &args.out, args.oracle_samples)?;
    if !meta.fusion_necessity_holds && !args.zero_signal {
        warn!(
            "complaint fusion gap {:.4} is below the designed margin",
            meta.complaint_fusion_gap
        );
    }
    emit(&json!({
        "out": args.out,
        "manifest": args.out.join("manifest.jsonl"),
        "meta": meta,
    }))
}

fn train_cmd(args: TrainArgs) -> anyhow::Result<()> {
    let train_set = load_split(&args.data, Split::Train)?;
    let dev_set = load_split(&args.data, Split::Dev)?;
    let dim = match train_set.first().and_then(SampleRecord::dim) {
        Some(d) => d,
        None => bail!(ccmt_core::Error::Config(format!(
            "{} has no train entries",
            args.data.display()
        ))),
    };
    let mut model = CcmtConfig::with_dim(dim);
    model.k = args.k;
    model.heads = args.heads;
    model.d_h = dim / args.heads.max(1);
    model.depth = args.depth;
    let spec = FuserSpec::new(args.fusion.into(), &args.modalities.0);
    let fuser = Fuser::new(spec, model)?;
    let cfg = TrainConfig {
        lr: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        weight_decay: args.weight_decay,
        seed: args.seed,
        k: args.k,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    info!(
        "train config (seed {}): fuser {} model {} train {}",
        cfg.seed,
        serde_json::to_string(&fuser.spec)?,
        serde_json::to_string(&fuser.cfg)?,
        serde_json::to_string(&cfg)?
    );
    let started = Instant::now();
    let outcome = train(&fuser, &train_set, &dev_set, &cfg)?;
    save_checkpoint(&args.out, &fuser, Some(&cfg), &outcome.params)?;
    let mut history_path = args.out.clone().into_os_string();
    history_path.push(".history.jsonl");
    let history_path = PathBuf::from(history_path);
    write_history(&history_path, &outcome.history)?;
    info!(
        "best epoch {} (dev mean uar {:.4}) after {:.1}s",
        outcome.best_epoch,
        outcome.best_dev.mean_uar,
        started.elapsed().as_secs_f64()
    );
    emit(&json!({
        "checkpoint": args.out,
        "history": history_path,
        "seed": cfg.seed,
        "fuser": fuser.spec,
        "model": fuser.cfg,
        "train": cfg,
        "best_epoch": outcome.best_epoch,
        "best_dev": outcome.best_dev,
    }))
}

fn eval_cmd(args: EvalArgs) -> anyhow::Result<()> {
    let (fuser, stored, params) = load_checkpoint(&args.ckpt)?;
    let split = match args.split {
        SplitArg::Dev => Split::Dev,
        SplitArg::Test => Split::Test,
    };
    info!(
        "eval {} on {split:?} (eval seed {EVAL_SEED}): {}",
        args.ckpt.display(),
        serde_json::to_string(&stored)?
    );
    let data = load_split(&args.data, split)?;
    if data.is_empty() {
        bail!(ccmt_core::Error::Config(format!(
            "{} has no {split:?} entries",
            args.data.display()
        )));
    }
    let metrics = evaluate(&fuser, &params, &data, EVAL_SEED)?;
    if metrics.degenerate() {
        warn!("a task has single-class ground truth; its UAR is that class's recall");
    }
    emit(&serde_json::to_value(metrics)?)
}

fn gradcheck_cmd(args: GradcheckArgs) -> anyhow::Result<bool> {
    let model = if args.config == "tiny" {
        CcmtConfig::tiny()
    } else {
        let text = std::fs::read_to_string(&args.config)
            .with_context(|| format!("reading {}", args.config))?;
        serde_json::from_str(&text).map_err(ccmt_core::Error::from)?
    };
    let fuser = Fuser::new(
        FuserSpec::new(args.fusion.into(), &args.modalities.0),
        model,
    )?;
    info!(
        "gradcheck (seed {}, eps {}): fuser {} model {}",
        args.seed,
        args.eps,
        serde_json::to_string(&fuser.spec)?,
        serde_json::to_string(&fuser.cfg)?
    );
    let started = Instant::now();
    let report = fuser_grad_check(&fuser, args.seed, args.eps)?;
    let passed = report.max_rel_error < GRAD_TOLERANCE;
    emit(&json!({
        "seed": args.seed,
        "eps": args.eps,
        "tolerance": GRAD_TOLERANCE,
        "passed": passed,
        "seconds": started.elapsed().as_secs_f64(),
        "report": report,
    }))?;
    Ok(passed)
}

fn inspect_cmd(args: InspectArgs) -> anyhow::Result<()> {
    let bytes = std::fs::read(&args.file).map_err(|e| ccmt_core::Error::Io {
        path: args.file.clone(),
        source: e,
    })?;
    let value = if bytes.starts_with(EMBEDDING_MAGIC) {
        json!({
            "file": args.file,
            "kind": "embeddings",
            "bytes": bytes.len(),
            "modalities": scan_embeddings(&bytes)?,
        })
    } else if bytes.starts_with(CHECKPOINT_MAGIC) {
        let (config, tensors) = scan_checkpoint(&bytes)?;
        let numel: usize = tensors
            .iter()
            .map(|t| t.shape.iter().product::<usize>())
            .sum();
        json!({
            "file": args.file,
            "kind": "checkpoint",
            "bytes": bytes.len(),
            "config": config,
            "parameters": numel,
            "tensors": tensors,
        })
    } else {
        bail!(ccmt_core::Error::Format {
            offset: 0,
            message: "neither an embedding file nor a checkpoint".into(),
        });
    };
    emit(&value)
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("CCMT_THREADS") {
        let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            ccmt_core::Error::Config(format!("CCMT_THREADS={raw:?} is not a positive integer"))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building the worker pool")?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ccmt_core::Error>() {
        Some(e) if e.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let result = configure_threads().and_then(|()| match cli.command {
        Command::Synth(a) => synth(a).map(|()| true),
        Command::Train(a) => train_cmd(a).map(|()| true),
        Command::Eval(a) => eval_cmd(a).map(|()| true),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Inspect(a) => inspect_cmd(a).map(|()| true),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("gradient check failed: relative error at or above {GRAD_TOLERANCE}");
            ExitCode::from(2)
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
