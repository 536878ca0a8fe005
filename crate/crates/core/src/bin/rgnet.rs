use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rgnet::pipeline::{ModelKind, Pipeline, PipelineConfig, Stage, Task};

/// Engagement prediction pipeline for threaded discussions.
#[derive(Parser, Debug)]
#[command(name = "rgnet", version, about)]
struct Cli {
    /// JSON configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-threaded numerics.
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    #[arg(long, global = true)]
    task: Option<Task>,
    /// Feature ablation as GROUP:MODE, e.g. user:drop or surface:noise.
    #[arg(long, global = true, value_name = "GROUP:MODE")]
    ablate: Option<String>,
    /// Overrides the working directory from the configuration.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// Use the small desk-scale defaults.
    #[arg(long, global = true)]
    desk: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and filter the raw corpus, split it chronologically.
    Ingest,
    /// Build the user co-occurrence matrix from the training split.
    Cooccur,
    /// Train user embeddings.
    Embed,
    /// Cluster the user embeddings.
    Cluster,
    /// Build model-ready features for the configured task.
    Featurize,
    /// Train the configured model.
    Train,
    /// Score the trained model on the held-out split.
    Evaluate,
    /// Write predictions for the held-out split.
    Predict,
    /// Emit homogeneity, growth-error and distance diagnostics.
    Diagnose,
    /// Generate a synthetic corpus with a planted engagement rule.
    Synth {
        #[arg(long, default_value = "temporal")]
        kind: Task,
    },
    /// Keep all posts without comments plus as many commented posts.
    Balance {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run ingest through diagnose.
    Run,
    /// Print the effective configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PipelineConfig::from_json(&text).with_context(|| format!("loading {}", p.display()))?
        }
        None if cli.desk => PipelineConfig::desk(),
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.model {
        cfg.model = m;
    }
    if let Some(t) = cli.task {
        cfg.task = t;
    }
    if let Some(a) = &cli.ablate {
        cfg.ablation = Some(a.clone());
    }
    if let Some(w) = &cli.work_dir {
        cfg.paths.work_dir = w.clone();
    }
    cfg.deterministic |= cli.deterministic;
    match &cli.command {
        Command::Synth { kind } => cfg.synth_kind = *kind,
        Command::Balance { output: Some(o) } => cfg.balance_output = Some(o.clone()),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    if cfg.deterministic {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .context("configuring single-threaded execution")?;
    }
    if let Command::Config = cli.command {
        print!("{}", cfg.to_json()?);
        return Ok(());
    }
    let pipeline = Pipeline::new(cfg)?;
    let written = match &cli.command {
        Command::Run => pipeline.run_all()?,
        other => {
            let stage = match other {
                Command::Ingest => Stage::Ingest,
                Command::Cooccur => Stage::Cooccur,
                Command::Embed => Stage::Embed,
                Command::Cluster => Stage::Cluster,
                Command::Featurize => Stage::Featurize,
                Command::Train => Stage::Train,
                Command::Evaluate => Stage::Evaluate,
                Command::Predict => Stage::Predict,
                Command::Diagnose => Stage::Diagnose,
                Command::Synth { .. } => Stage::Synth,
                Command::Balance { .. } => Stage::Balance,
                Command::Run | Command::Config => unreachable!(),
            };
            pipeline.run_stage(stage)?
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}
