#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rgnet::corpus::growth_from_span;
use rgnet::dataset::TemporalSample;
use rgnet::metrics::DiagnosticsSummary;
use rgnet::model::RgnetConfig;
use rgnet::newton::NewtonConfig;
use rgnet::pipeline::{EvalReport, ModelKind, Paths, Pipeline, PipelineConfig, Stage, Task};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Desk configuration with every path inside `dir`.
pub fn desk_config(dir: &Path, seed: u64) -> PipelineConfig {
    let data = dir.join("data");
    PipelineConfig {
        paths: Paths {
            corpus: data.join("corpus.jsonl"),
            words: Some(data.join("words.txt")),
            sentiment: Some(data.join("sentiment.txt")),
            stopwords: Some(data.join("stopwords.txt")),
            work_dir: dir.join("work"),
        },
        seed,
        ..PipelineConfig::desk()
    }
}

pub fn report(p: &Pipeline) -> EvalReport {
    serde_json::from_str(&std::fs::read_to_string(p.report_path()).unwrap()).unwrap()
}

pub fn diagnostics_summary(p: &Pipeline) -> DiagnosticsSummary {
    let path = p.config.paths.work_dir.join("diagnostics_summary.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Generates the planted temporal corpus and runs every stage.
pub fn temporal_run(dir: &Path, seed: u64, offset: bool) -> Pipeline {
    let cfg = PipelineConfig {
        engagement_offset: offset,
        ..desk_config(dir, seed)
    };
    let p = Pipeline::new(cfg).unwrap();
    p.run_stage(Stage::Synth).unwrap();
    p.run_all().unwrap();
    p
}

/// Retrains and re-evaluates on the artifacts of an earlier run with a
/// different model or ablation.
pub fn rerun(base: &Pipeline, model: ModelKind, ablation: Option<&str>) -> EvalReport {
    let cfg = PipelineConfig {
        model,
        ablation: ablation.map(str::to_string),
        ..base.config.clone()
    };
    let p = Pipeline::new(cfg).unwrap();
    if ablation.is_some() || base.config.ablation.is_some() {
        p.run_stage(Stage::Featurize).unwrap();
    }
    p.run_stage(Stage::Train).unwrap();
    p.run_stage(Stage::Evaluate).unwrap();
    report(&p)
}

/// Generates, balances and runs the one-shot task.
pub fn nontemporal_run(dir: &Path, seed: u64) -> Pipeline {
    let mut cfg = desk_config(dir, seed);
    cfg.synth_kind = Task::Nontemporal;
    let balanced = dir.join("data/balanced.jsonl");
    cfg.balance_output = Some(balanced.clone());
    let gen = Pipeline::new(cfg.clone()).unwrap();
    gen.run_stage(Stage::Synth).unwrap();
    gen.run_stage(Stage::Balance).unwrap();
    cfg.paths.corpus = balanced;
    cfg.task = Task::Nontemporal;
    let p = Pipeline::new(cfg).unwrap();
    p.run_all().unwrap();
    p
}

pub fn toy_rgnet(offset: bool) -> RgnetConfig {
    RgnetConfig {
        post_width: 5,
        comment_width: 4,
        dim: 4,
        clusters: 3,
        max_windows: 3,
        h1: 6,
        h2: 5,
        h3: 4,
        lambda: 1.0,
        engagement_offset: offset,
    }
}

pub fn toy_newton() -> NewtonConfig {
    NewtonConfig {
        post_width: 5,
        comment_width: 4,
        dim: 4,
        clusters: 3,
        max_windows: 3,
        window_size: 2,
        h1: 6,
        h2: 5,
        lambda: 1.0,
    }
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Random sample with `steps` labelled steps, plus random cluster centers.
pub fn toy_sample(
    rng: &mut ChaCha8Rng,
    post_width: usize,
    comment_width: usize,
    dim: usize,
    clusters: usize,
    max_windows: usize,
    window_size: usize,
    steps: usize,
) -> (TemporalSample, Vec<Vec<f64>>) {
    let mut taus: Vec<f64> = (0..=max_windows).map(|_| rng.random_range(0.0..1.0)).collect();
    taus[0] = 0.0;
    taus.sort_by(f64::total_cmp);
    let s = TemporalSample {
        id: "toy".into(),
        post: uniform(rng, post_width, 1.0),
        windows: (0..steps).map(|_| uniform(rng, comment_width, 1.0)).collect(),
        taus,
        labels: (0..steps)
            .map(|_| (0..clusters).map(|_| rng.random_range(0..2u8)).collect())
            .collect(),
        growth: (0..steps)
            .map(|_| {
                let t0 = rng.random_range(0..1000);
                growth_from_span(rng.random_range(1..=window_size.max(1)), t0, t0 + rng.random_range(0..120)).unwrap()
            })
            .collect(),
        commenters: (0..steps * window_size)
            .map(|_| rng.random_bool(0.7).then(|| uniform(rng, dim, 1.0)))
            .collect(),
        logreg: vec![],
        engaged: vec![],
    };
    let centers = (0..clusters).map(|_| uniform(rng, dim, 1.0)).collect();
    (s, centers)
}
