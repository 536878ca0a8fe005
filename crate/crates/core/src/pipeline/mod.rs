//! Stage-by-stage pipeline over a working directory of artifacts.
//!
//! Every stage reads its inputs from the working directory, writes its
//! outputs atomically and records input/output hashes in `manifest.json`.
//! Nothing time-dependent is recorded, so identical inputs and seed give
//! byte-identical artifacts.

mod config;
mod features;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{ModelKind, Paths, PipelineConfig, Task};
pub use features::{build_lexicons, chronological_split, nontemporal_dataset, temporal_dataset, FeatureContext, Split};

use crate::corpus::{corpus_to_string, parse_corpus, Corpus};
use crate::dataset::{NontemporalDataset, StepOutput, TemporalDataset, TemporalSample};
use crate::error::{Error, Result};
use crate::guvec::{
    build_cooccurrence, cooccurrence_to_string, embedding_to_string, parse_cooccurrence, parse_embedding, parse_users,
    sparsity_profile, train_guvec, users_to_string, EmbeddingModel, GuvecOpts, UserIndex,
};
use crate::io::{read_text, write_atomic};
use crate::logreg::{LogReg, LogRegConfig};
use crate::manifold::{centers_to_string, clusters_to_string, homogeneity_entropy, kmeans, parse_clusters, ClusterModel};
use crate::metrics::{
    auc, growth_error, intra_cluster_distances, multilabel_metrics, vector_accuracy, Diagnostics, DiagnosticsSummary,
    DistanceRow, GrowthRow, HomogeneityRow, MultiLabelReport,
};
use crate::model::{mean_loss, spacetime_row, train, Rgnet, RgnetConfig, TrainLog, TrainOpts};
use crate::newton::{Newton, NewtonConfig};
use crate::optim::{checkpoint_from_str, checkpoint_to_string};
use crate::synth::{make_lexicons, make_nontemporal, make_temporal, nontemporal_balance};
use crate::textfeat::FeatureStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Cooccur,
    Embed,
    Cluster,
    Featurize,
    Train,
    Evaluate,
    Predict,
    Diagnose,
    Synth,
    Balance,
}

impl Stage {
    /// The stages of a full run, in order.
    pub const RUN: [Stage; 8] = [
        Stage::Ingest,
        Stage::Cooccur,
        Stage::Embed,
        Stage::Cluster,
        Stage::Featurize,
        Stage::Train,
        Stage::Evaluate,
        Stage::Diagnose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Cooccur => "cooccur",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Featurize => "featurize",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Predict => "predict",
            Stage::Diagnose => "diagnose",
            Stage::Synth => "synth",
            Stage::Balance => "balance",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Stage::Ingest,
            Stage::Cooccur,
            Stage::Embed,
            Stage::Cluster,
            Stage::Featurize,
            Stage::Train,
            Stage::Evaluate,
            Stage::Predict,
            Stage::Diagnose,
            Stage::Synth,
            Stage::Balance,
        ]
        .into_iter()
        .find(|st| st.name() == s)
        .ok_or_else(|| Error::invalid(format!("unknown stage `{s}`")))
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Provenance of the latest run of one stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub mean_error_pct: f64,
    pub steps: usize,
    pub excluded: usize,
}

/// Held-out evaluation of one model on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub task: Task,
    pub ablation: Option<String>,
    pub samples: usize,
    /// Scored (discussion, step) pairs, or posts for the one-shot task.
    pub instances: usize,
    pub multilabel: MultiLabelReport,
    /// Not produced by the logistic baseline, which has no growth head.
    pub growth: Option<GrowthSummary>,
    /// One-shot task only, when both classes are present.
    pub auc: Option<f64>,
}

/// A trained model of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Rgnet(Rgnet),
    Newton(Newton),
    LogReg(LogReg),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Rgnet(_) => ModelKind::Rgnet,
            TrainedModel::Newton(_) => ModelKind::Newtonian,
            TrainedModel::LogReg(_) => ModelKind::Logreg,
        }
    }

    pub fn to_checkpoint(&self, task: Task) -> Result<String> {
        let (meta, store) = match self {
            TrainedModel::Rgnet(m) => (serde_json::json!({"task": task, "config": m.config}), &m.store),
            TrainedModel::Newton(m) => (serde_json::json!({"task": task, "config": m.config}), &m.store),
            TrainedModel::LogReg(m) => (serde_json::json!({"task": task, "config": m.config, "stats": m.stats}), &m.store),
        };
        checkpoint_to_string(self.kind().tag(), &meta, store)
    }

    pub fn from_checkpoint(text: &str) -> Result<(Self, Task)> {
        let ck = checkpoint_from_str(text)?;
        let task: Task = serde_json::from_value(ck.meta["task"].clone())?;
        let config = ck.meta["config"].clone();
        let model = match ck.tag.parse::<ModelKind>()? {
            ModelKind::Rgnet => TrainedModel::Rgnet(Rgnet::from_store(serde_json::from_value(config)?, ck.store)?),
            ModelKind::Newtonian => TrainedModel::Newton(Newton::from_store(serde_json::from_value(config)?, ck.store)?),
            ModelKind::Logreg => {
                let stats: Vec<FeatureStats> = serde_json::from_value(ck.meta["stats"].clone())?;
                TrainedModel::LogReg(LogReg::from_parts(serde_json::from_value(config)?, stats, ck.store)?)
            }
        };
        Ok((model, task))
    }

    /// Outputs at every labelled step of a temporal sample. The logistic
    /// baseline reports a growth estimate of zero.
    pub fn predict_sample(&self, s: &TemporalSample, centers: &[Vec<f64>]) -> Result<Vec<StepOutput>> {
        match self {
            TrainedModel::Rgnet(m) => Ok(m
                .forward_trace(s, centers)?
                .steps
                .into_iter()
                .map(|t| StepOutput { y1: t.y1, y2: t.y2 })
                .collect()),
            TrainedModel::Newton(m) => (0..s.steps()).map(|i| m.predict_step(s, centers, i)).collect(),
            TrainedModel::LogReg(m) => (0..s.steps())
                .map(|i| {
                    let y1 = (0..m.config.outputs)
                        .map(|c| m.predict(c, &s.logreg[i][c]))
                        .collect::<Result<_>>()?;
                    Ok(StepOutput { y1, y2: 0.0 })
                })
                .collect(),
        }
    }
}

/// Stage runner bound to one configuration.
pub struct Pipeline {
    pub config: PipelineConfig,
}

const CORPUS: &str = "corpus.jsonl";
const CORPUS_MANIFEST: &str = "corpus_manifest.json";
const SPLIT: &str = "split.json";
const USERS: &str = "users.txt";
const COOCCURRENCE: &str = "cooccurrence.txt";
const SPARSITY: &str = "sparsity.json";
const EMBEDDING: &str = "embedding.txt";
const EMBED_LOG: &str = "embed_log.json";
const CLUSTERS: &str = "clusters.txt";
const CENTERS: &str = "centers.txt";
const CLUSTER_SUMMARY: &str = "cluster_summary.json";
const TRUTH: &str = "truth.json";
const MANIFEST: &str = "manifest.json";

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    fn work(&self, name: &str) -> PathBuf {
        self.config.paths.work_dir.join(name)
    }

    fn task(&self) -> Task {
        self.config.task
    }

    pub fn dataset_name(task: Task) -> String {
        format!("dataset_{}.json", task.tag())
    }

    pub fn checkpoint_name(model: ModelKind, task: Task) -> String {
        format!("model_{}_{}.ckpt", model.tag(), task.tag())
    }

    pub fn report_name(model: ModelKind, task: Task) -> String {
        format!("report_{}_{}.json", model.tag(), task.tag())
    }

    pub fn predictions_name(model: ModelKind, task: Task) -> String {
        format!("predictions_{}_{}.csv", model.tag(), task.tag())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.work(&Self::checkpoint_name(self.config.model, self.task()))
    }

    pub fn report_path(&self) -> PathBuf {
        self.work(&Self::report_name(self.config.model, self.task()))
    }

    /// Reads a working-directory artifact produced by `stage`.
    fn require(&self, name: &str, stage: Stage, inputs: &mut BTreeMap<String, String>) -> Result<String> {
        let path = self.work(name);
        if !path.exists() {
            return Err(Error::MissingArtifact {
                stage: stage.name().into(),
                path,
            });
        }
        let text = read_text(&path)?;
        inputs.insert(name.to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    }

    fn emit(&self, name: &str, bytes: &[u8], outputs: &mut BTreeMap<String, String>) -> Result<PathBuf> {
        let path = self.work(name);
        write_atomic(&path, bytes)?;
        outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    fn emit_external(path: &Path, bytes: &[u8], outputs: &mut BTreeMap<String, String>) -> Result<PathBuf> {
        write_atomic(path, bytes)?;
        outputs.insert(path.display().to_string(), sha256_hex(bytes));
        Ok(path.to_path_buf())
    }

    fn record(&self, stage: Stage, inputs: BTreeMap<String, String>, outputs: BTreeMap<String, String>) -> Result<()> {
        let path = self.work(MANIFEST);
        let mut manifest: Manifest = if path.exists() {
            serde_json::from_str(&read_text(&path)?)?
        } else {
            Manifest::default()
        };
        manifest.version = env!("CARGO_PKG_VERSION").to_string();
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                seed: self.config.seed,
                config_sha256: sha256_hex(self.config.to_json()?.as_bytes()),
                inputs,
                outputs,
            },
        );
        write_atomic(&path, (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())
    }

    pub fn manifest(&self) -> Result<Manifest> {
        Ok(serde_json::from_str(&read_text(&self.work(MANIFEST))?)?)
    }

    /// Runs one stage and returns the paths it wrote.
    pub fn run_stage(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        info!("stage {stage}");
        let mut inputs = BTreeMap::new();
        let mut outputs = BTreeMap::new();
        let written = match stage {
            Stage::Ingest => self.ingest(&mut inputs, &mut outputs)?,
            Stage::Cooccur => self.cooccur(&mut inputs, &mut outputs)?,
            Stage::Embed => self.embed(&mut inputs, &mut outputs)?,
            Stage::Cluster => self.cluster(&mut inputs, &mut outputs)?,
            Stage::Featurize => self.featurize(&mut inputs, &mut outputs)?,
            Stage::Train => self.train(&mut inputs, &mut outputs)?.0,
            Stage::Evaluate => self.evaluate(&mut inputs, &mut outputs)?.0,
            Stage::Predict => self.predict(&mut inputs, &mut outputs)?,
            Stage::Diagnose => self.diagnose(&mut inputs, &mut outputs)?.0,
            Stage::Synth => self.synth(&mut outputs)?,
            Stage::Balance => self.balance(&mut inputs, &mut outputs)?,
        };
        self.record(stage, inputs, outputs)?;
        Ok(written)
    }

    /// Runs every stage of [`Stage::RUN`] that applies to the configured
    /// model and task.
    pub fn run_all(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for stage in Stage::RUN {
            if stage == Stage::Diagnose && !(self.config.model == ModelKind::Rgnet && self.task() == Task::Temporal) {
                continue;
            }
            out.extend(self.run_stage(stage)?);
        }
        Ok(out)
    }

    // -- ingest ---------------------------------------------------------------

    fn ingest(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let src = &self.config.paths.corpus;
        let raw = read_text(src)?;
        inputs.insert(src.display().to_string(), sha256_hex(raw.as_bytes()));
        let corpus = parse_corpus(src, &self.config.filter)?;
        let split = chronological_split(&corpus.discussions, self.config.test_fraction);
        info!(
            "ingested {} discussions ({} train, {} test), {} embedded users",
            corpus.manifest.discussions,
            split.train.len(),
            split.test.len(),
            corpus.manifest.embedded_users
        );
        Ok(vec![
            self.emit(CORPUS, corpus_to_string(&corpus.discussions)?.as_bytes(), outputs)?,
            self.emit(CORPUS_MANIFEST, pretty(&corpus.manifest)?.as_bytes(), outputs)?,
            self.emit(SPLIT, pretty(&split)?.as_bytes(), outputs)?,
        ])
    }

    fn load_corpus(&self, inputs: &mut BTreeMap<String, String>) -> Result<(Corpus, Split)> {
        self.require(CORPUS, Stage::Ingest, inputs)?;
        let corpus = parse_corpus(&self.work(CORPUS), &self.config.filter)?;
        let split: Split = serde_json::from_str(&self.require(SPLIT, Stage::Ingest, inputs)?)?;
        Ok((corpus, split))
    }

    fn lexicons(&self, corpus: &Corpus, split: &Split, inputs: &mut BTreeMap<String, String>) -> Result<crate::textfeat::Lexicons> {
        let p = &self.config.paths;
        for path in [&p.words, &p.sentiment, &p.stopwords].into_iter().flatten() {
            let text = read_text(path)?;
            inputs.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
        }
        let train = features::by_id(corpus, &split.train)?;
        build_lexicons(&train, p.words.as_deref(), p.sentiment.as_deref(), p.stopwords.as_deref())
    }

    // -- cooccur / embed / cluster ------------------------------------------------

    fn cooccur(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let (corpus, split) = self.load_corpus(inputs)?;
        let lex = self.lexicons(&corpus, &split, inputs)?;
        let train: Vec<_> = features::by_id(&corpus, &split.train)?.into_iter().cloned().collect();
        // Users seen in training discussions only; test-only users stay
        // unembedded.
        let users = UserIndex::new(
            train
                .iter()
                .flat_map(|d| std::iter::once(&d.post.author).chain(d.comments.iter().map(|c| &c.author)))
                .filter(|u| corpus.is_embedded(u))
                .cloned(),
        );
        let a = build_cooccurrence(&train, &users, &lex, self.config.theta0);
        let sparsity = sparsity_profile(&a, users.len());
        info!("co-occurrence over {} users, {} nonzero pairs", users.len(), a.nnz());
        Ok(vec![
            self.emit(USERS, users_to_string(&users).as_bytes(), outputs)?,
            self.emit(COOCCURRENCE, cooccurrence_to_string(&a).as_bytes(), outputs)?,
            self.emit(SPARSITY, pretty(&sparsity)?.as_bytes(), outputs)?,
        ])
    }

    fn embed(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let users = parse_users(&self.require(USERS, Stage::Cooccur, inputs)?)?;
        let a = parse_cooccurrence(&self.require(COOCCURRENCE, Stage::Cooccur, inputs)?, users.len())?;
        let opts = GuvecOpts {
            dim: self.config.dim,
            epochs: self.config.guvec_epochs,
            lr: self.config.guvec_lr,
            batch_size: self.config.guvec_batch_size,
            seed: self.config.seed,
        };
        let trained = train_guvec(&a, users, &opts)?;
        let log = serde_json::json!({
            "initial_loss": trained.initial_loss,
            "epoch_losses": trained.epoch_losses,
        });
        Ok(vec![
            self.emit(EMBEDDING, embedding_to_string(&trained.model).as_bytes(), outputs)?,
            self.emit(EMBED_LOG, pretty(&log)?.as_bytes(), outputs)?,
        ])
    }

    fn load_embedding(&self, inputs: &mut BTreeMap<String, String>) -> Result<EmbeddingModel> {
        parse_embedding(&self.require(EMBEDDING, Stage::Embed, inputs)?)
    }

    fn cluster(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let emb = self.load_embedding(inputs)?;
        let cm = kmeans(&emb, self.config.clusters, self.config.seed)?;
        Ok(vec![
            self.emit(CLUSTERS, clusters_to_string(&cm).as_bytes(), outputs)?,
            self.emit(CENTERS, centers_to_string(&cm).as_bytes(), outputs)?,
            self.emit(CLUSTER_SUMMARY, pretty(&cm.summary())?.as_bytes(), outputs)?,
        ])
    }

    fn load_clusters(&self, inputs: &mut BTreeMap<String, String>) -> Result<ClusterModel> {
        let a = self.require(CLUSTERS, Stage::Cluster, inputs)?;
        let c = self.require(CENTERS, Stage::Cluster, inputs)?;
        parse_clusters(&a, &c)
    }

    // -- featurize ---------------------------------------------------------------

    fn featurize(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let (corpus, split) = self.load_corpus(inputs)?;
        let lex = self.lexicons(&corpus, &split, inputs)?;
        let embedding = self.load_embedding(inputs)?;
        let clusters = self.load_clusters(inputs)?;
        let ctx = FeatureContext {
            corpus: &corpus,
            split: &split,
            lex: &lex,
            embedding: &embedding,
            clusters: &clusters,
            ablation: self.config.ablation()?,
            seed: self.config.seed,
        };
        let c = &self.config;
        let text = match c.task {
            Task::Temporal => serde_json::to_string(&temporal_dataset(&ctx, c.window_size, c.max_windows, c.t_cap)?)?,
            Task::Nontemporal => serde_json::to_string(&nontemporal_dataset(&ctx, c.window_size, c.max_windows)?)?,
        };
        Ok(vec![self.emit(&Self::dataset_name(c.task), text.as_bytes(), outputs)?])
    }

    pub fn load_temporal(&self, inputs: &mut BTreeMap<String, String>) -> Result<TemporalDataset> {
        Ok(serde_json::from_str(&self.require(&Self::dataset_name(Task::Temporal), Stage::Featurize, inputs)?)?)
    }

    pub fn load_nontemporal(&self, inputs: &mut BTreeMap<String, String>) -> Result<NontemporalDataset> {
        Ok(serde_json::from_str(&self.require(&Self::dataset_name(Task::Nontemporal), Stage::Featurize, inputs)?)?)
    }

    // -- train -------------------------------------------------------------------

    fn rgnet_config(&self, post_width: usize, comment_width: usize, dim: usize, clusters: usize) -> RgnetConfig {
        let c = &self.config;
        RgnetConfig {
            post_width,
            comment_width,
            dim,
            clusters,
            max_windows: c.max_windows,
            h1: c.h1,
            h2: c.h2,
            h3: c.h3,
            lambda: c.lambda,
            engagement_offset: c.engagement_offset,
        }
    }

    fn train_opts(&self) -> TrainOpts {
        TrainOpts {
            epochs: self.config.train_epochs,
            lr: self.config.train_lr,
            seed: self.config.seed,
        }
    }

    fn logreg_config(&self, width: usize, outputs: usize) -> LogRegConfig {
        LogRegConfig {
            width,
            outputs,
            l2: self.config.logreg_l2,
            iterations: self.config.logreg_iterations,
        }
    }

    /// Fits the configured model on the training split.
    pub fn fit_model(&self, inputs: &mut BTreeMap<String, String>) -> Result<(TrainedModel, Option<TrainLog>)> {
        let c = &self.config;
        let seed = c.seed;
        match (c.model, c.task) {
            (ModelKind::Rgnet, Task::Temporal) => {
                let ds = self.load_temporal(inputs)?;
                let s = &ds.shape;
                let mut m = Rgnet::new(self.rgnet_config(s.post_width, s.comment_width, s.dim, s.clusters), seed)?;
                let log = train(&mut m, &ds.train, &ds.centers, &self.train_opts())?;
                Ok((TrainedModel::Rgnet(m), Some(log)))
            }
            (ModelKind::Rgnet, Task::Nontemporal) => {
                let ds = self.load_nontemporal(inputs)?;
                let s = &ds.shape;
                let mut m = Rgnet::new(self.rgnet_config(s.post_width, s.comment_width, s.dim, s.clusters), seed)?;
                let log = train(&mut m, &ds.train, &ds.centers, &self.train_opts())?;
                Ok((TrainedModel::Rgnet(m), Some(log)))
            }
            (ModelKind::Newtonian, Task::Temporal) => {
                let ds = self.load_temporal(inputs)?;
                let s = &ds.shape;
                let cfg = NewtonConfig {
                    post_width: s.post_width,
                    comment_width: s.comment_width,
                    dim: s.dim,
                    clusters: s.clusters,
                    max_windows: s.max_windows,
                    window_size: s.window_size,
                    h1: c.h1,
                    h2: c.h2,
                    lambda: c.lambda,
                };
                let mut m = Newton::new(cfg, seed)?;
                let log = train(&mut m, &ds.train, &ds.centers, &self.train_opts())?;
                Ok((TrainedModel::Newton(m), Some(log)))
            }
            (ModelKind::Newtonian, Task::Nontemporal) => {
                Err(Error::invalid("the newtonian baseline only supports the temporal task"))
            }
            (ModelKind::Logreg, Task::Temporal) => {
                let ds = self.load_temporal(inputs)?;
                let n = ds.shape.clusters;
                let mut data: Vec<(Vec<Vec<f64>>, Vec<u8>)> = vec![(Vec::new(), Vec::new()); n];
                for s in &ds.train {
                    for i in 0..s.steps() {
                        for (k, slot) in data.iter_mut().enumerate() {
                            slot.0.push(s.logreg[i][k].clone());
                            slot.1.push(s.labels[i][k]);
                        }
                    }
                }
                let m = LogReg::fit(self.logreg_config(ds.shape.logreg_width, n), &data, seed)?;
                Ok((TrainedModel::LogReg(m), None))
            }
            (ModelKind::Logreg, Task::Nontemporal) => {
                let ds = self.load_nontemporal(inputs)?;
                let data = vec![(
                    ds.train.iter().map(|s| s.logreg.clone()).collect(),
                    ds.train.iter().map(|s| s.label).collect(),
                )];
                let m = LogReg::fit(self.logreg_config(ds.shape.logreg_width, 1), &data, seed)?;
                Ok((TrainedModel::LogReg(m), None))
            }
        }
    }

    fn train(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<(Vec<PathBuf>, TrainedModel)> {
        let (model, log) = self.fit_model(inputs)?;
        if let Some(l) = &log {
            info!(
                "trained {} on {} samples: loss {:.5} -> {:.5}",
                model.kind(),
                l.samples,
                l.initial_loss,
                l.epoch_losses.last().copied().unwrap_or(l.initial_loss)
            );
        }
        let (m, t) = (self.config.model, self.task());
        let log_name = format!("train_log_{}_{}.json", m.tag(), t.tag());
        let paths = vec![
            self.emit(&Self::checkpoint_name(m, t), model.to_checkpoint(t)?.as_bytes(), outputs)?,
            self.emit(&log_name, pretty(&log)?.as_bytes(), outputs)?,
        ];
        Ok((paths, model))
    }

    pub fn load_model(&self, inputs: &mut BTreeMap<String, String>) -> Result<TrainedModel> {
        let name = Self::checkpoint_name(self.config.model, self.task());
        let (model, task) = TrainedModel::from_checkpoint(&self.require(&name, Stage::Train, inputs)?)?;
        if task != self.task() {
            return Err(Error::invalid(format!("checkpoint {name} was trained for the {task} task")));
        }
        Ok(model)
    }

    // -- evaluate / predict --------------------------------------------------------

    fn temporal_outputs(&self, model: &TrainedModel, ds: &TemporalDataset) -> Result<Vec<(String, Vec<StepOutput>)>> {
        ds.test
            .iter()
            .filter(|s| s.steps() > 0)
            .map(|s| Ok((s.id.clone(), model.predict_sample(s, &ds.centers)?)))
            .collect()
    }

    fn nontemporal_scores(model: &TrainedModel, ds: &NontemporalDataset) -> Result<Vec<f64>> {
        ds.test
            .iter()
            .map(|s| match model {
                TrainedModel::Rgnet(m) => Ok(m.predict_nontemporal(&s.post, &ds.centers)?.0),
                TrainedModel::LogReg(m) => m.predict(0, &s.logreg),
                TrainedModel::Newton(_) => Err(Error::invalid("the newtonian baseline only supports the temporal task")),
            })
            .collect()
    }

    /// Scores the trained model on the held-out split.
    pub fn evaluate_model(&self, model: &TrainedModel, inputs: &mut BTreeMap<String, String>) -> Result<EvalReport> {
        let ablation = self.config.ablation.clone();
        match self.task() {
            Task::Temporal => {
                let ds = self.load_temporal(inputs)?;
                let outs = self.temporal_outputs(model, &ds)?;
                let by_id: BTreeMap<&str, &TemporalSample> = ds.test.iter().map(|s| (s.id.as_str(), s)).collect();
                let (mut pred, mut truth, mut g_pred, mut g_true) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                for (id, steps) in &outs {
                    let s = by_id[id.as_str()];
                    for (i, o) in steps.iter().enumerate() {
                        pred.push(o.decisions());
                        truth.push(s.labels[i].clone());
                        g_pred.push(o.y2);
                        g_true.push(s.growth[i].shifted);
                    }
                }
                if truth.is_empty() {
                    return Err(Error::NoValidSteps);
                }
                let growth = if matches!(model, TrainedModel::LogReg(_)) {
                    None
                } else {
                    let g = growth_error(&g_pred, &g_true)?;
                    Some(GrowthSummary {
                        mean_error_pct: g.mean,
                        steps: g.per_step.len(),
                        excluded: g.excluded,
                    })
                };
                Ok(EvalReport {
                    model: model.kind(),
                    task: Task::Temporal,
                    ablation,
                    samples: outs.len(),
                    instances: truth.len(),
                    multilabel: multilabel_metrics(&pred, &truth)?,
                    growth,
                    auc: None,
                })
            }
            Task::Nontemporal => {
                let ds = self.load_nontemporal(inputs)?;
                if ds.test.is_empty() {
                    return Err(Error::NoValidSteps);
                }
                let scores = Self::nontemporal_scores(model, &ds)?;
                let labels: Vec<u8> = ds.test.iter().map(|s| s.label).collect();
                let pred: Vec<Vec<u8>> = scores.iter().map(|&p| vec![u8::from(p > 0.5)]).collect();
                let truth: Vec<Vec<u8>> = labels.iter().map(|&y| vec![y]).collect();
                let auc = match auc(&scores, &labels) {
                    Ok(a) => Some(a),
                    Err(e) => {
                        warn!("AUC unavailable: {e}");
                        None
                    }
                };
                Ok(EvalReport {
                    model: model.kind(),
                    task: Task::Nontemporal,
                    ablation,
                    samples: scores.len(),
                    instances: scores.len(),
                    multilabel: multilabel_metrics(&pred, &truth)?,
                    growth: None,
                    auc,
                })
            }
        }
    }

    fn evaluate(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<(Vec<PathBuf>, EvalReport)> {
        let model = self.load_model(inputs)?;
        let report = self.evaluate_model(&model, inputs)?;
        let mut paths = vec![self.emit(&Self::report_name(self.config.model, self.task()), pretty(&report)?.as_bytes(), outputs)?];
        paths.extend(self.write_predictions(&model, inputs, outputs)?);
        Ok((paths, report))
    }

    fn write_predictions(&self, model: &TrainedModel, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let mut csv = String::new();
        match self.task() {
            Task::Temporal => {
                let ds = self.load_temporal(inputs)?;
                let n = ds.shape.clusters;
                csv.push_str("discussion,step");
                (0..n).for_each(|k| write!(csv, ",y1_{k}").unwrap());
                (0..n).for_each(|k| write!(csv, ",engage_{k}").unwrap());
                csv.push_str(",y2\n");
                for (id, steps) in self.temporal_outputs(model, &ds)? {
                    for (i, o) in steps.iter().enumerate() {
                        write!(csv, "{id},{i}").unwrap();
                        o.y1.iter().for_each(|p| write!(csv, ",{p}").unwrap());
                        o.decisions().iter().for_each(|b| write!(csv, ",{b}").unwrap());
                        writeln!(csv, ",{}", o.y2).unwrap();
                    }
                }
            }
            Task::Nontemporal => {
                let ds = self.load_nontemporal(inputs)?;
                csv.push_str("discussion,y3,attract\n");
                for (s, p) in ds.test.iter().zip(Self::nontemporal_scores(model, &ds)?) {
                    writeln!(csv, "{},{p},{}", s.id, u8::from(p > 0.5)).unwrap();
                }
            }
        }
        Ok(vec![self.emit(&Self::predictions_name(self.config.model, self.task()), csv.as_bytes(), outputs)?])
    }

    fn predict(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let model = self.load_model(inputs)?;
        self.write_predictions(&model, inputs, outputs)
    }

    // -- diagnose ----------------------------------------------------------------

    /// Homogeneity, growth-error and distance tables for the trained
    /// curvature model over the held-out split.
    pub fn diagnostics(&self, inputs: &mut BTreeMap<String, String>) -> Result<Diagnostics> {
        if self.config.model != ModelKind::Rgnet || self.task() != Task::Temporal {
            return Err(Error::invalid("diagnose needs the rgnet model on the temporal task"));
        }
        let TrainedModel::Rgnet(model) = self.load_model(inputs)? else {
            return Err(Error::invalid("checkpoint is not an rgnet model"));
        };
        let ds = self.load_temporal(inputs)?;
        let emb = self.load_embedding(inputs)?;
        let cm = self.load_clusters(inputs)?;
        let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); cm.n()];
        for (u, &c) in &cm.assignment {
            if let Some(v) = emb.vector_of(u) {
                members[c].push(v);
            }
        }
        let mut diag = Diagnostics::default();
        for s in ds.test.iter().filter(|s| s.steps() > 0) {
            let trace = model.forward_trace(s, &ds.centers)?;
            for (i, st) in trace.steps.iter().enumerate() {
                let tau = s.taus[i];
                if i > 0 && !s.engaged[i - 1].is_empty() {
                    let decisions: Vec<u8> = st.y1.iter().map(|&p| u8::from(p > 0.5)).collect();
                    diag.homogeneity.push(HomogeneityRow {
                        discussion: s.id.clone(),
                        step: i,
                        entropy: homogeneity_entropy(&s.engaged[i - 1], cm.n())?,
                        accuracy: vector_accuracy(&decisions, &s.labels[i]),
                    });
                }
                let v = s.growth[i].shifted;
                if v != 0.0 {
                    diag.growth.push(GrowthRow {
                        discussion: s.id.clone(),
                        step: i,
                        v_true: v,
                        error_pct: (v - st.y2).abs() / v.abs() * 100.0,
                    });
                }
                for (l, center) in ds.centers.iter().enumerate() {
                    let rows: Vec<Vec<f64>> = members[l].iter().map(|u| spacetime_row(tau, u)).collect();
                    if let Some((e, g)) = intra_cluster_distances(&rows, &spacetime_row(tau, center), &st.g_inv[l]) {
                        diag.distances.push(DistanceRow {
                            discussion: s.id.clone(),
                            step: i,
                            cluster: l,
                            euclidean: e,
                            metric: g,
                        });
                    }
                }
            }
        }
        Ok(diag)
    }

    fn diagnose(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<(Vec<PathBuf>, DiagnosticsSummary)> {
        let diag = self.diagnostics(inputs)?;
        let summary = diag.summary();
        Ok((
            vec![
                self.emit("diagnostics_homogeneity.csv", diag.homogeneity_csv().as_bytes(), outputs)?,
                self.emit("diagnostics_growth.csv", diag.growth_csv().as_bytes(), outputs)?,
                self.emit("diagnostics_distances.csv", diag.distances_csv().as_bytes(), outputs)?,
                self.emit("diagnostics_summary.json", pretty(&summary)?.as_bytes(), outputs)?,
            ],
            summary,
        ))
    }

    // -- synth / balance -------------------------------------------------------------

    fn synth(&self, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let c = &self.config;
        let (discussions, truth) = match c.synth_kind {
            Task::Temporal => {
                let (ds, truth) = make_temporal(&c.synth, c.seed)?;
                (ds, serde_json::to_value(truth)?)
            }
            Task::Nontemporal => {
                let (ds, labels) = make_nontemporal(&c.synth_nontemporal, c.seed)?;
                (ds, serde_json::json!({ "seed": c.seed, "labels": labels }))
            }
        };
        let mut paths = vec![
            Self::emit_external(&c.paths.corpus, corpus_to_string(&discussions)?.as_bytes(), outputs)?,
            self.emit(TRUTH, pretty(&truth)?.as_bytes(), outputs)?,
        ];
        let lex = make_lexicons(c.synth_word_dim, c.seed);
        for (path, body) in [(&c.paths.words, &lex.words), (&c.paths.sentiment, &lex.sentiment), (&c.paths.stopwords, &lex.stopwords)] {
            if let Some(p) = path {
                paths.push(Self::emit_external(p, body.as_bytes(), outputs)?);
            }
        }
        Ok(paths)
    }

    fn balance(&self, inputs: &mut BTreeMap<String, String>, outputs: &mut BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
        let src = &self.config.paths.corpus;
        let raw = read_text(src)?;
        inputs.insert(src.display().to_string(), sha256_hex(raw.as_bytes()));
        let corpus = parse_corpus(src, &self.config.filter)?;
        let kept = nontemporal_balance(&corpus.discussions, self.config.seed)?;
        let out = self
            .config
            .balance_output
            .clone()
            .unwrap_or_else(|| self.work("balanced.jsonl"));
        info!("balanced {} of {} discussions", kept.len(), corpus.discussions.len());
        Ok(vec![Self::emit_external(&out, corpus_to_string(&kept)?.as_bytes(), outputs)?])
    }

    /// Mean training-split loss of a trained network, for logging and tests.
    pub fn training_loss(&self, model: &TrainedModel, inputs: &mut BTreeMap<String, String>) -> Result<Option<f64>> {
        match (model, self.task()) {
            (TrainedModel::Rgnet(m), Task::Temporal) => {
                let ds = self.load_temporal(inputs)?;
                mean_loss(m, &ds.train, &ds.centers).map(Some)
            }
            (TrainedModel::Newton(m), Task::Temporal) => {
                let ds = self.load_temporal(inputs)?;
                mean_loss(m, &ds.train, &ds.centers).map(Some)
            }
            _ => Ok(None),
        }
    }

    /// Removes the working directory.
    pub fn clean(&self) -> Result<()> {
        let dir = &self.config.paths.work_dir;
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}
