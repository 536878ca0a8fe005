use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::FilterConfig;
use crate::error::{Error, Result};
use crate::manifold::DEFAULT_T_CAP;
use crate::synth::{NontemporalSpec, SynthSpec};
use crate::textfeat::Ablation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rgnet,
    Newtonian,
    Logreg,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Rgnet => "rgnet",
            Self::Newtonian => "newtonian",
            Self::Logreg => "logreg",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgnet" => Ok(Self::Rgnet),
            "newtonian" => Ok(Self::Newtonian),
            "logreg" => Ok(Self::Logreg),
            other => Err(Error::invalid(format!("unknown model `{other}` (rgnet, newtonian, logreg)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Temporal,
    Nontemporal,
}

impl Task {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Temporal => "temporal",
            Self::Nontemporal => "nontemporal",
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(Self::Temporal),
            "nontemporal" => Ok(Self::Nontemporal),
            other => Err(Error::invalid(format!("unknown task `{other}` (temporal, nontemporal)"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw JSON-lines corpus read by `ingest` and written by `synth`.
    pub corpus: PathBuf,
    pub words: Option<PathBuf>,
    pub sentiment: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Directory holding every stage artifact and the manifest.
    pub work_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: "data/corpus.jsonl".into(),
            words: Some("data/words.txt".into()),
            sentiment: Some("data/sentiment.txt".into()),
            stopwords: Some("data/stopwords.txt".into()),
            work_dir: "work".into(),
        }
    }
}

/// Everything a pipeline run depends on. Loaded from a single JSON object;
/// omitted fields take their defaults, and `"desk_scale": true` switches
/// the defaults to the small configuration used for the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub filter: FilterConfig,
    /// Title-similarity threshold angle, radians.
    pub theta0: f64,
    pub dim: usize,
    pub window_size: usize,
    pub clusters: usize,
    pub max_windows: usize,
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
    pub lambda: f64,
    pub t_cap: f64,
    /// Fraction of discussions, latest first, held out for evaluation.
    pub test_fraction: f64,
    pub seed: u64,
    pub guvec_epochs: usize,
    pub guvec_lr: f64,
    pub guvec_batch_size: usize,
    pub train_epochs: usize,
    pub train_lr: f64,
    pub logreg_l2: f64,
    pub logreg_iterations: usize,
    pub desk_scale: bool,
    pub model: ModelKind,
    pub task: Task,
    /// `GROUP:MODE`, e.g. `user:drop`.
    pub ablation: Option<String>,
    pub engagement_offset: bool,
    pub deterministic: bool,
    pub synth_kind: Task,
    pub synth: SynthSpec,
    pub synth_nontemporal: NontemporalSpec,
    pub synth_word_dim: usize,
    pub balance_output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            filter: FilterConfig::default(),
            theta0: std::f64::consts::PI / 12.0,
            dim: 128,
            window_size: 15,
            clusters: 8,
            max_windows: 10,
            h1: 128,
            h2: 64,
            h3: 64,
            lambda: 1.0,
            t_cap: DEFAULT_T_CAP,
            test_fraction: 0.2,
            seed: 0,
            guvec_epochs: 30,
            guvec_lr: 0.05,
            guvec_batch_size: 64,
            train_epochs: 30,
            train_lr: 1e-3,
            logreg_l2: 1e-3,
            logreg_iterations: 2000,
            desk_scale: false,
            model: ModelKind::Rgnet,
            task: Task::Temporal,
            ablation: None,
            engagement_offset: false,
            deterministic: false,
            synth_kind: Task::Temporal,
            synth: SynthSpec::default(),
            synth_nontemporal: NontemporalSpec::default(),
            synth_word_dim: 8,
            balance_output: None,
        }
    }
}

impl PipelineConfig {
    /// Small configuration matching the planted synthetic corpus.
    pub fn desk() -> Self {
        Self {
            dim: 8,
            window_size: 5,
            clusters: 3,
            max_windows: 4,
            h1: 16,
            h2: 8,
            h3: 8,
            train_epochs: 60,
            train_lr: 5e-3,
            guvec_epochs: 60,
            desk_scale: true,
            ..Self::default()
        }
    }

    /// Parses a JSON object over the matching defaults and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        let Value::Object(user) = user else {
            return Err(Error::invalid("configuration must be a JSON object"));
        };
        let desk = user.get("desk_scale").and_then(Value::as_bool).unwrap_or(false);
        let base = if desk { Self::desk() } else { Self::default() };
        let Value::Object(mut merged) = serde_json::to_value(&base)? else {
            unreachable!("config serializes to an object")
        };
        for (k, v) in user {
            match (merged.get_mut(&k), v) {
                (Some(Value::Object(dst)), Value::Object(src)) => dst.extend(src),
                (_, v) => {
                    merged.insert(k, v);
                }
            }
        }
        let cfg: Self = serde_json::from_value(Value::Object(merged))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn ablation(&self) -> Result<Option<Ablation>> {
        self.ablation.as_deref().map(str::parse).transpose()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("window_size", self.window_size),
            ("clusters", self.clusters),
            ("max_windows", self.max_windows),
            ("h1", self.h1),
            ("h2", self.h2),
            ("h3", self.h3),
            ("guvec_batch_size", self.guvec_batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be >= 1")));
            }
        }
        if !(self.theta0 > 0.0 && self.theta0 <= std::f64::consts::PI) {
            return Err(Error::invalid("theta0 must be in (0, pi]"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda must be finite and >= 0"));
        }
        if !(self.t_cap.is_finite() && self.t_cap > 0.0) {
            return Err(Error::invalid("t_cap must be positive"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::invalid("test_fraction must be in [0, 1)"));
        }
        for (name, lr) in [("guvec_lr", self.guvec_lr), ("train_lr", self.train_lr)] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.logreg_l2.is_finite() && self.logreg_l2 >= 0.0) {
            return Err(Error::invalid("logreg_l2 must be finite and >= 0"));
        }
        self.ablation()?;
        self.synth.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_desk_overrides() {
        let c = PipelineConfig::from_json("{}").unwrap();
        assert_eq!((c.dim, c.window_size, c.clusters, c.max_windows), (128, 15, 8, 10));
        assert!((c.theta0 - std::f64::consts::PI / 12.0).abs() < 1e-15);
        let d = PipelineConfig::from_json(r#"{"desk_scale": true, "h1": 32, "paths": {"work_dir": "w"}}"#).unwrap();
        assert_eq!((d.dim, d.h1, d.h2), (8, 32, 8));
        assert_eq!(d.paths.work_dir, PathBuf::from("w"));
        assert_eq!(d.paths.corpus, Paths::default().corpus);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_json(r#"{"dim": 0}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"test_fraction": 1.0}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"ablation": "user:shred"}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"dimm": 3}"#).is_err());
        assert!(PipelineConfig::from_json("[]").is_err());
    }

    #[test]
    fn round_trips() {
        let c = PipelineConfig::desk();
        assert_eq!(PipelineConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }
}
