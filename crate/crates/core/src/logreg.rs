//! Logistic-regression baseline: one independent classifier per user cluster
//! for temporal engagement, or a single classifier for one-shot attraction.
//!
//! Temporal features for step `i` and cluster `c` are built from the post
//! and all comments observed so far:
//!
//! | block   | width | content                                                   |
//! |---------|-------|-----------------------------------------------------------|
//! | text    | 12    | content + surface features of the merged text             |
//! | social  | d     | mean vector of embedded users from `c` engaged so far     |
//! | network | 1     | mean reply-graph degree of those users                    |
//!
//! Inputs are standardized with training statistics. The loss is mean BCE
//! plus `l2/2 · (‖w‖² + b²)`, minimized by full-batch gradient descent with
//! step `1 / (0.25 · mean‖[x; 1]‖² + l2)`, the inverse of a bound on the
//! gradient's Lipschitz constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, sigmoid};
use crate::model::PROB_CLIP;
use crate::optim::{gd_step, ParamSpec, ParameterStore};
use crate::textfeat::FeatureStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub width: usize,
    /// Number of independent classifiers.
    pub outputs: usize,
    pub l2: f64,
    pub iterations: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            width: 1,
            outputs: 1,
            l2: 1e-3,
            iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub config: LogRegConfig,
    /// Per-output standardization statistics.
    pub stats: Vec<FeatureStats>,
    #[serde(skip)]
    pub store: ParameterStore,
}

/// Mean BCE plus ridge penalty over one classifier's examples, with the
/// gradient written into `gw` and `gb`.
pub fn logistic_loss_and_grad(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[u8], l2: f64, gw: &mut [f64], gb: &mut f64) -> f64 {
    let m = xs.len().max(1) as f64;
    let mut loss = 0.0;
    gw.iter_mut().for_each(|g| *g = 0.0);
    *gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let p = sigmoid(dot(w, x) + b);
        let y = f64::from(y);
        let pc = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        loss -= (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln()) / m;
        let d = if pc == p { (p - y) / m } else { 0.0 };
        for (g, xv) in gw.iter_mut().zip(x) {
            *g += d * xv;
        }
        *gb += d;
    }
    loss += 0.5 * l2 * (dot(w, w) + b * b);
    for (g, wv) in gw.iter_mut().zip(w) {
        *g += l2 * wv;
    }
    *gb += l2 * b;
    loss
}

impl LogReg {
    fn specs(config: &LogRegConfig) -> Vec<ParamSpec> {
        vec![
            ParamSpec::bias("W", config.outputs * config.width),
            ParamSpec::bias("b", config.outputs),
        ]
    }

    /// Fits one classifier per output. `data[k]` holds the raw features and
    /// labels of output `k`. The fit is deterministic; `seed` only fixes the
    /// (zero) initialization contract shared with the other models.
    pub fn fit(config: LogRegConfig, data: &[(Vec<Vec<f64>>, Vec<u8>)], seed: u64) -> Result<Self> {
        if data.len() != config.outputs || config.width == 0 {
            return Err(Error::invalid("logistic regression data does not match its configuration"));
        }
        if data.iter().all(|(xs, _)| xs.is_empty()) {
            return Err(Error::invalid("logistic regression needs at least one example"));
        }
        let mut store = ParameterStore::init(&Self::specs(&config), seed)?;
        let mut stats = Vec::with_capacity(config.outputs);
        let mut scaled = Vec::with_capacity(config.outputs);
        let mut curvature = 0.0f64;
        for (xs, ys) in data {
            if xs.len() != ys.len() || xs.iter().any(|x| x.len() != config.width) {
                return Err(Error::invalid("logistic regression rows have inconsistent widths"));
            }
            let st = FeatureStats::fit(xs.iter().map(Vec::as_slice), config.width);
            let z: Vec<Vec<f64>> = xs.iter().map(|x| st.standardize(x)).collect();
            let msq = if z.is_empty() {
                0.0
            } else {
                z.iter().map(|x| dot(x, x) + 1.0).sum::<f64>() / z.len() as f64
            };
            curvature = curvature.max(msq);
            stats.push(st);
            scaled.push(z);
        }
        let lr = 1.0 / (0.25 * curvature + config.l2);
        let width = config.width;
        for _ in 0..config.iterations {
            let mut gw = vec![0.0; config.outputs * width];
            let mut gb = vec![0.0; config.outputs];
            for k in 0..config.outputs {
                let w = &store.value("W")[k * width..(k + 1) * width];
                let b = store.value("b")[k];
                logistic_loss_and_grad(w, b, &scaled[k], &data[k].1, config.l2, &mut gw[k * width..(k + 1) * width], &mut gb[k]);
            }
            store.grad_mut("W").copy_from_slice(&gw);
            store.grad_mut("b").copy_from_slice(&gb);
            gd_step(&mut store, lr)?;
        }
        Ok(Self { config, stats, store })
    }

    pub fn from_parts(config: LogRegConfig, stats: Vec<FeatureStats>, store: ParameterStore) -> Result<Self> {
        for spec in Self::specs(&config) {
            store.expect_shape(&spec.name, &spec.shape)?;
        }
        if stats.len() != config.outputs {
            return Err(Error::invalid("one set of feature statistics per output expected"));
        }
        Ok(Self { config, stats, store })
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        &self.store.value("W")[k * self.config.width..(k + 1) * self.config.width]
    }

    pub fn bias(&self, k: usize) -> f64 {
        self.store.value("b")[k]
    }

    /// Probability from classifier `k` for a raw feature row.
    pub fn predict(&self, k: usize, x: &[f64]) -> Result<f64> {
        if x.len() != self.config.width {
            return Err(Error::ShapeMismatch {
                tensor: "logreg features".into(),
                expected: self.config.width.to_string(),
                actual: x.len().to_string(),
            });
        }
        let z = self.stats[k].standardize(x);
        Ok(sigmoid(dot(self.weights(k), &z) + self.bias(k)))
    }

    /// Mean penalized loss of classifier `k` on raw rows.
    pub fn loss(&self, k: usize, xs: &[Vec<f64>], ys: &[u8]) -> f64 {
        let z: Vec<Vec<f64>> = xs.iter().map(|x| self.stats[k].standardize(x)).collect();
        let mut gw = vec![0.0; self.config.width];
        let mut gb = 0.0;
        logistic_loss_and_grad(self.weights(k), self.bias(k), &z, ys, self.config.l2, &mut gw, &mut gb)
    }
}
