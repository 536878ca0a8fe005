//! The curvature-based engagement network.
//!
//! Per prediction step `i` and cluster `l`:
//!
//! ```text
//! X'_1    = relu(W1·X1 + B1)              X'_2[j] = relu(W2·X2[j] + B1)
//! X''[i]  = Σ_{j≤i} ω_j X'[j] / Σ_{j≤i} ω_j,   ω_j = exp(W3[j]),  X'[0] = X'_1
//! M       = σ(W4·σ(W5·[X''[i]; C_l] + B4) + B3)
//! g_inv   = σ(W6·σ(W7·C_l + B6) + B5)
//! R'[l]   = Σ_j M_j g_inv_j          R_total = Σ_l W8[l] R'[l]
//! y1      = σ(R')                    y2 = relu(R_total)
//! ```
//!
//! `C_l` is the spacetime row `(τ_i, center_l)`. The one-shot head uses step 0
//! only and emits `y3 = σ(R_total)`.
//!
//! Since `M` and `g_inv` are sigmoid outputs, `R'` is strictly positive and
//! `y1` strictly above one half. [`RgnetConfig::engagement_offset`] adds an
//! opt-in learnable per-cluster offset `y1 = σ(R' − B7)` that lifts this
//! restriction; it is off by default.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{NontemporalSample, StepOutput, TemporalSample};
use crate::error::{Error, Result};
use crate::math::{add_assign, add_outer, affine, affine_t, dot, relu, sigmoid};
use crate::optim::{adam_step, AdamConfig, AdamState, ParamSpec, ParameterStore};

/// Probabilities are clipped to `[PROB_CLIP, 1 − PROB_CLIP]` inside BCE.
pub const PROB_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgnetConfig {
    pub post_width: usize,
    pub comment_width: usize,
    /// User-embedding dimension `d`; spacetime rows have `d + 1` entries.
    pub dim: usize,
    pub clusters: usize,
    /// Maximum number of windows `N`.
    pub max_windows: usize,
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
    /// Weight of the squared growth error in the joint loss.
    pub lambda: f64,
    #[serde(default)]
    pub engagement_offset: bool,
}

impl RgnetConfig {
    pub fn d1(&self) -> usize {
        self.dim + 1
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.post_width,
            self.comment_width,
            self.dim,
            self.clusters,
            self.max_windows,
            self.h1,
            self.h2,
            self.h3,
        ];
        if dims.contains(&0) {
            return Err(Error::invalid(format!("all network dimensions must be >= 1: {self:?}")));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let d1 = self.d1();
        let mut specs = vec![
            ParamSpec::weight("W1", &[self.h1, self.post_width]),
            ParamSpec::weight("W2", &[self.h1, self.comment_width]),
            ParamSpec::bias("B1", self.h1),
            ParamSpec::weight("W3", &[self.max_windows + 1]),
            ParamSpec::weight("W5", &[self.h2, self.h1 + d1]),
            ParamSpec::bias("B4", self.h2),
            ParamSpec::weight("W4", &[d1, self.h2]),
            ParamSpec::bias("B3", d1),
            ParamSpec::weight("W7", &[self.h3, d1]),
            ParamSpec::bias("B6", self.h3),
            ParamSpec::weight("W6", &[d1, self.h3]),
            ParamSpec::bias("B5", d1),
            // Uniform positive start keeps R_total > 0 so the growth head
            // is not born dead.
            ParamSpec::constant("W8", &[self.clusters], 1.0 / self.clusters as f64),
        ];
        if self.engagement_offset {
            specs.push(ParamSpec::bias("B7", self.clusters));
        }
        specs
    }
}

// ---------------------------------------------------------------------------
// Shared encoder and cumulative context (also used by the Newtonian baseline)

/// Pre-activations and activations of the post (index 0) and windows.
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub z: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

fn shape_err(tensor: &str, expected: usize, actual: usize) -> Error {
    Error::ShapeMismatch {
        tensor: tensor.into(),
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}

pub(crate) fn encode(
    w1: &[f64],
    w2: &[f64],
    b1: &[f64],
    post: &[f64],
    windows: &[Vec<f64>],
) -> Result<Encoded> {
    let h1 = b1.len();
    if post.len() * h1 != w1.len() {
        return Err(shape_err("X1", w1.len() / h1, post.len()));
    }
    let mut z = Vec::with_capacity(windows.len() + 1);
    z.push(affine(w1, Some(b1), post, h1));
    for x in windows {
        if x.len() * h1 != w2.len() {
            return Err(shape_err("X2", w2.len() / h1, x.len()));
        }
        z.push(affine(w2, Some(b1), x, h1));
    }
    let a = z.iter().map(|v| v.iter().map(|&x| relu(x)).collect()).collect();
    Ok(Encoded { z, a })
}

pub(crate) fn encode_backward(
    enc: &Encoded,
    post: &[f64],
    windows: &[Vec<f64>],
    da: &[Vec<f64>],
    dw1: &mut [f64],
    dw2: &mut [f64],
    db1: &mut [f64],
) {
    for (j, g) in da.iter().enumerate() {
        let dz: Vec<f64> = g
            .iter()
            .zip(&enc.z[j])
            .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
            .collect();
        if j == 0 {
            add_outer(dw1, &dz, post);
        } else {
            add_outer(dw2, &dz, &windows[j - 1]);
        }
        add_assign(db1, &dz);
    }
}

/// Normalized positive weights `exp(w_j) / Σ exp(w_k)` over `w[..=i]`.
pub(crate) fn softmax_prefix(w: &[f64], i: usize) -> Vec<f64> {
    let head = &w[..=i];
    let max = head.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = head.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Weighted average `Σ p_j x_j` with precomputed normalized weights.
pub(crate) fn weighted_mean(p: &[f64], xs: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; xs[0].len()];
    for (pj, x) in p.iter().zip(xs) {
        for (o, v) in out.iter_mut().zip(x) {
            *o += pj * v;
        }
    }
    out
}

/// Back-propagates through `m = Σ p_j x_j` with `p = softmax(w)`: adds to
/// `dw[j]` and `dx[j]`.
pub(crate) fn weighted_mean_backward(
    p: &[f64],
    xs: &[Vec<f64>],
    mean: &[f64],
    dmean: &[f64],
    dw: &mut [f64],
    dx: &mut [Vec<f64>],
) {
    for (j, pj) in p.iter().enumerate() {
        let diff: f64 = dmean.iter().zip(xs[j].iter().zip(mean)).map(|(g, (x, m))| g * (x - m)).sum();
        dw[j] += pj * diff;
        for (d, g) in dx[j].iter_mut().zip(dmean) {
            *d += pj * g;
        }
    }
}

// ---------------------------------------------------------------------------

/// `(τ, center)` spacetime row.
pub fn spacetime_row(tau: f64, center: &[f64]) -> Vec<f64> {
    let mut r = Vec::with_capacity(center.len() + 1);
    r.push(tau);
    r.extend_from_slice(center);
    r
}

/// Two sigmoid layers `σ(Wb·σ(Wa·x + ba) + bb)`, returning hidden and output.
fn two_layer(wa: &[f64], ba: &[f64], wb: &[f64], bb: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hidden: Vec<f64> = affine(wa, Some(ba), x, ba.len()).into_iter().map(sigmoid).collect();
    let out = affine(wb, Some(bb), &hidden, bb.len()).into_iter().map(sigmoid).collect();
    (hidden, out)
}

/// Per-cluster forward cache for one step.
#[derive(Debug, Clone)]
struct ClusterCache {
    row: Vec<f64>,
    u: Vec<f64>,
    s5: Vec<f64>,
    m: Vec<f64>,
    s7: Vec<f64>,
    g: Vec<f64>,
}

#[derive(Debug, Clone)]
struct StepCache {
    weights: Vec<f64>,
    xpp: Vec<f64>,
    clusters: Vec<ClusterCache>,
    r_prime: Vec<f64>,
    r_total: f64,
}

/// Activations of one prediction step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub xpp: Vec<f64>,
    pub m: Vec<Vec<f64>>,
    pub g_inv: Vec<Vec<f64>>,
    pub r_prime: Vec<f64>,
    pub r_total: f64,
    pub y1: Vec<f64>,
    pub y2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub x1: Vec<f64>,
    pub x2: Vec<Vec<f64>>,
    pub steps: Vec<StepTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rgnet {
    pub config: RgnetConfig,
    pub store: ParameterStore,
}

struct Grad {
    w1: Vec<f64>,
    w2: Vec<f64>,
    b1: Vec<f64>,
    w3: Vec<f64>,
    w5: Vec<f64>,
    b4: Vec<f64>,
    w4: Vec<f64>,
    b3: Vec<f64>,
    w7: Vec<f64>,
    b6: Vec<f64>,
    w6: Vec<f64>,
    b5: Vec<f64>,
    w8: Vec<f64>,
    b7: Vec<f64>,
}

const NAMES: [&str; 14] = [
    "W1", "W2", "B1", "W3", "W5", "B4", "W4", "B3", "W7", "B6", "W6", "B5", "W8", "B7",
];

impl Grad {
    fn zeros(store: &ParameterStore) -> Self {
        let z = |n: &str| {
            if store.contains(n) {
                vec![0.0; store.get(n).len()]
            } else {
                Vec::new()
            }
        };
        Grad {
            w1: z("W1"),
            w2: z("W2"),
            b1: z("B1"),
            w3: z("W3"),
            w5: z("W5"),
            b4: z("B4"),
            w4: z("W4"),
            b3: z("B3"),
            w7: z("W7"),
            b6: z("B6"),
            w6: z("W6"),
            b5: z("B5"),
            w8: z("W8"),
            b7: z("B7"),
        }
    }

    fn add_into(self, store: &mut ParameterStore) {
        let parts = [
            self.w1, self.w2, self.b1, self.w3, self.w5, self.b4, self.w4, self.b3, self.w7, self.b6, self.w6,
            self.b5, self.w8, self.b7,
        ];
        for (name, g) in NAMES.iter().zip(parts) {
            if store.contains(name) {
                add_assign(store.grad_mut(name), &g);
            }
        }
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Derivative of `bce(σ(z), y)` with respect to `z`; zero where clipping
/// is active.
fn bce_logit_grad(p: f64, y: f64) -> f64 {
    if (PROB_CLIP..=1.0 - PROB_CLIP).contains(&p) {
        p - y
    } else {
        0.0
    }
}

/// Mean over valid steps of the cluster-averaged BCE plus `λ·(y2 − g)²`.
pub fn temporal_loss(outputs: &[StepOutput], labels: &[Vec<u8>], growth: &[f64], lambda: f64) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::NoValidSteps);
    }
    if outputs.len() != labels.len() || outputs.len() != growth.len() {
        return Err(Error::invalid("outputs, labels and growth targets differ in length"));
    }
    let mut total = 0.0;
    for ((o, y), g) in outputs.iter().zip(labels).zip(growth) {
        let n = o.y1.len() as f64;
        let b: f64 = o.y1.iter().zip(y).map(|(&p, &t)| bce(p, f64::from(t))).sum::<f64>() / n;
        total += b + lambda * (o.y2 - g) * (o.y2 - g);
    }
    Ok(total / outputs.len() as f64)
}

/// Diagonal metric distance `sqrt(Σ (x_j − y_j)² / g_inv_j)`.
pub fn metric_distance(g_inv: &[f64], x: &[f64], y: &[f64]) -> f64 {
    g_inv
        .iter()
        .zip(x.iter().zip(y))
        .map(|(g, (a, b))| (a - b) * (a - b) / g)
        .sum::<f64>()
        .sqrt()
}

/// `R' = Σ M ⊙ g_inv` per cluster and `R_total = W8 · R'`.
pub fn curvature(m: &[Vec<f64>], g_inv: &[Vec<f64>], w8: &[f64]) -> (Vec<f64>, f64) {
    let r: Vec<f64> = m.iter().zip(g_inv).map(|(m, g)| dot(m, g)).collect();
    let total = dot(w8, &r);
    (r, total)
}

/// `y1 = σ(R')`, `y2 = relu(R_total)`.
pub fn heads(r_prime: &[f64], r_total: f64) -> StepOutput {
    StepOutput {
        y1: r_prime.iter().map(|&r| sigmoid(r)).collect(),
        y2: relu(r_total),
    }
}

impl Rgnet {
    pub fn new(config: RgnetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let store = ParameterStore::init(&config.param_specs(), seed)?;
        Ok(Self { config, store })
    }

    /// Wraps a loaded store after checking every tensor shape.
    pub fn from_store(config: RgnetConfig, store: ParameterStore) -> Result<Self> {
        config.validate()?;
        for spec in config.param_specs() {
            store.expect_shape(&spec.name, &spec.shape)?;
        }
        Ok(Self { config, store })
    }

    fn v(&self, name: &str) -> &[f64] {
        self.store.value(name)
    }

    /// Encoder outputs `X'_1` and `X'_2[..]`.
    pub fn encode_inputs(&self, post: &[f64], windows: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let enc = encode(self.v("W1"), self.v("W2"), self.v("B1"), post, windows)?;
        let mut a = enc.a.into_iter();
        let x1 = a.next().unwrap();
        Ok((x1, a.collect()))
    }

    /// `X''[i]` from the encoded representations `X'[0..=i]`.
    pub fn cumulative_context(&self, encoded: &[Vec<f64>], i: usize) -> Vec<f64> {
        weighted_mean(&softmax_prefix(self.v("W3"), i), &encoded[..=i])
    }

    /// Diagonal stress-energy vector for a context and a spacetime row.
    pub fn stress_energy(&self, xpp: &[f64], row: &[f64]) -> Vec<f64> {
        let u = [xpp, row].concat();
        two_layer(self.v("W5"), self.v("B4"), self.v("W4"), self.v("B3"), &u).1
    }

    /// Inverse-metric diagonal at a spacetime row.
    pub fn inverse_metric(&self, row: &[f64]) -> Vec<f64> {
        two_layer(self.v("W7"), self.v("B6"), self.v("W6"), self.v("B5"), row).1
    }

    fn offsets(&self) -> Option<&[f64]> {
        self.store.contains("B7").then(|| self.v("B7"))
    }

    fn step_forward(&self, a: &[Vec<f64>], i: usize, tau: f64, centers: &[Vec<f64>]) -> Result<StepCache> {
        if centers.len() != self.config.clusters {
            return Err(shape_err("centers", self.config.clusters, centers.len()));
        }
        let weights = softmax_prefix(self.v("W3"), i);
        let xpp = weighted_mean(&weights, &a[..=i]);
        let mut clusters = Vec::with_capacity(centers.len());
        for c in centers {
            if c.len() != self.config.dim {
                return Err(shape_err("center", self.config.dim, c.len()));
            }
            let row = spacetime_row(tau, c);
            let u = [xpp.as_slice(), row.as_slice()].concat();
            let (s5, m) = two_layer(self.v("W5"), self.v("B4"), self.v("W4"), self.v("B3"), &u);
            let (s7, g) = two_layer(self.v("W7"), self.v("B6"), self.v("W6"), self.v("B5"), &row);
            clusters.push(ClusterCache { row, u, s5, m, s7, g });
        }
        let r_prime: Vec<f64> = clusters.iter().map(|c| dot(&c.m, &c.g)).collect();
        let r_total = dot(self.v("W8"), &r_prime);
        Ok(StepCache {
            weights,
            xpp,
            clusters,
            r_prime,
            r_total,
        })
    }

    fn outputs(&self, cache: &StepCache) -> StepOutput {
        let mut out = heads(&cache.r_prime, cache.r_total);
        if let Some(b7) = self.offsets() {
            out.y1 = cache.r_prime.iter().zip(b7).map(|(r, b)| sigmoid(r - b)).collect();
        }
        out
    }

    /// Full forward pass over every labelled step of a sample.
    pub fn forward_trace(&self, s: &TemporalSample, centers: &[Vec<f64>]) -> Result<ForwardTrace> {
        let steps = s.steps();
        let used = steps.saturating_sub(1).min(s.windows.len());
        let enc = encode(self.v("W1"), self.v("W2"), self.v("B1"), &s.post, &s.windows[..used])?;
        let mut out = Vec::with_capacity(steps);
        for i in 0..steps {
            let cache = self.step_forward(&enc.a, i, s.taus[i], centers)?;
            let o = self.outputs(&cache);
            out.push(StepTrace {
                step: i,
                xpp: cache.xpp.clone(),
                m: cache.clusters.iter().map(|c| c.m.clone()).collect(),
                g_inv: cache.clusters.iter().map(|c| c.g.clone()).collect(),
                r_prime: cache.r_prime,
                r_total: cache.r_total,
                y1: o.y1,
                y2: o.y2,
            });
        }
        Ok(ForwardTrace {
            x1: enc.a[0].clone(),
            x2: enc.a[1..].to_vec(),
            steps: out,
        })
    }

    /// Prediction for step `step`, which observes the post and
    /// `windows[..step]` only.
    pub fn predict_temporal(&self, post: &[f64], windows: &[Vec<f64>], tau: f64, centers: &[Vec<f64>]) -> Result<StepOutput> {
        let enc = encode(self.v("W1"), self.v("W2"), self.v("B1"), post, windows)?;
        let cache = self.step_forward(&enc.a, windows.len(), tau, centers)?;
        Ok(self.outputs(&cache))
    }

    /// One-shot attraction probability `y3` from the post alone, with time
    /// coordinate zero. The post attracts iff `y3 > 0.5`.
    pub fn predict_nontemporal(&self, post: &[f64], centers: &[Vec<f64>]) -> Result<(f64, bool)> {
        let enc = encode(self.v("W1"), self.v("W2"), self.v("B1"), post, &[])?;
        let cache = self.step_forward(&enc.a, 0, 0.0, centers)?;
        let y3 = sigmoid(cache.r_total);
        Ok((y3, y3 > 0.5))
    }

    /// Adds `dL/dθ` for one step given the loss gradients at `R'` and
    /// `R_total`, accumulating `dL/dX'[j]` into `da`.
    fn step_backward(&self, cache: &StepCache, a: &[Vec<f64>], dr_prime: &[f64], dr_total: f64, g: &mut Grad, da: &mut [Vec<f64>]) {
        let cfg = &self.config;
        let (h1, h2, h3, d1) = (cfg.h1, cfg.h2, cfg.h3, cfg.d1());
        for (l, r) in cache.r_prime.iter().enumerate() {
            g.w8[l] += dr_total * r;
        }
        let w8 = self.v("W8");
        let mut dxpp = vec![0.0; h1];
        for (l, c) in cache.clusters.iter().enumerate() {
            let dr = dr_prime[l] + dr_total * w8[l];
            if dr == 0.0 {
                continue;
            }
            let dz4: Vec<f64> = (0..d1).map(|j| dr * c.g[j] * c.m[j] * (1.0 - c.m[j])).collect();
            add_outer(&mut g.w4, &dz4, &c.s5);
            add_assign(&mut g.b3, &dz4);
            let ds5 = affine_t(self.v("W4"), &dz4, h2);
            let dz5: Vec<f64> = ds5.iter().zip(&c.s5).map(|(d, s)| d * s * (1.0 - s)).collect();
            add_outer(&mut g.w5, &dz5, &c.u);
            add_assign(&mut g.b4, &dz5);
            let du = affine_t(self.v("W5"), &dz5, h1 + d1);
            add_assign(&mut dxpp, &du[..h1]);

            let dz6: Vec<f64> = (0..d1).map(|j| dr * c.m[j] * c.g[j] * (1.0 - c.g[j])).collect();
            add_outer(&mut g.w6, &dz6, &c.s7);
            add_assign(&mut g.b5, &dz6);
            let ds7 = affine_t(self.v("W6"), &dz6, h3);
            let dz7: Vec<f64> = ds7.iter().zip(&c.s7).map(|(d, s)| d * s * (1.0 - s)).collect();
            add_outer(&mut g.w7, &dz7, &c.row);
            add_assign(&mut g.b6, &dz7);
        }
        let i = cache.weights.len() - 1;
        weighted_mean_backward(&cache.weights, &a[..=i], &cache.xpp, &dxpp, &mut g.w3, &mut da[..=i]);
    }

    fn temporal_pass(&self, s: &TemporalSample, centers: &[Vec<f64>], grad: Option<&mut Grad>) -> Result<f64> {
        let steps = s.steps();
        if steps == 0 {
            return Err(Error::NoValidSteps);
        }
        if s.windows.len() + 1 < steps || s.taus.len() < steps || s.growth.len() < steps {
            return Err(Error::invalid(format!("sample {} is inconsistent", s.id)));
        }
        let used = steps - 1;
        let windows = &s.windows[..used];
        let enc = encode(self.v("W1"), self.v("W2"), self.v("B1"), &s.post, windows)?;
        let n = self.config.clusters as f64;
        let scale = 1.0 / steps as f64;
        let lambda = self.config.lambda;
        let mut loss = 0.0;
        let mut grad = grad;
        let mut da = vec![vec![0.0; self.config.h1]; used + 1];
        for i in 0..steps {
            let cache = self.step_forward(&enc.a, i, s.taus[i], centers)?;
            let out = self.outputs(&cache);
            let y = &s.labels[i];
            if y.len() != self.config.clusters {
                return Err(shape_err("labels", self.config.clusters, y.len()));
            }
            let target = s.growth[i].shifted;
            let b: f64 = out.y1.iter().zip(y).map(|(&p, &t)| bce(p, f64::from(t))).sum::<f64>() / n;
            loss += scale * (b + lambda * (out.y2 - target).powi(2));
            if let Some(g) = grad.as_deref_mut() {
                let dlogit: Vec<f64> = out
                    .y1
                    .iter()
                    .zip(y)
                    .map(|(&p, &t)| scale * bce_logit_grad(p, f64::from(t)) / n)
                    .collect();
                if !g.b7.is_empty() {
                    for (gb, d) in g.b7.iter_mut().zip(&dlogit) {
                        *gb -= d;
                    }
                }
                let dr_total = if cache.r_total > 0.0 {
                    scale * 2.0 * lambda * (out.y2 - target)
                } else {
                    0.0
                };
                self.step_backward(&cache, &enc.a, &dlogit, dr_total, g, &mut da);
            }
        }
        if let Some(g) = grad {
            encode_backward(&enc, &s.post, windows, &da, &mut g.w1, &mut g.w2, &mut g.b1);
        }
        Ok(loss)
    }

    /// Temporal loss of one discussion.
    pub fn temporal_sample_loss(&self, s: &TemporalSample, centers: &[Vec<f64>]) -> Result<f64> {
        self.temporal_pass(s, centers, None)
    }

    /// Temporal loss of one discussion; its gradient is added to the store.
    pub fn temporal_sample_loss_and_grad(&mut self, s: &TemporalSample, centers: &[Vec<f64>]) -> Result<f64> {
        let mut g = Grad::zeros(&self.store);
        let loss = self.temporal_pass(s, centers, Some(&mut g))?;
        g.add_into(&mut self.store);
        Ok(loss)
    }

    fn nontemporal_pass(&self, s: &NontemporalSample, centers: &[Vec<f64>], grad: Option<&mut Grad>) -> Result<f64> {
        let enc = encode(self.v("W1"), self.v("W2"), self.v("B1"), &s.post, &[])?;
        let cache = self.step_forward(&enc.a, 0, 0.0, centers)?;
        let p = sigmoid(cache.r_total);
        let y = f64::from(s.label);
        if let Some(g) = grad {
            let dr_total = bce_logit_grad(p, y);
            let mut da = vec![vec![0.0; self.config.h1]];
            let zeros = vec![0.0; self.config.clusters];
            self.step_backward(&cache, &enc.a, &zeros, dr_total, g, &mut da);
            encode_backward(&enc, &s.post, &[], &da, &mut g.w1, &mut g.w2, &mut g.b1);
        }
        Ok(bce(p, y))
    }

    pub fn nontemporal_sample_loss(&self, s: &NontemporalSample, centers: &[Vec<f64>]) -> Result<f64> {
        self.nontemporal_pass(s, centers, None)
    }

    pub fn nontemporal_sample_loss_and_grad(&mut self, s: &NontemporalSample, centers: &[Vec<f64>]) -> Result<f64> {
        let mut g = Grad::zeros(&self.store);
        let loss = self.nontemporal_pass(s, centers, Some(&mut g))?;
        g.add_into(&mut self.store);
        Ok(loss)
    }
}

// ---------------------------------------------------------------------------
// Training

/// A model trained by per-sample Adam steps.
pub trait Trainable<S>: Sync {
    fn store(&self) -> &ParameterStore;
    fn store_mut(&mut self) -> &mut ParameterStore;
    fn sample_loss(&self, s: &S, centers: &[Vec<f64>]) -> Result<f64>;
    fn sample_loss_and_grad(&mut self, s: &S, centers: &[Vec<f64>]) -> Result<f64>;
    fn usable(s: &S) -> bool;
}

impl Trainable<TemporalSample> for Rgnet {
    fn store(&self) -> &ParameterStore {
        &self.store
    }
    fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }
    fn sample_loss(&self, s: &TemporalSample, c: &[Vec<f64>]) -> Result<f64> {
        self.temporal_sample_loss(s, c)
    }
    fn sample_loss_and_grad(&mut self, s: &TemporalSample, c: &[Vec<f64>]) -> Result<f64> {
        self.temporal_sample_loss_and_grad(s, c)
    }
    fn usable(s: &TemporalSample) -> bool {
        s.steps() > 0
    }
}

impl Trainable<NontemporalSample> for Rgnet {
    fn store(&self) -> &ParameterStore {
        &self.store
    }
    fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }
    fn sample_loss(&self, s: &NontemporalSample, c: &[Vec<f64>]) -> Result<f64> {
        self.nontemporal_sample_loss(s, c)
    }
    fn sample_loss_and_grad(&mut self, s: &NontemporalSample, c: &[Vec<f64>]) -> Result<f64> {
        self.nontemporal_sample_loss_and_grad(s, c)
    }
    fn usable(_: &NontemporalSample) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOpts {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainOpts {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub initial_loss: f64,
    /// Mean training loss over all usable samples after each epoch.
    pub epoch_losses: Vec<f64>,
    pub samples: usize,
}

/// Mean loss over usable samples, evaluated in parallel and summed in order.
pub fn mean_loss<S: Sync, M: Trainable<S>>(model: &M, samples: &[S], centers: &[Vec<f64>]) -> Result<f64> {
    let losses: Vec<f64> = samples
        .par_iter()
        .filter(|s| M::usable(s))
        .map(|s| model.sample_loss(s, centers))
        .collect::<Result<_>>()?;
    if losses.is_empty() {
        return Err(Error::NoValidSteps);
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// One Adam step per sample, samples shuffled each epoch.
pub fn train<S: Sync, M: Trainable<S>>(model: &mut M, samples: &[S], centers: &[Vec<f64>], opts: &TrainOpts) -> Result<TrainLog> {
    let mut order: Vec<usize> = (0..samples.len()).filter(|&i| M::usable(&samples[i])).collect();
    if order.is_empty() {
        return Err(Error::invalid("training set has no usable samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = AdamState::new(model.store(), AdamConfig::with_lr(opts.lr));
    let initial_loss = mean_loss(model, samples, centers)?;
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            model.store_mut().zero_grad();
            model.sample_loss_and_grad(&samples[i], centers)?;
            adam_step(model.store_mut(), &mut adam)?;
        }
        epoch_losses.push(mean_loss(model, samples, centers)?);
    }
    Ok(TrainLog {
        initial_loss,
        epoch_losses,
        samples: order.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::growth_from_span;
    use crate::optim::{grad_check, GradCheckOptions};
    use rand::Rng;

    pub(crate) fn toy_config(offset: bool) -> RgnetConfig {
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

    fn vec_of(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    pub(crate) fn toy_sample(cfg: &RgnetConfig, steps: usize, seed: u64) -> (TemporalSample, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = TemporalSample {
            id: format!("t{seed}"),
            post: vec_of(&mut rng, cfg.post_width),
            windows: (0..cfg.max_windows).map(|_| vec_of(&mut rng, cfg.comment_width)).collect(),
            taus: (0..=cfg.max_windows).map(|i| i as f64 / cfg.max_windows as f64).collect(),
            labels: (0..steps).map(|_| (0..cfg.clusters).map(|_| rng.random_range(0..2u8)).collect()).collect(),
            growth: (0..steps)
                .map(|_| growth_from_span(rng.random_range(1..6), 0, rng.random_range(1..4)).unwrap())
                .collect(),
            commenters: vec![],
            logreg: vec![],
            engaged: vec![],
        };
        let centers = (0..cfg.clusters).map(|_| vec_of(&mut rng, cfg.dim)).collect();
        (s, centers)
    }

    fn zeroed(cfg: RgnetConfig) -> Rgnet {
        let mut m = Rgnet::new(cfg, 0).unwrap();
        for t in m.store.tensors_mut() {
            t.value.iter_mut().for_each(|v| *v = 0.0);
        }
        m
    }

    #[test]
    fn zero_network_outputs() {
        let cfg = toy_config(false);
        let m = zeroed(cfg);
        let (s, centers) = toy_sample(&cfg, 3, 1);
        let (x1, x2) = m.encode_inputs(&vec![0.0; 5], &[vec![0.0; 4]]).unwrap();
        assert!(x1.iter().chain(x2.iter().flatten()).all(|v| *v == 0.0));
        let tr = m.forward_trace(&s, &centers).unwrap();
        let expect = sigmoid(cfg.d1() as f64 / 4.0);
        for st in &tr.steps {
            assert!(st.m.iter().chain(&st.g_inv).flatten().all(|v| *v == 0.5));
            assert!(st.r_prime.iter().all(|r| (r - 1.25).abs() < 1e-15));
            assert!(st.y1.iter().all(|y| (y - expect).abs() < 1e-15));
        }
        let (y3, attract) = m.predict_nontemporal(&s.post, &centers).unwrap();
        assert_eq!(y3, 0.5);
        assert!(!attract);
    }

    #[test]
    fn relu_clamps_negative_coordinate() {
        let cfg = RgnetConfig {
            post_width: 3,
            h1: 3,
            ..toy_config(false)
        };
        let mut m = zeroed(cfg);
        let w1 = m.store.value_mut("W1");
        for i in 0..3 {
            w1[i * 3 + i] = 1.0;
        }
        let (x1, _) = m.encode_inputs(&[0.5, -2.0, 1.0], &[]).unwrap();
        assert_eq!(x1, vec![0.5, 0.0, 1.0]);
        assert!(matches!(
            m.encode_inputs(&[1.0; 4], &[]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn cumulative_context_examples() {
        let cfg = toy_config(false);
        let mut m = zeroed(cfg);
        let xs = vec![vec![1.0, 0.0], vec![0.0, 4.0], vec![2.0, 2.0]];
        assert_eq!(m.cumulative_context(&xs, 0), xs[0]);
        let mean = m.cumulative_context(&xs, 2);
        assert!((mean[0] - 1.0).abs() < 1e-15 && (mean[1] - 2.0).abs() < 1e-15);
        m.store.value_mut("W3")[1] = 3f64.ln();
        let c = m.cumulative_context(&xs, 1);
        assert!((c[0] - 0.25).abs() < 1e-15 && (c[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn curvature_and_heads_examples() {
        let half = vec![vec![0.5; 4]];
        let (r, total) = curvature(&half, &half, &[1.0]);
        assert_eq!(r, vec![1.0]);
        assert_eq!(total, 1.0);
        let (_, sel) = curvature(&[vec![1.0], vec![0.2]], &[vec![1.0], vec![1.0]], &[1.0, 0.0]);
        assert_eq!(sel, 1.0);
        let h = heads(&[0.0, 1.0, -1.0], -2.0);
        assert_eq!(h.y1[0], 0.5);
        assert!((h.y1[1] - 0.7310585786300049).abs() < 1e-12);
        assert!((h.y1[2] - 0.2689414213699951).abs() < 1e-12);
        assert_eq!(h.y2, 0.0);
        assert_eq!(h.decisions(), vec![0, 1, 0]);
    }

    #[test]
    fn temporal_loss_examples() {
        let perfect = StepOutput {
            y1: vec![1.0, 0.0, 1.0],
            y2: 0.7,
        };
        let l = temporal_loss(&[perfect], &[vec![1, 0, 1]], &[0.7], 1.0).unwrap();
        assert!(l <= 1e-5);
        let half = StepOutput {
            y1: vec![0.5; 8],
            y2: 0.0,
        };
        let l = temporal_loss(&[half], &[vec![1, 0, 1, 1, 0, 0, 0, 1]], &[0.0], 1.0).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert!(matches!(temporal_loss(&[], &[], &[], 1.0), Err(Error::NoValidSteps)));
    }

    #[test]
    fn metric_distance_examples() {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0; 3];
        assert!((metric_distance(&[1.0; 3], &x, &y) - 1.0).abs() < 1e-15);
        assert!((metric_distance(&[0.25; 3], &x, &y) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for offset in [false, true] {
            let cfg = toy_config(offset);
            for seed in 0..4 {
                let mut m = Rgnet::new(cfg, seed).unwrap();
                let (s, centers) = toy_sample(&cfg, 3, seed + 100);
                m.store.zero_grad();
                m.temporal_sample_loss_and_grad(&s, &centers).unwrap();
                let cfgc = m.config;
                let report = grad_check(
                    &m.store,
                    |st| {
                        Rgnet::from_store(cfgc, st.clone())
                            .unwrap()
                            .temporal_sample_loss(&s, &centers)
                            .unwrap()
                    },
                    GradCheckOptions::default(),
                );
                assert!(report.passed, "offset={offset} seed={seed}: {report:?}");
            }
        }
    }

    #[test]
    fn nontemporal_gradients_match_finite_differences() {
        let cfg = toy_config(false);
        let mut m = Rgnet::new(cfg, 7).unwrap();
        let (t, centers) = toy_sample(&cfg, 1, 8);
        for label in [0, 1] {
            let s = NontemporalSample {
                id: "p".into(),
                post: t.post.clone(),
                logreg: vec![],
                label,
            };
            m.store.zero_grad();
            m.nontemporal_sample_loss_and_grad(&s, &centers).unwrap();
            let report = grad_check(
                &m.store,
                |st| {
                    Rgnet::from_store(cfg, st.clone())
                        .unwrap()
                        .nontemporal_sample_loss(&s, &centers)
                        .unwrap()
                },
                GradCheckOptions::default(),
            );
            assert!(report.passed, "{report:?}");
        }
    }

    #[test]
    fn lambda_zero_leaves_growth_weights_without_gradient() {
        let cfg = RgnetConfig {
            lambda: 0.0,
            ..toy_config(false)
        };
        let mut m = Rgnet::new(cfg, 3).unwrap();
        let (s, centers) = toy_sample(&cfg, 3, 3);
        m.temporal_sample_loss_and_grad(&s, &centers).unwrap();
        assert!(m.store.grad("W8").iter().all(|g| *g == 0.0));
    }

    #[test]
    fn later_windows_do_not_affect_earlier_steps() {
        let cfg = toy_config(false);
        let m = Rgnet::new(cfg, 5).unwrap();
        let (s, centers) = toy_sample(&cfg, 3, 6);
        let before = m.predict_temporal(&s.post, &s.windows[..1], s.taus[1], &centers).unwrap();
        let tr = m.forward_trace(&s, &centers).unwrap();
        assert_eq!(tr.steps[1].y1, before.y1);
        let mut mutated = s.clone();
        mutated.windows[1] = vec![9.0; 4];
        mutated.windows[2] = vec![-9.0; 4];
        let tr2 = m.forward_trace(&mutated, &centers).unwrap();
        assert_eq!(tr.steps[0], tr2.steps[0]);
        assert_eq!(tr.steps[1], tr2.steps[1]);
    }

    #[test]
    fn training_is_deterministic_and_decreases_loss() {
        let cfg = toy_config(true);
        let samples: Vec<TemporalSample> = (0..6).map(|i| toy_sample(&cfg, 3, 40 + i).0).collect();
        let centers = toy_sample(&cfg, 1, 40).1;
        let opts = TrainOpts {
            epochs: 5,
            lr: 0.01,
            seed: 3,
        };
        let mut a = Rgnet::new(cfg, 1).unwrap();
        let mut b = Rgnet::new(cfg, 1).unwrap();
        let la = train(&mut a, &samples, &centers, &opts).unwrap();
        let lb = train(&mut b, &samples, &centers, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert!(la.epoch_losses[4] < la.initial_loss, "{la:?}");
    }
}
