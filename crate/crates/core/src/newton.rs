//! Newtonian-gravity baseline: a scalar mass from the cumulative context, a
//! learned weighted position of the commenters so far, and inverse-square
//! attraction per cluster.
//!
//! ```text
//! M_i   = σ(W'1·σ(W'2·X''[i] + B'1) + B'2)
//! r_i   = Σ_{j<i·w} ω_j r[j] / Σ ω_j,   ω_j = exp(W'3[j])   (zero if no embedded commenter)
//! q_l   = M_i / (|r_i − C_l|² + ε)
//! y1[l] = σ(q_l)        y2 = relu(Σ_l W'4[l] q_l)
//! ```

use serde::{Deserialize, Serialize};

use crate::dataset::{StepOutput, TemporalSample};
use crate::error::{Error, Result};
use crate::math::{add_assign, add_outer, affine, affine_t, relu, sigmoid, sq_dist};
use crate::model::{encode, encode_backward, softmax_prefix, weighted_mean, weighted_mean_backward, Trainable, PROB_CLIP};
use crate::optim::{ParamSpec, ParameterStore};

/// Guard added to squared distances.
pub const DIST_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub post_width: usize,
    pub comment_width: usize,
    pub dim: usize,
    pub clusters: usize,
    pub max_windows: usize,
    pub window_size: usize,
    pub h1: usize,
    pub h2: usize,
    pub lambda: f64,
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.post_width,
            self.comment_width,
            self.dim,
            self.clusters,
            self.max_windows,
            self.window_size,
            self.h1,
            self.h2,
        ];
        if dims.contains(&0) {
            return Err(Error::invalid(format!("all baseline dimensions must be >= 1: {self:?}")));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::weight("W1", &[self.h1, self.post_width]),
            ParamSpec::weight("W2", &[self.h1, self.comment_width]),
            ParamSpec::bias("B1", self.h1),
            ParamSpec::weight("W3", &[self.max_windows + 1]),
            ParamSpec::weight("Wp2", &[self.h2, self.h1]),
            ParamSpec::bias("Bp1", self.h2),
            ParamSpec::weight("Wp1", &[1, self.h2]),
            ParamSpec::bias("Bp2", 1),
            ParamSpec::weight("Wp3", &[self.max_windows * self.window_size]),
            ParamSpec::constant("Wp4", &[self.clusters], 1.0 / self.clusters as f64),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Newton {
    pub config: NewtonConfig,
    pub store: ParameterStore,
}

/// `σ(W'1·σ(W'2·x + B'1) + B'2)` with its hidden layer.
fn mass_layers(store: &ParameterStore, xpp: &[f64]) -> (Vec<f64>, f64) {
    let h: Vec<f64> = affine(store.value("Wp2"), Some(store.value("Bp1")), xpp, store.value("Bp1").len())
        .into_iter()
        .map(sigmoid)
        .collect();
    let m = sigmoid(affine(store.value("Wp1"), Some(store.value("Bp2")), &h, 1)[0]);
    (h, m)
}

/// Embedded commenters at positions before `limit`.
fn positions(commenters: &[Option<Vec<f64>>], limit: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    commenters
        .iter()
        .take(limit)
        .enumerate()
        .filter_map(|(j, v)| v.as_ref().map(|v| (j, v.clone())))
        .unzip()
}

fn gather_weights(w: &[f64], idx: &[usize]) -> Vec<f64> {
    let picked: Vec<f64> = idx.iter().map(|&j| w[j]).collect();
    softmax_prefix(&picked, picked.len() - 1)
}

struct StepCache {
    ctx_weights: Vec<f64>,
    xpp: Vec<f64>,
    hidden: Vec<f64>,
    mass: f64,
    idx: Vec<usize>,
    users: Vec<Vec<f64>>,
    pos_weights: Vec<f64>,
    r: Vec<f64>,
    dist: Vec<f64>,
    q: Vec<f64>,
    total: f64,
}

impl Newton {
    pub fn new(config: NewtonConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            store: ParameterStore::init(&config.param_specs(), seed)?,
        })
    }

    pub fn from_store(config: NewtonConfig, store: ParameterStore) -> Result<Self> {
        config.validate()?;
        for spec in config.param_specs() {
            store.expect_shape(&spec.name, &spec.shape)?;
        }
        Ok(Self { config, store })
    }

    /// Scalar mass from a cumulative context vector.
    pub fn newton_mass(&self, xpp: &[f64]) -> f64 {
        mass_layers(&self.store, xpp).1
    }

    /// Weighted average of the embedded commenters before `limit`; zero
    /// vector when there is none.
    pub fn newton_position(&self, commenters: &[Option<Vec<f64>>], limit: usize) -> Vec<f64> {
        let (idx, users) = positions(commenters, limit.min(self.store.value("Wp3").len()));
        if idx.is_empty() {
            return vec![0.0; self.config.dim];
        }
        weighted_mean(&gather_weights(self.store.value("Wp3"), &idx), &users)
    }

    /// Inverse-square heads for a mass, a position and the cluster centers.
    pub fn newton_heads(&self, mass: f64, r: &[f64], centers: &[Vec<f64>]) -> StepOutput {
        let q: Vec<f64> = centers.iter().map(|c| mass / (sq_dist(r, c) + DIST_EPS)).collect();
        let total: f64 = q.iter().zip(self.store.value("Wp4")).map(|(q, w)| q * w).sum();
        StepOutput {
            y1: q.iter().map(|&v| sigmoid(v)).collect(),
            y2: relu(total),
        }
    }

    fn step_forward(&self, a: &[Vec<f64>], i: usize, commenters: &[Option<Vec<f64>>], centers: &[Vec<f64>]) -> Result<StepCache> {
        if centers.len() != self.config.clusters {
            return Err(Error::ShapeMismatch {
                tensor: "centers".into(),
                expected: self.config.clusters.to_string(),
                actual: centers.len().to_string(),
            });
        }
        let ctx_weights = softmax_prefix(self.store.value("W3"), i);
        let xpp = weighted_mean(&ctx_weights, &a[..=i]);
        let (hidden, mass) = mass_layers(&self.store, &xpp);
        let limit = (i * self.config.window_size).min(self.store.value("Wp3").len());
        let (idx, users) = positions(commenters, limit);
        let (pos_weights, r) = if idx.is_empty() {
            (Vec::new(), vec![0.0; self.config.dim])
        } else {
            let w = gather_weights(self.store.value("Wp3"), &idx);
            let r = weighted_mean(&w, &users);
            (w, r)
        };
        let dist: Vec<f64> = centers.iter().map(|c| sq_dist(&r, c) + DIST_EPS).collect();
        let q: Vec<f64> = dist.iter().map(|d| mass / d).collect();
        let total = q.iter().zip(self.store.value("Wp4")).map(|(q, w)| q * w).sum();
        Ok(StepCache {
            ctx_weights,
            xpp,
            hidden,
            mass,
            idx,
            users,
            pos_weights,
            r,
            dist,
            q,
            total,
        })
    }

    /// Prediction at `step`, observing the post, `windows[..step]` and the
    /// commenters before position `step · w`.
    pub fn predict_step(&self, s: &TemporalSample, centers: &[Vec<f64>], step: usize) -> Result<StepOutput> {
        let windows = &s.windows[..step.min(s.windows.len())];
        let enc = encode(self.store.value("W1"), self.store.value("W2"), self.store.value("B1"), &s.post, windows)?;
        let c = self.step_forward(&enc.a, windows.len(), &s.commenters, centers)?;
        Ok(StepOutput {
            y1: c.q.iter().map(|&v| sigmoid(v)).collect(),
            y2: relu(c.total),
        })
    }

    fn pass(&self, s: &TemporalSample, centers: &[Vec<f64>], mut grad: Option<&mut Vec<Vec<f64>>>) -> Result<f64> {
        let steps = s.steps();
        if steps == 0 {
            return Err(Error::NoValidSteps);
        }
        let used = steps - 1;
        let windows = &s.windows[..used];
        let st = &self.store;
        let enc = encode(st.value("W1"), st.value("W2"), st.value("B1"), &s.post, windows)?;
        let n = self.config.clusters as f64;
        let scale = 1.0 / steps as f64;
        let lambda = self.config.lambda;
        let mut da = vec![vec![0.0; self.config.h1]; used + 1];
        let mut loss = 0.0;
        let pos = |name: &str| st.position(name);
        for i in 0..steps {
            let c = self.step_forward(&enc.a, i, &s.commenters, centers)?;
            let y1: Vec<f64> = c.q.iter().map(|&v| sigmoid(v)).collect();
            let y2 = relu(c.total);
            let target = s.growth[i].shifted;
            let labels = &s.labels[i];
            let mut b = 0.0;
            for (&p, &t) in y1.iter().zip(labels) {
                let pc = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                let t = f64::from(t);
                b -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
            }
            loss += scale * (b / n + lambda * (y2 - target).powi(2));

            let Some(g) = grad.as_deref_mut() else { continue };
            let dtotal = if c.total > 0.0 {
                scale * 2.0 * lambda * (y2 - target)
            } else {
                0.0
            };
            let wp4 = st.value("Wp4");
            let mut dmass = 0.0;
            let mut dr = vec![0.0; self.config.dim];
            for l in 0..centers.len() {
                let t = f64::from(labels[l]);
                let dlogit = if (PROB_CLIP..=1.0 - PROB_CLIP).contains(&y1[l]) {
                    y1[l] - t
                } else {
                    0.0
                };
                g[pos("Wp4")][l] += dtotal * c.q[l];
                let dq = scale * dlogit / n + dtotal * wp4[l];
                dmass += dq / c.dist[l];
                let ddist = -dq * c.mass / (c.dist[l] * c.dist[l]);
                for (k, d) in dr.iter_mut().enumerate() {
                    *d += ddist * 2.0 * (c.r[k] - centers[l][k]);
                }
            }
            if !c.idx.is_empty() {
                let mut dw = vec![0.0; c.idx.len()];
                let mut sink = vec![vec![0.0; self.config.dim]; c.idx.len()];
                weighted_mean_backward(&c.pos_weights, &c.users, &c.r, &dr, &mut dw, &mut sink);
                for (k, &j) in c.idx.iter().enumerate() {
                    g[pos("Wp3")][j] += dw[k];
                }
            }
            let dz1 = dmass * c.mass * (1.0 - c.mass);
            add_outer(&mut g[pos("Wp1")], &[dz1], &c.hidden);
            g[pos("Bp2")][0] += dz1;
            let dh = affine_t(st.value("Wp1"), &[dz1], c.hidden.len());
            let dz2: Vec<f64> = dh.iter().zip(&c.hidden).map(|(d, h)| d * h * (1.0 - h)).collect();
            add_outer(&mut g[pos("Wp2")], &dz2, &c.xpp);
            add_assign(&mut g[pos("Bp1")], &dz2);
            let dxpp = affine_t(st.value("Wp2"), &dz2, c.xpp.len());
            weighted_mean_backward(&c.ctx_weights, &enc.a[..=i], &c.xpp, &dxpp, &mut g[pos("W3")], &mut da[..=i]);
        }
        if let Some(g) = grad {
            let (w1, w2, b1) = (pos("W1"), pos("W2"), pos("B1"));
            let mut gw1 = std::mem::take(&mut g[w1]);
            let mut gw2 = std::mem::take(&mut g[w2]);
            let mut gb1 = std::mem::take(&mut g[b1]);
            encode_backward(&enc, &s.post, windows, &da, &mut gw1, &mut gw2, &mut gb1);
            g[w1] = gw1;
            g[w2] = gw2;
            g[b1] = gb1;
        }
        Ok(loss)
    }

    pub fn sample_loss(&self, s: &TemporalSample, centers: &[Vec<f64>]) -> Result<f64> {
        self.pass(s, centers, None)
    }

    pub fn sample_loss_and_grad(&mut self, s: &TemporalSample, centers: &[Vec<f64>]) -> Result<f64> {
        let mut g: Vec<Vec<f64>> = self.store.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        let loss = self.pass(s, centers, Some(&mut g))?;
        for (t, g) in self.store.tensors_mut().iter_mut().zip(g) {
            add_assign(&mut t.grad, &g);
        }
        Ok(loss)
    }
}

impl Trainable<TemporalSample> for Newton {
    fn store(&self) -> &ParameterStore {
        &self.store
    }
    fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }
    fn sample_loss(&self, s: &TemporalSample, c: &[Vec<f64>]) -> Result<f64> {
        Newton::sample_loss(self, s, c)
    }
    fn sample_loss_and_grad(&mut self, s: &TemporalSample, c: &[Vec<f64>]) -> Result<f64> {
        Newton::sample_loss_and_grad(self, s, c)
    }
    fn usable(s: &TemporalSample) -> bool {
        s.steps() > 0
    }
}
