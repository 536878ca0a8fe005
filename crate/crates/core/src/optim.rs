//! Named parameter tensors, optimizers, finite-difference gradient checking
//! and the checkpoint container shared by every trainable model.
//!
//! Checkpoint format (text, version 1):
//!
//! ```text
//! rgnet-checkpoint 1
//! model <tag>
//! meta <single-line JSON>
//! tensor <name> <ndim> <dim_0> ... <dim_k>
//! <values, space separated, shortest round-trip exponent form>
//! ...
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)).
    Glorot,
    Zeros,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn weight(name: &str, shape: &[usize]) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            init: Init::Glorot,
        }
    }

    pub fn bias(name: &str, len: usize) -> Self {
        Self {
            name: name.into(),
            shape: vec![len],
            init: Init::Zeros,
        }
    }

    pub fn constant(name: &str, shape: &[usize], value: f64) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            init: Init::Constant(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

fn glorot_bound(shape: &[usize]) -> f64 {
    let (fan_out, fan_in) = match shape {
        [len] => (1, *len),
        [rows, cols] => (*rows, *cols),
        _ => {
            let cols = *shape.last().unwrap_or(&1);
            (shape.iter().product::<usize>() / cols.max(1), cols)
        }
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Ordered collection of named tensors with mirrored gradient buffers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParameterStore {
    pub fn init(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::default();
        for spec in specs {
            if spec.shape.is_empty() || spec.shape.contains(&0) {
                return Err(Error::invalid(format!("tensor {} has a zero dimension", spec.name)));
            }
            let len = spec.shape.iter().product();
            let value = match spec.init {
                Init::Glorot => {
                    let b = glorot_bound(&spec.shape);
                    (0..len).map(|_| rng.random_range(-b..=b)).collect()
                }
                Init::Zeros => vec![0.0; len],
                Init::Constant(c) => vec![c; len],
            };
            store.insert(Tensor {
                name: spec.name.clone(),
                shape: spec.shape.clone(),
                grad: vec![0.0; len],
                value,
            })?;
        }
        Ok(store)
    }

    fn insert(&mut self, t: Tensor) -> Result<()> {
        if self.index.contains_key(&t.name) {
            return Err(Error::invalid(format!("duplicate parameter name {}", t.name)));
        }
        self.index.insert(t.name.clone(), self.tensors.len());
        self.tensors.push(t);
        Ok(())
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.tensors[self.position(name)]
    }

    pub fn position(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn value(&self, name: &str) -> &[f64] {
        &self.get(name).value
    }

    pub fn value_mut(&mut self, name: &str) -> &mut [f64] {
        let i = self.position(name);
        &mut self.tensors[i].value
    }

    pub fn grad(&self, name: &str) -> &[f64] {
        &self.get(name).grad
    }

    pub fn grad_mut(&mut self, name: &str) -> &mut [f64] {
        let i = self.position(name);
        &mut self.tensors[i].grad
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Checks that a tensor has the expected shape.
    pub fn expect_shape(&self, name: &str, shape: &[usize]) -> Result<()> {
        match self.index.get(name) {
            Some(&i) if self.tensors[i].shape == shape => Ok(()),
            Some(&i) => Err(Error::ShapeMismatch {
                tensor: name.into(),
                expected: format!("{shape:?}"),
                actual: format!("{:?}", self.tensors[i].shape),
            }),
            None => Err(Error::ShapeMismatch {
                tensor: name.into(),
                expected: format!("{shape:?}"),
                actual: "missing".into(),
            }),
        }
    }

    fn check_grads_finite(&self) -> Result<()> {
        for t in &self.tensors {
            if t.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", t.name)));
            }
        }
        Ok(())
    }

    fn check_values_finite(&self) -> Result<()> {
        for t in &self.tensors {
            if t.value.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(t.name.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Moment accumulators for one [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(store: &ParameterStore, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = store.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update using the gradients held in `store`.
pub fn adam_step(store: &mut ParameterStore, state: &mut AdamState) -> Result<()> {
    store.check_grads_finite()?;
    state.t += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for (k, t) in store.tensors.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..t.value.len() {
            let g = t.grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            t.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    store.check_values_finite()
}

/// Plain gradient descent `θ ← θ − lr·g`.
pub fn gd_step(store: &mut ParameterStore, lr: f64) -> Result<()> {
    store.check_grads_finite()?;
    for t in &mut store.tensors {
        for (v, g) in t.value.iter_mut().zip(&t.grad) {
            *v -= lr * g;
        }
    }
    store.check_values_finite()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub h: f64,
    pub tol: f64,
    /// Coordinates sampled when the store is larger; all are checked otherwise.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tol: 1e-4,
            max_coords: 400,
            seed: 0,
        }
    }
}

/// Relative error with a small absolute floor so that vanishing gradients
/// are compared in absolute terms.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares the gradients stored in `store` against central differences of
/// `loss`. The store's values are left untouched.
pub fn grad_check<F>(store: &ParameterStore, mut loss: F, opts: GradCheckOptions) -> GradCheckReport
where
    F: FnMut(&ParameterStore) -> f64,
{
    let coords: Vec<(usize, usize)> = store
        .tensors
        .iter()
        .enumerate()
        .flat_map(|(k, t)| (0..t.len()).map(move |i| (k, i)))
        .collect();
    let chosen: Vec<(usize, usize)> = if coords.len() > opts.max_coords {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut idx = sample(&mut rng, coords.len(), opts.max_coords).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| coords[i]).collect()
    } else {
        coords
    };

    let mut probe = store.clone();
    let mut worst = None;
    let mut max_rel = 0.0f64;
    for &(k, i) in &chosen {
        let orig = store.tensors[k].value[i];
        probe.tensors[k].value[i] = orig + opts.h;
        let plus = loss(&probe);
        probe.tensors[k].value[i] = orig - opts.h;
        let minus = loss(&probe);
        probe.tensors[k].value[i] = orig;
        let numeric = (plus - minus) / (2.0 * opts.h);
        let rel = relative_error(store.tensors[k].grad[i], numeric);
        if rel > max_rel || worst.is_none() {
            max_rel = max_rel.max(rel);
            if rel >= max_rel {
                worst = Some((store.tensors[k].name.clone(), i));
            }
        }
    }
    GradCheckReport {
        max_rel_error: max_rel,
        worst,
        checked: chosen.len(),
        passed: max_rel <= opts.tol,
    }
}

/// Serializes a store with a model tag and free-form metadata.
pub fn checkpoint_to_string(tag: &str, meta: &serde_json::Value, store: &ParameterStore) -> Result<String> {
    let mut out = String::new();
    let meta = serde_json::to_string(meta)?;
    writeln!(out, "rgnet-checkpoint {CHECKPOINT_VERSION}").unwrap();
    writeln!(out, "model {tag}").unwrap();
    writeln!(out, "meta {meta}").unwrap();
    for t in &store.tensors {
        let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
        writeln!(out, "tensor {} {} {}", t.name, t.shape.len(), dims.join(" ")).unwrap();
        let vals: Vec<String> = t.value.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", vals.join(" ")).unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub tag: String,
    pub meta: serde_json::Value,
    pub store: ParameterStore,
}

pub fn checkpoint_from_str(text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("truncated checkpoint: expected {what}"),
        })
    };
    let bad = |line: usize, message: String| Error::Parse { line: line + 1, message };

    let (no, header) = next("header")?;
    match header.split_once(' ') {
        Some(("rgnet-checkpoint", v)) if v.trim() == CHECKPOINT_VERSION.to_string() => {}
        _ => return Err(bad(no, format!("unsupported checkpoint header `{header}`"))),
    }
    let (no, model) = next("model line")?;
    let tag = model
        .strip_prefix("model ")
        .ok_or_else(|| bad(no, "expected `model <tag>`".into()))?
        .to_string();
    let (no, meta) = next("meta line")?;
    let meta = meta.strip_prefix("meta ").ok_or_else(|| bad(no, "expected `meta <json>`".into()))?;
    let meta: serde_json::Value = serde_json::from_str(meta)?;

    let mut store = ParameterStore::default();
    loop {
        let Ok((no, head)) = next("tensor") else { break };
        if head.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = head.split_whitespace().collect();
        if parts.len() < 3 || parts[0] != "tensor" {
            return Err(bad(no, format!("expected tensor header, got `{head}`")));
        }
        let ndim: usize = parts[2].parse().map_err(|_| bad(no, "bad ndim".into()))?;
        let shape: Vec<usize> = parts[3..]
            .iter()
            .map(|p| p.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(no, "bad dimension".into()))?;
        if shape.len() != ndim {
            return Err(bad(no, "dimension count mismatch".into()));
        }
        let (vno, vals) = next("tensor values")?;
        let value: Vec<f64> = vals
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(vno, e.to_string()))?;
        if value.len() != shape.iter().product::<usize>() {
            return Err(bad(vno, format!("tensor {} has {} values", parts[1], value.len())));
        }
        store.insert(Tensor {
            name: parts[1].to_string(),
            grad: vec![0.0; value.len()],
            shape,
            value,
        })?;
    }
    Ok(Checkpoint { tag, meta, store })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_store(x: &[f64]) -> ParameterStore {
        let mut s = ParameterStore::init(&[ParamSpec::bias("x", x.len())], 0).unwrap();
        s.value_mut("x").copy_from_slice(x);
        s
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let s = ParameterStore::init(&[ParamSpec::weight("w", &[4, 4]), ParamSpec::bias("b", 5)], 7).unwrap();
        let bound = (6.0f64 / 8.0).sqrt();
        assert!((bound - 0.8660254).abs() < 1e-6);
        assert!(s.value("w").iter().all(|v| v.abs() <= bound));
        assert!(s.value("b").iter().all(|v| *v == 0.0));
        let again = ParameterStore::init(&[ParamSpec::weight("w", &[4, 4]), ParamSpec::bias("b", 5)], 7).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn duplicate_names_rejected() {
        let specs = [ParamSpec::bias("b", 2), ParamSpec::bias("b", 3)];
        assert!(ParameterStore::init(&specs, 0).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut s = quad_store(&[1.0, -2.0]);
        let mut st = AdamState::new(&s, AdamConfig::default());
        adam_step(&mut s, &mut st).unwrap();
        assert_eq!(s.value("x"), &[1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut s = quad_store(&[0.0]);
        let mut st = AdamState::new(&s, AdamConfig::default());
        s.grad_mut("x")[0] = 1.0;
        adam_step(&mut s, &mut st).unwrap();
        // m_hat = 1, v_hat = 1, step = lr / (1 + eps)
        assert!((s.value("x")[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut s = quad_store(&[0.0]);
        let mut st = AdamState::new(&s, AdamConfig::default());
        s.grad_mut("x")[0] = f64::NAN;
        match adam_step(&mut s, &mut st) {
            Err(Error::NonFinite(name)) => assert!(name.contains('x')),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn grad_check_quadratic_and_negative_control() {
        let x = [0.3, -1.2, 2.5];
        let mut s = quad_store(&x);
        let loss = |s: &ParameterStore| s.value("x").iter().map(|v| v * v).sum::<f64>();
        for (g, v) in s.grad_mut("x").iter_mut().zip(x) {
            *g = 2.0 * v;
        }
        let r = grad_check(&s, loss, GradCheckOptions::default());
        assert!(r.passed && r.max_rel_error < 1e-6, "{r:?}");
        for g in s.grad_mut("x") {
            *g *= 2.0;
        }
        assert!(!grad_check(&s, loss, GradCheckOptions::default()).passed);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let s = ParameterStore::init(&[ParamSpec::weight("w", &[3, 2]), ParamSpec::constant("c", &[2], 0.1)], 3).unwrap();
        let meta = serde_json::json!({"d": 4});
        let text = checkpoint_to_string("rgnet", &meta, &s).unwrap();
        let ck = checkpoint_from_str(&text).unwrap();
        assert_eq!(ck.tag, "rgnet");
        assert_eq!(ck.meta, meta);
        assert_eq!(ck.store, s);
        assert_eq!(checkpoint_to_string("rgnet", &meta, &ck.store).unwrap(), text);
        assert!(checkpoint_from_str("bogus 1\n").is_err());
    }
}
