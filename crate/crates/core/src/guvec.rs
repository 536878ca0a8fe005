//! Global user vectors: a sparse symmetric co-occurrence matrix built from
//! reply, timing and title-similarity signals, factorized GloVe-style into
//! per-user vectors and biases.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Discussion, UserId};
use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};
use crate::math::{dot, norm, sigmoid};
use crate::optim::{adam_step, AdamConfig, AdamState, ParamSpec, ParameterStore};
use crate::textfeat::{title_vector, Lexicons};

/// Dense index over a sorted set of users.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserIndex {
    users: Vec<UserId>,
    index: HashMap<UserId, usize>,
}

impl UserIndex {
    pub fn new(users: impl IntoIterator<Item = UserId>) -> Self {
        let sorted: BTreeSet<UserId> = users.into_iter().collect();
        let users: Vec<UserId> = sorted.into_iter().collect();
        let index = users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        Self { users, index }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn get(&self, user: &UserId) -> Option<usize> {
        self.index.get(user).copied()
    }

    pub fn user(&self, i: usize) -> &UserId {
        &self.users[i]
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }
}

/// Upper-triangular sparse storage of a symmetric non-negative matrix with
/// no diagonal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CooccurrenceMatrix {
    dim: usize,
    entries: BTreeMap<(u32, u32), f64>,
}

impl CooccurrenceMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn key(i: usize, j: usize) -> (u32, u32) {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        (a as u32, b as u32)
    }

    /// Adds `value` to `A_ij` and `A_ji`. Diagonal and non-positive
    /// increments are ignored.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        if i == j || value <= 0.0 || !value.is_finite() {
            return;
        }
        assert!(i < self.dim && j < self.dim, "index out of range");
        *self.entries.entry(Self::key(i, j)).or_insert(0.0) += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.entries.get(&Self::key(i, j)).copied().unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Unordered nonzero pairs `(i, j, A_ij)` with `i < j`, sorted.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i as usize, j as usize, v))
    }

    fn apply(&mut self, increments: &[(usize, usize, f64)]) {
        for &(i, j, v) in increments {
            self.add(i, j, v);
        }
    }
}

/// Embedded participants of a discussion with their earliest activity time.
/// The post author counts as active at the post time.
fn participants(d: &Discussion, users: &UserIndex) -> BTreeMap<usize, i64> {
    let mut first = BTreeMap::new();
    let items = std::iter::once((&d.post.author, d.post.timestamp)).chain(d.comments.iter().map(|c| (&c.author, c.timestamp)));
    for (author, t) in items {
        if let Some(i) = users.get(author) {
            let e = first.entry(i).or_insert(t);
            *e = (*e).min(t);
        }
    }
    first
}

fn communicative_increments(d: &Discussion, users: &UserIndex) -> Vec<(usize, usize, f64)> {
    d.reply_edges()
        .into_iter()
        .filter_map(|(a, b)| Some((users.get(a)?, users.get(b)?)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| (i, j, 2.0))
        .collect()
}

fn temporal_increments(d: &Discussion, users: &UserIndex) -> Vec<(usize, usize, f64)> {
    let replied: BTreeSet<(usize, usize)> = communicative_increments(d, users)
        .into_iter()
        .map(|(i, j, _)| (i.min(j), i.max(j)))
        .collect();
    let first: Vec<(usize, i64)> = participants(d, users).into_iter().collect();
    let span = (d.t_end - d.t_start + 1) as f64;
    let mut out = Vec::new();
    for (a, &(i, ti)) in first.iter().enumerate() {
        for &(j, tj) in &first[a + 1..] {
            if replied.contains(&(i, j)) {
                continue;
            }
            let alpha = span / ((ti - tj).abs() as f64 + 1.0);
            out.push((i, j, sigmoid(alpha)));
        }
    }
    out
}

/// +2 for every directed reply between two distinct embedded users,
/// including replies to the post.
pub fn accumulate_communicative(a: &mut CooccurrenceMatrix, d: &Discussion, users: &UserIndex) {
    a.apply(&communicative_increments(d, users));
}

/// `σ(α)` with `α = (t_end − t_start + 1) / (|t_i − t_j| + 1)` for every pair
/// of embedded participants that never replied to each other, using each
/// user's earliest time in the discussion.
pub fn accumulate_temporal(a: &mut CooccurrenceMatrix, d: &Discussion, users: &UserIndex) {
    a.apply(&temporal_increments(d, users));
}

/// Cosine of the angle between two title vectors, or `None` if either is zero.
pub fn title_cosine(tm: &[f64], tn: &[f64]) -> Option<f64> {
    let (nm, nn) = (norm(tm), norm(tn));
    if nm == 0.0 || nn == 0.0 {
        return None;
    }
    Some((dot(tm, tn) / (nm * nn)).clamp(-1.0, 1.0))
}

fn semantic_increments(
    dm: &Discussion,
    dn: &Discussion,
    cos: f64,
    users: &UserIndex,
) -> Vec<(usize, usize, f64)> {
    let um = participants(dm, users);
    let un = participants(dn, users);
    let mut out = Vec::new();
    for &i in um.keys() {
        for &j in un.keys() {
            if i != j {
                out.push((i, j, cos));
            }
        }
    }
    out
}

/// Adds `cos θ` for every cross pair of embedded participants when the angle
/// between the two title vectors is at most `theta0`. Returns whether the
/// pair of discussions qualified.
pub fn accumulate_semantic(
    a: &mut CooccurrenceMatrix,
    dm: &Discussion,
    dn: &Discussion,
    tm: &[f64],
    tn: &[f64],
    theta0: f64,
    users: &UserIndex,
) -> bool {
    let Some(cos) = title_cosine(tm, tn) else {
        warn!("zero title vector for {} or {}; semantic pair skipped", dm.id(), dn.id());
        return false;
    };
    if cos.acos() > theta0 {
        return false;
    }
    a.apply(&semantic_increments(dm, dn, cos, users));
    true
}

/// Discussion index pairs `(m, n, cos θ)` with `m < n` and `θ ≤ theta0`.
pub fn similar_title_pairs(titles: &[Vec<f64>], theta0: f64) -> Vec<(usize, usize, f64)> {
    (0..titles.len())
        .into_par_iter()
        .map(|m| {
            (m + 1..titles.len())
                .filter_map(|n| {
                    let cos = title_cosine(&titles[m], &titles[n])?;
                    (cos.acos() <= theta0).then_some((m, n, cos))
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Builds the full co-occurrence matrix. Per-discussion increments are
/// computed in parallel and applied in discussion order, so the result does
/// not depend on thread count.
pub fn build_cooccurrence(
    discussions: &[Discussion],
    users: &UserIndex,
    lex: &Lexicons,
    theta0: f64,
) -> CooccurrenceMatrix {
    let mut a = CooccurrenceMatrix::new(users.len());
    let local: Vec<Vec<(usize, usize, f64)>> = discussions
        .par_iter()
        .map(|d| {
            let mut inc = communicative_increments(d, users);
            inc.extend(temporal_increments(d, users));
            inc
        })
        .collect();
    for inc in &local {
        a.apply(inc);
    }

    let titles: Vec<Vec<f64>> = discussions.par_iter().map(|d| title_vector(&d.post.title, lex)).collect();
    let zero = titles.iter().filter(|t| norm(t) == 0.0).count();
    if zero > 0 {
        warn!("{zero} discussions have no in-vocabulary title tokens; skipped for semantic proximity");
    }
    let pairs = similar_title_pairs(&titles, theta0);
    let cross: Vec<Vec<(usize, usize, f64)>> = pairs
        .par_iter()
        .map(|&(m, n, cos)| semantic_increments(&discussions[m], &discussions[n], cos, users))
        .collect();
    for inc in &cross {
        a.apply(inc);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityRecord {
    pub users: usize,
    pub nonzeros: usize,
}

pub fn sparsity_profile(a: &CooccurrenceMatrix, users: usize) -> SparsityRecord {
    SparsityRecord {
        users,
        nonzeros: a.nnz(),
    }
}

/// Per-user vectors (row-major `|U| × d`) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub users: UserIndex,
    pub dim: usize,
    pub vectors: Vec<f64>,
    pub biases: Vec<f64>,
}

impl EmbeddingModel {
    pub fn zeros(users: UserIndex, dim: usize) -> Self {
        let n = users.len();
        Self {
            users,
            dim,
            vectors: vec![0.0; n * dim],
            biases: vec![0.0; n],
        }
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector_of(&self, user: &UserId) -> Option<&[f64]> {
        self.users.get(user).map(|i| self.vector(i))
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuvecGrad {
    pub vectors: Vec<f64>,
    pub biases: Vec<f64>,
}

fn accumulate_pairs(
    vectors: &[f64],
    biases: &[f64],
    dim: usize,
    pairs: impl Iterator<Item = (usize, usize, f64)>,
    grad: &mut GuvecGrad,
) -> f64 {
    let mut loss = 0.0;
    for (i, j, aij) in pairs {
        let target = aij.ln_1p();
        let vi = &vectors[i * dim..(i + 1) * dim];
        let vj = &vectors[j * dim..(j + 1) * dim];
        let r = dot(vi, vj) + biases[i] + biases[j] - target;
        loss += target * r * r;
        let c = 2.0 * target * r;
        for k in 0..dim {
            grad.vectors[i * dim + k] += c * vj[k];
            grad.vectors[j * dim + k] += c * vi[k];
        }
        grad.biases[i] += c;
        grad.biases[j] += c;
    }
    loss
}

/// Weighted least-squares objective over unordered nonzero pairs, with its
/// exact gradient.
pub fn guvec_loss_and_grad(model: &EmbeddingModel, a: &CooccurrenceMatrix) -> Result<(f64, GuvecGrad)> {
    if a.dim() != model.len() {
        return Err(Error::ShapeMismatch {
            tensor: "embedding".into(),
            expected: format!("{} users", a.dim()),
            actual: format!("{} users", model.len()),
        });
    }
    let mut grad = GuvecGrad {
        vectors: vec![0.0; model.vectors.len()],
        biases: vec![0.0; model.biases.len()],
    };
    let loss = accumulate_pairs(&model.vectors, &model.biases, model.dim, a.iter(), &mut grad);
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuvecOpts {
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Nonzero pairs per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for GuvecOpts {
    fn default() -> Self {
        Self {
            dim: 128,
            epochs: 30,
            lr: 0.05,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuvecTrained {
    pub model: EmbeddingModel,
    pub initial_loss: f64,
    /// Full objective after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minimizes the objective with mini-batch Adam over shuffled nonzero pairs.
pub fn train_guvec(a: &CooccurrenceMatrix, users: UserIndex, opts: &GuvecOpts) -> Result<GuvecTrained> {
    if opts.dim == 0 {
        return Err(Error::invalid("embedding dimension must be >= 1"));
    }
    if a.nnz() == 0 {
        return Err(Error::invalid("co-occurrence matrix is empty"));
    }
    if a.dim() != users.len() {
        return Err(Error::invalid("co-occurrence dimension does not match user index"));
    }
    let (n, d) = (users.len(), opts.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut store = ParameterStore::init(&[ParamSpec::bias("vectors", n * d), ParamSpec::bias("biases", n)], 0)?;
    let half = 0.5 / d as f64;
    for v in store.value_mut("vectors") {
        *v = rng.random_range(-half..=half);
    }
    let mut adam = AdamState::new(&store, AdamConfig::with_lr(opts.lr));
    let mut pairs: Vec<(usize, usize, f64)> = a.iter().collect();
    let batch = opts.batch_size.max(1);

    let full_loss = |store: &ParameterStore| {
        let mut scratch = GuvecGrad {
            vectors: vec![0.0; n * d],
            biases: vec![0.0; n],
        };
        accumulate_pairs(store.value("vectors"), store.value("biases"), d, a.iter(), &mut scratch)
    };
    let initial_loss = full_loss(&store);
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        pairs.shuffle(&mut rng);
        for chunk in pairs.chunks(batch) {
            let mut g = GuvecGrad {
                vectors: vec![0.0; n * d],
                biases: vec![0.0; n],
            };
            accumulate_pairs(store.value("vectors"), store.value("biases"), d, chunk.iter().copied(), &mut g);
            store.grad_mut("vectors").copy_from_slice(&g.vectors);
            store.grad_mut("biases").copy_from_slice(&g.biases);
            adam_step(&mut store, &mut adam)?;
        }
        epoch_losses.push(full_loss(&store));
    }
    Ok(GuvecTrained {
        model: EmbeddingModel {
            users,
            dim: d,
            vectors: store.value("vectors").to_vec(),
            biases: store.value("biases").to_vec(),
        },
        initial_loss,
        epoch_losses,
    })
}

/// `users.txt`: one user id per line, in index order.
pub fn users_to_string(users: &UserIndex) -> String {
    users.users().iter().map(|u| format!("{u}\n")).collect()
}

pub fn parse_users(text: &str) -> Result<UserIndex> {
    let users = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| UserId::new(l.trim()))
        .collect::<Result<Vec<_>>>()?;
    let idx = UserIndex::new(users.iter().cloned());
    if idx.users() != users.as_slice() {
        return Err(Error::invalid("user list must be sorted and unique"));
    }
    Ok(idx)
}

/// `i j A_ij` triples with `i < j`, sorted.
pub fn cooccurrence_to_string(a: &CooccurrenceMatrix) -> String {
    let mut out = String::new();
    for (i, j, v) in a.iter() {
        writeln!(out, "{i} {j} {v}").unwrap();
    }
    out
}

pub fn parse_cooccurrence(text: &str, dim: usize) -> Result<CooccurrenceMatrix> {
    let mut a = CooccurrenceMatrix::new(dim);
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            line: no + 1,
            message: m.to_string(),
        };
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [i, j, v] = parts.as_slice() else {
            return Err(bad("expected `i j value`"));
        };
        let i: usize = i.parse().map_err(|_| bad("bad row index"))?;
        let j: usize = j.parse().map_err(|_| bad("bad column index"))?;
        let v: f64 = v.parse().map_err(|_| bad("bad value"))?;
        if i >= j || j >= dim || !v.is_finite() || v < 0.0 {
            return Err(bad("entry violates i < j < dim or non-negative finite value"));
        }
        a.add(i, j, v);
    }
    Ok(a)
}

/// `user c1 .. cd bias` per line.
pub fn embedding_to_string(m: &EmbeddingModel) -> String {
    let mut out = String::new();
    for (i, u) in m.users.users().iter().enumerate() {
        out.push_str(u.as_str());
        for v in m.vector(i) {
            write!(out, " {v}").unwrap();
        }
        writeln!(out, " {}", m.biases[i]).unwrap();
    }
    out
}

pub fn parse_embedding(text: &str) -> Result<EmbeddingModel> {
    let mut users = Vec::new();
    let mut vectors = Vec::new();
    let mut biases = Vec::new();
    let mut dim = None;
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse { line: no + 1, message: m };
        let mut parts = line.split_whitespace();
        let user = UserId::new(parts.next().unwrap_or_default())?;
        let vals: Vec<f64> = parts
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(e.to_string()))?;
        if vals.len() < 2 {
            return Err(bad("expected at least one component and a bias".into()));
        }
        let d = *dim.get_or_insert(vals.len() - 1);
        if vals.len() - 1 != d {
            return Err(bad(format!("expected {} components, got {}", d, vals.len() - 1)));
        }
        users.push(user);
        vectors.extend_from_slice(&vals[..d]);
        biases.push(vals[d]);
    }
    let index = UserIndex::new(users.iter().cloned());
    if index.users() != users.as_slice() {
        return Err(Error::invalid("embedding rows must be sorted by unique user id"));
    }
    Ok(EmbeddingModel {
        users: index,
        dim: dim.unwrap_or(1),
        vectors,
        biases,
    })
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingModel> {
    parse_embedding(&read_text(path)?)
}

pub fn save_embedding(path: &Path, m: &EmbeddingModel) -> Result<()> {
    write_atomic(path, embedding_to_string(m).as_bytes())
}
