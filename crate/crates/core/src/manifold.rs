//! Clustering of the user embedding space, time-augmented cluster centers and
//! engagement homogeneity.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{UserId, WindowedDiscussion};
use crate::error::{Error, Result};
use crate::guvec::EmbeddingModel;
use crate::math::sq_dist;

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;
/// Default cap on elapsed time for the time coordinate: 30 days.
pub const DEFAULT_T_CAP: f64 = 30.0 * 24.0 * 3600.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub dim: usize,
    /// `n` centers, each of length `dim`.
    pub centers: Vec<Vec<f64>>,
    pub assignment: BTreeMap<UserId, usize>,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn n(&self) -> usize {
        self.centers.len()
    }

    pub fn lookup(&self) -> HashMap<UserId, usize> {
        self.assignment.iter().map(|(u, &c)| (u.clone(), c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &[Vec<f64>], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < n {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

/// Lloyd iterations from k-means++ seeds. Ties go to the lowest center
/// index; an emptied cluster is re-seeded with the point farthest from its
/// own center.
pub fn kmeans_points(points: &[Vec<f64>], n: usize, seed: u64) -> Result<KMeansResult> {
    if n == 0 {
        return Err(Error::invalid("cluster count must be >= 1"));
    }
    if n > points.len() {
        return Err(Error::invalid(format!(
            "cannot form {n} clusters from {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_seeds(points, n, &mut rng);
    let mut labels = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    let assign = |centers: &[Vec<f64>], labels: &mut [usize]| -> f64 {
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (k, d) = nearest(p, centers);
            labels[i] = k;
            inertia += d;
        }
        inertia
    };

    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        history.push(assign(&centers, &mut labels));

        let mut counts = vec![0usize; n];
        labels.iter().for_each(|&k| counts[k] += 1);
        for k in 0..n {
            if counts[k] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    let da = sq_dist(&points[a], &centers[labels[a]]);
                    let db = sq_dist(&points[b], &centers[labels[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                });
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                labels[i] = k;
                counts[k] = 1;
            }
        }

        let mut sums = vec![vec![0.0; dim]; n];
        for (p, &k) in points.iter().zip(&labels) {
            for (s, x) in sums[k].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift = 0.0f64;
        for k in 0..n {
            if counts[k] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[k].iter().map(|s| s / counts[k] as f64).collect();
            shift = shift.max(sq_dist(&new, &centers[k]).sqrt());
            centers[k] = new;
        }
        if shift <= KMEANS_TOL {
            break;
        }
    }
    let inertia = assign(&centers, &mut labels);
    history.push(inertia);
    Ok(KMeansResult {
        centers,
        labels,
        inertia,
        inertia_history: history,
        iterations,
    })
}

/// Clusters every embedded user.
pub fn kmeans(model: &EmbeddingModel, n: usize, seed: u64) -> Result<ClusterModel> {
    let points: Vec<Vec<f64>> = (0..model.len()).map(|i| model.vector(i).to_vec()).collect();
    if points.is_empty() {
        return Err(Error::invalid("no embedded users to cluster"));
    }
    let r = kmeans_points(&points, n, seed)?;
    let assignment = model
        .users
        .users()
        .iter()
        .cloned()
        .zip(r.labels.iter().copied())
        .collect();
    Ok(ClusterModel {
        dim: model.dim,
        centers: r.centers,
        assignment,
        inertia: r.inertia,
        inertia_history: r.inertia_history,
        iterations: r.iterations,
    })
}

/// Log-compressed, capped elapsed time in `[0, 1]`.
pub fn time_coordinate(elapsed_seconds: f64, t_cap: f64) -> f64 {
    let dt = elapsed_seconds.max(0.0);
    (dt.ln_1p() / t_cap.ln_1p()).min(1.0)
}

/// Cluster centers with a per-step time coordinate prepended.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeCenters {
    /// Time coordinate for prediction steps `0..=N`.
    pub taus: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
}

impl SpacetimeCenters {
    pub fn n(&self) -> usize {
        self.centers.len()
    }

    /// `(τ_i, C_l)`, length `d + 1`.
    pub fn row(&self, step: usize, l: usize) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.centers[l].len() + 1);
        r.push(self.taus[step]);
        r.extend_from_slice(&self.centers[l]);
        r
    }

    pub fn matrix(&self, step: usize) -> Vec<Vec<f64>> {
        (0..self.n()).map(|l| self.row(step, l)).collect()
    }
}

/// Elapsed seconds from the post to the last comment observed before each
/// prediction step `0..=N`. Step 0 sees only the post.
pub fn observed_elapsed(wd: &WindowedDiscussion<'_>) -> Vec<f64> {
    let d = wd.discussion;
    let mut out = vec![0.0];
    let mut last = d.post.timestamp;
    for w in &wd.windows {
        if let Some(c) = w.comments(d).last() {
            last = c.timestamp;
        }
        out.push((last - d.post.timestamp) as f64);
    }
    out
}

pub fn spacetime_centers(cm: &ClusterModel, wd: &WindowedDiscussion<'_>, t_cap: f64) -> SpacetimeCenters {
    SpacetimeCenters {
        taus: observed_elapsed(wd).into_iter().map(|dt| time_coordinate(dt, t_cap)).collect(),
        centers: cm.centers.clone(),
    }
}

/// Shannon entropy (nats) of the cluster distribution of engaged users.
pub fn homogeneity_entropy(engaged: &[usize], n: usize) -> Result<f64> {
    if engaged.is_empty() {
        return Err(Error::invalid("entropy of an empty engagement set"));
    }
    let mut counts = vec![0usize; n];
    for &c in engaged {
        if c >= n {
            return Err(Error::invalid(format!("cluster index {c} out of range for n={n}")));
        }
        counts[c] += 1;
    }
    let total = engaged.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum())
}

/// `user_id cluster_index` per line, sorted by user.
pub fn clusters_to_string(cm: &ClusterModel) -> String {
    let mut out = String::new();
    for (u, c) in &cm.assignment {
        writeln!(out, "{u} {c}").unwrap();
    }
    out
}

/// One center per line, space separated.
pub fn centers_to_string(cm: &ClusterModel) -> String {
    let mut out = String::new();
    for c in &cm.centers {
        let row: Vec<String> = c.iter().map(f64::to_string).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub n: usize,
    pub dim: usize,
    pub inertia: f64,
    pub iterations: usize,
    pub inertia_history: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl ClusterModel {
    pub fn summary(&self) -> ClusterSummary {
        let mut sizes = vec![0; self.n()];
        self.assignment.values().for_each(|&c| sizes[c] += 1);
        ClusterSummary {
            n: self.n(),
            dim: self.dim,
            inertia: self.inertia,
            iterations: self.iterations,
            inertia_history: self.inertia_history.clone(),
            sizes,
        }
    }
}

/// Rebuilds a cluster model from its two text files.
pub fn parse_clusters(assignments: &str, centers: &str) -> Result<ClusterModel> {
    let mut rows = Vec::new();
    for (no, line) in centers.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: no + 1,
                message: e.to_string(),
            })?;
        rows.push(row);
    }
    let dim = rows.first().map_or(0, Vec::len);
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("centers must be non-empty rows of equal length"));
    }
    let mut assignment = BTreeMap::new();
    for (no, line) in assignments.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            line: no + 1,
            message: m.into(),
        };
        let (u, c) = line.trim().rsplit_once(' ').ok_or_else(|| bad("expected `user cluster`"))?;
        let c: usize = c.parse().map_err(|_| bad("bad cluster index"))?;
        if c >= rows.len() {
            return Err(bad("cluster index out of range"));
        }
        assignment.insert(UserId::new(u)?, c);
    }
    Ok(ClusterModel {
        dim,
        centers: rows,
        assignment,
        inertia: f64::NAN,
        inertia_history: Vec::new(),
        iterations: 0,
    })
}
