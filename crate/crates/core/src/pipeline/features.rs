//! Turns a corpus plus embedding and clusters into model-ready datasets.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{growth_target, window_labels, windowize, Comment, Corpus, Discussion, UserId};
use crate::dataset::{DatasetShape, NontemporalDataset, NontemporalSample, TemporalDataset, TemporalSample};
use crate::error::{Error, Result};
use crate::guvec::EmbeddingModel;
use crate::manifold::{spacetime_centers, ClusterModel};
use crate::textfeat::{
    ablate, ablated_width, content_block, featurize_comment, featurize_post, load_sentiment, load_stopwords,
    surface_block, Ablation, AblationMode, FeatureGroup, FeatureLayout, FeatureStats, Idf, Lexicons, WordVectors,
    CONTENT_WIDTH, SURFACE_WIDTH,
};

/// Chronological train/test partition by discussion id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Oldest discussions train, the latest `test_fraction` are held out.
pub fn chronological_split(discussions: &[Discussion], test_fraction: f64) -> Split {
    let mut order: Vec<(i64, &str)> = discussions.iter().map(|d| (d.post.timestamp, d.id())).collect();
    order.sort_unstable();
    let test = (order.len() as f64 * test_fraction).round() as usize;
    let cut = order.len() - test.min(order.len());
    Split {
        train: order[..cut].iter().map(|(_, id)| id.to_string()).collect(),
        test: order[cut..].iter().map(|(_, id)| id.to_string()).collect(),
    }
}

pub(crate) fn by_id<'a>(corpus: &'a Corpus, ids: &[String]) -> Result<Vec<&'a Discussion>> {
    let index: HashMap<&str, &Discussion> = corpus.discussions.iter().map(|d| (d.id(), d)).collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::invalid(format!("split names unknown discussion {id}")))
        })
        .collect()
}

/// Idf tables fitted on the training discussions plus the optional lexicon
/// files.
pub fn build_lexicons(
    train: &[&Discussion],
    words: Option<&Path>,
    sentiment: Option<&Path>,
    stopwords: Option<&Path>,
) -> Result<Lexicons> {
    let mut docs: Vec<String> = Vec::new();
    for d in train {
        docs.push(format!("{}\n{}", d.post.title, d.post.body));
        docs.extend(d.comments.iter().map(|c| c.text.clone()));
    }
    Ok(Lexicons {
        idf: Idf::fit(docs.iter().map(String::as_str)),
        title_idf: Idf::fit(train.iter().map(|d| d.post.title.as_str())),
        words: words.map(WordVectors::load).transpose()?.unwrap_or_default(),
        sentiment: sentiment.map(load_sentiment).transpose()?.unwrap_or_default(),
        stopwords: stopwords.map(load_stopwords).transpose()?.unwrap_or_default(),
    })
}

/// Shared inputs of both dataset builders.
pub struct FeatureContext<'a> {
    pub corpus: &'a Corpus,
    pub split: &'a Split,
    pub lex: &'a Lexicons,
    pub embedding: &'a EmbeddingModel,
    pub clusters: &'a ClusterModel,
    pub ablation: Option<Ablation>,
    pub seed: u64,
}

impl FeatureContext<'_> {
    fn user_vec(&self, u: &UserId) -> Option<&[f64]> {
        if self.corpus.is_embedded(u) {
            self.embedding.vector_of(u)
        } else {
            None
        }
    }

    fn dim(&self) -> usize {
        self.embedding.dim
    }
}

/// Ablation followed by standardization, both fitted on training rows.
struct Transform {
    layout: FeatureLayout,
    ablation: Option<Ablation>,
    raw: FeatureStats,
    scaled: FeatureStats,
}

impl Transform {
    fn fit(layout: FeatureLayout, ablation: Option<Ablation>, train_rows: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<Self> {
        let raw = FeatureStats::fit(train_rows.iter().map(Vec::as_slice), layout.width());
        let width = ablated_width(&layout, ablation);
        let ablated: Vec<Vec<f64>> = match ablation {
            // Scaling is fitted on one ablated draw of the training rows.
            Some(a) => train_rows
                .iter()
                .map(|r| ablate(r, &layout, a, &raw, rng))
                .collect::<Result<_>>()?,
            None => train_rows.to_vec(),
        };
        let scaled = FeatureStats::fit(ablated.iter().map(Vec::as_slice), width);
        Ok(Self {
            layout,
            ablation,
            raw,
            scaled,
        })
    }

    fn apply(&self, row: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let a = match self.ablation {
            Some(a) => ablate(row, &self.layout, a, &self.raw, rng)?,
            None => row.to_vec(),
        };
        Ok(self.scaled.standardize(&a))
    }
}

/// Logistic-baseline aggregate layout: content and surface of the merged
/// text, then the cluster's mean user vector, then its mean reply degree.
fn logreg_ablate(row: &[f64], dim: usize, ablation: Option<Ablation>, raw: &FeatureStats, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let Some(a) = ablation else { return Ok(row.to_vec()) };
    if a.group == FeatureGroup::Latent {
        return Ok(row.to_vec());
    }
    let text = CONTENT_WIDTH + SURFACE_WIDTH;
    // Degree is a user-network feature and follows the user block.
    let in_group = |j: usize| match a.group {
        FeatureGroup::Content => j < CONTENT_WIDTH,
        FeatureGroup::Surface => (CONTENT_WIDTH..text).contains(&j),
        FeatureGroup::User => j >= text,
        FeatureGroup::Latent => false,
    };
    debug_assert_eq!(row.len(), text + dim + 1);
    let mut out = Vec::with_capacity(row.len());
    for (j, &v) in row.iter().enumerate() {
        if !in_group(j) {
            out.push(v);
        } else if a.mode == AblationMode::Noise {
            let (m, s) = (raw.mean[j], raw.std[j]);
            out.push(if s > 0.0 {
                rand_distr::Distribution::sample(&rand_distr::Normal::new(m, s).expect("finite std"), rng)
            } else {
                m
            });
        }
    }
    Ok(out)
}

fn logreg_width(dim: usize, ablation: Option<Ablation>) -> usize {
    let full = CONTENT_WIDTH + SURFACE_WIDTH + dim + 1;
    match ablation {
        Some(a) if a.mode == AblationMode::Drop => match a.group {
            FeatureGroup::Content => full - CONTENT_WIDTH,
            FeatureGroup::Surface => full - SURFACE_WIDTH,
            FeatureGroup::User => full - dim - 1,
            FeatureGroup::Latent => full,
        },
        _ => full,
    }
}

/// Raw per-cluster aggregates at every step of one discussion.
fn logreg_rows(
    ctx: &FeatureContext<'_>,
    d: &Discussion,
    prefixes: &[&[Comment]],
    lookup: &HashMap<UserId, usize>,
) -> Vec<Vec<Vec<f64>>> {
    let n = ctx.clusters.n();
    let dim = ctx.dim();
    prefixes
        .iter()
        .map(|prefix| {
            let mut merged = format!("{}\n{}", d.post.title, d.post.body);
            for c in *prefix {
                merged.push('\n');
                merged.push_str(&c.text);
            }
            let elapsed = prefix.last().map_or(0, |c| c.timestamp - d.post.timestamp);
            let mut text = content_block(&merged, ctx.lex).to_vec();
            text.extend_from_slice(&surface_block(&merged, 0, elapsed));

            let authors: HashMap<&str, &UserId> = std::iter::once((d.post.id.as_str(), &d.post.author))
                .chain(prefix.iter().map(|c| (c.id.as_str(), &c.author)))
                .collect();
            let mut degree: HashMap<&UserId, usize> = HashMap::new();
            for c in *prefix {
                if let Some(p) = authors.get(c.parent_id.as_str()) {
                    if *p != &c.author {
                        *degree.entry(&c.author).or_default() += 1;
                        *degree.entry(p).or_default() += 1;
                    }
                }
            }
            let engaged: BTreeSet<&UserId> = prefix.iter().map(|c| &c.author).collect();
            (0..n)
                .map(|k| {
                    let members: Vec<(&UserId, &[f64])> = engaged
                        .iter()
                        .filter(|u| lookup.get(**u) == Some(&k))
                        .filter_map(|u| ctx.user_vec(u).map(|v| (*u, v)))
                        .collect();
                    let mut row = text.clone();
                    let mut mean = vec![0.0; dim];
                    let mut deg = 0.0;
                    if !members.is_empty() {
                        for (u, v) in &members {
                            mean.iter_mut().zip(*v).for_each(|(m, x)| *m += x);
                            deg += degree.get(u).copied().unwrap_or(0) as f64;
                        }
                        let c = members.len() as f64;
                        mean.iter_mut().for_each(|m| *m /= c);
                        deg /= c;
                    }
                    row.extend(mean);
                    row.push(deg);
                    row
                })
                .collect()
        })
        .collect()
}

/// Raw inputs of one discussion before ablation and scaling.
struct RawTemporal {
    id: String,
    post: Vec<f64>,
    comments: Vec<Vec<Vec<f64>>>,
    taus: Vec<f64>,
    labels: Vec<Vec<u8>>,
    growth: Vec<crate::corpus::GrowthTarget>,
    commenters: Vec<Option<Vec<f64>>>,
    logreg: Vec<Vec<Vec<f64>>>,
    engaged: Vec<Vec<usize>>,
}

fn raw_temporal(ctx: &FeatureContext<'_>, d: &Discussion, w: usize, n_max: usize, t_cap: f64, lookup: &HashMap<UserId, usize>) -> Result<RawTemporal> {
    let dim = ctx.dim();
    let wd = windowize(d, w, n_max)?;
    let valid = wd.valid_count();
    let post = featurize_post(&d.post, ctx.lex, ctx.user_vec(&d.post.author), dim).to_vec();
    let comments: Vec<Vec<Vec<f64>>> = (0..valid)
        .map(|i| {
            wd.window_comments(i)
                .iter()
                .map(|c| featurize_comment(c, d.post.timestamp, ctx.lex, ctx.user_vec(&c.author), dim).to_vec())
                .collect()
        })
        .collect();
    let labels = window_labels(&wd, lookup, ctx.clusters.n())?;
    let growth = (0..valid).map(|i| growth_target(wd.window_comments(i))).collect::<Result<_>>()?;
    let observed = &d.comments[..d.comments.len().min(w * n_max)];
    let commenters = observed.iter().map(|c| ctx.user_vec(&c.author).map(<[f64]>::to_vec)).collect();
    let prefixes: Vec<&[Comment]> = (0..valid).map(|i| &observed[..(i * w).min(observed.len())]).collect();
    let logreg = logreg_rows(ctx, d, &prefixes, lookup);
    let engaged = (0..valid)
        .map(|i| {
            let seen: BTreeSet<&UserId> = observed[..((i + 1) * w).min(observed.len())]
                .iter()
                .map(|c| &c.author)
                .filter(|u| ctx.corpus.is_embedded(u))
                .collect();
            seen.iter().filter_map(|u| lookup.get(*u).copied()).collect()
        })
        .collect();
    Ok(RawTemporal {
        id: d.id().to_string(),
        post,
        comments,
        taus: spacetime_centers(ctx.clusters, &wd, t_cap).taus,
        labels,
        growth,
        commenters,
        logreg,
        engaged,
    })
}

pub fn temporal_dataset(ctx: &FeatureContext<'_>, window_size: usize, max_windows: usize, t_cap: f64) -> Result<TemporalDataset> {
    let dim = ctx.dim();
    let lookup = ctx.clusters.lookup();
    let build = |ids: &[String]| -> Result<Vec<RawTemporal>> {
        by_id(ctx.corpus, ids)?
            .into_iter()
            .map(|d| raw_temporal(ctx, d, window_size, max_windows, t_cap, &lookup))
            .collect()
    };
    let train_raw = build(&ctx.split.train)?;
    let test_raw = build(&ctx.split.test)?;

    let word_dim = ctx.lex.word_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0xab1a_7e);
    let post_rows: Vec<Vec<f64>> = train_raw.iter().map(|r| r.post.clone()).collect();
    let comment_rows: Vec<Vec<f64>> = train_raw.iter().flat_map(|r| r.comments.iter().flatten().cloned()).collect();
    let post_tf = Transform::fit(FeatureLayout::post(word_dim, dim), ctx.ablation, &post_rows, &mut rng)?;
    let comment_tf = Transform::fit(FeatureLayout::comment(word_dim, dim), ctx.ablation, &comment_rows, &mut rng)?;
    let n = ctx.clusters.n();
    let lr_width = CONTENT_WIDTH + SURFACE_WIDTH + dim + 1;
    let lr_rows: Vec<&[f64]> = train_raw
        .iter()
        .flat_map(|r| r.logreg.iter().flatten().map(Vec::as_slice))
        .collect();
    let lr_raw = FeatureStats::fit(lr_rows.iter().copied(), lr_width);

    let mut finish = |raws: Vec<RawTemporal>| -> Result<Vec<TemporalSample>> {
        raws.into_iter()
            .map(|r| {
                let windows = r
                    .comments
                    .iter()
                    .map(|cs| {
                        let scaled: Vec<Vec<f64>> = cs.iter().map(|c| comment_tf.apply(c, &mut rng)).collect::<Result<_>>()?;
                        let k = scaled.len() as f64;
                        let mut mean = vec![0.0; scaled[0].len()];
                        for s in &scaled {
                            mean.iter_mut().zip(s).for_each(|(m, x)| *m += x / k);
                        }
                        Ok(mean)
                    })
                    .collect::<Result<_>>()?;
                let logreg = r
                    .logreg
                    .iter()
                    .map(|per| per.iter().map(|row| logreg_ablate(row, dim, ctx.ablation, &lr_raw, &mut rng)).collect())
                    .collect::<Result<_>>()?;
                Ok(TemporalSample {
                    id: r.id,
                    post: post_tf.apply(&r.post, &mut rng)?,
                    windows,
                    taus: r.taus,
                    labels: r.labels,
                    growth: r.growth,
                    commenters: r.commenters,
                    logreg,
                    engaged: r.engaged,
                })
            })
            .collect()
    };
    let train = finish(train_raw)?;
    let test = finish(test_raw)?;
    Ok(TemporalDataset {
        shape: DatasetShape {
            post_width: ablated_width(&post_tf.layout, ctx.ablation),
            comment_width: ablated_width(&comment_tf.layout, ctx.ablation),
            logreg_width: logreg_width(dim, ctx.ablation),
            dim,
            clusters: n,
            window_size,
            max_windows,
        },
        centers: ctx.clusters.centers.clone(),
        train,
        test,
    })
}

pub fn nontemporal_dataset(ctx: &FeatureContext<'_>, window_size: usize, max_windows: usize) -> Result<NontemporalDataset> {
    let dim = ctx.dim();
    let word_dim = ctx.lex.word_dim();
    let raw = |ids: &[String]| -> Result<Vec<(String, Vec<f64>, u8)>> {
        Ok(by_id(ctx.corpus, ids)?
            .into_iter()
            .map(|d| {
                let post = featurize_post(&d.post, ctx.lex, ctx.user_vec(&d.post.author), dim).to_vec();
                (d.id().to_string(), post, u8::from(!d.comments.is_empty()))
            })
            .collect())
    };
    let train_raw = raw(&ctx.split.train)?;
    let test_raw = raw(&ctx.split.test)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0xab1a_7e);
    let rows: Vec<Vec<f64>> = train_raw.iter().map(|r| r.1.clone()).collect();
    let tf = Transform::fit(FeatureLayout::post(word_dim, dim), ctx.ablation, &rows, &mut rng)?;
    let mut finish = |raws: Vec<(String, Vec<f64>, u8)>| -> Result<Vec<NontemporalSample>> {
        raws.into_iter()
            .map(|(id, post, label)| {
                let x = tf.apply(&post, &mut rng)?;
                Ok(NontemporalSample {
                    id,
                    logreg: x.clone(),
                    post: x,
                    label,
                })
            })
            .collect()
    };
    let train = finish(train_raw)?;
    let test = finish(test_raw)?;
    let width = ablated_width(&tf.layout, ctx.ablation);
    Ok(NontemporalDataset {
        shape: DatasetShape {
            post_width: width,
            comment_width: ablated_width(&FeatureLayout::comment(word_dim, dim), ctx.ablation),
            logreg_width: width,
            dim,
            clusters: ctx.clusters.n(),
            window_size,
            max_windows,
        },
        centers: ctx.clusters.centers.clone(),
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logreg_widths_follow_ablation() {
        let raw = FeatureStats {
            mean: vec![0.0; 17],
            std: vec![1.0; 17],
        };
        let row: Vec<f64> = (0..17).map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for spec in ["user:drop", "content:drop", "surface:drop", "latent:drop", "user:noise"] {
            let a: Ablation = spec.parse().unwrap();
            let out = logreg_ablate(&row, 4, Some(a), &raw, &mut rng).unwrap();
            assert_eq!(out.len(), logreg_width(4, Some(a)), "{spec}");
        }
        let out = logreg_ablate(&row, 4, Some("user:drop".parse().unwrap()), &raw, &mut rng).unwrap();
        assert_eq!(out, row[..12].to_vec());
    }
}
