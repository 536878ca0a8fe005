//! Content, surface, latent-semantic and user features for posts and comments.
//!
//! Every feature vector has a fixed column order:
//!
//! | block   | width | columns |
//! |---------|-------|---------|
//! | content | 6     | avg tf-idf, LIX, term entropy, polarity sum, positive terms, negative terms |
//! | surface | 6     | sentences, words per sentence, URLs, tree depth, seconds since post, closing punctuation |
//! | latent  | d_w   | tf-idf weighted word-vector mean |
//! | user    | d     | author embedding (zeros for unembedded authors) |
//! | title   | d_w   | posts only: title vector |

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONTENT_WIDTH: usize = 6;
pub const SURFACE_WIDTH: usize = 6;

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").expect("valid url pattern"))
}

/// Removes URLs, returning the remaining text and the number removed.
pub fn strip_urls(text: &str) -> (String, usize) {
    let re = url_regex();
    let count = re.find_iter(text).count();
    (re.replace_all(text, " ").into_owned(), count)
}

/// Lowercased alphanumeric runs. URLs should be stripped beforehand.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn is_closing(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Sentences are maximal runs between closing punctuation that contain at
/// least one word.
pub fn sentence_count(text: &str) -> usize {
    text.split(is_closing).filter(|s| !tokenize(s).is_empty()).count()
}

fn term_counts(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// LIX readability: words per sentence plus the percentage of words longer
/// than six characters. Zero for text without words.
pub fn lix(text: &str) -> f64 {
    let (text, _) = strip_urls(text);
    let words = tokenize(&text);
    if words.is_empty() {
        return 0.0;
    }
    let sentences = sentence_count(&text).max(1);
    let long = words.iter().filter(|w| w.chars().count() > 6).count();
    words.len() as f64 / sentences as f64 + 100.0 * long as f64 / words.len() as f64
}

/// Cumulative term entropy `(1/|T|) Σ tf_t (log|T| − log tf_t)` over the
/// terms of `text`, with `|T|` the corpus vocabulary size.
pub fn term_entropy(text: &str, vocab_size: usize) -> f64 {
    if vocab_size == 0 {
        return 0.0;
    }
    let (text, _) = strip_urls(text);
    let tokens = tokenize(&text);
    let t = vocab_size as f64;
    term_counts(&tokens)
        .values()
        .map(|&tf| {
            let tf = tf as f64;
            tf * (t.ln() - tf.ln())
        })
        .sum::<f64>()
        / t
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Polarity {
    pub sum: f64,
    pub positive: usize,
    pub negative: usize,
}

/// Sentiment sum and signed counts over the unique in-lexicon terms.
pub fn polarity(text: &str, sentiment: &HashMap<String, f64>) -> Polarity {
    let (text, _) = strip_urls(text);
    let unique: BTreeSet<String> = tokenize(&text).into_iter().collect();
    let mut p = Polarity::default();
    for t in &unique {
        if let Some(&s) = sentiment.get(t) {
            p.sum += s;
            if s > 0.0 {
                p.positive += 1;
            } else if s < 0.0 {
                p.negative += 1;
            }
        }
    }
    p
}

/// Document frequencies over a training collection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Idf {
    pub docs: usize,
    pub df: BTreeMap<String, usize>,
}

impl Idf {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut idf = Idf::default();
        for doc in docs {
            idf.docs += 1;
            let (doc, _) = strip_urls(doc);
            let unique: HashSet<String> = tokenize(&doc).into_iter().collect();
            for t in unique {
                *idf.df.entry(t).or_insert(0) += 1;
            }
        }
        idf
    }

    pub fn vocab_size(&self) -> usize {
        self.df.len()
    }

    /// `log(D / (1 + df))`, zero for terms absent from the collection.
    pub fn idf(&self, term: &str) -> f64 {
        match self.df.get(term) {
            Some(&df) if df > 0 => (self.docs as f64 / (1.0 + df as f64)).ln(),
            _ => 0.0,
        }
    }

    /// Strictly positive weight `log(1 + D/df)` used for averaging title
    /// word vectors; zero for unseen terms.
    pub fn smooth_idf(&self, term: &str) -> f64 {
        match self.df.get(term) {
            Some(&df) if df > 0 => (self.docs as f64 / df as f64).ln_1p(),
            _ => 0.0,
        }
    }
}

/// Token → vector table loaded from a whitespace-separated text file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `token c1 ... c_dw` lines; the dimension comes from the first line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut wv = WordVectors::default();
        for (no, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: no + 1,
                    message: e.to_string(),
                })?;
            if wv.dim == 0 {
                wv.dim = values.len();
            }
            if values.len() != wv.dim || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: no + 1,
                    message: format!("expected {} finite components", wv.dim),
                });
            }
            wv.vectors.insert(token.to_lowercase(), values);
        }
        Ok(wv)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// `term score` per line, scores in [-1, 1].
pub fn load_sentiment(path: &Path) -> Result<HashMap<String, f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = HashMap::new();
    for (no, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let (Some(term), Some(score)) = (parts.next(), parts.next()) else { continue };
        let score: f64 = score.parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
            line: no + 1,
            message: e.to_string(),
        })?;
        table.insert(term.to_lowercase(), score.clamp(-1.0, 1.0));
    }
    Ok(table)
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Immutable lookup tables shared by every featurization call.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    /// Over the posts and comments of the training split.
    pub idf: Idf,
    /// Over discussion titles, for title vectors.
    pub title_idf: Idf,
    pub words: WordVectors,
    pub sentiment: HashMap<String, f64>,
    pub stopwords: HashSet<String>,
}

impl Lexicons {
    pub fn word_dim(&self) -> usize {
        self.words.dim
    }
}

/// Tf-idf weighted mean of word vectors over the non-stopword,
/// in-vocabulary title tokens; zero when there are none.
pub fn title_vector(title: &str, lex: &Lexicons) -> Vec<f64> {
    let (title, _) = strip_urls(title);
    let tokens: Vec<String> = tokenize(&title)
        .into_iter()
        .filter(|t| !lex.stopwords.contains(t))
        .collect();
    let mut acc = vec![0.0; lex.word_dim()];
    let mut total = 0.0;
    for (term, tf) in term_counts(&tokens) {
        let Some(v) = lex.words.get(term) else { continue };
        let weight = tf as f64 * lex.title_idf.smooth_idf(term);
        if weight <= 0.0 {
            continue;
        }
        total += weight;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += weight * x;
        }
    }
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    acc
}

/// `(1/|C|) Σ_{t∈C} tfidf_t · W_t` over the unique in-vocabulary terms `C`.
pub fn latent_vector(text: &str, lex: &Lexicons) -> Vec<f64> {
    let (text, _) = strip_urls(text);
    let tokens = tokenize(&text);
    let mut acc = vec![0.0; lex.word_dim()];
    let mut support = 0usize;
    for (term, tf) in term_counts(&tokens) {
        let Some(v) = lex.words.get(term) else { continue };
        support += 1;
        let w = tf as f64 * lex.idf.idf(term);
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    if support > 0 {
        acc.iter_mut().for_each(|a| *a /= support as f64);
    }
    acc
}

/// Mean tf-idf over the unique terms of `text` that occur in the corpus.
pub fn avg_tfidf(text: &str, idf: &Idf) -> f64 {
    let (text, _) = strip_urls(text);
    let tokens = tokenize(&text);
    let (mut sum, mut support) = (0.0, 0usize);
    for (term, tf) in term_counts(&tokens) {
        if idf.df.contains_key(term) {
            sum += tf as f64 * idf.idf(term);
            support += 1;
        }
    }
    if support == 0 {
        0.0
    } else {
        sum / support as f64
    }
}

pub fn content_block(text: &str, lex: &Lexicons) -> [f64; CONTENT_WIDTH] {
    let p = polarity(text, &lex.sentiment);
    [
        avg_tfidf(text, &lex.idf),
        lix(text),
        term_entropy(text, lex.idf.vocab_size()),
        p.sum,
        p.positive as f64,
        p.negative as f64,
    ]
}

pub fn surface_block(text: &str, depth: u32, seconds_since_post: i64) -> [f64; SURFACE_WIDTH] {
    let (stripped, urls) = strip_urls(text);
    let sentences = sentence_count(&stripped);
    let words = tokenize(&stripped).len();
    let closing = stripped.chars().filter(|c| is_closing(*c)).count();
    [
        sentences as f64,
        if sentences == 0 { 0.0 } else { words as f64 / sentences as f64 },
        urls as f64,
        depth as f64,
        seconds_since_post as f64,
        closing as f64,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Content,
    Surface,
    Latent,
    User,
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "content" => Ok(Self::Content),
            "surface" => Ok(Self::Surface),
            "latent" => Ok(Self::Latent),
            "user" => Ok(Self::User),
            other => Err(Error::invalid(format!("unknown feature group `{other}`"))),
        }
    }
}

/// Column layout of a post or comment feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub word_dim: usize,
    pub user_dim: usize,
    pub is_post: bool,
}

impl FeatureLayout {
    pub fn comment(word_dim: usize, user_dim: usize) -> Self {
        Self {
            word_dim,
            user_dim,
            is_post: false,
        }
    }

    pub fn post(word_dim: usize, user_dim: usize) -> Self {
        Self {
            word_dim,
            user_dim,
            is_post: true,
        }
    }

    pub fn width(&self) -> usize {
        CONTENT_WIDTH + SURFACE_WIDTH + self.word_dim + self.user_dim + if self.is_post { self.word_dim } else { 0 }
    }

    /// Column ranges belonging to a group. The post title block counts as
    /// latent semantics.
    pub fn ranges(&self, group: FeatureGroup) -> Vec<Range<usize>> {
        let s = CONTENT_WIDTH;
        let l = s + SURFACE_WIDTH;
        let u = l + self.word_dim;
        let t = u + self.user_dim;
        match group {
            FeatureGroup::Content => vec![0..s],
            FeatureGroup::Surface => vec![s..l],
            FeatureGroup::Latent if self.is_post => vec![l..u, t..t + self.word_dim],
            FeatureGroup::Latent => vec![l..u],
            FeatureGroup::User => vec![u..t],
        }
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = [
            "content_avg_tfidf",
            "content_lix",
            "content_term_entropy",
            "content_polarity_sum",
            "content_positive_terms",
            "content_negative_terms",
            "surface_sentences",
            "surface_words_per_sentence",
            "surface_urls",
            "surface_depth",
            "surface_seconds_since_post",
            "surface_closing_punct",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cols.extend((0..self.word_dim).map(|i| format!("latent_{i}")));
        cols.extend((0..self.user_dim).map(|i| format!("user_{i}")));
        if self.is_post {
            cols.extend((0..self.word_dim).map(|i| format!("title_{i}")));
        }
        cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub content: [f64; CONTENT_WIDTH],
    pub surface: [f64; SURFACE_WIDTH],
    pub latent: Vec<f64>,
    pub user: Vec<f64>,
    /// Present for posts only.
    pub title: Option<Vec<f64>>,
}

impl FeatureVector {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            word_dim: self.latent.len(),
            user_dim: self.user.len(),
            is_post: self.title.is_some(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().width());
        v.extend_from_slice(&self.content);
        v.extend_from_slice(&self.surface);
        v.extend_from_slice(&self.latent);
        v.extend_from_slice(&self.user);
        if let Some(t) = &self.title {
            v.extend_from_slice(t);
        }
        v
    }
}

fn user_block(user: Option<&[f64]>, user_dim: usize) -> Vec<f64> {
    match user {
        Some(u) if u.len() == user_dim => u.to_vec(),
        _ => vec![0.0; user_dim],
    }
}

/// Features of a post; the text is the title followed by the body.
pub fn featurize_post(
    post: &crate::corpus::Post,
    lex: &Lexicons,
    user: Option<&[f64]>,
    user_dim: usize,
) -> FeatureVector {
    let text = format!("{}\n{}", post.title, post.body);
    FeatureVector {
        content: content_block(&text, lex),
        surface: surface_block(&text, 0, 0),
        latent: latent_vector(&text, lex),
        user: user_block(user, user_dim),
        title: Some(title_vector(&post.title, lex)),
    }
}

pub fn featurize_comment(
    comment: &crate::corpus::Comment,
    post_timestamp: i64,
    lex: &Lexicons,
    user: Option<&[f64]>,
    user_dim: usize,
) -> FeatureVector {
    FeatureVector {
        content: content_block(&comment.text, lex),
        surface: surface_block(&comment.text, comment.depth, comment.timestamp - post_timestamp),
        latent: latent_vector(&comment.text, lex),
        user: user_block(user, user_dim),
        title: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationMode {
    Drop,
    Noise,
}

/// A `GROUP:MODE` ablation such as `user:drop`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub group: FeatureGroup,
    pub mode: AblationMode,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (g, m) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("ablation `{s}` must look like GROUP:MODE")))?;
        let mode = match m.to_ascii_lowercase().as_str() {
            "drop" => AblationMode::Drop,
            "noise" => AblationMode::Noise,
            other => return Err(Error::invalid(format!("unknown ablation mode `{other}`"))),
        };
        Ok(Ablation {
            group: g.parse()?,
            mode,
        })
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let g = match self.group {
            FeatureGroup::Content => "content",
            FeatureGroup::Surface => "surface",
            FeatureGroup::Latent => "latent",
            FeatureGroup::User => "user",
        };
        let m = match self.mode {
            AblationMode::Drop => "drop",
            AblationMode::Noise => "noise",
        };
        write!(f, "{g}:{m}")
    }
}

/// Per-column mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, width: usize) -> Self {
        let mut sum = vec![0.0; width];
        let mut sq = vec![0.0; width];
        let mut n = 0usize;
        for r in rows {
            n += 1;
            for (j, v) in r.iter().enumerate() {
                sum[j] += v;
                sq[j] += v * v;
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n - m * m).max(0.0).sqrt())
            .collect();
        Self { mean, std }
    }

    /// Z-scores a row; constant columns are only centred.
    pub fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s > 1e-12 { (v - m) / s } else { v - m })
            .collect()
    }
}

/// Drops a feature group or replaces it with Gaussian draws matching the
/// per-column training statistics.
pub fn ablate<R: Rng + ?Sized>(
    features: &[f64],
    layout: &FeatureLayout,
    ablation: Ablation,
    stats: &FeatureStats,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if features.len() != layout.width() || stats.mean.len() != layout.width() {
        return Err(Error::ShapeMismatch {
            tensor: "features".into(),
            expected: layout.width().to_string(),
            actual: features.len().to_string(),
        });
    }
    let ranges = layout.ranges(ablation.group);
    let in_group = |j: usize| ranges.iter().any(|r| r.contains(&j));
    Ok(match ablation.mode {
        AblationMode::Drop => features
            .iter()
            .enumerate()
            .filter(|(j, _)| !in_group(*j))
            .map(|(_, v)| *v)
            .collect(),
        AblationMode::Noise => features
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if !in_group(j) {
                    return *v;
                }
                let (m, s) = (stats.mean[j], stats.std[j]);
                if s > 0.0 {
                    Normal::new(m, s).expect("finite std").sample(rng)
                } else {
                    m
                }
            })
            .collect(),
    })
}

/// Width of a layout after an ablation has been applied.
pub fn ablated_width(layout: &FeatureLayout, ablation: Option<Ablation>) -> usize {
    match ablation {
        Some(a) if a.mode == AblationMode::Drop => {
            layout.width() - layout.ranges(a.group).iter().map(|r| r.len()).sum::<usize>()
        }
        _ => layout.width(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lex_with(words: &[(&str, Vec<f64>)], docs: &[&str]) -> Lexicons {
        Lexicons {
            idf: Idf::fit(docs.iter().copied()),
            title_idf: Idf::fit(docs.iter().copied()),
            words: WordVectors {
                dim: words.first().map_or(0, |w| w.1.len()),
                vectors: words.iter().map(|(t, v)| (t.to_string(), v.clone())).collect(),
            },
            sentiment: HashMap::new(),
            stopwords: ["the", "a"].iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn lix_examples() {
        // 10 words, 2 sentences, 3 words longer than six characters
        let text = "Reading complex text is so hard. Shorter ones are easy.";
        assert_eq!(tokenize(text).len(), 10);
        assert_eq!(sentence_count(text), 2);
        assert!((lix(text) - 35.0).abs() < 1e-12);
        assert_eq!(lix("a."), 1.0);
        assert_eq!(lix(""), 0.0);
    }

    #[test]
    fn term_entropy_examples() {
        assert!((term_entropy("word", 4) - 0.25 * 4f64.ln()).abs() < 1e-12);
        assert!(term_entropy("x x x x", 4).abs() < 1e-12);
        assert_eq!(term_entropy("", 4), 0.0);
    }

    #[test]
    fn polarity_counts_unique_terms() {
        let table: HashMap<String, f64> = [("good".to_string(), 0.8), ("bad".to_string(), -0.5)].into();
        let p = polarity("good and bad", &table);
        assert!((p.sum - 0.3).abs() < 1e-12);
        assert_eq!((p.positive, p.negative), (1, 1));
        assert_eq!(polarity("neutral words", &table), Polarity::default());
        let p = polarity("good good", &table);
        assert_eq!((p.sum, p.positive, p.negative), (0.8, 1, 0));
    }

    #[test]
    fn title_vector_examples() {
        let lex = lex_with(&[("alpha", vec![1.0, 0.0]), ("beta", vec![0.0, 3.0])], &["alpha beta", "beta alpha"]);
        assert_eq!(title_vector("Alpha", &lex), vec![1.0, 0.0]);
        assert_eq!(title_vector("alpha beta", &lex), vec![0.5, 1.5]);
        assert_eq!(title_vector("the a", &lex), vec![0.0, 0.0]);
    }

    #[test]
    fn latent_vector_examples() {
        // two docs, "alpha" in one: idf = ln(2/2) = 0; use a corpus where idf(alpha) = 1
        let docs: Vec<String> = (0..8).map(|i| if i == 0 { "alpha beta".into() } else { format!("w{i}") }).collect();
        let mut lex = lex_with(&[("alpha", vec![1.0, 2.0]), ("beta", vec![3.0, -1.0])], &[]);
        lex.idf = Idf::fit(docs.iter().map(String::as_str));
        let u = lex.idf.idf("alpha");
        assert!((u - 4f64.ln()).abs() < 1e-12);
        let v = latent_vector("alpha beta", &lex);
        assert!((v[0] - u / 2.0 * 4.0).abs() < 1e-12 && (v[1] - u / 2.0 * 1.0).abs() < 1e-12);
        assert_eq!(latent_vector("gamma delta", &lex), vec![0.0, 0.0]);
    }

    #[test]
    fn surface_block_counts() {
        let text = "See http://a.example/x and www.b.example now! Is it true? Yes it is.";
        let s = surface_block(text, 4, 120);
        assert_eq!(s[0], 3.0);
        assert_eq!(s[2], 2.0);
        assert_eq!(s[3], 4.0);
        assert_eq!(s[4], 120.0);
        assert!(s[5] >= 3.0);
    }

    #[test]
    fn layout_ranges_cover_all_columns() {
        let l = FeatureLayout::post(3, 2);
        let mut cols: Vec<usize> = [FeatureGroup::Content, FeatureGroup::Surface, FeatureGroup::Latent, FeatureGroup::User]
            .iter()
            .flat_map(|g| l.ranges(*g))
            .flatten()
            .collect();
        cols.sort_unstable();
        assert_eq!(cols, (0..l.width()).collect::<Vec<_>>());
        assert_eq!(l.columns().len(), l.width());
    }

    #[test]
    fn ablation_drop_and_noise() {
        let layout = FeatureLayout::comment(2, 3);
        let row: Vec<f64> = (0..layout.width()).map(|v| v as f64).collect();
        let stats = FeatureStats {
            mean: vec![7.0; layout.width()],
            std: vec![0.0; layout.width()],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Ablation = "user:drop".parse().unwrap();
        assert_eq!(ablate(&row, &layout, a, &stats, &mut rng).unwrap().len(), layout.width() - 3);
        let a: Ablation = "content:noise".parse().unwrap();
        let out = ablate(&row, &layout, a, &stats, &mut rng).unwrap();
        assert_eq!(&out[..6], &[7.0; 6]);
        assert_eq!(&out[6..], &row[6..]);
        assert!("bogus:drop".parse::<Ablation>().is_err());
    }
}
