//! Synthetic corpora with a planted, recoverable engagement rule.
//!
//! Temporal corpus: discussion `k` has topic `c = k mod clusters`. Its first
//! `engaged_windows` windows are written only by members of cluster `c`
//! (comments one second apart, a gap between windows); the remaining window
//! comes from single-activity drive-by users, who are never embedded and so
//! never produce a label. All text is drawn from one topic-neutral
//! vocabulary, so user identity is the only carrier of the rule.
//!
//! Non-temporal corpus: a post attracts comments iff its title contains the
//! marker word.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, Discussion, Post, UserId};
use crate::error::{Error, Result};

const FILLER: &[&str] = &[
    "river", "window", "garden", "market", "signal", "paper", "engine", "harbor", "meadow", "circuit", "lantern",
    "orchard", "canvas", "ladder", "pepper", "valley", "anchor", "bridge", "candle", "desert", "forest", "glacier",
    "island", "jungle", "kettle", "lemon", "mirror", "needle", "ocean", "pillow", "quarry", "rocket", "saddle",
    "timber", "umbrella", "velvet", "wagon", "yarn", "zipper", "basket",
];
const POSITIVE: &[&str] = &["great", "love", "excellent", "helpful", "agree"];
const NEGATIVE: &[&str] = &["bad", "wrong", "awful", "useless", "disagree"];
const STOPWORDS: &[&str] = &["the", "a", "an", "and", "of", "to", "is", "it", "in", "on"];
/// Title word that decides attraction in the non-temporal corpus.
pub const MARKER: &str = "zephyr";

const BASE_TIME: i64 = 1_600_000_000;
const DISCUSSION_SPACING: i64 = 6 * 3600;
const WINDOW_GAP: i64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub clusters: usize,
    pub users_per_cluster: usize,
    pub discussions: usize,
    pub window_size: usize,
    /// Windows per discussion, including the trailing drive-by window.
    pub windows: usize,
    /// Leading windows written by the topic cluster.
    pub engaged_windows: usize,
    /// Seconds between comments inside an engaged window.
    pub engaged_spacing: i64,
    /// Seconds between comments inside the drive-by window.
    pub driveby_spacing: i64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            clusters: 3,
            users_per_cluster: 10,
            discussions: 50,
            window_size: 5,
            windows: 4,
            engaged_windows: 3,
            engaged_spacing: 1,
            driveby_spacing: 2,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.users_per_cluster < 2 || self.window_size == 0 {
            return Err(Error::invalid("synthetic spec needs clusters >= 1, users_per_cluster >= 2, window_size >= 1"));
        }
        if self.engaged_windows == 0 || self.engaged_windows > self.windows {
            return Err(Error::invalid("engaged_windows must be in 1..=windows"));
        }
        if self.engaged_spacing < 1 || self.driveby_spacing < 1 {
            return Err(Error::invalid("comment spacing must be >= 1 second"));
        }
        Ok(())
    }

    pub fn member(c: usize, j: usize) -> UserId {
        UserId::new(format!("c{c}_u{j}")).expect("non-empty id")
    }

    /// Ground-truth label vector for window `i` (1-based) of a topic-`c`
    /// discussion.
    pub fn planted_label(&self, topic: usize, window: usize) -> Vec<u8> {
        let mut y = vec![0u8; self.clusters];
        if window <= self.engaged_windows {
            y[topic] = 1;
        }
        y
    }
}

/// What the generator planted, for checking recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub seed: u64,
    /// Discussion id → topic cluster.
    pub topics: BTreeMap<String, usize>,
    /// Embedded user → planted cluster.
    pub assignments: BTreeMap<String, usize>,
    /// Discussion id → label vector per window.
    pub labels: BTreeMap<String, Vec<Vec<u8>>>,
}

fn sentence<R: Rng>(rng: &mut R, words: usize) -> String {
    let mut out = Vec::with_capacity(words + 2);
    for _ in 0..words {
        out.push(*FILLER.choose(rng).expect("nonempty"));
        if rng.random_bool(0.15) {
            out.push(*STOPWORDS.choose(rng).expect("nonempty"));
        }
    }
    if rng.random_bool(0.3) {
        let pool = if rng.random_bool(0.5) { POSITIVE } else { NEGATIVE };
        out.push(*pool.choose(rng).expect("nonempty"));
    }
    let mut s = out.join(" ");
    s.push('.');
    s
}

fn comment(discussion: &str, idx: usize, author: UserId, parent: String, timestamp: i64, text: String) -> Comment {
    Comment {
        id: format!("{discussion}_c{idx}"),
        author,
        parent_id: parent,
        discussion_id: discussion.to_string(),
        timestamp,
        text,
        depth: 0,
    }
}

fn finish(post: Post, comments: Vec<Comment>) -> Discussion {
    let t_start = post.timestamp;
    let t_end = comments.last().map_or(t_start, |c| c.timestamp);
    let mut d = Discussion {
        post,
        comments,
        t_start,
        t_end,
    };
    let mut depth: HashMap<String, u32> = HashMap::from([(d.post.id.clone(), 0)]);
    for c in &mut d.comments {
        let pd = depth.get(&c.parent_id).copied().unwrap_or(0);
        c.depth = pd + 1;
        depth.insert(c.id.clone(), c.depth);
    }
    d
}

/// Generates the planted temporal corpus.
pub fn make_temporal(spec: &SynthSpec, seed: u64) -> Result<(Vec<Discussion>, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = GroundTruth {
        spec: *spec,
        seed,
        topics: BTreeMap::new(),
        assignments: BTreeMap::new(),
        labels: BTreeMap::new(),
    };
    for c in 0..spec.clusters {
        for j in 0..spec.users_per_cluster {
            truth.assignments.insert(SynthSpec::member(c, j).to_string(), c);
        }
    }
    let mut out = Vec::with_capacity(spec.discussions);
    for k in 0..spec.discussions {
        let topic = k % spec.clusters;
        let id = format!("t{k:04}");
        let author = SynthSpec::member(topic, rng.random_range(0..spec.users_per_cluster));
        let t0 = BASE_TIME + k as i64 * DISCUSSION_SPACING;
        let post = Post {
            id: id.clone(),
            author,
            title: sentence(&mut rng, 4),
            body: (0..2).map(|_| sentence(&mut rng, 8)).collect::<Vec<_>>().join(" "),
            timestamp: t0,
        };
        let mut comments: Vec<Comment> = Vec::new();
        let mut t = t0;
        for w in 1..=spec.windows {
            t += WINDOW_GAP;
            let engaged = w <= spec.engaged_windows;
            let spacing = if engaged { spec.engaged_spacing } else { spec.driveby_spacing };
            for s in 0..spec.window_size {
                let author = if engaged {
                    SynthSpec::member(topic, rng.random_range(0..spec.users_per_cluster))
                } else {
                    UserId::new(format!("drive_{k}_{s}")).expect("non-empty id")
                };
                let parent = if comments.is_empty() || rng.random_bool(0.4) {
                    id.clone()
                } else {
                    comments[rng.random_range(0..comments.len())].id.clone()
                };
                if s > 0 {
                    t += spacing;
                }
                let len = rng.random_range(4..12);
                let text = sentence(&mut rng, len);
                comments.push(comment(&id, comments.len(), author, parent, t, text));
            }
        }
        truth.topics.insert(id.clone(), topic);
        truth
            .labels
            .insert(id, (1..=spec.windows).map(|w| spec.planted_label(topic, w)).collect());
        out.push(finish(post, comments));
    }
    Ok((out, truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NontemporalSpec {
    pub posts: usize,
    /// Users commenting on attractive posts and authoring posts.
    pub users: usize,
    pub comments_per_post: usize,
}

impl Default for NontemporalSpec {
    fn default() -> Self {
        Self {
            posts: 120,
            users: 12,
            comments_per_post: 3,
        }
    }
}

/// Generates a corpus where a post is commented iff its title contains
/// [`MARKER`]; two posts in three are commented, so it needs balancing. Returns the discussions and the attraction labels.
pub fn make_nontemporal(spec: &NontemporalSpec, seed: u64) -> Result<(Vec<Discussion>, BTreeMap<String, u8>)> {
    if spec.users < 2 || spec.comments_per_post == 0 {
        return Err(Error::invalid("non-temporal spec needs >= 2 users and >= 1 comment per post"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users: Vec<UserId> = (0..spec.users)
        .map(|j| UserId::new(format!("n_u{j}")).expect("non-empty id"))
        .collect();
    let mut out = Vec::with_capacity(spec.posts);
    let mut labels = BTreeMap::new();
    for k in 0..spec.posts {
        let attract = k % 3 != 0;
        let id = format!("n{k:04}");
        // Stopword-only titles leave the marker as the sole title signal.
        let mut words: Vec<String> = (0..4).map(|_| STOPWORDS.choose(&mut rng).expect("nonempty").to_string()).collect();
        if attract {
            let pos = rng.random_range(0..=words.len());
            words.insert(pos, MARKER.to_string());
        }
        let t0 = BASE_TIME + k as i64 * DISCUSSION_SPACING;
        let post = Post {
            id: id.clone(),
            author: users.choose(&mut rng).expect("nonempty").clone(),
            title: words.join(" "),
            body: sentence(&mut rng, 10),
            timestamp: t0,
        };
        let mut comments = Vec::new();
        if attract {
            for s in 0..spec.comments_per_post {
                let text = sentence(&mut rng, 6);
                let author = users.choose(&mut rng).expect("nonempty").clone();
                comments.push(comment(&id, s, author, id.clone(), t0 + 30 * (s as i64 + 1), text));
            }
        }
        labels.insert(id, u8::from(attract));
        out.push(finish(post, comments));
    }
    Ok((out, labels))
}

/// All zero-comment posts plus an equal-size seeded sample of commented
/// posts, in input order.
pub fn nontemporal_balance(discussions: &[Discussion], seed: u64) -> Result<Vec<Discussion>> {
    let (empty, commented): (Vec<usize>, Vec<usize>) = (0..discussions.len()).partition(|&i| discussions[i].comments.is_empty());
    if empty.is_empty() || commented.is_empty() {
        return Err(Error::invalid(format!(
            "balancing needs both classes ({} without comments, {} with)",
            empty.len(),
            commented.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = empty.len().min(commented.len());
    // The larger class is subsampled; normally that is the commented one.
    let mut keep: Vec<usize> = empty.choose_multiple(&mut rng, k).copied().collect();
    keep.extend(commented.choose_multiple(&mut rng, k).copied());
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| discussions[i].clone()).collect())
}

/// Lexicon files matching the synthetic vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthLexicons {
    pub words: String,
    pub sentiment: String,
    pub stopwords: String,
}

pub fn make_lexicons(word_dim: usize, seed: u64) -> SynthLexicons {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1e71);
    let mut vocab: Vec<&str> = FILLER.iter().chain(POSITIVE).chain(NEGATIVE).copied().collect();
    vocab.push(MARKER);
    let mut words = String::new();
    for w in vocab {
        let _ = write!(words, "{w}");
        for _ in 0..word_dim {
            let v: f64 = StandardNormal.sample(&mut rng);
            let _ = write!(words, " {:.6}", v / (word_dim as f64).sqrt());
        }
        words.push('\n');
    }
    let mut sentiment = String::new();
    for w in POSITIVE {
        let _ = writeln!(sentiment, "{w} 0.8");
    }
    for w in NEGATIVE {
        let _ = writeln!(sentiment, "{w} -0.8");
    }
    let mut stop: Vec<&str> = STOPWORDS.to_vec();
    stop.sort_unstable();
    SynthLexicons {
        words,
        sentiment,
        stopwords: stop.join("\n") + "\n",
    }
}
