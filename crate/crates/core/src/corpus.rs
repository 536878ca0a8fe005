//! Discussion data model, JSON-lines ingestion and comment windowing.
//!
//! A corpus file holds one discussion per line:
//!
//! ```text
//! {"post": {"id", "author", "title", "body", "timestamp"},
//!  "comments": [{"id", "author", "parent_id", "timestamp", "body"}, ...]}
//! ```
//!
//! Timestamps are integer UNIX seconds. Parsing normalizes each discussion
//! (chronological comment order, derived depths, orphan reattachment) so that
//! writing a parsed corpus back out and re-parsing it is lossless.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::invalid("user id must be non-empty"));
        }
        Ok(UserId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    pub id: String,
    pub author: UserId,
    /// Post id or the id of another comment in the same discussion.
    pub parent_id: String,
    pub discussion_id: String,
    pub timestamp: i64,
    pub text: String,
    /// Post is depth 0, top-level comments depth 1.
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub id: String,
    pub author: UserId,
    pub title: String,
    pub body: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discussion {
    pub post: Post,
    /// Sorted ascending by timestamp.
    pub comments: Vec<Comment>,
    pub t_start: i64,
    pub t_end: i64,
}

impl Discussion {
    pub fn id(&self) -> &str {
        &self.post.id
    }

    /// Author of the item with the given id, which may be the post.
    pub fn author_of(&self, id: &str) -> Option<&UserId> {
        if id == self.post.id {
            return Some(&self.post.author);
        }
        self.comments.iter().find(|c| c.id == id).map(|c| &c.author)
    }

    /// Directed reply edges `(replier, replied_to)` over the comment tree,
    /// including comment→post replies.
    pub fn reply_edges(&self) -> Vec<(&UserId, &UserId)> {
        let authors: HashMap<&str, &UserId> = std::iter::once((self.post.id.as_str(), &self.post.author))
            .chain(self.comments.iter().map(|c| (c.id.as_str(), &c.author)))
            .collect();
        self.comments
            .iter()
            .filter_map(|c| authors.get(c.parent_id.as_str()).map(|p| (&c.author, *p)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    #[serde(default = "default_excluded_tags")]
    pub excluded_author_tags: Vec<String>,
    #[serde(default = "default_min_user_discussions")]
    pub min_user_discussions: usize,
}

fn default_excluded_tags() -> Vec<String> {
    vec!["deleted".into(), "[deleted]".into(), "DeltaBot".into()]
}

fn default_min_user_discussions() -> usize {
    2
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            excluded_author_tags: default_excluded_tags(),
            min_user_discussions: default_min_user_discussions(),
        }
    }
}

impl FilterConfig {
    pub fn is_excluded(&self, author: &UserId) -> bool {
        self.excluded_author_tags.iter().any(|t| t == author.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub discussions: usize,
    pub users: usize,
    pub comments: usize,
    /// Comments dropped because their author carries an excluded tag.
    pub removed_comments: usize,
    /// Users active in fewer than `min_user_discussions` discussions.
    pub single_activity_users: usize,
    pub embedded_users: usize,
    /// Comments whose parent id was not found, reattached to the post.
    pub orphans_reattached: usize,
    /// Comments whose parent was removed, moved to the nearest kept ancestor.
    pub reparented: usize,
    /// Comments stamped before their post, clamped to the post time.
    pub clamped_timestamps: usize,
}

/// A parsed, filtered corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub discussions: Vec<Discussion>,
    pub manifest: CorpusManifest,
    /// Users eligible for embedding, labels and user features.
    pub embedded: BTreeSet<UserId>,
    pub single_activity: BTreeSet<UserId>,
}

impl Corpus {
    pub fn is_embedded(&self, user: &UserId) -> bool {
        self.embedded.contains(user)
    }

    /// Builds a corpus from already-normalized discussions, recomputing the
    /// user-activity flags.
    pub fn from_discussions(discussions: Vec<Discussion>, filter: &FilterConfig) -> Self {
        let stats = LineStats::default();
        assemble(discussions, stats, filter)
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct RawPost {
    id: String,
    author: String,
    title: String,
    #[serde(default)]
    body: String,
    timestamp: i64,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawComment {
    id: String,
    author: String,
    parent_id: String,
    timestamp: i64,
    #[serde(default)]
    body: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawDiscussion {
    post: RawPost,
    #[serde(default)]
    comments: Vec<RawComment>,
}

#[derive(Debug, Default, Clone, Copy)]
struct LineStats {
    removed: usize,
    orphans: usize,
    reparented: usize,
    clamped: usize,
}

impl std::ops::AddAssign for LineStats {
    fn add_assign(&mut self, o: Self) {
        self.removed += o.removed;
        self.orphans += o.orphans;
        self.reparented += o.reparented;
        self.clamped += o.clamped;
    }
}

/// Reads a JSON-lines corpus file and applies the author filters.
pub fn parse_corpus(path: &Path, filter: &FilterConfig) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_str(&text, filter)
}

pub fn parse_corpus_str(text: &str, filter: &FilterConfig) -> Result<Corpus> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let parsed: Vec<Result<(Discussion, LineStats)>> = lines
        .par_iter()
        .map(|(no, line)| parse_line(*no, line, filter))
        .collect();

    let mut discussions = Vec::with_capacity(parsed.len());
    let mut stats = LineStats::default();
    let mut seen = HashSet::new();
    for (item, (no, _)) in parsed.into_iter().zip(&lines) {
        let (d, s) = item?;
        if !seen.insert(d.post.id.clone()) {
            return Err(Error::Parse {
                line: *no,
                message: format!("duplicate discussion id {}", d.post.id),
            });
        }
        stats += s;
        discussions.push(d);
    }
    if stats.orphans > 0 {
        warn!("reattached {} orphan comments to their posts", stats.orphans);
    }
    Ok(assemble(discussions, stats, filter))
}

fn assemble(discussions: Vec<Discussion>, stats: LineStats, filter: &FilterConfig) -> Corpus {
    let mut activity: BTreeMap<&UserId, usize> = BTreeMap::new();
    for d in &discussions {
        let mut users: BTreeSet<&UserId> = d.comments.iter().map(|c| &c.author).collect();
        users.insert(&d.post.author);
        for u in users {
            if !filter.is_excluded(u) {
                *activity.entry(u).or_default() += 1;
            }
        }
    }
    let mut embedded = BTreeSet::new();
    let mut single_activity = BTreeSet::new();
    for (u, count) in &activity {
        if *count >= filter.min_user_discussions {
            embedded.insert((*u).clone());
        } else {
            single_activity.insert((*u).clone());
        }
    }
    let manifest = CorpusManifest {
        discussions: discussions.len(),
        users: activity.len(),
        comments: discussions.iter().map(|d| d.comments.len()).sum(),
        removed_comments: stats.removed,
        single_activity_users: single_activity.len(),
        embedded_users: embedded.len(),
        orphans_reattached: stats.orphans,
        reparented: stats.reparented,
        clamped_timestamps: stats.clamped,
    };
    Corpus {
        discussions,
        manifest,
        embedded,
        single_activity,
    }
}

fn parse_line(no: usize, line: &str, filter: &FilterConfig) -> Result<(Discussion, LineStats)> {
    let err = |message: String| Error::Parse { line: no, message };
    let raw: RawDiscussion = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
    let post = Post {
        author: UserId::new(raw.post.author).map_err(|e| err(e.to_string()))?,
        id: raw.post.id,
        title: raw.post.title,
        body: raw.post.body,
        timestamp: raw.post.timestamp,
    };
    if post.title.trim().is_empty() {
        return Err(err(format!("post {} has an empty title", post.id)));
    }

    let mut stats = LineStats::default();
    // parent links of every comment, kept or not, for reparenting
    let mut parent_of: HashMap<&str, &str> = HashMap::new();
    let mut removed: HashSet<&str> = HashSet::new();
    for c in &raw.comments {
        if c.id == post.id || parent_of.insert(&c.id, &c.parent_id).is_some() {
            return Err(err(format!("duplicate comment id {}", c.id)));
        }
        if c.author.is_empty() {
            return Err(err(format!("comment {} has an empty author", c.id)));
        }
        if filter.excluded_author_tags.iter().any(|t| *t == c.author) {
            removed.insert(&c.id);
        }
    }
    stats.removed = removed.len();

    let mut kept: Vec<(usize, Comment)> = Vec::new();
    for (order, c) in raw.comments.iter().enumerate() {
        if removed.contains(c.id.as_str()) {
            continue;
        }
        let mut parent = c.parent_id.as_str();
        let mut hops = 0;
        while removed.contains(parent) && hops <= raw.comments.len() {
            parent = parent_of[parent];
            hops += 1;
        }
        let parent = if parent == post.id || (parent_of.contains_key(parent) && !removed.contains(parent)) {
            if hops > 0 {
                stats.reparented += 1;
            }
            parent.to_string()
        } else {
            stats.orphans += 1;
            post.id.clone()
        };
        let mut timestamp = c.timestamp;
        if timestamp < post.timestamp {
            stats.clamped += 1;
            timestamp = post.timestamp;
        }
        kept.push((
            order,
            Comment {
                id: c.id.clone(),
                author: UserId(c.author.clone()),
                parent_id: parent,
                discussion_id: post.id.clone(),
                timestamp,
                text: c.body.clone(),
                depth: 0,
            },
        ));
    }

    // depths over the kept tree; cycles are broken by reattaching to the post
    let index: HashMap<String, usize> = kept.iter().enumerate().map(|(i, (_, c))| (c.id.clone(), i)).collect();
    let mut depth: Vec<Option<u32>> = vec![None; kept.len()];
    for start in 0..kept.len() {
        'retry: loop {
            let mut chain: Vec<usize> = Vec::new();
            let mut cur = start;
            let base = loop {
                if let Some(d) = depth[cur] {
                    break d;
                }
                if chain.contains(&cur) {
                    kept[cur].1.parent_id = post.id.clone();
                    stats.orphans += 1;
                    continue 'retry;
                }
                chain.push(cur);
                let parent = &kept[cur].1.parent_id;
                if *parent == post.id {
                    break 0;
                }
                cur = index[parent];
            };
            // chain runs child -> ancestor; assign from the ancestor end
            let mut d = base;
            for &c in chain.iter().rev() {
                d += 1;
                depth[c] = Some(d);
            }
            break;
        }
    }
    for (c, d) in kept.iter_mut().zip(depth) {
        c.1.depth = d.expect("every comment receives a depth");
    }

    kept.sort_by_key(|(order, c)| (c.timestamp, *order));
    let comments: Vec<Comment> = kept.into_iter().map(|(_, c)| c).collect();
    let t_start = post.timestamp;
    let t_end = comments.last().map_or(t_start, |c| c.timestamp);
    Ok((
        Discussion {
            post,
            comments,
            t_start,
            t_end,
        },
        stats,
    ))
}

/// Serializes discussions in the corpus line format (atomic write).
pub fn write_corpus(path: &Path, discussions: &[Discussion]) -> Result<()> {
    crate::io::write_atomic(path, corpus_to_string(discussions)?.as_bytes())
}

pub fn corpus_to_string(discussions: &[Discussion]) -> Result<String> {
    let mut out = String::new();
    for d in discussions {
        out.push_str(&discussion_to_line(d)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn discussion_to_line(d: &Discussion) -> Result<String> {
    let raw = RawDiscussion {
        post: RawPost {
            id: d.post.id.clone(),
            author: d.post.author.0.clone(),
            title: d.post.title.clone(),
            body: d.post.body.clone(),
            timestamp: d.post.timestamp,
        },
        comments: d
            .comments
            .iter()
            .map(|c| RawComment {
                id: c.id.clone(),
                author: c.author.0.clone(),
                parent_id: c.parent_id.clone(),
                timestamp: c.timestamp,
                body: c.text.clone(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&raw)?)
}

/// A block of up to `w` consecutive comments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    /// 1-based window index.
    pub index: usize,
    pub start: usize,
    pub actual_count: usize,
    pub valid: bool,
}

impl Window {
    pub fn comments<'a>(&self, d: &'a Discussion) -> &'a [Comment] {
        &d.comments[self.start..self.start + self.actual_count]
    }
}

#[derive(Debug, Clone)]
pub struct WindowedDiscussion<'a> {
    pub discussion: &'a Discussion,
    pub window_size: usize,
    pub max_windows: usize,
    pub windows: Vec<Window>,
    /// Comments past `max_windows · window_size`.
    pub dropped: usize,
}

impl<'a> WindowedDiscussion<'a> {
    pub fn window_comments(&self, i: usize) -> &'a [Comment] {
        self.windows[i].comments(self.discussion)
    }

    pub fn valid_windows(&self) -> impl Iterator<Item = &Window> {
        self.windows.iter().filter(|w| w.valid)
    }

    pub fn valid_count(&self) -> usize {
        self.windows.iter().filter(|w| w.valid).count()
    }
}

/// Slices a discussion into `max_windows` windows of `w` comments each.
pub fn windowize(d: &Discussion, w: usize, max_windows: usize) -> Result<WindowedDiscussion<'_>> {
    if w == 0 || max_windows == 0 {
        return Err(Error::invalid("window size and window count must be >= 1"));
    }
    let total = d.comments.len();
    let windows = (0..max_windows)
        .map(|i| {
            let start = (i * w).min(total);
            let count = total.saturating_sub(start).min(w);
            Window {
                index: i + 1,
                start,
                actual_count: count,
                valid: count > 0,
            }
        })
        .collect();
    let dropped = total.saturating_sub(w * max_windows);
    if dropped > 0 {
        warn!("discussion {}: {} comments beyond the last window dropped", d.id(), dropped);
    }
    Ok(WindowedDiscussion {
        discussion: d,
        window_size: w,
        max_windows,
        windows,
        dropped,
    })
}

/// Binary engagement vector for a set of comments: entry `c` is 1 when any
/// author assigned to cluster `c` commented. Unassigned authors are ignored.
pub fn engagement_vector<'c, S: std::hash::BuildHasher>(
    comments: impl IntoIterator<Item = &'c Comment>,
    assignments: &HashMap<UserId, usize, S>,
    n: usize,
) -> Vec<u8> {
    let mut y = vec![0u8; n];
    for c in comments {
        if let Some(&k) = assignments.get(&c.author) {
            if k < n {
                y[k] = 1;
            }
        }
    }
    y
}

/// One label vector per valid window.
pub fn window_labels<S: std::hash::BuildHasher>(
    wd: &WindowedDiscussion<'_>,
    assignments: &HashMap<UserId, usize, S>,
    n: usize,
) -> Result<Vec<Vec<u8>>> {
    if n == 0 {
        return Err(Error::invalid("cluster count must be >= 1"));
    }
    Ok(wd
        .valid_windows()
        .map(|w| engagement_vector(w.comments(wd.discussion), assignments, n))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthTarget {
    /// `log(m / Δt)`, may be negative.
    pub raw: f64,
    /// `log(1 + m / Δt)`, the non-negative training target.
    pub shifted: f64,
    pub count: usize,
    pub dt: i64,
}

/// Growth rate of a window of `m` comments spanning `t_first..=t_last`.
/// Δt is clamped below at one second.
pub fn growth_from_span(m: usize, t_first: i64, t_last: i64) -> Result<GrowthTarget> {
    if m == 0 {
        return Err(Error::invalid("growth target needs at least one comment"));
    }
    let dt = (t_last - t_first).max(1);
    let rate = m as f64 / dt as f64;
    Ok(GrowthTarget {
        raw: rate.ln(),
        shifted: rate.ln_1p(),
        count: m,
        dt,
    })
}

pub fn growth_target(window: &[Comment]) -> Result<GrowthTarget> {
    match (window.first(), window.last()) {
        (Some(first), Some(last)) => growth_from_span(window.len(), first.timestamp, last.timestamp),
        _ => Err(Error::invalid("growth target of an invalid (empty) window")),
    }
}

/// Inverse of the shifted target: recovers `log(m/Δt)` from `log(1 + m/Δt)`.
pub fn unshift_growth(shifted: f64) -> f64 {
    const FLOOR: f64 = 1e-12;
    shifted.exp_m1().max(FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(post_author: &str, comments: &[(&str, &str, &str, i64)]) -> String {
        let cs: Vec<String> = comments
            .iter()
            .map(|(id, a, p, t)| {
                format!(r#"{{"id":"{id}","author":"{a}","parent_id":"{p}","timestamp":{t},"body":"text {id}"}}"#)
            })
            .collect();
        format!(
            r#"{{"post":{{"id":"p1","author":"{post_author}","title":"A title","body":"b","timestamp":100}},"comments":[{}]}}"#,
            cs.join(",")
        )
    }

    #[test]
    fn parses_simple_discussion() {
        let text = line("op", &[("c1", "u1", "p1", 110), ("c2", "u2", "c1", 120), ("c3", "u3", "c2", 130)]);
        let corpus = parse_corpus_str(&text, &FilterConfig::default()).unwrap();
        assert_eq!(corpus.discussions.len(), 1);
        let d = &corpus.discussions[0];
        assert_eq!(d.comments.len(), 3);
        assert_eq!(d.comments.iter().map(|c| c.depth).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!((d.t_start, d.t_end), (100, 130));
        assert_eq!(corpus.manifest.removed_comments, 0);
    }

    #[test]
    fn removes_excluded_authors() {
        let text = line("op", &[("c1", "u1", "p1", 110), ("c2", "deleted", "c1", 120), ("c3", "u3", "c1", 130)]);
        let corpus = parse_corpus_str(&text, &FilterConfig::default()).unwrap();
        assert_eq!(corpus.discussions[0].comments.len(), 2);
        assert_eq!(corpus.manifest.removed_comments, 1);
    }

    #[test]
    fn children_of_removed_comments_move_to_kept_ancestor() {
        let text = line("op", &[("c1", "u1", "p1", 110), ("c2", "DeltaBot", "c1", 120), ("c3", "u3", "c2", 130)]);
        let corpus = parse_corpus_str(&text, &FilterConfig::default()).unwrap();
        let c3 = &corpus.discussions[0].comments[1];
        assert_eq!(c3.parent_id, "c1");
        assert_eq!(c3.depth, 2);
        assert_eq!(corpus.manifest.reparented, 1);
    }

    #[test]
    fn orphans_are_reattached_to_post() {
        let text = line("op", &[("c1", "u1", "missing", 110)]);
        let corpus = parse_corpus_str(&text, &FilterConfig::default()).unwrap();
        let c = &corpus.discussions[0].comments[0];
        assert_eq!((c.parent_id.as_str(), c.depth), ("p1", 1));
        assert_eq!(corpus.manifest.orphans_reattached, 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{}\n{{not json\n", line("op", &[]));
        match parse_corpus_str(&text, &FilterConfig::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn single_activity_users_are_flagged() {
        let a = line("op", &[("c1", "x", "p1", 110), ("c2", "y", "p1", 111)]);
        let b = line("op", &[("c1", "y", "p1", 110)]).replace("\"p1\"", "\"p2\"");
        let corpus = parse_corpus_str(&format!("{a}\n{b}\n"), &FilterConfig::default()).unwrap();
        // brute force: count discussions per user directly
        let mut per_user: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for d in &corpus.discussions {
            per_user.entry(d.post.author.as_str()).or_default().insert(d.id());
            for c in &d.comments {
                per_user.entry(c.author.as_str()).or_default().insert(d.id());
            }
        }
        let expected: BTreeSet<UserId> = per_user
            .iter()
            .filter(|(_, ds)| ds.len() < 2)
            .map(|(u, _)| UserId::new(*u).unwrap())
            .collect();
        assert_eq!(corpus.single_activity, expected);
        assert!(corpus.single_activity.contains(&UserId::new("x").unwrap()));
        assert!(corpus.is_embedded(&UserId::new("op").unwrap()));
    }

    #[test]
    fn comments_sorted_and_timestamps_clamped() {
        let text = line("op", &[("c1", "u1", "p1", 150), ("c2", "u2", "p1", 90)]);
        let corpus = parse_corpus_str(&text, &FilterConfig::default()).unwrap();
        let d = &corpus.discussions[0];
        assert_eq!(d.comments[0].id, "c2");
        assert_eq!(d.comments[0].timestamp, 100);
        assert_eq!(corpus.manifest.clamped_timestamps, 1);
    }

    fn discussion_with(n: usize) -> Discussion {
        let comments: Vec<String> = (0..n)
            .map(|i| format!(r#"{{"id":"c{i}","author":"u","parent_id":"p1","timestamp":{},"body":"x"}}"#, 100 + i))
            .collect();
        let text = format!(
            r#"{{"post":{{"id":"p1","author":"op","title":"t","body":"","timestamp":100}},"comments":[{}]}}"#,
            comments.join(",")
        );
        parse_corpus_str(&text, &FilterConfig::default()).unwrap().discussions.remove(0)
    }

    #[test]
    fn reply_cycles_are_cut_at_the_post() {
        let text = line("op", &[("c1", "u1", "c2", 110), ("c2", "u2", "c1", 120), ("c3", "u3", "c2", 130)]);
        let corpus = parse_corpus_str(&text, &FilterConfig::default()).unwrap();
        let d = &corpus.discussions[0];
        for c in &d.comments {
            let parent_depth = if c.parent_id == d.post.id {
                0
            } else {
                d.comments.iter().find(|p| p.id == c.parent_id).unwrap().depth
            };
            assert_eq!(c.depth, parent_depth + 1);
        }
        assert_eq!(corpus.manifest.orphans_reattached, 1);
    }

    #[test]
    fn windowize_partial_tail() {
        let d = discussion_with(32);
        let wd = windowize(&d, 15, 4).unwrap();
        let sizes: Vec<usize> = wd.windows.iter().map(|w| w.actual_count).collect();
        let valid: Vec<bool> = wd.windows.iter().map(|w| w.valid).collect();
        assert_eq!(sizes, vec![15, 15, 2, 0]);
        assert_eq!(valid, vec![true, true, true, false]);
        assert_eq!(wd.dropped, 0);
    }

    #[test]
    fn windowize_empty_and_exact() {
        let d = discussion_with(0);
        assert!(windowize(&d, 15, 4).unwrap().windows.iter().all(|w| !w.valid));
        let d = discussion_with(60);
        let wd = windowize(&d, 15, 4).unwrap();
        assert!(wd.windows.iter().all(|w| w.actual_count == 15));
        assert_eq!(wd.dropped, 0);
        let d = discussion_with(61);
        assert_eq!(windowize(&d, 15, 4).unwrap().dropped, 1);
        assert!(windowize(&d, 0, 4).is_err());
    }

    #[test]
    fn labels_mark_engaged_clusters() {
        let mut d = discussion_with(3);
        for (c, a) in d.comments.iter_mut().zip(["a", "b", "c"]) {
            c.author = UserId::new(a).unwrap();
        }
        let assign: HashMap<UserId, usize> = [("a", 1), ("b", 1), ("c", 4)]
            .into_iter()
            .map(|(u, k)| (UserId::new(u).unwrap(), k))
            .collect();
        let wd = windowize(&d, 15, 2).unwrap();
        let y = window_labels(&wd, &assign, 8).unwrap();
        assert_eq!(y, vec![vec![0, 1, 0, 0, 1, 0, 0, 0]]);
        let y = window_labels(&wd, &HashMap::new(), 8).unwrap();
        assert_eq!(y, vec![vec![0; 8]]);
    }

    #[test]
    fn growth_target_examples() {
        let g = growth_from_span(15, 0, 15).unwrap();
        assert_eq!(g.raw, 0.0);
        assert!((g.shifted - std::f64::consts::LN_2).abs() < 1e-12);
        let g = growth_from_span(15, 0, 5).unwrap();
        assert!((g.raw - 3f64.ln()).abs() < 1e-12);
        let g = growth_from_span(1, 7, 7).unwrap();
        assert_eq!((g.raw, g.dt), (0.0, 1));
        assert!(growth_target(&[]).is_err());
        assert!((unshift_growth(g.shifted) - g.raw).abs() < 1e-12);
    }
}
