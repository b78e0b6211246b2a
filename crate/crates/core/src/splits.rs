//! Train/validation/test assignment under the three temporal protocols.
//!
//! Each author's documents (or, for imputation, its present timesteps)
//! are split roughly 70/10/20. Shares are computed by [`shares`]:
//! validation gets `⌊0.1·n⌋`, test gets `⌊0.2·n⌋` but at least one unit
//! once `n ≥ 2`, and training keeps the rest. A single-unit author is
//! always training-only.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{DocKey, DocKeys};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Modeling,
    Imputation,
    Prediction,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Modeling => "modeling",
            TaskKind::Imputation => "imputation",
            TaskKind::Prediction => "prediction",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modeling" => Ok(TaskKind::Modeling),
            "imputation" => Ok(TaskKind::Imputation),
            "prediction" => Ok(TaskKind::Prediction),
            _ => Err(Error::invalid(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            _ => Err(Error::invalid(format!("unknown split tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub doc_split: Vec<SplitTag>,
    pub task: TaskKind,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn indices(&self, tag: SplitTag) -> Vec<usize> {
        self.doc_split
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == tag)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_mask(&self) -> Vec<bool> {
        self.doc_split.iter().map(|&t| t == SplitTag::Train).collect()
    }

    pub fn count(&self, tag: SplitTag) -> usize {
        self.doc_split.iter().filter(|&&t| t == tag).count()
    }

    /// Split file text. `provenance` is appended to the header line as
    /// extra `key=value` pairs.
    pub fn to_text(&self, provenance: &[(&str, String)]) -> String {
        let mut s = format!("# task={} seed={}", self.task, self.seed);
        for (k, v) in provenance {
            s.push_str(&format!(" {k}={v}"));
        }
        s.push('\n');
        for (i, t) in self.doc_split.iter().enumerate() {
            s.push_str(&format!("{i}\t{}\n", t.as_str()));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Empty { what: "split file" })?;
        let fields: HashMap<&str, &str> = header
            .trim_start_matches('#')
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let bad_header = |msg: &str| Error::Parse {
            line: 1,
            msg: msg.to_string(),
        };
        let task: TaskKind = fields
            .get("task")
            .ok_or_else(|| bad_header("missing task"))?
            .parse()?;
        let seed: u64 = fields
            .get("seed")
            .ok_or_else(|| bad_header("missing seed"))?
            .parse()
            .map_err(|_| bad_header("bad seed"))?;
        let mut doc_split = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (idx, tag) = line
                .split_once('\t')
                .ok_or_else(|| err("expected doc_index<TAB>split".into()))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad index {idx:?}")))?;
            if idx != doc_split.len() {
                return Err(err(format!("expected index {}, found {idx}", doc_split.len())));
            }
            doc_split.push(tag.parse().map_err(|e: Error| err(e.to_string()))?);
        }
        Ok(SplitAssignment {
            doc_split,
            task,
            seed,
        })
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text(&[]).as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `(train, val, test)` counts for `n` units.
pub fn shares(n: usize) -> (usize, usize, usize) {
    if n <= 1 {
        return (n, 0, 0);
    }
    let val = n / 10;
    let test = (n / 5).max(1);
    (n - val - test, val, test)
}

fn by_author(keys: &[DocKey]) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        m.entry(k.author).or_default().push(i);
    }
    m
}

fn tag_run(n: usize) -> impl Iterator<Item = SplitTag> {
    let (tr, va, te) = shares(n);
    std::iter::repeat(SplitTag::Train)
        .take(tr)
        .chain(std::iter::repeat(SplitTag::Val).take(va))
        .chain(std::iter::repeat(SplitTag::Test).take(te))
}

/// Per-author stratified random 70/10/20 split over documents.
pub fn split_modeling(corpus: &impl DocKeys, seed: u64) -> SplitAssignment {
    let keys = corpus.doc_keys();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc_split = vec![SplitTag::Train; keys.len()];
    for (_, mut docs) in by_author(&keys) {
        docs.shuffle(&mut rng);
        for (d, tag) in docs.iter().zip(tag_run(docs.len())) {
            doc_split[*d] = tag;
        }
    }
    SplitAssignment {
        doc_split,
        task: TaskKind::Modeling,
        seed,
    }
}

/// Per-author random 70/10/20 split over present timesteps; every
/// document of an (author, timestep) group shares the group's tag.
pub fn split_imputation(corpus: &impl DocKeys, seed: u64) -> SplitAssignment {
    let keys = corpus.doc_keys();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc_split = vec![SplitTag::Train; keys.len()];
    for (_, docs) in by_author(&keys) {
        let mut times: Vec<usize> = docs.iter().map(|&d| keys[d].time).collect();
        times.sort_unstable();
        times.dedup();
        times.shuffle(&mut rng);
        let tag_of: HashMap<usize, SplitTag> = times.iter().copied().zip(tag_run(times.len())).collect();
        for d in docs {
            doc_split[d] = tag_of[&keys[d].time];
        }
    }
    SplitAssignment {
        doc_split,
        task: TaskKind::Imputation,
        seed,
    }
}

/// Per-author chronological split: earliest documents train, then
/// validation, then test. Ties in time keep file order.
pub fn split_prediction(corpus: &impl DocKeys, seed: u64) -> SplitAssignment {
    let keys = corpus.doc_keys();
    let mut doc_split = vec![SplitTag::Train; keys.len()];
    for (_, mut docs) in by_author(&keys) {
        docs.sort_by_key(|&d| (keys[d].time, d));
        for (d, tag) in docs.iter().zip(tag_run(docs.len())) {
            doc_split[*d] = tag;
        }
    }
    SplitAssignment {
        doc_split,
        task: TaskKind::Prediction,
        seed,
    }
}

pub fn make_split(task: TaskKind, corpus: &impl DocKeys, seed: u64) -> SplitAssignment {
    match task {
        TaskKind::Modeling => split_modeling(corpus, seed),
        TaskKind::Imputation => split_imputation(corpus, seed),
        TaskKind::Prediction => split_prediction(corpus, seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    /// The assignment does not cover the corpus exactly.
    Partition,
    /// An author has documents but none in training.
    AuthorMissingFromTrain,
    /// An (author, timestep) group spans several splits (imputation).
    GroupMixed,
    /// An author's train/val/test documents are out of time order (prediction).
    Chronology,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: SplitRule,
    pub docs: Vec<usize>,
    pub detail: String,
}

/// Checks the structural constraints of `split`'s task. Returns an empty
/// list when all hold.
pub fn verify_split(corpus: &impl DocKeys, split: &SplitAssignment) -> Vec<Violation> {
    let keys = corpus.doc_keys();
    let mut out = Vec::new();
    if split.doc_split.len() != keys.len() {
        out.push(Violation {
            rule: SplitRule::Partition,
            docs: vec![],
            detail: format!(
                "{} tags for {} documents",
                split.doc_split.len(),
                keys.len()
            ),
        });
        return out;
    }
    for (author, docs) in by_author(&keys) {
        if !docs.iter().any(|&d| split.doc_split[d] == SplitTag::Train) {
            out.push(Violation {
                rule: SplitRule::AuthorMissingFromTrain,
                docs: docs.clone(),
                detail: format!("author {author} has no training document"),
            });
        }
        match split.task {
            TaskKind::Modeling => {}
            TaskKind::Imputation => {
                let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for &d in &docs {
                    groups.entry(keys[d].time).or_default().push(d);
                }
                for (t, g) in groups {
                    let first = split.doc_split[g[0]];
                    if g.iter().any(|&d| split.doc_split[d] != first) {
                        out.push(Violation {
                            rule: SplitRule::GroupMixed,
                            docs: g,
                            detail: format!("author {author}, timestep {t} spans several splits"),
                        });
                    }
                }
            }
            TaskKind::Prediction => {
                // Every doc must be no earlier than any doc of an earlier split.
                let mut bad = Vec::new();
                for &d in &docs {
                    for &e in &docs {
                        if split.doc_split[d] < split.doc_split[e] && keys[d].time > keys[e].time {
                            bad.push(d);
                            bad.push(e);
                        }
                    }
                }
                if !bad.is_empty() {
                    bad.sort_unstable();
                    bad.dedup();
                    out.push(Violation {
                        rule: SplitRule::Chronology,
                        docs: bad,
                        detail: format!("author {author} has a later document in an earlier split"),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Keys(Vec<DocKey>);

    impl DocKeys for Keys {
        fn doc_keys(&self) -> Vec<DocKey> {
            self.0.clone()
        }
    }

    fn k(author: usize, time: usize) -> DocKey {
        DocKey { author, time }
    }

    #[test]
    fn share_rule_small_counts() {
        assert_eq!(shares(1), (1, 0, 0));
        assert_eq!(shares(2), (1, 0, 1));
        assert_eq!(shares(3), (2, 0, 1));
        assert_eq!(shares(10), (7, 1, 2));
        for n in 1..200 {
            let (a, b, c) = shares(n);
            assert_eq!(a + b + c, n);
            assert!(a >= 1);
        }
    }

    #[test]
    fn modeling_counts_and_determinism() {
        let keys = Keys((0..10).map(|i| k(0, 1 + i % 3)).chain([k(1, 1)]).collect());
        let s = split_modeling(&keys, 3);
        let tags: Vec<_> = (0..10).map(|i| s.doc_split[i]).collect();
        assert_eq!(tags.iter().filter(|&&t| t == SplitTag::Train).count(), 7);
        assert_eq!(tags.iter().filter(|&&t| t == SplitTag::Val).count(), 1);
        assert_eq!(s.doc_split[10], SplitTag::Train);
        assert_eq!(split_modeling(&keys, 3), s);
        assert!(verify_split(&keys, &s).is_empty());
    }

    #[test]
    fn imputation_timestep_level() {
        let keys = Keys((1..=10).flat_map(|t| [k(0, t), k(0, t)]).chain([k(1, 4), k(1, 4)]).collect());
        let s = split_imputation(&keys, 9);
        let mut per_tag: HashMap<SplitTag, std::collections::HashSet<usize>> = HashMap::new();
        for (i, key) in keys.0.iter().enumerate().filter(|(_, key)| key.author == 0) {
            per_tag.entry(s.doc_split[i]).or_default().insert(key.time);
        }
        assert_eq!(per_tag[&SplitTag::Train].len(), 7);
        assert_eq!(per_tag[&SplitTag::Val].len(), 1);
        assert_eq!(per_tag[&SplitTag::Test].len(), 2);
        assert_eq!(s.doc_split[20], SplitTag::Train);
        assert_eq!(s.doc_split[21], SplitTag::Train);
        assert!(verify_split(&keys, &s).is_empty());
    }

    #[test]
    fn prediction_chronological() {
        let keys = Keys((1..=10).map(|t| k(0, t)).collect());
        let s = split_prediction(&keys, 0);
        for (i, &tag) in s.doc_split.iter().enumerate() {
            let t = i + 1;
            let want = if t <= 7 {
                SplitTag::Train
            } else if t == 8 {
                SplitTag::Val
            } else {
                SplitTag::Test
            };
            assert_eq!(tag, want, "t={t}");
        }
        let two = Keys(vec![k(0, 5), k(0, 2)]);
        let s = split_prediction(&two, 0);
        assert_eq!(s.doc_split, [SplitTag::Test, SplitTag::Train]);
    }

    #[test]
    fn verify_counterexamples() {
        let keys = Keys(vec![k(0, 1), k(0, 1), k(0, 2), k(0, 2), k(0, 3)]);
        let bad = SplitAssignment {
            doc_split: vec![SplitTag::Train, SplitTag::Test, SplitTag::Train, SplitTag::Train, SplitTag::Train],
            task: TaskKind::Imputation,
            seed: 0,
        };
        let v = verify_split(&keys, &bad);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, SplitRule::GroupMixed);
        assert_eq!(v[0].docs, [0, 1]);

        let keys = Keys((1..=10).map(|t| k(0, t)).collect());
        let mut s = split_prediction(&keys, 0);
        s.doc_split.swap(0, 9);
        let v = verify_split(&keys, &s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, SplitRule::Chronology);
    }

    #[test]
    fn text_round_trip() {
        let keys = Keys((1..=10).map(|t| k(t % 3, t)).collect());
        let s = split_modeling(&keys, 17);
        let text = s.to_text(&[("corpus", "abc".into())]);
        assert!(text.starts_with("# task=modeling seed=17 corpus=abc\n"));
        assert_eq!(SplitAssignment::from_text(&text).unwrap(), s);
    }
}
