//! Synthetic author-community corpora with known generating
//! distributions.
//!
//! Each (author, timestep) cell draws its documents' tokens i.i.d. from a
//! mixture of unigram topics. Mixture weights move from a per-author start
//! vector towards an end vector along the great circle between them, so the
//! exact entropy of every cell is available as a lower bound on any
//! model's test loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Vocab};
use crate::error::{Error, Result};

/// Knobs from which a [`DriftWorldSpec`] is sampled. This is the on-disk
/// (TOML) form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DriftWorldConfig {
    pub num_authors: usize,
    pub num_timesteps: usize,
    pub vocab_size: usize,
    pub docs_per_cell: usize,
    pub doc_length: usize,
    pub num_topics: usize,
    /// Dirichlet concentration of each topic's word distribution; small
    /// values give peaked, mostly disjoint topics.
    pub topic_concentration: f64,
    /// Dirichlet concentration of the per-author start and end mixtures.
    pub mixture_concentration: f64,
    /// Fraction of the start→end arc travelled by the last timestep.
    pub drift_rate: f64,
    pub first_year: i64,
    pub seed: u64,
}

impl Default for DriftWorldConfig {
    fn default() -> Self {
        DriftWorldConfig {
            num_authors: 20,
            num_timesteps: 10,
            vocab_size: 200,
            docs_per_cell: 30,
            doc_length: 8,
            num_topics: 2,
            topic_concentration: 0.1,
            mixture_concentration: 1.0,
            drift_rate: 1.0,
            first_year: 2000,
            seed: 0,
        }
    }
}

/// A fully specified generator: topics plus every cell's mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftWorldSpec {
    pub num_authors: usize,
    pub num_timesteps: usize,
    pub vocab_size: usize,
    pub docs_per_cell: usize,
    pub doc_length: usize,
    /// `topics[k][v]`.
    pub topics: Vec<Vec<f64>>,
    /// `author_topic_path[a][t-1][k]`.
    pub author_topic_path: Vec<Vec<Vec<f64>>>,
    pub drift_rate: f64,
    pub first_year: i64,
    pub seed: u64,
}

/// Great-circle interpolation between unit vectors `a` and `b`.
fn slerp(a: &[f64], b: &[f64], u: f64) -> Vec<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0);
    let omega = dot.acos();
    if omega.abs() < 1e-12 {
        return a.iter().zip(b).map(|(x, y)| (1.0 - u) * x + u * y).collect();
    }
    let s = omega.sin();
    let (wa, wb) = (((1.0 - u) * omega).sin() / s, (u * omega).sin() / s);
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn l1_normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Mixture path from `start` to `end`: at timestep `t` the interpolation
/// parameter is `drift_rate · (t−1)/(T−1)`, clamped to `[0, 1]`.
pub fn mixture_path(start: &[f64], end: &[f64], num_timesteps: usize, drift_rate: f64) -> Vec<Vec<f64>> {
    let (s, e) = (l2_normalize(start), l2_normalize(end));
    (1..=num_timesteps)
        .map(|t| {
            let u = if num_timesteps > 1 {
                (drift_rate * (t - 1) as f64 / (num_timesteps - 1) as f64).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let w: Vec<f64> = slerp(&s, &e, u).into_iter().map(|x| x.max(0.0)).collect();
            l1_normalize(&w)
        })
        .collect()
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize, alpha: f64) -> Result<Vec<f64>> {
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let d = Dirichlet::new_with_size(alpha, k).map_err(|e| Error::Config(format!("dirichlet: {e}")))?;
    // Tiny concentrations can underflow every coordinate; resample then.
    for _ in 0..64 {
        let v = d.sample(rng);
        if v.iter().all(|x| x.is_finite()) && v.iter().sum::<f64>() > 0.5 {
            return Ok(l1_normalize(&v));
        }
    }
    Err(Error::Config(format!("dirichlet({alpha}) sampling degenerate")))
}

/// Word names for synthetic vocabularies: purely alphabetic so they
/// survive tokenization unchanged.
pub fn synthetic_word(v: usize) -> String {
    let mut n = v;
    let mut letters = Vec::new();
    loop {
        letters.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    letters.reverse();
    format!("w{}", letters.into_iter().collect::<String>())
}

impl DriftWorldSpec {
    /// Samples topics and per-author start/end mixtures from `cfg`.
    pub fn from_config(cfg: &DriftWorldConfig) -> Result<Self> {
        if cfg.num_topics == 0 {
            return Err(Error::Config("num_topics must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0);
        let topics = (0..cfg.num_topics)
            .map(|_| dirichlet(&mut rng, cfg.vocab_size.max(1), cfg.topic_concentration))
            .collect::<Result<Vec<_>>>()?;
        let mut paths = Vec::with_capacity(cfg.num_authors);
        for _ in 0..cfg.num_authors {
            let start = dirichlet(&mut rng, cfg.num_topics, cfg.mixture_concentration)?;
            let end = dirichlet(&mut rng, cfg.num_topics, cfg.mixture_concentration)?;
            paths.push(mixture_path(&start, &end, cfg.num_timesteps, cfg.drift_rate));
        }
        let spec = DriftWorldSpec {
            num_authors: cfg.num_authors,
            num_timesteps: cfg.num_timesteps,
            vocab_size: cfg.vocab_size,
            docs_per_cell: cfg.docs_per_cell,
            doc_length: cfg.doc_length,
            topics,
            author_topic_path: paths,
            drift_rate: cfg.drift_rate,
            first_year: cfg.first_year,
            seed: cfg.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config(format!("vocab_size must be >= 2, got {}", self.vocab_size)));
        }
        if self.num_authors == 0 || self.num_timesteps == 0 || self.doc_length == 0 {
            return Err(Error::Config("num_authors, num_timesteps and doc_length must be >= 1".into()));
        }
        for (k, topic) in self.topics.iter().enumerate() {
            if topic.len() != self.vocab_size
                || topic.iter().any(|&p| !(p >= 0.0))
                || (topic.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(Error::Config(format!("topic {k} is not a distribution over the vocabulary")));
            }
        }
        if self.author_topic_path.len() != self.num_authors {
            return Err(Error::Config("one mixture path per author required".into()));
        }
        for (a, path) in self.author_topic_path.iter().enumerate() {
            if path.len() != self.num_timesteps {
                return Err(Error::Config(format!("author {a}: path length {} != T", path.len())));
            }
            for (t, w) in path.iter().enumerate() {
                if w.len() != self.topics.len()
                    || w.iter().any(|&x| !(x >= 0.0))
                    || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12
                {
                    return Err(Error::Config(format!(
                        "author {a}, timestep {}: mixture is not a distribution",
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Word distribution of cell `(author, time)`; `time` is 1-based.
    pub fn cell_distribution(&self, author: usize, time: usize) -> Vec<f64> {
        let w = &self.author_topic_path[author][time - 1];
        let mut p = vec![0.0; self.vocab_size];
        for (wk, topic) in w.iter().zip(&self.topics) {
            for (pv, &tv) in p.iter_mut().zip(topic) {
                *pv += wk * tv;
            }
        }
        p
    }

    pub fn vocab(&self) -> Vocab {
        let words: Vec<String> = (0..self.vocab_size).map(synthetic_word).collect();
        Vocab::with_words(&words).expect("synthetic words are distinct")
    }

    pub fn topic_name(k: usize) -> String {
        format!("topic{k}")
    }
}

/// Samples the corpus described by `spec`. Cells are generated in
/// author-major order, each from its own RNG stream.
pub fn generate_corpus(spec: &DriftWorldSpec) -> Result<Corpus> {
    spec.validate()?;
    let vocab = spec.vocab();
    let offset = crate::corpus::SPECIALS.len();
    let num_topics = spec.topics.len();
    let topic_samplers = spec
        .topics
        .iter()
        .map(|t| WeightedIndex::new(t).map_err(|e| Error::Config(format!("topic: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut documents = Vec::with_capacity(spec.num_authors * spec.num_timesteps * spec.docs_per_cell);
    for a in 0..spec.num_authors {
        for t in 1..=spec.num_timesteps {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(1 + (a * spec.num_timesteps + (t - 1)) as u64);
            let w = &spec.author_topic_path[a][t - 1];
            let mixture = WeightedIndex::new(w).map_err(|e| Error::Config(format!("mixture: {e}")))?;
            for _ in 0..spec.docs_per_cell {
                let mut counts = vec![0usize; num_topics];
                let tokens: Vec<usize> = (0..spec.doc_length)
                    .map(|_| {
                        let z = mixture.sample(&mut rng);
                        counts[z] += 1;
                        offset + topic_samplers[z].sample(&mut rng)
                    })
                    .collect();
                let top = (0..num_topics).fold(0, |best, k| if counts[k] > counts[best] { k } else { best });
                documents.push(Document {
                    author: a,
                    time: t,
                    tokens,
                    labels: vec![DriftWorldSpec::topic_name(top)],
                });
            }
        }
    }
    Ok(Corpus {
        documents,
        vocab,
        num_authors: spec.num_authors,
        num_timesteps: spec.num_timesteps,
        author_names: (0..spec.num_authors).map(|a| format!("author{a:02}")).collect(),
        first_year: spec.first_year,
    })
}

/// Exact per-word entropy `−Σ_v p(v) ln p(v)` averaged over `cells`
/// (equal token counts per cell), in nats.
pub fn oracle_cross_entropy(spec: &DriftWorldSpec, cells: &[(usize, usize)]) -> Result<f64> {
    if cells.is_empty() {
        return Err(Error::Empty { what: "cell subset" });
    }
    let mut total = 0.0;
    for &(a, t) in cells {
        if a >= spec.num_authors || t == 0 || t > spec.num_timesteps {
            return Err(Error::invalid(format!("cell ({a}, {t}) outside the world")));
        }
        total += spec
            .cell_distribution(a, t)
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum::<f64>();
    }
    Ok(total / cells.len() as f64)
}

/// The oracle entropy expressed per *scored* token, where every document
/// of `doc_length` words is also scored on its deterministic end token.
pub fn oracle_sequence_entropy(spec: &DriftWorldSpec, cells: &[(usize, usize)]) -> Result<f64> {
    let h = oracle_cross_entropy(spec, cells)?;
    let l = spec.doc_length as f64;
    Ok(h * l / (l + 1.0))
}
