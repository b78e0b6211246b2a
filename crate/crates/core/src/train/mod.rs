//! Minibatching, the training loop and checkpoints.

mod checkpoint;
mod seeds;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{peek_precision, Checkpoint};
pub use seeds::{mean_std, run_seeds, run_seeds_with, MeanStd, SeedSummary};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::eval::{micro_perplexity, score_documents, EVAL_BATCH};
use crate::model::{presence_mask, Model, ModelConfig, ModelDims};
use crate::numeric::{adam_step, clip_global_norm, AdamState, Graph, Mode, Scalar, Storable};
use crate::splits::{verify_split, SplitAssignment, SplitTag};

/// Floating-point width used for parameters and activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::invalid(format!("unknown precision {s:?} (expected f32 or f64)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    /// Iterations at the full learning rate.
    pub const_iters: usize,
    /// Iterations of linear decay to zero after that.
    pub decay_iters: usize,
    pub max_iters: usize,
    pub clip_norm: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub precision: Precision,
    pub eval_every: usize,
    /// Score validation sequentially instead of on the thread pool.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            lr: 0.003,
            const_iters: 50_000,
            decay_iters: 20_000,
            max_iters: 70_000,
            clip_norm: 0.25,
            weight_decay: 1.2e-6,
            seed: 0,
            precision: Precision::F32,
            eval_every: 1000,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    /// Schedule of `constant` full-rate iterations then `decay` decaying ones.
    pub fn with_schedule(mut self, constant: usize, decay: usize) -> Self {
        self.const_iters = constant;
        self.decay_iters = decay;
        self.max_iters = constant + decay;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.const_iters + self.decay_iters != self.max_iters {
            return Err(Error::Config(format!(
                "const_iters ({}) + decay_iters ({}) must equal max_iters ({})",
                self.const_iters, self.decay_iters, self.max_iters
            )));
        }
        if !(self.lr >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("lr and weight_decay must be non-negative".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Learning rate for the update made at iteration `iter` (0-based).
pub fn lr_at(iter: usize, config: &TrainConfig) -> f64 {
    let c = config.const_iters;
    if iter < c {
        config.lr
    } else if iter < c + config.decay_iters {
        config.lr * (1.0 - (iter - c) as f64 / config.decay_iters as f64)
    } else {
        0.0
    }
}

/// Pool size, in batches, within which documents are sorted by length.
const BUCKET_POOL: usize = 16;

/// One epoch of batches over `lengths.len()` items.
///
/// Items are shuffled, cut into pools of several batches, sorted by
/// length inside each pool and cut into batches; batch order is then
/// shuffled. Every index appears exactly once.
pub fn bucket_batches<R: rand::Rng + ?Sized>(lengths: &[usize], batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    let mut batches = Vec::new();
    for pool in order.chunks(batch_size.max(1) * BUCKET_POOL) {
        let mut pool = pool.to_vec();
        pool.sort_by_key(|&i| lengths[i]);
        batches.extend(pool.chunks(batch_size.max(1)).map(<[usize]>::to_vec));
    }
    batches.shuffle(rng);
    batches
}

/// Endless stream of bucketed training batches.
struct Batcher {
    lengths: Vec<usize>,
    batch_size: usize,
    rng: ChaCha8Rng,
    queue: Vec<Vec<usize>>,
}

impl Batcher {
    fn next(&mut self) -> Vec<usize> {
        if self.queue.is_empty() {
            self.queue = bucket_batches(&self.lengths, self.batch_size, &mut self.rng);
            self.queue.reverse();
        }
        self.queue.pop().expect("non-empty training set")
    }
}

/// Token-mean NLL of `batch` plus the in-loss regularization, with
/// dropout off.
pub fn minibatch_loss<T: Scalar>(model: &Model<T>, batch: &[&Document]) -> Result<f64> {
    let mut g = Graph::new();
    // Eval mode draws nothing; the generator is a placeholder.
    let loss = model.objective(&mut g, batch, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))?;
    Ok(g.value(loss).item().as_f64())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    /// Mean training NLL per token since the previous row.
    pub train_nll: f64,
    /// `NaN` when there is no validation data.
    pub val_micro_ppl: f64,
    /// Rate for the next update.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("iter\ttrain_nll\tval_micro_ppl\tlr\n");
        for r in &self.rows {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", r.iter, r.train_nll, r.val_micro_ppl, r.lr));
        }
        s
    }
}

pub struct FitOutput<T: Storable> {
    /// State with the lowest logged validation perplexity (the last
    /// state when there is no validation data).
    pub best: Checkpoint<T>,
    pub log: TrainLog,
    /// Parameters after the final iteration.
    pub last: Model<T>,
}

fn docs_with<'a>(corpus: &'a Corpus, split: &SplitAssignment, tag: SplitTag) -> Vec<&'a Document> {
    split.indices(tag).into_iter().map(|i| &corpus.documents[i]).collect()
}

fn val_perplexity<T: Scalar>(model: &Model<T>, val: &[&Document], parallel: bool) -> Result<f64> {
    if val.is_empty() {
        return Ok(f64::NAN);
    }
    let s = score_documents(model, val, EVAL_BATCH, parallel)?;
    let pairs: Vec<(f64, usize)> = s.nats.into_iter().zip(s.counts).collect();
    micro_perplexity(&pairs)
}

/// Trains a fresh model on the train documents of `split`.
///
/// Validation perplexity is measured before the first update, every
/// `eval_every` iterations and after the last one.
pub fn fit<T: Storable>(
    corpus: &Corpus,
    split: &SplitAssignment,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<FitOutput<T>> {
    config.validate()?;
    if split.doc_split.len() != corpus.documents.len() {
        return Err(Error::invalid(format!(
            "split covers {} documents, corpus has {}",
            split.doc_split.len(),
            corpus.documents.len()
        )));
    }
    if let Some(v) = verify_split(corpus, split).first() {
        return Err(Error::invalid(format!("split fails verification: {:?}: {}", v.rule, v.detail)));
    }
    let train = docs_with(corpus, split, SplitTag::Train);
    let val = docs_with(corpus, split, SplitTag::Val);
    if train.is_empty() {
        return Err(Error::Empty { what: "training set" });
    }
    let dims = ModelDims {
        num_authors: corpus.num_authors,
        num_timesteps: corpus.num_timesteps,
        vocab_size: corpus.vocab.len(),
    };
    let presence = presence_mask(train.iter().copied(), dims.num_authors, dims.num_timesteps);
    let mut model: Model<T> = Model::new(model_config.clone(), dims, presence, config.seed)?;
    let mut adam = AdamState::new(&model.params);

    let mut batch_rng = ChaCha8Rng::seed_from_u64(config.seed);
    batch_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(2);
    let mut batcher = Batcher {
        lengths: train.iter().map(|d| d.tokens.len()).collect(),
        batch_size: config.batch_size,
        rng: batch_rng,
        queue: Vec::new(),
    };
    let parallel = !config.deterministic;
    let snapshot = |model: &Model<T>, adam: &AdamState<T>, iteration: usize| Checkpoint {
        model: model.clone(),
        adam: adam.clone(),
        iteration,
        vocab: corpus.vocab.clone(),
        split_hash: split.hash(),
        train_config: config.clone(),
        provenance: String::new(),
    };

    let mut log = TrainLog::default();
    let first = batcher.next();
    let first_docs: Vec<&Document> = first.iter().map(|&i| train[i]).collect();
    let s = model.score(&first_docs, &first_docs.iter().map(|d| model.train_state(d.author, d.time)).collect::<Vec<_>>())?;
    let init_nll = s.nats.iter().sum::<f64>() / s.counts.iter().sum::<usize>() as f64;
    batcher.queue.push(first);
    let mut best_ppl = val_perplexity(&model, &val, parallel)?;
    log.rows.push(LogRow {
        iter: 0,
        train_nll: init_nll,
        val_micro_ppl: best_ppl,
        lr: lr_at(0, config),
    });
    let mut best = snapshot(&model, &adam, 0);

    let (mut nats, mut count) = (0.0, 0usize);
    for iter in 0..config.max_iters {
        let batch: Vec<&Document> = batcher.next().into_iter().map(|i| train[i]).collect();
        let mut g = Graph::new();
        let (loss, dec) = model.batch_objective(&mut g, &batch, Mode::Train, &mut dropout_rng)?;
        let lv = g.value(loss).item().as_f64();
        if !lv.is_finite() {
            return Err(Error::Diverged { iter, loss: lv });
        }
        nats += g.value(dec.xent).item().as_f64();
        count += dec.count;
        g.backward(loss)?;
        g.accumulate_into(&mut model.params)?;
        clip_global_norm(&mut model.params, config.clip_norm);
        adam_step(&mut model.params, &mut adam, lr_at(iter, config), config.weight_decay)?;

        let done = iter + 1;
        if done % config.eval_every == 0 || done == config.max_iters {
            let ppl = val_perplexity(&model, &val, parallel)?;
            log.rows.push(LogRow {
                iter: done,
                train_nll: nats / count as f64,
                val_micro_ppl: ppl,
                lr: lr_at(done, config),
            });
            (nats, count) = (0.0, 0);
            // With no validation data every ppl is NaN; keep the latest state.
            if ppl < best_ppl || (ppl.is_nan() && best_ppl.is_nan()) {
                best_ppl = ppl;
                best = snapshot(&model, &adam, done);
            }
        }
    }
    Ok(FitOutput { best, log, last: model })
}

#[cfg(test)]
mod tests;
