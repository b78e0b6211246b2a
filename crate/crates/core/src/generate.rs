//! Beam search over the conditioned decoder.

use std::cmp::Ordering;

use crate::corpus::{Vocab, EOS, PAD, SOS};
use crate::error::{Error, Result};
use crate::model::{CondState, DecoderState, Model};
use crate::numeric::Scalar;

pub const DEFAULT_MAX_LEN: usize = 20;

/// A finished hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Word ids, prefix included, without the end token.
    pub tokens: Vec<usize>,
    /// Whether the hypothesis ended with `<eos>` rather than at `max_len`.
    pub ended: bool,
    /// Total log-probability, prefix and end token included.
    pub score: f64,
}

struct Live<T> {
    tokens: Vec<usize>,
    score: f64,
    state: DecoderState<T>,
}

/// `<sos>` and `<pad>` never occur as targets.
fn emittable(t: usize) -> bool {
    t != SOS && t != PAD
}

fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search from an explicit conditioning state.
///
/// One fixed-width pass is not monotone in its width: a wider beam can
/// crowd out the path a narrower one follows to a better hypothesis. The
/// result for `beam = k` therefore merges the passes of widths `1..=k`,
/// so widening never lowers the top score.
///
/// `prefix` tokens are forced. At every step each live hypothesis is
/// extended by `<eos>` or any word (`<sos>` and `<pad>` are never
/// emitted, and `<eos>` only after a word), and the
/// `beam` best extensions are kept, so `beam = 1` is greedy decoding.
/// A hypothesis is complete when it emits `<eos>` or reaches `max_len`
/// words; complete ones leave the beam. Scores are plain sums of
/// log-probabilities. Returns up to `beam` complete hypotheses, best
/// first.
pub fn beam_search_state<T: Scalar>(
    model: &Model<T>,
    state: CondState,
    prefix: &[usize],
    beam: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    if beam == 0 {
        return Err(Error::invalid("beam must be >= 1"));
    }
    let mut all: Vec<Hypothesis> = Vec::new();
    for width in 1..=beam {
        for h in beam_pass(model, state, prefix, width, max_len)? {
            if !all.iter().any(|a| a.tokens == h.tokens && a.ended == h.ended) {
                all.push(h);
            }
        }
    }
    all.sort_by(rank);
    all.truncate(beam);
    Ok(all)
}

/// A single beam-search pass of fixed `beam` width.
pub fn beam_pass<T: Scalar>(
    model: &Model<T>,
    state: CondState,
    prefix: &[usize],
    beam: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    if beam == 0 {
        return Err(Error::invalid("beam must be >= 1"));
    }
    if max_len < prefix.len() {
        return Err(Error::invalid(format!("max_len {max_len} is shorter than the prefix ({})", prefix.len())));
    }
    let v = model.dims.vocab_size;
    if let Some(&bad) = prefix.iter().find(|&&t| t >= v || !emittable(t) || t == EOS) {
        return Err(Error::invalid(format!("prefix token id {bad} is not a word")));
    }
    let dec = model.step_decoder();
    let cond = model.condition(state)?;
    let mut s = dec.start(Some(&cond))?;
    let mut score = 0.0;
    for &t in prefix {
        score += s.log_probs[t];
        s = dec.step(&s, t)?;
    }

    let mut done: Vec<Hypothesis> = Vec::new();
    let mut live = vec![Live {
        tokens: prefix.to_vec(),
        score,
        state: s,
    }];
    if prefix.len() == max_len {
        let h = live.pop().unwrap();
        done.push(Hypothesis {
            tokens: h.tokens,
            ended: false,
            score: h.score,
        });
    }
    while !live.is_empty() {
        // Log-probabilities only fall, so nothing scoring below the
        // beam-th complete hypothesis can enter the result.
        done.sort_by(rank);
        let bar = if done.len() >= beam { done[beam - 1].score } else { f64::NEG_INFINITY };

        // Candidates are (hypothesis, next token, score); an `<eos>`
        // completion competes for a slot like any extension.
        let mut next: Vec<(usize, usize, f64)> = Vec::new();
        for (i, h) in live.iter().enumerate() {
            // Documents are never empty, so `<eos>` needs a word first.
            for w in (0..v).filter(|&w| emittable(w) && !(w == EOS && h.tokens.is_empty())) {
                let sc = h.score + h.state.log_probs[w];
                if sc >= bar {
                    next.push((i, w, sc));
                }
            }
        }
        next.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| live[a.0].tokens.cmp(&live[b.0].tokens))
                .then(a.1.cmp(&b.1))
        });
        next.truncate(beam);

        let mut survivors = Vec::with_capacity(next.len());
        for (i, w, sc) in next {
            let mut tokens = live[i].tokens.clone();
            if w == EOS {
                done.push(Hypothesis { tokens, ended: true, score: sc });
                continue;
            }
            tokens.push(w);
            if tokens.len() == max_len {
                done.push(Hypothesis { tokens, ended: false, score: sc });
            } else {
                let state = dec.step(&live[i].state, w)?;
                survivors.push(Live { tokens, score: sc, state });
            }
        }
        live = survivors;
    }
    done.sort_by(rank);
    done.truncate(beam);
    Ok(done)
}

/// Beam search for `author` at `time`, conditioned as at evaluation,
/// from a prefix of word strings.
pub fn beam_search<T: Scalar>(
    model: &Model<T>,
    vocab: &Vocab,
    author: usize,
    time: usize,
    prefix: &[&str],
    beam: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    let ids = prefix
        .iter()
        .map(|w| vocab.id(w).ok_or_else(|| Error::invalid(format!("prefix word {w:?} is not in the vocabulary"))))
        .collect::<Result<Vec<_>>>()?;
    let state = model.eval_state(author, time)?;
    beam_search_state(model, state, &ids, beam, max_len)
}

/// `rank TAB score TAB text` lines, rank from 1.
pub fn hypotheses_tsv(vocab: &Vocab, hyps: &[Hypothesis]) -> String {
    hyps.iter()
        .enumerate()
        .map(|(r, h)| format!("{}\t{:.4}\t{}\n", r + 1, h.score, vocab.decode(&h.tokens).join(" ")))
        .collect()
}

#[cfg(test)]
mod tests;
