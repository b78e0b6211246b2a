//! Evaluation: conditioning states for held-out cells, micro and macro
//! perplexity, and per-timestep gain series.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::model::{BatchScores, CondState, Model, Variant};
use crate::numeric::Scalar;
use crate::splits::{SplitAssignment, SplitTag, TaskKind};

/// Default number of documents scored per forward pass.
pub const EVAL_BATCH: usize = 128;

/// Conditioning state for scoring a document of `author` at `time`.
///
/// Free-table variants fall back to the latest present timestep before
/// `time`, or the earliest present one if there is none. `presence` is
/// indexed `a * num_timesteps + t - 1`.
pub fn state_for_eval(
    variant: Variant,
    author: usize,
    time: usize,
    presence: &[bool],
    num_timesteps: usize,
) -> Result<CondState> {
    if num_timesteps == 0 || presence.len() % num_timesteps != 0 {
        return Err(Error::invalid(format!(
            "presence mask of length {} for {num_timesteps} timesteps",
            presence.len()
        )));
    }
    if author >= presence.len() / num_timesteps {
        return Err(Error::UnknownAuthor(author));
    }
    if time == 0 || time > num_timesteps {
        return Err(Error::invalid(format!("timestep {time} outside 1..={num_timesteps}")));
    }
    Ok(match variant {
        Variant::Lstm => CondState::Sos,
        Variant::LstmA => CondState::Static { author },
        Variant::Ours => CondState::Rollout { author, time },
        Variant::LstmIat | Variant::LstmAt => {
            let row = &presence[author * num_timesteps..(author + 1) * num_timesteps];
            let present = |t: usize| row[t - 1];
            let chosen = if present(time) {
                Some(time)
            } else {
                (1..time).rev().find(|&t| present(t)).or_else(|| (1..=num_timesteps).find(|&t| present(t)))
            };
            match chosen {
                Some(t) => CondState::Table { author, time: t },
                None => {
                    return Err(Error::invalid(format!("author {author} has no training timestep")));
                }
            }
        }
    })
}

impl<T: Scalar> Model<T> {
    /// [`state_for_eval`] with this model's variant and presence mask.
    pub fn eval_state(&self, author: usize, time: usize) -> Result<CondState> {
        state_for_eval(self.config.variant, author, time, &self.presence, self.dims.num_timesteps)
    }
}

/// Eval-mode scores of `docs`, in input order.
///
/// Documents are scored in chunks of `batch_size`; with `parallel` the
/// chunks run on the rayon pool. Each document's score depends only on
/// itself, so both paths return identical values.
pub fn score_documents<T: Scalar>(
    model: &Model<T>,
    docs: &[&Document],
    batch_size: usize,
    parallel: bool,
) -> Result<BatchScores> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    let states = docs
        .iter()
        .map(|d| model.eval_state(d.author, d.time))
        .collect::<Result<Vec<_>>>()?;
    // Batches must not mix conditioning kinds; with one variant they never do.
    let chunks: Vec<(usize, usize)> = (0..docs.len())
        .step_by(batch_size)
        .map(|s| (s, (s + batch_size).min(docs.len())))
        .collect();
    let run = |&(s, e): &(usize, usize)| model.score(&docs[s..e], &states[s..e]);
    let parts: Vec<BatchScores> = if parallel {
        chunks.par_iter().map(run).collect::<Result<_>>()?
    } else {
        chunks.iter().map(run).collect::<Result<_>>()?
    };
    let mut out = BatchScores::default();
    for p in parts {
        out.nats.extend(p.nats);
        out.counts.extend(p.counts);
        out.eos_nats.extend(p.eos_nats);
    }
    Ok(out)
}

/// `exp(Σ nats / Σ counts)`.
pub fn micro_perplexity(pairs: &[(f64, usize)]) -> Result<f64> {
    let count: usize = pairs.iter().map(|p| p.1).sum();
    if count == 0 {
        return Err(Error::Empty { what: "token count" });
    }
    let nats: f64 = pairs.iter().map(|p| p.0).sum();
    Ok((nats / count as f64).exp())
}

/// Aggregate scores of one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepScore {
    pub time: usize,
    pub nats: f64,
    pub count: usize,
    pub ppl: f64,
}

/// Mean of the per-timestep perplexities, over timesteps with tokens.
pub fn macro_perplexity(per_timestep: &[TimestepScore]) -> Result<f64> {
    let used: Vec<f64> = per_timestep.iter().filter(|s| s.count > 0).map(|s| s.ppl).collect();
    if used.is_empty() {
        return Err(Error::Empty { what: "timestep list" });
    }
    Ok(used.iter().sum::<f64>() / used.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub variant: Variant,
    pub task: TaskKind,
    pub seed: u64,
    pub micro_ppl: f64,
    pub macro_ppl: f64,
    /// Perplexity over words only, end tokens excluded.
    pub word_ppl: f64,
    pub per_timestep: Vec<TimestepScore>,
}

impl EvalReport {
    /// Builds a report from per-document scores of `docs`.
    pub fn from_scores(
        variant: Variant,
        task: TaskKind,
        seed: u64,
        docs: &[&Document],
        scores: &BatchScores,
    ) -> Result<Self> {
        if docs.len() != scores.nats.len() {
            return Err(Error::invalid(format!("{} documents for {} scores", docs.len(), scores.nats.len())));
        }
        let pairs: Vec<(f64, usize)> = scores.nats.iter().copied().zip(scores.counts.iter().copied()).collect();
        let micro_ppl = micro_perplexity(&pairs)?;
        let word_pairs: Vec<(f64, usize)> = pairs
            .iter()
            .zip(&scores.eos_nats)
            .map(|(&(n, c), &e)| (n - e, c - 1))
            .collect();
        let word_ppl = micro_perplexity(&word_pairs).unwrap_or(f64::NAN);

        let horizon = docs.iter().map(|d| d.time).max().unwrap_or(0);
        let mut acc = vec![(0.0, 0usize); horizon];
        for (d, &(n, c)) in docs.iter().zip(&pairs) {
            acc[d.time - 1].0 += n;
            acc[d.time - 1].1 += c;
        }
        let per_timestep: Vec<TimestepScore> = acc
            .iter()
            .enumerate()
            .filter(|(_, a)| a.1 > 0)
            .map(|(i, &(nats, count))| TimestepScore {
                time: i + 1,
                nats,
                count,
                ppl: (nats / count as f64).exp(),
            })
            .collect();
        let macro_ppl = macro_perplexity(&per_timestep)?;
        Ok(EvalReport {
            variant,
            task,
            seed,
            micro_ppl,
            macro_ppl,
            word_ppl,
            per_timestep,
        })
    }

    /// Tab-separated summary line block, then one line per timestep.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "variant\t{}", self.variant).unwrap();
        writeln!(s, "task\t{}", self.task).unwrap();
        writeln!(s, "seed\t{}", self.seed).unwrap();
        writeln!(s, "micro_ppl\t{}", self.micro_ppl).unwrap();
        writeln!(s, "macro_ppl\t{}", self.macro_ppl).unwrap();
        writeln!(s, "word_ppl\t{}", self.word_ppl).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "t\tnats\tcount\tppl").unwrap();
        for p in &self.per_timestep {
            writeln!(s, "{}\t{}\t{}\t{}", p.time, p.nats, p.count, p.ppl).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        fn parse<V: FromStr>(line: usize, v: &str) -> Result<V> {
            v.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("cannot parse {v:?}"),
            })
        }
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (n, l) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("missing {key}"),
            })?;
            match l.split_once('\t') {
                Some((k, v)) if k == key => Ok((n, v.to_string())),
                _ => Err(Error::Parse {
                    line: n,
                    msg: format!("expected {key}"),
                }),
            }
        };
        let (n, v) = field("variant")?;
        let variant: Variant = v.parse().map_err(|_| Error::Parse { line: n, msg: format!("bad variant {v:?}") })?;
        let (n, v) = field("task")?;
        let task: TaskKind = v.parse().map_err(|_| Error::Parse { line: n, msg: format!("bad task {v:?}") })?;
        let (n, v) = field("seed")?;
        let seed = parse(n, &v)?;
        let (n, v) = field("micro_ppl")?;
        let micro_ppl = parse(n, &v)?;
        let (n, v) = field("macro_ppl")?;
        let macro_ppl = parse(n, &v)?;
        let (n, v) = field("word_ppl")?;
        let word_ppl = parse(n, &v)?;
        drop(field);
        let mut per_timestep = Vec::new();
        for (n, l) in text.lines().enumerate().skip(8).map(|(i, l)| (i + 1, l)) {
            if l.is_empty() {
                continue;
            }
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::Parse {
                    line: n,
                    msg: "expected 4 columns".into(),
                });
            }
            per_timestep.push(TimestepScore {
                time: parse(n, cols[0])?,
                nats: parse(n, cols[1])?,
                count: parse(n, cols[2])?,
                ppl: parse(n, cols[3])?,
            });
        }
        Ok(EvalReport {
            variant,
            task,
            seed,
            micro_ppl,
            macro_ppl,
            word_ppl,
            per_timestep,
        })
    }
}

/// Scores the documents tagged `tag` and builds a report.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    corpus: &Corpus,
    split: &SplitAssignment,
    tag: SplitTag,
    parallel: bool,
) -> Result<EvalReport> {
    if split.doc_split.len() != corpus.documents.len() {
        return Err(Error::invalid(format!(
            "split covers {} documents, corpus has {}",
            split.doc_split.len(),
            corpus.documents.len()
        )));
    }
    let docs: Vec<&Document> = split.indices(tag).into_iter().map(|i| &corpus.documents[i]).collect();
    if docs.is_empty() {
        return Err(Error::Empty { what: "evaluation set" });
    }
    let scores = score_documents(model, &docs, EVAL_BATCH, parallel)?;
    EvalReport::from_scores(model.config.variant, split.task, split.seed, &docs, &scores)
}

/// `(t, ppl_baseline,t − ppl_model,t)`; positive means the model is better.
pub fn gain_series(report: &EvalReport, baseline: &EvalReport) -> Result<Vec<(usize, f64)>> {
    if report.task != baseline.task || report.seed != baseline.seed {
        return Err(Error::invalid(format!(
            "reports come from different splits ({} seed {} vs {} seed {})",
            report.task, report.seed, baseline.task, baseline.seed
        )));
    }
    let times = |r: &EvalReport| r.per_timestep.iter().map(|p| (p.time, p.count)).collect::<Vec<_>>();
    if times(report) != times(baseline) {
        return Err(Error::invalid("reports cover different timesteps or token counts"));
    }
    Ok(report
        .per_timestep
        .iter()
        .zip(&baseline.per_timestep)
        .map(|(m, b)| (m.time, b.ppl - m.ppl))
        .collect())
}

/// `t TAB gain` lines.
pub fn gain_tsv(series: &[(usize, f64)]) -> String {
    series.iter().map(|(t, g)| format!("{t}\t{g}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ModelDims};

    fn presence(rows: &[&[usize]], tt: usize) -> Vec<bool> {
        let mut p = vec![false; rows.len() * tt];
        for (a, ts) in rows.iter().enumerate() {
            for &t in *ts {
                p[a * tt + t - 1] = true;
            }
        }
        p
    }

    #[test]
    fn fallback_uses_latest_earlier_timestep() {
        let p = presence(&[&[2, 5]], 8);
        let s = |t| state_for_eval(Variant::LstmAt, 0, t, &p, 8).unwrap();
        assert_eq!(s(7), CondState::Table { author: 0, time: 5 });
        assert_eq!(s(2), CondState::Table { author: 0, time: 2 });
        assert_eq!(s(4), CondState::Table { author: 0, time: 2 });
        // Nothing earlier: earliest present.
        assert_eq!(s(1), CondState::Table { author: 0, time: 2 });
        assert_eq!(state_for_eval(Variant::LstmIat, 0, 8, &p, 8).unwrap(), CondState::Table { author: 0, time: 5 });
    }

    #[test]
    fn other_variants_ignore_presence() {
        let p = presence(&[&[1], &[3]], 4);
        assert_eq!(state_for_eval(Variant::Lstm, 1, 2, &p, 4).unwrap(), CondState::Sos);
        assert_eq!(state_for_eval(Variant::LstmA, 1, 2, &p, 4).unwrap(), CondState::Static { author: 1 });
        assert_eq!(state_for_eval(Variant::Ours, 1, 4, &p, 4).unwrap(), CondState::Rollout { author: 1, time: 4 });
        assert!(matches!(state_for_eval(Variant::Ours, 2, 1, &p, 4), Err(Error::UnknownAuthor(2))));
        assert!(state_for_eval(Variant::Ours, 0, 5, &p, 4).is_err());
    }

    #[test]
    fn author_without_training_data_errors_for_tables() {
        let p = presence(&[&[1], &[]], 3);
        assert!(state_for_eval(Variant::LstmAt, 1, 2, &p, 3).is_err());
    }

    #[test]
    fn ours_eval_state_matches_training_state() {
        let cfg = ModelConfig::tiny(Variant::Ours);
        let dims = ModelDims {
            num_authors: 2,
            num_timesteps: 3,
            vocab_size: 6,
        };
        let m: Model<f64> = Model::new(cfg, dims, vec![true; 6], 0).unwrap();
        for t in 1..=3 {
            assert_eq!(m.eval_state(1, t).unwrap(), m.train_state(1, t));
        }
    }

    #[test]
    fn micro_examples() {
        assert_eq!(micro_perplexity(&[(0.0, 3), (0.0, 1)]).unwrap(), 1.0);
        let l6 = 6f64.ln();
        assert!((micro_perplexity(&[(5.0 * l6, 5)]).unwrap() - 6.0).abs() < 1e-12);
        let r = micro_perplexity(&[(2f64.ln(), 1), (8f64.ln(), 1)]).unwrap();
        assert!((r - 4.0).abs() < 1e-12);
        assert!(micro_perplexity(&[]).is_err());
        assert!(micro_perplexity(&[(1.0, 0)]).is_err());
    }

    fn ts(time: usize, ppl: f64, count: usize) -> TimestepScore {
        TimestepScore {
            time,
            nats: ppl.ln() * count as f64,
            count,
            ppl,
        }
    }

    #[test]
    fn macro_examples() {
        let per = [ts(1, 2.0, 10), ts(2, 8.0, 10)];
        assert!((macro_perplexity(&per).unwrap() - 5.0).abs() < 1e-12);
        let pairs: Vec<_> = per.iter().map(|p| (p.nats, p.count)).collect();
        assert!((micro_perplexity(&pairs).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(macro_perplexity(&[ts(3, 7.0, 2)]).unwrap(), 7.0);
        assert!(macro_perplexity(&[]).is_err());
        // Empty timesteps are skipped.
        assert_eq!(macro_perplexity(&[ts(1, 3.0, 4), ts(2, 1.0, 0)]).unwrap(), 3.0);
    }

    fn doc(author: usize, time: usize, n: usize) -> Document {
        Document {
            author,
            time,
            tokens: vec![5; n],
            labels: vec![],
        }
    }

    fn sample_report() -> EvalReport {
        let docs = [doc(0, 1, 2), doc(1, 3, 1), doc(0, 3, 4)];
        let refs: Vec<&Document> = docs.iter().collect();
        let scores = BatchScores {
            nats: vec![2.1, 0.7, 5.3],
            counts: vec![3, 2, 5],
            eos_nats: vec![0.1, 0.3, 0.2],
        };
        EvalReport::from_scores(Variant::LstmAt, TaskKind::Imputation, 9, &refs, &scores).unwrap()
    }

    #[test]
    fn report_aggregates() {
        let r = sample_report();
        assert_eq!(r.per_timestep.len(), 2);
        assert_eq!(r.per_timestep[1].time, 3);
        assert_eq!(r.per_timestep[1].count, 7);
        assert!((r.micro_ppl - (8.1f64 / 10.0).exp()).abs() < 1e-12);
        assert!((r.word_ppl - (7.5f64 / 7.0).exp()).abs() < 1e-12);
        let want_macro = ((2.1f64 / 3.0).exp() + (6.0f64 / 7.0).exp()) / 2.0;
        assert!((r.macro_ppl - want_macro).abs() < 1e-12);
    }

    #[test]
    fn report_text_round_trip() {
        let r = sample_report();
        let back = EvalReport::from_text(&r.to_text()).unwrap();
        assert_eq!(back, r);
        assert!(EvalReport::from_text("variant\tlstm\n").is_err());
    }

    #[test]
    fn gain_examples() {
        let r = sample_report();
        assert!(gain_series(&r, &r).unwrap().iter().all(|&(_, g)| g == 0.0));
        let mut base = r.clone();
        base.per_timestep[0].ppl = 10.0;
        let mut model = r.clone();
        model.per_timestep[0].ppl = 7.0;
        assert_eq!(gain_series(&model, &base).unwrap()[0], (1, 3.0));
        let mut other = r.clone();
        other.seed = 1;
        assert!(gain_series(&r, &other).is_err());
        let mut other = r.clone();
        other.per_timestep.pop();
        assert!(gain_series(&r, &other).is_err());
        assert_eq!(gain_tsv(&[(2, 0.5)]), "2\t0.5\n");
    }

    #[test]
    fn chunked_scoring_matches_single_pass() {
        let cfg = ModelConfig::tiny(Variant::LstmAt);
        let dims = ModelDims {
            num_authors: 2,
            num_timesteps: 3,
            vocab_size: 9,
        };
        let m: Model<f64> = Model::new(cfg, dims, presence(&[&[1, 3], &[2]], 3), 4).unwrap();
        let docs = [doc(0, 2, 3), doc(1, 1, 1), doc(0, 3, 5), doc(1, 3, 2), doc(0, 1, 2)];
        let refs: Vec<&Document> = docs.iter().collect();
        let all = score_documents(&m, &refs, 100, false).unwrap();
        let chunked = score_documents(&m, &refs, 2, true).unwrap();
        assert_eq!(all.counts, chunked.counts);
        for (a, b) in all.nats.iter().zip(&chunked.nats) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
