use rand::Rng;

use super::{Model, Variant};
use crate::corpus::{Document, EOS, SOS};
use crate::error::{Error, Result};
use crate::numeric::{dropout_mask, Array, DropoutKind, Graph, Mode, NodeId, Scalar};

/// Where a document's conditioning vector comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondState {
    /// The learned `<sos>` embedding.
    Sos,
    /// Static author vector `h_a`.
    Static { author: usize },
    /// Free-table entry `h_{a,t}`.
    Table { author: usize, time: usize },
    /// Dynamics rollout at `t`.
    Rollout { author: usize, time: usize },
}

/// Per-document scores from one batched evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchScores {
    /// Total negative log-likelihood in nats, end token included.
    pub nats: Vec<f64>,
    /// Scored positions: document length + 1.
    pub counts: Vec<usize>,
    /// The part of `nats` spent on the end token.
    pub eos_nats: Vec<f64>,
}

/// Result of building the decoder graph for a batch.
pub(crate) struct Decoded {
    /// Summed cross-entropy node.
    pub xent: NodeId,
    /// Scored positions in the batch.
    pub count: usize,
    lengths: Vec<usize>,
}

impl Decoded {
    pub fn scores<T: Scalar>(&self, g: &Graph<T>) -> BatchScores {
        let rows = g.row_nll(self.xent).expect("cross-entropy node");
        let n = self.lengths.len();
        let mut out = BatchScores::default();
        for (i, &len) in self.lengths.iter().enumerate() {
            let total: f64 = (0..=len).map(|p| rows[p * n + i].as_f64()).sum();
            out.nats.push(total);
            out.counts.push(len + 1);
            out.eos_nats.push(rows[len * n + i].as_f64());
        }
        out
    }
}

struct Layer<T> {
    w_ih: NodeId,
    w_hh: NodeId,
    bias: NodeId,
    out_mask: Option<Array<T>>,
    h: NodeId,
    c: NodeId,
}

impl<T: Scalar> Model<T> {
    /// Conditioning state used for a training document.
    pub fn train_state(&self, author: usize, time: usize) -> CondState {
        match self.config.variant {
            Variant::Lstm => CondState::Sos,
            Variant::LstmA => CondState::Static { author },
            Variant::LstmIat | Variant::LstmAt => CondState::Table { author, time },
            Variant::Ours => CondState::Rollout { author, time },
        }
    }

    fn check_state(&self, s: CondState) -> Result<()> {
        let v = self.config.variant;
        let ok = match s {
            CondState::Sos => true,
            CondState::Static { author } => {
                self.check_author(author)?;
                v == Variant::LstmA
            }
            CondState::Table { author, time } => {
                self.check_author(author)?;
                self.check_time(time)?;
                v.has_free_table()
            }
            CondState::Rollout { author, time } => {
                self.check_author(author)?;
                self.check_time(time)?;
                v == Variant::Ours
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::WrongVariant {
                op: "conditioning",
                variant: v.to_string(),
            })
        }
    }

    /// `[n, d_cond]` latent rows for a batch of non-`Sos` states.
    pub(crate) fn latent_rows(&self, g: &mut Graph<T>, states: &[CondState]) -> Result<NodeId> {
        let h = &self.handles;
        match states[0] {
            CondState::Static { .. } => {
                let s = g.param(&self.params, h.static_.expect("static"));
                let rows: Vec<usize> = states
                    .iter()
                    .map(|s| match *s {
                        CondState::Static { author } => author,
                        _ => unreachable!(),
                    })
                    .collect();
                g.gather_rows(s, &rows)
            }
            CondState::Table { .. } => {
                let f = g.param(&self.params, h.free.expect("free table"));
                let tt = self.dims.num_timesteps;
                let rows: Vec<usize> = states
                    .iter()
                    .map(|s| match *s {
                        CondState::Table { author, time } => author * tt + time - 1,
                        _ => unreachable!(),
                    })
                    .collect();
                g.gather_rows(f, &rows)
            }
            CondState::Rollout { .. } => {
                let keys: Vec<(usize, usize)> = states
                    .iter()
                    .map(|s| match *s {
                        CondState::Rollout { author, time } => (author, time),
                        _ => unreachable!(),
                    })
                    .collect();
                let horizon = keys.iter().map(|k| k.1).max().unwrap();
                let (stat, traj) = self.rollout_graph(g, horizon)?;
                let all = g.concat_rows(&traj)?;
                let a_count = self.dims.num_authors;
                let rows: Vec<usize> = keys.iter().map(|&(a, t)| (t - 1) * a_count + a).collect();
                let dynamic = g.gather_rows(all, &rows)?;
                if self.config.stat_cond {
                    let authors: Vec<usize> = keys.iter().map(|k| k.0).collect();
                    let s = g.gather_rows(stat, &authors)?;
                    g.concat_cols(&[dynamic, s])
                } else {
                    Ok(dynamic)
                }
            }
            CondState::Sos => unreachable!(),
        }
    }

    /// `[n, d_embed]` conditioning inputs for a batch.
    pub(crate) fn cond_rows(&self, g: &mut Graph<T>, states: &[CondState]) -> Result<NodeId> {
        if states.is_empty() {
            return Err(Error::Empty { what: "batch" });
        }
        for &s in states {
            self.check_state(s)?;
            if std::mem::discriminant(&s) != std::mem::discriminant(&states[0]) {
                return Err(Error::invalid("mixed conditioning kinds in one batch"));
            }
        }
        if states[0] == CondState::Sos {
            let e = g.param(&self.params, self.handles.embedding);
            return g.gather_rows(e, &vec![SOS; states.len()]);
        }
        let latent = self.latent_rows(g, states)?;
        let w = g.param(&self.params, self.handles.cond.expect("conditioning weight"));
        g.affine(latent, w, None)
    }

    /// Runs the decoder over `docs` given `[n, d_embed]` conditioning rows
    /// and records the summed cross-entropy of every scored position.
    pub(crate) fn decode<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        cond: NodeId,
        docs: &[&[usize]],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Decoded> {
        let n = docs.len();
        if n == 0 {
            return Err(Error::Empty { what: "batch" });
        }
        if docs.iter().any(|d| d.is_empty()) {
            return Err(Error::Empty { what: "document" });
        }
        let v = self.dims.vocab_size;
        if let Some(&bad) = docs.iter().flat_map(|d| d.iter()).find(|&&t| t >= v) {
            return Err(Error::invalid(format!("token id {bad} outside vocabulary of {v}")));
        }
        if g.value(cond).shape() != [n, self.config.d_embed] {
            return Err(Error::shape(
                "decode",
                format!("conditioning {:?} for {n} documents of width {}", g.value(cond).shape(), self.config.d_embed),
            ));
        }
        let cfg = &self.config;
        let d = cfg.d_embed;
        let sizes = cfg.layer_sizes();
        let steps = docs.iter().map(|d| d.len()).max().unwrap() + 1;
        let train = mode == Mode::Train;

        let mask = |rng: &mut R, kind, shape: &[usize], rate: f64| -> Result<Option<Array<T>>> {
            if train && rate > 0.0 {
                Ok(Some(dropout_mask(kind, shape, rate, mode, rng)?))
            } else {
                Ok(None)
            }
        };
        let in_mask = mask(rng, DropoutKind::VariationalInput, &[n, d], cfg.dropout_input)?;
        let mut layers = Vec::with_capacity(sizes.len());
        for (l, &(_, hidden)) in sizes.iter().enumerate() {
            let (wi, wh, b) = self.handles.lstm[l];
            let w_ih = g.param(&self.params, wi);
            let mut w_hh = g.param(&self.params, wh);
            if let Some(m) = mask(rng, DropoutKind::WeightDrop, &[hidden, 4 * hidden], cfg.dropout_weight)? {
                w_hh = g.mul_const(w_hh, m)?;
            }
            let bias = g.param(&self.params, b);
            let rate = if l + 1 == sizes.len() { cfg.dropout_output } else { cfg.dropout_hidden };
            let out_mask = mask(rng, DropoutKind::VariationalOutput, &[n, hidden], rate)?;
            let h = g.constant(Array::zeros(&[n, hidden]));
            let c = g.constant(Array::zeros(&[n, hidden]));
            layers.push(Layer { w_ih, w_hh, bias, out_mask, h, c });
        }

        let emb = g.param(&self.params, self.handles.embedding);
        let mut outputs = Vec::with_capacity(steps);
        let mut targets = Vec::with_capacity(steps * n);
        let mut weights = Vec::with_capacity(steps * n);
        for p in 0..steps {
            let mut x = if p == 0 {
                cond
            } else {
                let ids: Vec<usize> = docs.iter().map(|d| d.get(p - 1).copied().unwrap_or(EOS)).collect();
                g.gather_rows(emb, &ids)?
            };
            if let Some(m) = &in_mask {
                x = g.mul_const(x, m.clone())?;
            }
            for layer in layers.iter_mut() {
                let (h, c) = g.lstm_cell(x, layer.h, layer.c, layer.w_ih, layer.w_hh, layer.bias)?;
                layer.h = h;
                layer.c = c;
                x = match &layer.out_mask {
                    Some(m) => g.mul_const(h, m.clone())?,
                    None => h,
                };
            }
            outputs.push(x);
            for d in docs {
                let (t, w) = match p.cmp(&d.len()) {
                    std::cmp::Ordering::Less => (d[p], T::one()),
                    std::cmp::Ordering::Equal => (EOS, T::one()),
                    std::cmp::Ordering::Greater => (EOS, T::zero()),
                };
                targets.push(t);
                weights.push(w);
            }
        }
        let hidden = g.concat_rows(&outputs)?;
        let logits = self.output_logits(g, hidden, emb)?;
        let xent = g.softmax_xent_sum(logits, &targets, Some(&weights))?;
        Ok(Decoded {
            xent,
            count: docs.iter().map(|d| d.len() + 1).sum(),
            lengths: docs.iter().map(|d| d.len()).collect(),
        })
    }

    /// `h · Eᵀ + b`, with the bias folded in as an extra column.
    fn output_logits(&self, g: &mut Graph<T>, hidden: NodeId, emb: NodeId) -> Result<NodeId> {
        let rows = g.value(hidden).rows();
        let ones = g.constant(Array::ones(&[rows, 1]));
        let h_aug = g.concat_cols(&[hidden, ones])?;
        let bias = g.param(&self.params, self.handles.out_bias);
        let w_aug = g.concat_cols(&[emb, bias])?;
        g.matmul_nt(h_aug, w_aug)
    }

    /// Training objective for a batch: token-mean negative log-likelihood
    /// plus the regularization terms that enter the loss.
    pub(crate) fn batch_objective<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        docs: &[&Document],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(NodeId, Decoded)> {
        let states: Vec<CondState> = docs.iter().map(|d| self.train_state(d.author, d.time)).collect();
        let cond = self.cond_rows(g, &states)?;
        let tokens: Vec<&[usize]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
        let dec = self.decode(g, cond, &tokens, mode, rng)?;
        let mean = g.scale(dec.xent, T::one() / T::lit(dec.count as f64));
        let loss = match self.regularization_graph(g)? {
            Some(r) => g.add(mean, r)?,
            None => mean,
        };
        Ok((loss, dec))
    }

    /// Scalar training objective of a batch, recorded on `g`.
    pub fn objective<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        docs: &[&Document],
        mode: Mode,
        rng: &mut R,
    ) -> Result<NodeId> {
        Ok(self.batch_objective(g, docs, mode, rng)?.0)
    }

    /// Eval-mode scores of `docs` under explicit conditioning states.
    pub fn score(&self, docs: &[&Document], states: &[CondState]) -> Result<BatchScores> {
        if docs.len() != states.len() {
            return Err(Error::invalid(format!("{} documents for {} states", docs.len(), states.len())));
        }
        let mut g = Graph::new();
        let cond = self.cond_rows(&mut g, states)?;
        let tokens: Vec<&[usize]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
        let dec = self.decode(&mut g, cond, &tokens, Mode::Eval, &mut NoRng)?;
        Ok(dec.scores(&g))
    }

    /// Eval-mode scores of token sequences under explicit `[n, d_embed]`
    /// conditioning vectors.
    pub fn score_with_conditions(&self, docs: &[&[usize]], conds: &Array<T>) -> Result<BatchScores> {
        let mut g = Graph::new();
        let cond = g.constant(conds.clone());
        let dec = self.decode(&mut g, cond, docs, Mode::Eval, &mut NoRng)?;
        Ok(dec.scores(&g))
    }

    /// `(total nats, scored positions)` of one document. `cond` of `None`
    /// uses the `<sos>` embedding.
    pub fn sequence_nll<R: Rng + ?Sized>(
        &self,
        doc: &Document,
        cond: Option<&[T]>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(f64, usize)> {
        let mut g = Graph::new();
        let c = match cond {
            Some(v) => g.constant(Array::from_vec(&[1, v.len()], v.to_vec())?),
            None => {
                let e = g.param(&self.params, self.handles.embedding);
                g.gather_rows(e, &[SOS])?
            }
        };
        let dec = self.decode(&mut g, c, &[doc.tokens.as_slice()], mode, rng)?;
        let s = dec.scores(&g);
        Ok((s.nats[0], s.counts[0]))
    }
}

/// Random source for eval-mode passes, which never draw.
pub(crate) struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval mode draws no random numbers")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("eval mode draws no random numbers")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("eval mode draws no random numbers")
    }
    fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("eval mode draws no random numbers")
    }
}
