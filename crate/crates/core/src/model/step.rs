use super::{CondState, Model};
use crate::corpus::SOS;
use crate::error::{Error, Result};
use crate::numeric::ops::{lstm_cell, log_softmax_rows, matmul_nt};
use crate::numeric::{Array, Graph, Scalar};

/// Recurrent state after consuming a prefix, plus the log-distribution
/// of the next token.
#[derive(Debug, Clone)]
pub struct DecoderState<T> {
    h: Vec<Array<T>>,
    c: Vec<Array<T>>,
    pub log_probs: Vec<f64>,
}

impl<T: Scalar> DecoderState<T> {
    /// Output of the last LSTM layer.
    pub fn hidden(&self) -> &[T] {
        self.h.last().expect("at least one layer").row(0)
    }
}

/// Eval-mode decoder that consumes one token at a time, using the same
/// kernels as the training graph.
pub struct StepDecoder<'m, T: Scalar> {
    model: &'m Model<T>,
    /// `[E | b]`, the tied output projection with the bias column.
    w_aug: Array<T>,
}

impl<T: Scalar> Model<T> {
    /// Conditioning vector in embedding space for an explicit state.
    pub fn condition(&self, state: CondState) -> Result<Vec<T>> {
        let mut g = Graph::new();
        let c = self.cond_rows(&mut g, &[state])?;
        Ok(g.value(c).row(0).to_vec())
    }

    pub fn step_decoder(&self) -> StepDecoder<'_, T> {
        let e = self.params.value(self.handles.embedding);
        let b = self.params.value(self.handles.out_bias);
        let (v, d) = (e.rows(), e.cols());
        let mut w_aug = Array::zeros(&[v, d + 1]);
        for r in 0..v {
            let row = w_aug.row_mut(r);
            row[..d].copy_from_slice(e.row(r));
            row[d] = b.data()[r];
        }
        StepDecoder { model: self, w_aug }
    }
}

impl<T: Scalar> StepDecoder<'_, T> {
    fn advance(&self, x: Array<T>, prev: Option<&DecoderState<T>>) -> Result<DecoderState<T>> {
        let m = self.model;
        let mut x = x;
        let mut hs = Vec::with_capacity(m.handles.lstm.len());
        let mut cs = Vec::with_capacity(m.handles.lstm.len());
        for (l, &(wi, wh, b)) in m.handles.lstm.iter().enumerate() {
            let hidden = m.params.value(wh).rows();
            let zeros = Array::zeros(&[1, hidden]);
            let (h0, c0) = match prev {
                Some(s) => (&s.h[l], &s.c[l]),
                None => (&zeros, &zeros),
            };
            let step = lstm_cell(&x, h0, c0, m.params.value(wi), m.params.value(wh), m.params.value(b))?;
            x = step.h.clone();
            hs.push(step.h);
            cs.push(step.c);
        }
        let mut aug = Array::zeros(&[1, x.cols() + 1]);
        aug.row_mut(0)[..x.cols()].copy_from_slice(x.row(0));
        aug.row_mut(0)[x.cols()] = T::one();
        let logits = matmul_nt(&aug, &self.w_aug)?;
        let log_probs = log_softmax_rows(&logits).row(0).iter().map(|v| v.as_f64()).collect();
        Ok(DecoderState { h: hs, c: cs, log_probs })
    }

    /// State after the conditioning input; `None` uses `<sos>`.
    pub fn start(&self, cond: Option<&[T]>) -> Result<DecoderState<T>> {
        let d = self.model.config.d_embed;
        let x = match cond {
            Some(c) => {
                if c.len() != d {
                    return Err(Error::shape("decoder start", format!("condition of length {} vs d_embed {d}", c.len())));
                }
                Array::from_vec(&[1, d], c.to_vec())?
            }
            None => {
                let e = self.model.params.value(self.model.handles.embedding);
                Array::from_vec(&[1, d], e.row(SOS).to_vec())?
            }
        };
        self.advance(x, None)
    }

    /// State after additionally consuming `token`.
    pub fn step(&self, state: &DecoderState<T>, token: usize) -> Result<DecoderState<T>> {
        let e = self.model.params.value(self.model.handles.embedding);
        if token >= e.rows() {
            return Err(Error::invalid(format!("token id {token} outside vocabulary of {}", e.rows())));
        }
        let x = Array::from_vec(&[1, e.cols()], e.row(token).to_vec())?;
        self.advance(x, Some(state))
    }
}
