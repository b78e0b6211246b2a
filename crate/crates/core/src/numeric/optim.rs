use crate::error::{Error, Result};
use crate::numeric::{Array, ParamSet, Scalar};

/// Adam moment estimates for every entry of a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub first: Vec<Array<T>>,
    pub second: Vec<Array<T>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> AdamState<T> {
    /// Default hyperparameters (β1 = 0.9, β2 = 0.999, ε = 1e-8).
    pub fn new(params: &ParamSet<T>) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &ParamSet<T>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = |p: &ParamSet<T>| -> Vec<Array<T>> {
            p.entries().iter().map(|e| Array::zeros(e.value.shape())).collect()
        };
        AdamState {
            first: zeros(params),
            second: zeros(params),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One Adam update with bias correction and decoupled weight decay, then
/// zeroes all gradients.
///
/// Decay is applied first (`w ← w − lr·λ·w`) with λ taken from each
/// entry's flags, so exempt entries are only moved by the Adam term.
pub fn adam_step<T: Scalar>(
    params: &mut ParamSet<T>,
    state: &mut AdamState<T>,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !(lr >= 0.0) {
        return Err(Error::invalid(format!("learning rate must be >= 0, got {lr}")));
    }
    if state.first.len() != params.len() {
        return Err(Error::invalid("optimizer state does not match parameter set"));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (T::lit(state.beta1), T::lit(state.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - state.beta1), T::lit(1.0 - state.beta2));
    let step_size = T::lit(lr / bc1);
    let inv_bc2 = T::lit(1.0 / bc2);
    let eps = T::lit(state.eps);

    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let k = id.index();
        let entry = params.entry_mut(id);
        if !entry.flags.trainable {
            entry.grad.fill(T::zero());
            continue;
        }
        let decay = T::lit(lr * entry.flags.decay_rate(weight_decay));
        let m = state.first[k].data_mut();
        let v = state.second[k].data_mut();
        let w = entry.value.data_mut();
        let g = entry.grad.data_mut();
        for i in 0..w.len() {
            if decay != T::zero() {
                w[i] = w[i] - decay * w[i];
            }
            m[i] = b1 * m[i] + one_b1 * g[i];
            v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
            let denom = (v[i] * inv_bc2).sqrt() + eps;
            w[i] = w[i] - step_size * m[i] / denom;
            g[i] = T::zero();
        }
    }
    Ok(())
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(params: &mut ParamSet<T>, max_norm: f64) -> f64 {
    let norm = params.grad_norm();
    if norm > max_norm && norm > 0.0 {
        let s = T::lit(max_norm / norm);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            params.grad_mut(id).scale_assign(s);
        }
    }
    norm
}
