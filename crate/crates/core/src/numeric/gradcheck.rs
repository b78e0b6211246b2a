use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::{DoubleDouble, Graph, NodeId, ParamSet, Scalar};

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Default)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub coordinates_checked: usize,
    /// `(parameter, flat index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// A scalar loss that can be recorded at any precision.
pub trait Objective {
    fn record<T: Scalar>(&self, params: &ParamSet<T>, g: &mut Graph<T>) -> Result<NodeId>;
}

fn eval_loss<O: Objective, T: Scalar>(obj: &O, params: &ParamSet<T>) -> Result<T> {
    let mut g = Graph::new();
    let node = obj.record(params, &mut g)?;
    let v = g.value(node).item();
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("loss = {v}")));
    }
    Ok(v)
}

/// Compares reverse-mode `f64` gradients against central differences
/// `(f(x+ε) − f(x−ε)) / 2ε` on up to `sample` random coordinates of
/// every trainable parameter.
///
/// The difference quotient is evaluated in double-double so that
/// cancellation in `f(x+ε) − f(x−ε)` does not swamp small gradients.
/// The error at a coordinate is `|analytic − numeric| / max(1e-8, |numeric|)`.
pub fn finite_diff_check<O: Objective>(
    obj: &O,
    params: &ParamSet<f64>,
    epsilon: f64,
    sample: usize,
    seed: u64,
) -> Result<GradCheck> {
    finite_diff_check_with::<O, f64>(obj, params, epsilon, sample, seed)
}

/// As [`finite_diff_check`], with the analytic gradient computed in `A`.
pub fn finite_diff_check_with<O: Objective, A: Scalar>(
    obj: &O,
    params: &ParamSet<f64>,
    epsilon: f64,
    sample: usize,
    seed: u64,
) -> Result<GradCheck> {
    let mut report = GradCheck::default();
    if params.num_values() == 0 {
        return Ok(report);
    }

    let mut analytic: ParamSet<A> = params.cast();
    analytic.zero_grads();
    let mut g = Graph::new();
    let loss = obj.record(&analytic, &mut g)?;
    if !g.value(loss).item().is_finite() {
        return Err(Error::NonFinite(format!("loss = {}", g.value(loss).item())));
    }
    g.backward(loss)?;
    g.accumulate_into(&mut analytic)?;

    let eps = DoubleDouble::lit(epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe: ParamSet<DoubleDouble> = params.cast();
    for (id, entry) in params.iter() {
        if !entry.flags.trainable || entry.value.is_empty() {
            continue;
        }
        let n = entry.value.len();
        let coords: Vec<usize> = if sample >= n {
            (0..n).collect()
        } else {
            sample_indices(&mut rng, n, sample).into_vec()
        };
        for k in coords {
            let x0 = probe.value(id).data()[k];
            probe.value_mut(id).data_mut()[k] = x0 + eps;
            let up = eval_loss(obj, &probe)?;
            probe.value_mut(id).data_mut()[k] = x0 - eps;
            let down = eval_loss(obj, &probe)?;
            probe.value_mut(id).data_mut()[k] = x0;

            let numeric = ((up - down) / (eps + eps)).as_f64();
            let a = analytic.grad(id).data()[k].as_f64();
            let rel = (a - numeric).abs() / numeric.abs().max(1e-8);
            report.coordinates_checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((entry.name.clone(), k, a, numeric));
            }
        }
    }
    Ok(report)
}
