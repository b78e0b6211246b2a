use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Model;
use crate::corpus::Document;
use crate::error::Result;
use crate::numeric::{finite_diff_check_with, GradCheck, Graph, Mode, NodeId, Objective, ParamSet, Scalar};

struct BatchLoss<'a> {
    model: &'a Model<f64>,
    docs: &'a [&'a Document],
    mode: Mode,
    dropout_seed: u64,
}

impl Objective for BatchLoss<'_> {
    fn record<T: Scalar>(&self, params: &ParamSet<T>, g: &mut Graph<T>) -> Result<NodeId> {
        let m = self.model;
        let model = Model::from_parts(m.config.clone(), m.dims, m.presence.clone(), params.clone())?;
        // Same seed on every evaluation, so train mode sees fixed masks.
        let mut rng = ChaCha8Rng::seed_from_u64(self.dropout_seed);
        model.objective(g, self.docs, self.mode, &mut rng)
    }
}

impl Model<f64> {
    /// Finite-difference check of the batch objective's gradient.
    ///
    /// In train mode the dropout masks are drawn from `dropout_seed` and
    /// held fixed across evaluations. `sample` coordinates per parameter
    /// are chosen with `seed`.
    pub fn gradient_check(
        &self,
        docs: &[&Document],
        mode: Mode,
        dropout_seed: u64,
        epsilon: f64,
        sample: usize,
        seed: u64,
    ) -> Result<GradCheck> {
        self.gradient_check_with::<f64>(docs, mode, dropout_seed, epsilon, sample, seed)
    }

    /// As [`Model::gradient_check`], with the analytic gradient computed in `A`.
    pub fn gradient_check_with<A: Scalar>(
        &self,
        docs: &[&Document],
        mode: Mode,
        dropout_seed: u64,
        epsilon: f64,
        sample: usize,
        seed: u64,
    ) -> Result<GradCheck> {
        let obj = BatchLoss {
            model: self,
            docs,
            mode,
            dropout_seed,
        };
        finite_diff_check_with::<_, A>(&obj, &self.params, epsilon, sample, seed)
    }
}
