use super::{Model, Variant};
use crate::error::{Error, Result};
use crate::numeric::{Array, Graph, NodeId, ParamId, Scalar};

/// Values of the regularization terms, for logging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RegTerms {
    /// `λ_consec · Σ ‖h_{a,t} − h_{a,t'}‖²` over consecutive present cells.
    pub consec: f64,
    /// `λ_author · ‖h_static‖²`.
    pub author: f64,
    /// `λ_dyn · ‖φ‖²`; applied through weight decay, not the loss graph.
    pub dynamics: f64,
}

impl RegTerms {
    pub fn total(&self) -> f64 {
        self.consec + self.author + self.dynamics
    }

    /// The part that is added to the training loss.
    pub fn in_loss(&self) -> f64 {
        self.consec + self.author
    }
}

/// Every author's latent vectors, one row per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    /// `[A][d_static]`; empty rows for variants without `h_a`.
    pub h_static: Vec<Vec<f64>>,
    /// `[A][T][d]`.
    pub h_dynamic: Vec<Vec<Vec<f64>>>,
}

fn mlp<T: Scalar>(g: &mut Graph<T>, params: &crate::numeric::ParamSet<T>, layers: &[(ParamId, ParamId)], x: NodeId) -> Result<NodeId> {
    let mut h = x;
    for (k, &(w, b)) in layers.iter().enumerate() {
        let wn = g.param(params, w);
        let bn = g.param(params, b);
        h = g.affine(h, wn, Some(bn))?;
        if k + 1 < layers.len() {
            h = g.relu(h);
        }
    }
    Ok(h)
}

fn row_vec<T: Scalar>(a: &Array<T>, r: usize) -> Vec<T> {
    a.row(r).to_vec()
}

impl<T: Scalar> Model<T> {
    fn require_ours(&self, op: &'static str) -> Result<()> {
        if self.config.variant != Variant::Ours {
            return Err(Error::WrongVariant {
                op,
                variant: self.config.variant.to_string(),
            });
        }
        Ok(())
    }

    fn dynamics_input(&self, g: &mut Graph<T>, h_prev: NodeId, h_a: NodeId) -> Result<NodeId> {
        if self.config.ada_dyn {
            g.concat_cols(&[h_prev, h_a])
        } else {
            Ok(h_prev)
        }
    }

    /// Static vectors and the rollout `[H_1 … H_horizon]`, each `[A, d_dynamic]`.
    pub(crate) fn rollout_graph(&self, g: &mut Graph<T>, horizon: usize) -> Result<(NodeId, Vec<NodeId>)> {
        self.require_ours("rollout")?;
        if horizon == 0 {
            return Err(Error::invalid("rollout horizon must be >= 1"));
        }
        let stat = g.param(&self.params, self.handles.static_.expect("static"));
        let mut traj = Vec::with_capacity(horizon);
        traj.push(mlp(g, &self.params, &self.handles.init_mlp, stat)?);
        for _ in 1..horizon {
            let prev = *traj.last().unwrap();
            let input = self.dynamics_input(g, prev, stat)?;
            let r = mlp(g, &self.params, &self.handles.dyn_mlp, input)?;
            traj.push(g.add(prev, r)?);
        }
        Ok((stat, traj))
    }

    /// `h_{a,1} = g_ψ(h_a)`.
    pub fn init_trajectory(&self, h_a: &[T]) -> Result<Vec<T>> {
        self.require_ours("init_trajectory")?;
        if h_a.len() != self.config.d_static {
            return Err(Error::shape("init_trajectory", format!("h_a of length {} vs d_static {}", h_a.len(), self.config.d_static)));
        }
        let mut g = Graph::new();
        let x = g.constant(Array::from_vec(&[1, h_a.len()], h_a.to_vec())?);
        let y = mlp(&mut g, &self.params, &self.handles.init_mlp, x)?;
        Ok(row_vec(g.value(y), 0))
    }

    /// `h_prev + f_φ(h_prev[, h_a])`.
    pub fn step_dynamics(&self, h_prev: &[T], h_a: &[T]) -> Result<Vec<T>> {
        self.require_ours("step_dynamics")?;
        let c = &self.config;
        if h_prev.len() != c.d_dynamic || (c.ada_dyn && h_a.len() != c.d_static) {
            return Err(Error::shape(
                "step_dynamics",
                format!("h_prev {} / h_a {} vs d_dynamic {} / d_static {}", h_prev.len(), h_a.len(), c.d_dynamic, c.d_static),
            ));
        }
        let mut g = Graph::new();
        let hp = g.constant(Array::from_vec(&[1, h_prev.len()], h_prev.to_vec())?);
        let ha = g.constant(Array::from_vec(&[1, h_a.len()], h_a.to_vec())?);
        let input = self.dynamics_input(&mut g, hp, ha)?;
        let r = mlp(&mut g, &self.params, &self.handles.dyn_mlp, input)?;
        let next = g.add(hp, r)?;
        Ok(row_vec(g.value(next), 0))
    }

    /// `[h_{a,1}, …, h_{a,horizon}]`.
    pub fn rollout_trajectory(&self, author: usize, horizon: usize) -> Result<Vec<Vec<T>>> {
        self.require_ours("rollout_trajectory")?;
        self.check_author(author)?;
        let mut g = Graph::new();
        let (_, traj) = self.rollout_graph(&mut g, horizon)?;
        Ok(traj.iter().map(|&h| row_vec(g.value(h), author)).collect())
    }

    /// Conditioning vector in embedding space used when training on
    /// `(author, time)`; `None` for the unconditioned variant.
    pub fn conditioning_vector(&self, author: usize, time: usize) -> Result<Option<Vec<T>>> {
        self.check_author(author)?;
        self.check_time(time)?;
        let state = self.train_state(author, time);
        if state == super::CondState::Sos {
            return Ok(None);
        }
        let mut g = Graph::new();
        let c = self.cond_rows(&mut g, &[state])?;
        Ok(Some(row_vec(g.value(c), 0)))
    }

    /// Latent vectors for every author and timestep. Free-table cells
    /// without training documents are reported as stored.
    pub fn trajectories(&self) -> Result<Trajectories> {
        let (a_count, tt) = (self.dims.num_authors, self.dims.num_timesteps);
        let to_f64 = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        let h_static: Vec<Vec<f64>> = match self.handles.static_ {
            Some(s) => (0..a_count).map(|a| to_f64(self.params.value(s).row(a))).collect(),
            None => vec![Vec::new(); a_count],
        };
        let h_dynamic = match self.config.variant {
            Variant::Lstm => {
                return Err(Error::WrongVariant {
                    op: "trajectories",
                    variant: "lstm".into(),
                })
            }
            Variant::LstmA => (0..a_count).map(|a| vec![h_static[a].clone(); tt]).collect(),
            Variant::LstmIat | Variant::LstmAt => {
                let f = self.params.value(self.handles.free.expect("free table"));
                (0..a_count)
                    .map(|a| (0..tt).map(|t| to_f64(f.row(a * tt + t))).collect())
                    .collect()
            }
            Variant::Ours => {
                let mut g = Graph::new();
                let (_, traj) = self.rollout_graph(&mut g, tt)?;
                (0..a_count)
                    .map(|a| traj.iter().map(|&h| to_f64(g.value(h).row(a))).collect())
                    .collect()
            }
        };
        Ok(Trajectories { h_static, h_dynamic })
    }

    /// Row pairs `(earlier, later)` of consecutive present free-table
    /// cells per author; gaps are skipped.
    fn consecutive_pairs(&self) -> (Vec<usize>, Vec<usize>) {
        let tt = self.dims.num_timesteps;
        let (mut earlier, mut later) = (Vec::new(), Vec::new());
        for a in 0..self.dims.num_authors {
            let mut last = None;
            for t in 0..tt {
                if self.presence[a * tt + t] {
                    if let Some(p) = last {
                        earlier.push(a * tt + p);
                        later.push(a * tt + t);
                    }
                    last = Some(t);
                }
            }
        }
        (earlier, later)
    }

    /// Regularization terms that enter the training loss, or `None`
    /// when there are none.
    pub(crate) fn regularization_graph(&self, g: &mut Graph<T>) -> Result<Option<NodeId>> {
        let c = &self.config;
        let mut terms = Vec::new();
        if c.variant == Variant::LstmAt && c.lambda_consec > 0.0 {
            let (earlier, later) = self.consecutive_pairs();
            if !earlier.is_empty() {
                let f = g.param(&self.params, self.handles.free.expect("free table"));
                let e = g.gather_rows(f, &earlier)?;
                let l = g.gather_rows(f, &later)?;
                let d = g.sub(l, e)?;
                let ss = g.sum_squares(d);
                terms.push(g.scale(ss, T::lit(c.lambda_consec)));
            }
        }
        if let Some(s) = self.handles.static_ {
            if c.lambda_author > 0.0 {
                let sn = g.param(&self.params, s);
                let ss = g.sum_squares(sn);
                terms.push(g.scale(ss, T::lit(c.lambda_author)));
            }
        }
        let mut acc = match terms.first() {
            Some(&t) => t,
            None => return Ok(None),
        };
        for &t in &terms[1..] {
            acc = g.add(acc, t)?;
        }
        Ok(Some(acc))
    }

    pub fn regularization_terms(&self) -> RegTerms {
        let c = &self.config;
        let mut out = RegTerms::default();
        if c.variant == Variant::LstmAt {
            let f = self.params.value(self.handles.free.expect("free table"));
            let (earlier, later) = self.consecutive_pairs();
            let ss: f64 = earlier
                .iter()
                .zip(&later)
                .map(|(&e, &l)| {
                    f.row(l)
                        .iter()
                        .zip(f.row(e))
                        .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
                        .sum::<f64>()
                })
                .sum();
            out.consec = c.lambda_consec * ss;
        }
        if let Some(s) = self.handles.static_ {
            out.author = c.lambda_author * self.params.value(s).sum_squares().as_f64();
        }
        let phi: f64 = self
            .handles
            .dyn_mlp
            .iter()
            .flat_map(|&(w, b)| [w, b])
            .map(|id| self.params.value(id).sum_squares().as_f64())
            .sum();
        out.dynamics = c.lambda_dyn * phi;
        out
    }
}
