//! The author-conditioned language model.
//!
//! A stacked LSTM decoder with tied input/output embeddings reads
//! `[cond, x_1 … x_n]` and predicts `[x_1 … x_n, EOS]`, where `cond` is a
//! projection of the author's latent state that takes the place of the
//! start-of-sequence embedding. The five variants differ only in where
//! that latent state comes from:
//!
//! | variant    | latent                                     |
//! |------------|--------------------------------------------|
//! | `lstm`     | none (learned `<sos>` embedding)           |
//! | `lstm-a`   | static `h_a`                               |
//! | `lstm-iat` | free `h_{a,t}` per present cell            |
//! | `lstm-at`  | free `h_{a,t}`, consecutive cells tied     |
//! | `ours`     | `h_{a,1} = g(h_a)`, `h_{a,t} = h_{a,t−1} + f(h_{a,t−1}[, h_a])` |

mod check;
mod forward;
mod latents;
mod step;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Array, ParamFlags, ParamId, ParamSet, Scalar};

pub use forward::{BatchScores, CondState};
pub use latents::{RegTerms, Trajectories};
pub use step::{DecoderState, StepDecoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "lstm")]
    Lstm,
    #[serde(rename = "lstm-a")]
    LstmA,
    #[serde(rename = "lstm-iat")]
    LstmIat,
    #[serde(rename = "lstm-at")]
    LstmAt,
    #[serde(rename = "ours")]
    Ours,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Lstm,
        Variant::LstmA,
        Variant::LstmIat,
        Variant::LstmAt,
        Variant::Ours,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Lstm => "lstm",
            Variant::LstmA => "lstm-a",
            Variant::LstmIat => "lstm-iat",
            Variant::LstmAt => "lstm-at",
            Variant::Ours => "ours",
        }
    }

    pub fn has_static(self) -> bool {
        matches!(self, Variant::LstmA | Variant::Ours)
    }

    pub fn has_free_table(self) -> bool {
        matches!(self, Variant::LstmIat | Variant::LstmAt)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown variant {s:?} (expected lstm, lstm-a, lstm-iat, lstm-at or ours)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Feed `h_a` into the dynamics network (`ours` only).
    pub ada_dyn: bool,
    /// Concatenate `h_a` into the conditioning vector (`ours` only).
    pub stat_cond: bool,
    pub d_embed: usize,
    /// Width of every LSTM layer but the last, which has `d_embed` units
    /// so its output can be tied to the embedding.
    pub d_hidden: usize,
    pub num_layers: usize,
    pub d_static: usize,
    pub d_dynamic: usize,
    pub mlp_hidden: usize,
    /// Hidden layers in each of the two MLPs; 0 makes them affine maps.
    pub mlp_layers: usize,
    pub dropout_input: f64,
    pub dropout_hidden: f64,
    pub dropout_output: f64,
    pub dropout_weight: f64,
    pub lambda_consec: f64,
    pub lambda_author: f64,
    pub lambda_dyn: f64,
    pub init_range: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Ours,
            ada_dyn: true,
            stat_cond: true,
            d_embed: 400,
            d_hidden: 400,
            num_layers: 2,
            d_static: 64,
            d_dynamic: 64,
            mlp_hidden: 64,
            mlp_layers: 1,
            dropout_input: 0.4,
            dropout_hidden: 0.25,
            dropout_output: 0.4,
            dropout_weight: 0.5,
            lambda_consec: 1e-3,
            lambda_author: 1e-4,
            lambda_dyn: 1e-4,
            init_range: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn with_variant(variant: Variant) -> Self {
        ModelConfig {
            variant,
            ..Default::default()
        }
    }

    /// A small configuration for tests and examples.
    pub fn tiny(variant: Variant) -> Self {
        ModelConfig {
            variant,
            d_embed: 16,
            d_hidden: 16,
            d_static: 8,
            d_dynamic: 8,
            mlp_hidden: 8,
            ..Default::default()
        }
    }

    pub fn without_dropout(mut self) -> Self {
        self.dropout_input = 0.0;
        self.dropout_hidden = 0.0;
        self.dropout_output = 0.0;
        self.dropout_weight = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_embed", self.d_embed),
            ("d_hidden", self.d_hidden),
            ("num_layers", self.num_layers),
            ("d_static", self.d_static),
            ("d_dynamic", self.d_dynamic),
            ("mlp_hidden", self.mlp_hidden),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        for (name, r) in [
            ("dropout_input", self.dropout_input),
            ("dropout_hidden", self.dropout_hidden),
            ("dropout_output", self.dropout_output),
            ("dropout_weight", self.dropout_weight),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("{name} = {r} outside [0, 1)")));
            }
        }
        for (name, l) in [
            ("lambda_consec", self.lambda_consec),
            ("lambda_author", self.lambda_author),
            ("lambda_dyn", self.lambda_dyn),
        ] {
            if !(l >= 0.0) {
                return Err(Error::Config(format!("{name} = {l} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Width of the latent vector projected into embedding space.
    pub fn d_cond(&self) -> usize {
        match self.variant {
            Variant::Lstm => 0,
            Variant::LstmA => self.d_static,
            Variant::LstmIat | Variant::LstmAt => self.d_dynamic,
            Variant::Ours => self.d_dynamic + if self.stat_cond { self.d_static } else { 0 },
        }
    }

    pub(crate) fn layer_sizes(&self) -> Vec<(usize, usize)> {
        (0..self.num_layers)
            .map(|l| {
                let input = if l == 0 { self.d_embed } else { self.d_hidden };
                let hidden = if l + 1 == self.num_layers { self.d_embed } else { self.d_hidden };
                (input, hidden)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Corpus-dependent sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub num_authors: usize,
    pub num_timesteps: usize,
    pub vocab_size: usize,
}

/// Parameter handles resolved once per model.
#[derive(Debug, Clone)]
pub(crate) struct Handles {
    pub embedding: ParamId,
    pub out_bias: ParamId,
    pub lstm: Vec<(ParamId, ParamId, ParamId)>,
    pub cond: Option<ParamId>,
    pub static_: Option<ParamId>,
    pub free: Option<ParamId>,
    pub init_mlp: Vec<(ParamId, ParamId)>,
    pub dyn_mlp: Vec<(ParamId, ParamId)>,
}

fn require(params: &ParamSet<impl Scalar>, name: &str) -> Result<ParamId> {
    params
        .id(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
}

impl Handles {
    fn resolve<T: Scalar>(cfg: &ModelConfig, params: &ParamSet<T>) -> Result<Self> {
        let v = cfg.variant;
        let mlp = |prefix: &str| -> Result<Vec<(ParamId, ParamId)>> {
            (0..=cfg.mlp_layers)
                .map(|k| {
                    Ok((
                        require(params, &format!("{prefix}.l{k}.weight"))?,
                        require(params, &format!("{prefix}.l{k}.bias"))?,
                    ))
                })
                .collect()
        };
        Ok(Handles {
            embedding: require(params, "embedding")?,
            out_bias: require(params, "out_bias")?,
            lstm: (0..cfg.num_layers)
                .map(|l| {
                    Ok((
                        require(params, &format!("lstm{l}.w_ih"))?,
                        require(params, &format!("lstm{l}.w_hh"))?,
                        require(params, &format!("lstm{l}.bias"))?,
                    ))
                })
                .collect::<Result<_>>()?,
            cond: if v == Variant::Lstm { None } else { Some(require(params, "cond.weight")?) },
            static_: if v.has_static() { Some(require(params, "author.static")?) } else { None },
            free: if v.has_free_table() { Some(require(params, "author.free")?) } else { None },
            init_mlp: if v == Variant::Ours { mlp("init")? } else { Vec::new() },
            dyn_mlp: if v == Variant::Ours { mlp("dyn")? } else { Vec::new() },
        })
    }
}

/// Parameters plus the metadata needed to run them.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub config: ModelConfig,
    pub dims: ModelDims,
    /// `presence[a*T + t−1]`: author `a` has a training document at `t`.
    pub presence: Vec<bool>,
    pub params: ParamSet<T>,
    pub(crate) handles: Handles,
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], range: f64) -> Result<Array<T>> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.gen_range(-range..=range))).collect();
    Array::from_vec(shape, data)
}

impl<T: Scalar> Model<T> {
    /// Freshly initialized model. Weights are uniform in
    /// `±init_range`, biases zero, and the last layer of the dynamics
    /// network zero so trajectories start constant.
    pub fn new(config: ModelConfig, dims: ModelDims, presence: Vec<bool>, seed: u64) -> Result<Self> {
        config.validate()?;
        // Ids 0 and 1 (start and end) must exist; padding reuses the end id.
        if dims.vocab_size < 2 {
            return Err(Error::Config(format!("vocabulary of {} tokens is too small", dims.vocab_size)));
        }
        if dims.num_authors == 0 || dims.num_timesteps == 0 {
            return Err(Error::Config("model needs at least one author and one timestep".into()));
        }
        if presence.len() != dims.num_authors * dims.num_timesteps {
            return Err(Error::invalid(format!(
                "presence mask has {} cells, expected {}",
                presence.len(),
                dims.num_authors * dims.num_timesteps
            )));
        }
        let r = config.init_range;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let d = config.d_embed;
        p.insert("embedding", uniform(&mut rng, &[dims.vocab_size, d], r)?, ParamFlags::default())?;
        p.insert("out_bias", Array::zeros(&[dims.vocab_size, 1]), ParamFlags::exempt())?;
        for (l, (input, hidden)) in config.layer_sizes().into_iter().enumerate() {
            p.insert(&format!("lstm{l}.w_ih"), uniform(&mut rng, &[input, 4 * hidden], r)?, ParamFlags::default())?;
            p.insert(&format!("lstm{l}.w_hh"), uniform(&mut rng, &[hidden, 4 * hidden], r)?, ParamFlags::default())?;
            p.insert(&format!("lstm{l}.bias"), Array::zeros(&[1, 4 * hidden]), ParamFlags::exempt())?;
        }
        let v = config.variant;
        if v != Variant::Lstm {
            p.insert("cond.weight", uniform(&mut rng, &[config.d_cond(), d], r)?, ParamFlags::default())?;
        }
        if v.has_static() {
            // Penalized explicitly through `lambda_author`.
            p.insert(
                "author.static",
                uniform(&mut rng, &[dims.num_authors, config.d_static], r)?,
                ParamFlags::exempt(),
            )?;
        }
        if v.has_free_table() {
            p.insert(
                "author.free",
                uniform(&mut rng, &[dims.num_authors * dims.num_timesteps, config.d_dynamic], r)?,
                ParamFlags::default(),
            )?;
        }
        if v == Variant::Ours {
            let dyn_in = config.d_dynamic + if config.ada_dyn { config.d_static } else { 0 };
            let dyn_flags = ParamFlags::decay(config.lambda_dyn);
            for (prefix, d_in, flags) in [
                ("init", config.d_static, ParamFlags::default()),
                ("dyn", dyn_in, dyn_flags),
            ] {
                let mut width = d_in;
                for k in 0..=config.mlp_layers {
                    let out = if k == config.mlp_layers { config.d_dynamic } else { config.mlp_hidden };
                    let last_dyn = prefix == "dyn" && k == config.mlp_layers;
                    let w = if last_dyn {
                        Array::zeros(&[width, out])
                    } else {
                        uniform(&mut rng, &[width, out], r)?
                    };
                    p.insert(&format!("{prefix}.l{k}.weight"), w, flags)?;
                    p.insert(&format!("{prefix}.l{k}.bias"), Array::zeros(&[1, out]), flags)?;
                    width = out;
                }
            }
        }
        Self::from_parts(config, dims, presence, p)
    }

    /// Reassembles a model from stored parameters, checking every
    /// expected parameter is present with the right shape.
    pub fn from_parts(config: ModelConfig, dims: ModelDims, presence: Vec<bool>, params: ParamSet<T>) -> Result<Self> {
        config.validate()?;
        let handles = Handles::resolve(&config, &params)?;
        let model = Model {
            config,
            dims,
            presence,
            params,
            handles,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        let mut expect: Vec<(ParamId, Vec<usize>)> = vec![
            (self.handles.embedding, vec![self.dims.vocab_size, c.d_embed]),
            (self.handles.out_bias, vec![self.dims.vocab_size, 1]),
        ];
        for (&(wi, wh, b), (input, hidden)) in self.handles.lstm.iter().zip(c.layer_sizes()) {
            expect.push((wi, vec![input, 4 * hidden]));
            expect.push((wh, vec![hidden, 4 * hidden]));
            expect.push((b, vec![1, 4 * hidden]));
        }
        if let Some(w) = self.handles.cond {
            expect.push((w, vec![c.d_cond(), c.d_embed]));
        }
        if let Some(s) = self.handles.static_ {
            expect.push((s, vec![self.dims.num_authors, c.d_static]));
        }
        if let Some(f) = self.handles.free {
            expect.push((f, vec![self.dims.num_authors * self.dims.num_timesteps, c.d_dynamic]));
        }
        for (id, shape) in expect {
            let e = self.params.entry(id);
            if e.value.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    e.name,
                    e.value.shape(),
                    shape
                )));
            }
        }
        if self.presence.len() != self.dims.num_authors * self.dims.num_timesteps {
            return Err(Error::Checkpoint("presence mask size mismatch".into()));
        }
        Ok(())
    }

    /// A debug model whose logits are identically zero, so every token
    /// has probability `1/|V|`.
    pub fn uniform(config: ModelConfig, dims: ModelDims) -> Result<Self> {
        let presence = vec![true; dims.num_authors * dims.num_timesteps];
        let mut m = Self::new(config, dims, presence, 0)?;
        m.params.value_mut(m.handles.embedding).fill(T::zero());
        m.params.value_mut(m.handles.out_bias).fill(T::zero());
        Ok(m)
    }

    pub fn is_present(&self, author: usize, time: usize) -> bool {
        self.presence[author * self.dims.num_timesteps + time - 1]
    }

    pub fn check_author(&self, author: usize) -> Result<()> {
        if author >= self.dims.num_authors {
            return Err(Error::UnknownAuthor(author));
        }
        Ok(())
    }

    pub(crate) fn check_time(&self, time: usize) -> Result<()> {
        if time == 0 || time > self.dims.num_timesteps {
            return Err(Error::invalid(format!(
                "timestep {time} outside 1..={}",
                self.dims.num_timesteps
            )));
        }
        Ok(())
    }

    /// Same model at another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            dims: self.dims,
            presence: self.presence.clone(),
            params: self.params.cast(),
            handles: self.handles.clone(),
        }
    }
}

/// Presence mask from the training documents.
pub fn presence_mask<'a>(
    docs: impl IntoIterator<Item = &'a crate::corpus::Document>,
    num_authors: usize,
    num_timesteps: usize,
) -> Vec<bool> {
    let mut m = vec![false; num_authors * num_timesteps];
    for d in docs {
        m[d.author * num_timesteps + d.time - 1] = true;
    }
    m
}
