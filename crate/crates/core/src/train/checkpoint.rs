use std::fs;
use std::path::Path;

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelDims};
use crate::numeric::container::{Container, Record};
use crate::numeric::{AdamState, ParamSet, Storable};
use crate::splits::SplitAssignment;
use crate::train::{Precision, TrainConfig};

/// Everything needed to resume training or evaluate a model.
#[derive(Debug, Clone)]
pub struct Checkpoint<T: Storable> {
    pub model: Model<T>,
    pub adam: AdamState<T>,
    /// Completed optimizer updates.
    pub iteration: usize,
    pub vocab: Vocab,
    pub split_hash: String,
    pub train_config: TrainConfig,
    /// Free-form `key=value` description of how the run was produced.
    pub provenance: String,
}

fn precision_of<T: Storable>() -> Precision {
    match T::DTYPE {
        crate::numeric::DType::F32 => Precision::F32,
        crate::numeric::DType::F64 => Precision::F64,
    }
}

impl<T: Storable> Checkpoint<T> {
    pub fn to_container(&self) -> Container {
        let m = &self.model;
        let mut c = Container::default();
        c.push(Record::text("meta.precision", precision_of::<T>().to_string()));
        c.push(Record::text("meta.model_config", m.config.to_json()));
        c.push(Record::text(
            "meta.train_config",
            serde_json::to_string(&self.train_config).expect("config serializes"),
        ));
        c.push(Record::u64s(
            "meta.dims",
            vec![m.dims.num_authors as u64, m.dims.num_timesteps as u64, m.dims.vocab_size as u64],
        ));
        c.push(Record::u64s("meta.presence", m.presence.iter().map(|&p| p as u64).collect()));
        c.push(Record::u64s("meta.iteration", vec![self.iteration as u64]));
        c.push(Record::text("meta.vocab", self.vocab.to_text()));
        c.push(Record::text("meta.vocab_hash", self.vocab.hash()));
        c.push(Record::text("meta.split_hash", self.split_hash.clone()));
        c.push(Record::text("meta.provenance", self.provenance.clone()));
        c.push(Record::u64s("adam.step", vec![self.adam.step]));
        c.push(Record::text(
            "adam.hyper",
            format!("{} {} {}", self.adam.beta1, self.adam.beta2, self.adam.eps),
        ));
        for (k, e) in m.params.entries().iter().enumerate() {
            c.push(Record::array(&format!("param.{}", e.name), &e.value));
            c.push(Record::array(&format!("adam.m.{}", e.name), &self.adam.first[k]));
            c.push(Record::array(&format!("adam.v.{}", e.name), &self.adam.second[k]));
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let stored: Precision = c.text("meta.precision")?.parse()?;
        if stored != precision_of::<T>() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {stored} parameters, {} requested",
                precision_of::<T>()
            )));
        }
        let config: ModelConfig = serde_json::from_str(c.text("meta.model_config")?)?;
        let train_config: TrainConfig = serde_json::from_str(c.text("meta.train_config")?)?;
        let dims = match c.u64s("meta.dims")? {
            &[a, t, v] => ModelDims {
                num_authors: a as usize,
                num_timesteps: t as usize,
                vocab_size: v as usize,
            },
            other => return Err(Error::Checkpoint(format!("meta.dims has {} entries", other.len()))),
        };
        let presence: Vec<bool> = c.u64s("meta.presence")?.iter().map(|&p| p != 0).collect();
        let iteration = single(c.u64s("meta.iteration")?, "meta.iteration")? as usize;
        let vocab = Vocab::from_text(c.text("meta.vocab")?)?;
        let vocab_hash = c.text("meta.vocab_hash")?;
        if vocab.hash() != vocab_hash {
            return Err(Error::HashMismatch {
                what: "vocabulary",
                expected: vocab_hash.to_string(),
                found: vocab.hash(),
            });
        }
        if vocab.len() != dims.vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary of {} tokens for a model of {}",
                vocab.len(),
                dims.vocab_size
            )));
        }

        // Rebuild the parameter layout, then overwrite the values.
        let template: Model<T> = Model::new(config.clone(), dims, presence.clone(), 0)?;
        let mut params: ParamSet<T> = template.params;
        let mut adam = AdamState::new(&params);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let name = params.entry(id).name.clone();
            let load = |prefix: &str| -> Result<crate::numeric::Array<T>> {
                let a = c.get(&format!("{prefix}.{name}"))?.to_array::<T>()?;
                if a.shape() != params.value(id).shape() {
                    return Err(Error::Checkpoint(format!(
                        "{prefix}.{name} has shape {:?}, expected {:?}",
                        a.shape(),
                        params.value(id).shape()
                    )));
                }
                Ok(a)
            };
            let (v, m1, m2) = (load("param")?, load("adam.m")?, load("adam.v")?);
            *params.value_mut(id) = v;
            adam.first[id.index()] = m1;
            adam.second[id.index()] = m2;
        }
        adam.step = single(c.u64s("adam.step")?, "adam.step")?;
        let hyper: Vec<f64> = c
            .text("adam.hyper")?
            .split(' ')
            .map(|s| s.parse().map_err(|_| Error::Checkpoint(format!("bad adam.hyper value {s:?}"))))
            .collect::<Result<_>>()?;
        match hyper[..] {
            [b1, b2, eps] => (adam.beta1, adam.beta2, adam.eps) = (b1, b2, eps),
            _ => return Err(Error::Checkpoint("adam.hyper needs 3 values".into())),
        }
        let model = Model::from_parts(config, dims, presence, params)?;
        Ok(Checkpoint {
            model,
            adam,
            iteration,
            vocab,
            split_hash: c.text("meta.split_hash")?.to_string(),
            train_config,
            provenance: c.text("meta.provenance")?.to_string(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_container(&Container::from_bytes(bytes)?)
    }

    /// Writes atomically: a temporary file in the same directory is
    /// renamed over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Fails unless the checkpoint was trained with `vocab` and, when
    /// given, `split`.
    pub fn verify(&self, vocab: &Vocab, split: Option<&SplitAssignment>) -> Result<()> {
        if self.vocab.hash() != vocab.hash() {
            return Err(Error::HashMismatch {
                what: "vocabulary",
                expected: self.vocab.hash(),
                found: vocab.hash(),
            });
        }
        if let Some(s) = split {
            if s.hash() != self.split_hash {
                return Err(Error::HashMismatch {
                    what: "split",
                    expected: self.split_hash.clone(),
                    found: s.hash(),
                });
            }
        }
        Ok(())
    }

    /// [`Checkpoint::load`] followed by [`Checkpoint::verify`].
    pub fn load_for(path: impl AsRef<Path>, vocab: &Vocab, split: Option<&SplitAssignment>) -> Result<Self> {
        let c = Self::load(path)?;
        c.verify(vocab, split)?;
        Ok(c)
    }
}

fn single(v: &[u64], name: &str) -> Result<u64> {
    match v {
        &[x] => Ok(x),
        _ => Err(Error::Checkpoint(format!("{name} must hold one value"))),
    }
}

/// Parameter precision stored in a checkpoint file.
pub fn peek_precision(path: impl AsRef<Path>) -> Result<Precision> {
    let c = Container::from_bytes(&fs::read(path)?)?;
    c.text("meta.precision")?.parse()
}
