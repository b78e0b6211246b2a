use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numeric::{Array, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamFlags {
    pub trainable: bool,
    /// Excluded from the global decoupled weight decay.
    pub decay_exempt: bool,
    /// Per-entry decay rate used instead of the global one.
    pub decay_override: Option<f64>,
}

impl Default for ParamFlags {
    fn default() -> Self {
        ParamFlags {
            trainable: true,
            decay_exempt: false,
            decay_override: None,
        }
    }
}

impl ParamFlags {
    pub fn exempt() -> Self {
        ParamFlags {
            decay_exempt: true,
            ..Default::default()
        }
    }

    pub fn decay(rate: f64) -> Self {
        ParamFlags {
            decay_override: Some(rate),
            ..Default::default()
        }
    }

    /// Effective decay rate given the optimizer's global rate.
    pub fn decay_rate(&self, global: f64) -> f64 {
        match self.decay_override {
            Some(r) => r,
            None if self.decay_exempt => 0.0,
            None => global,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamEntry<T> {
    pub name: String,
    pub value: Array<T>,
    pub grad: Array<T>,
    pub flags: ParamFlags,
}

/// Named trainable arrays with matching gradient buffers.
#[derive(Debug, Clone, Default)]
pub struct ParamSet<T> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: Array<T>, flags: ParamFlags) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::invalid(format!("duplicate parameter name {name:?}")));
        }
        let id = self.entries.len();
        let grad = Array::zeros(value.shape());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            grad,
            flags,
        });
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar coordinates.
    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn entry_mut(&mut self, id: ParamId) -> &mut ParamEntry<T> {
        &mut self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array<T> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array<T> {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Array<T> {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Array<T> {
        &mut self.entries[id.0].grad
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry<T>)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(T::zero());
        }
    }

    /// Global L2 norm over the gradients of trainable entries.
    pub fn grad_norm(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.flags.trainable)
            .map(|e| e.grad.data().iter().map(|g| g.as_f64().powi(2)).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    value: e.value.cast(),
                    grad: e.grad.cast(),
                    flags: e.flags,
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Copies values from `other`, which must have identical names and shapes.
    pub fn copy_values_from(&mut self, other: &ParamSet<T>) -> Result<()> {
        if other.entries.len() != self.entries.len() {
            return Err(Error::invalid("parameter sets differ in size"));
        }
        for (dst, src) in self.entries.iter_mut().zip(&other.entries) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(Error::invalid(format!(
                    "parameter {} does not match {}",
                    dst.name, src.name
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }
}
