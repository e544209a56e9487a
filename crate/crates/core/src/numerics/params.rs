use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone)]
pub struct Slot {
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named trainable tensors with gradient buffers of identical shape.
///
/// Iteration is lexicographic by path.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    slots: BTreeMap<String, Slot>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, value: Tensor) -> Result<()> {
        let path = path.into();
        if self.slots.contains_key(&path) {
            return Err(Error::Contract(format!(
                "parameter {path} registered twice"
            )));
        }
        let grad = Tensor::zeros(value.shape());
        self.slots.insert(path, Slot { value, grad });
        Ok(())
    }

    pub fn get(&self, path: &str) -> Result<&Tensor> {
        self.slots
            .get(path)
            .map(|s| &s.value)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {path}")))
    }

    pub fn get_mut(&mut self, path: &str) -> Result<&mut Tensor> {
        self.slots
            .get_mut(path)
            .map(|s| &mut s.value)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {path}")))
    }

    pub fn grad(&self, path: &str) -> Result<&Tensor> {
        self.slots
            .get(path)
            .map(|s| &s.grad)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {path}")))
    }

    pub(crate) fn grad_mut(&mut self, path: &str) -> Option<&mut Tensor> {
        self.slots.get_mut(path).map(|s| &mut s.grad)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.slots.contains_key(path)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.slots.values().map(|s| s.value.len()).sum()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Slot)> {
        self.slots.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Slot)> {
        self.slots.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn zero_grad(&mut self) {
        for slot in self.slots.values_mut() {
            slot.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Copies every value from `other`, which must hold the same slots.
    pub fn copy_values_from(&mut self, other: &ParameterStore) -> Result<()> {
        for (path, slot) in &mut self.slots {
            let src = other.get(path)?;
            if src.shape() != slot.value.shape() {
                return Err(Error::dim(
                    "copy_values_from",
                    slot.value.shape(),
                    src.shape(),
                ));
            }
            slot.value = src.clone();
        }
        Ok(())
    }
}
