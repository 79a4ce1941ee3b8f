use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::{Real, Rng, Tensor};

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Ordered, uniquely named parameter tensors.
#[derive(Debug)]
pub struct ParamStore<T> {
    id: u64,
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Clone> Clone for ParamStore<T> {
    /// A clone is a distinct store: graphs bound to the original do not
    /// write gradients into it.
    fn clone(&self) -> Self {
        Self {
            id: next_id(),
            entries: self.entries.clone(),
            index: self.index.clone(),
        }
    }
}

impl<T: Real> PartialEq for ParamStore<T> {
    fn eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((na, ta), (nb, tb))| na == nb && ta.shape() == tb.shape() && ta.data() == tb.data())
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            id: next_id(),
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub(crate) fn id(&self) -> u64 {
        self.id
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name `{name}`")));
        }
        let i = self.entries.len();
        self.index.insert(name.clone(), i);
        self.entries.push((name, tensor));
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index_of(name).map(|i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.index_of(name).map(move |i| &mut self.entries[i].1)
    }

    pub fn tensor(&self, i: usize) -> &Tensor<T> {
        &self.entries[i].1
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.entries[i].1
    }

    pub fn name(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn clear_grads(&mut self) {
        self.entries.iter_mut().for_each(|(_, t)| t.clear_grad());
    }

    /// SHA-256 over names, shapes and values, in order.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (name, t) in &self.entries {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            for &d in t.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.as_f64().to_le_bytes());
            }
        }
        h.finalize().into()
    }

    /// Converts every tensor to another precision.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for (name, t) in &self.entries {
            out.insert(name.clone(), t.cast()).expect("names already unique");
        }
        out
    }
}

/// Tensor of i.i.d. normal draws.
pub fn gaussian_init<T: Real>(shape: &[usize], mean: f64, std: f64, rng: &mut Rng) -> Result<Tensor<T>> {
    if !mean.is_finite() || !std.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gaussian_init needs finite parameters, got mean={mean} std={std}"
        )));
    }
    if std < 0.0 {
        return Err(Error::InvalidArgument(format!("negative std {std}")));
    }
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| T::of(mean + std * rng.normal())).collect();
    Tensor::new(shape, data)
}

/// Plain gradient descent: `p <- p - lr * grad(p)` for every parameter.
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, lr: f64) -> Result<()> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::InvalidArgument(format!("learning rate {lr}")));
    }
    if let Some((name, _)) = params.entries.iter().find(|(_, t)| t.grad().is_none()) {
        return Err(Error::MissingGrad(name.clone()));
    }
    let lr = T::of(lr);
    for (name, t) in params.entries.iter_mut() {
        let grad = t.grad().expect("checked above").to_vec();
        for (p, g) in t.data_mut().iter_mut().zip(grad) {
            *p = *p - lr * g;
        }
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("parameter `{name}` after sgd step")));
        }
    }
    Ok(())
}
