use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// How a tensor is filled by [`ParamStore::initialize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Init {
    Zeros,
    /// Uniform in `±gain * sqrt(3 / fan_in)`.
    KaimingUniform { fan_in: usize, gain: f64 },
}

/// Gain of a LeakyReLU with the given negative slope.
pub fn leaky_gain(slope: f64) -> f64 {
    (2.0 / (1.0 + slope * slope)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub group: String,
    pub init: Init,
    pub value: Tensor,
}

/// Named parameter tensors grouped by owning network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a zero-filled tensor. Names must be unique.
    pub fn register(&mut self, name: impl Into<String>, group: &str, rows: usize, cols: usize, init: Init) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter `{name}`");
        let id = self.entries.len();
        self.index.insert(name.clone(), id);
        self.entries.push(ParamEntry {
            name,
            group: group.to_string(),
            init,
            value: Tensor::zeros(rows, cols),
        });
        ParamId(id)
    }

    /// Fills every tensor from its init rule. Each tensor draws from its own
    /// stream keyed by `(seed, name)`, so the result depends only on the seed
    /// and the shape registry.
    pub fn initialize(&mut self, seed: u64) {
        for e in &mut self.entries {
            match e.init {
                Init::Zeros => e.value.data.iter_mut().for_each(|x| *x = 0.0),
                Init::KaimingUniform { fan_in, gain } => {
                    let bound = gain * (3.0 / fan_in.max(1) as f64).sqrt();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(e.name.as_bytes()));
                    for x in &mut e.value.data {
                        *x = rng.random_range(-bound..bound);
                    }
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn group_ids(&self, group: &str) -> Vec<ParamId> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.group == group)
            .map(|(i, _)| ParamId(i))
            .collect()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn num_scalars_in(&self, group: &str) -> usize {
        self.entries.iter().filter(|e| e.group == group).map(|e| e.value.len()).sum()
    }

    /// Copies of every tensor in `group`, by name.
    pub fn export_group(&self, group: &str) -> Vec<(String, Tensor)> {
        self.entries
            .iter()
            .filter(|e| e.group == group)
            .map(|e| (e.name.clone(), e.value.clone()))
            .collect()
    }

    /// Overwrites tensors by name; shapes must match the registry.
    pub fn import(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        for (name, t) in tensors {
            let id = self
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown parameter `{name}`")))?;
            let slot = self.get_mut(id);
            if slot.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for `{name}`: registry {:?}, file {:?}",
                    slot.shape(),
                    t.shape()
                )));
            }
            slot.data.copy_from_slice(&t.data);
        }
        Ok(())
    }
}

/// Per-parameter gradient accumulator aligned with a [`ParamStore`].
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn new(store: &ParamStore) -> Self {
        Gradients { slots: vec![None; store.len()] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.slots.get(id.0).and_then(Option::as_ref)
    }

    /// Dense gradient; unreachable parameters read as zero.
    pub fn dense(&self, store: &ParamStore, id: ParamId) -> Tensor {
        match self.get(id) {
            Some(t) => t.clone(),
            None => {
                let (r, c) = store.get(id).shape();
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Tensor) {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
        match &mut self.slots[id.0] {
            Some(t) => t.add_assign(g),
            slot @ None => *slot = Some(g.clone()),
        }
    }

    pub fn merge(&mut self, other: &Gradients) {
        for (i, g) in other.slots.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.slots.iter_mut().flatten() {
            t.scale(s);
        }
    }

    pub fn touched(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.slots.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(i, _)| ParamId(i))
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
