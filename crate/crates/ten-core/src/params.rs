//! Named parameter registry.
//!
//! All trainable tensors live in one flat store, addressed by stable
//! `ParamId` handles and by canonical dotted names ("enc.utt.fwd.w_update",
//! "slot.food.label_w", ...). The names are the checkpoint/warm-start
//! interface: loading maps entries by name with a shape check, leaves
//! absent ones at their seeded init, and reports both directions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }

    /// Ids are dense insertion-order indices into a store.
    pub(crate) fn from_index(i: usize) -> ParamId {
        ParamId(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamError {
    DuplicateName { name: String },
    ShapeMismatch { name: String, expected: String, got: String },
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::DuplicateName { name } => write!(f, "duplicate parameter '{name}'"),
            ParamError::ShapeMismatch { name, expected, got } => {
                write!(f, "parameter '{name}': shape {got} does not match expected {expected}")
            }
        }
    }
}

struct Entry {
    name: String,
    tensor: Tensor,
}

#[derive(Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, usize>,
}

impl fmt::Debug for ParamStore {
    /// Shapes only — tensors are far too large to dump.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for e in &self.entries {
            map.entry(&e.name, &e.tensor.shape_string());
        }
        map.finish()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<ParamId, ParamError> {
        if self.by_name.contains_key(name) {
            return Err(ParamError::DuplicateName { name: name.to_string() });
        }
        let id = self.entries.len();
        self.by_name.insert(name.to_string(), id);
        self.entries.push(Entry { name: name.to_string(), tensor });
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    /// Entries in insertion (canonical) order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (ParamId(i), e.name.as_str(), &e.tensor))
    }

    /// Deep copy of every entry as (name, tensor) pairs — checkpoint feed.
    pub fn snapshot(&self, ids: impl IntoIterator<Item = ParamId>) -> Vec<(String, Tensor)> {
        ids.into_iter()
            .map(|id| (self.entries[id.0].name.clone(), self.entries[id.0].tensor.clone()))
            .collect()
    }

    /// Overwrites entries by name. Shape mismatches are hard errors (the
    /// usual cause: a checkpoint from a different ontology or vocabulary).
    /// Returns which incoming names matched, which were ignored (no such
    /// parameter here), and which of this store's entries were left at
    /// their current values.
    pub fn apply_named(&mut self, incoming: &[(String, Tensor)]) -> Result<ApplyReport, ParamError> {
        let mut applied = Vec::new();
        let mut ignored = Vec::new();
        for (name, tensor) in incoming {
            match self.by_name.get(name) {
                Some(&i) => {
                    let current = &mut self.entries[i];
                    if current.tensor.dims() != tensor.dims() {
                        return Err(ParamError::ShapeMismatch {
                            name: name.clone(),
                            expected: current.tensor.shape_string(),
                            got: tensor.shape_string(),
                        });
                    }
                    current.tensor = tensor.clone();
                    applied.push(name.clone());
                }
                None => ignored.push(name.clone()),
            }
        }
        let untouched = self
            .entries
            .iter()
            .map(|e| e.name.clone())
            .filter(|n| !applied.contains(n))
            .collect();
        Ok(ApplyReport { applied, ignored, untouched })
    }
}

/// Outcome of a named bulk load; see [`ParamStore::apply_named`].
#[derive(Debug, Clone, PartialEq)]
pub struct ApplyReport {
    pub applied: Vec<String>,
    pub ignored: Vec<String>,
    pub untouched: Vec<String>,
}

/// Weight initialization: every element uniform in ±0.08.
pub fn init_uniform(rng: &mut ChaCha20Rng, dims: &[usize]) -> Tensor {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-0.08..0.08)).collect();
    Tensor::from_parts(dims.to_vec(), data)
}

/// Human-readable summary of an apply report for warning logs.
pub fn describe_apply(report: &ApplyReport) -> Option<String> {
    if report.ignored.is_empty() && report.untouched.is_empty() {
        return None;
    }
    let mut s = String::new();
    if !report.untouched.is_empty() {
        s.push_str(&format!(
            "{} parameter(s) absent from checkpoint kept their fresh init: {}",
            report.untouched.len(),
            report.untouched.join(", ")
        ));
    }
    if !report.ignored.is_empty() {
        if !s.is_empty() {
            s.push_str("; ");
        }
        s.push_str(&format!(
            "{} checkpoint entr(ies) have no matching parameter and were ignored: {}",
            report.ignored.len(),
            report.ignored.join(", ")
        ));
    }
    Some(s)
}
