//! Normalized discrete distributions over a slot's value set 𝒱*(s).

use alloc::vec::Vec;
use core::fmt;

use crate::state::{SlotId, ValueId};

#[derive(Debug, Clone, PartialEq)]
pub enum DistError {
    Empty,
    NegativeMass { index: usize, value: f64 },
    /// Probabilities must sum to 1 within 1e-6 (they are then snapped to
    /// an exact sum of 1 by renormalization).
    NotNormalized { sum: f64 },
    NotFinite { index: usize },
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::Empty => write!(f, "distribution must have at least one outcome"),
            DistError::NegativeMass { index, value } => {
                write!(f, "negative probability {value:e} at index {index}")
            }
            DistError::NotNormalized { sum } => {
                write!(f, "probabilities sum to {sum}, more than 1e-6 away from 1")
            }
            DistError::NotFinite { index } => {
                write!(f, "non-finite probability at index {index}")
            }
        }
    }
}

/// A probability vector tied to a slot; index i is the slot's `ValueId(i)`
/// (so index 0 is `unknown`). Construction renormalizes inputs that are
/// within 1e-6 of summing to 1 and rejects anything farther off, so a
/// value of this type always sums to 1 up to float rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDist {
    slot: SlotId,
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(slot: SlotId, probs: Vec<f64>) -> Result<Self, DistError> {
        if probs.is_empty() {
            return Err(DistError::Empty);
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(DistError::NotFinite { index: i });
            }
            if p < 0.0 {
                return Err(DistError::NegativeMass { index: i, value: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(DistError::NotNormalized { sum });
        }
        let mut probs = probs;
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(DiscreteDist { slot, probs })
    }

    /// All mass on one value.
    pub fn point_mass(slot: SlotId, value: ValueId, len: usize) -> Self {
        let mut probs = alloc::vec![0.0; len];
        probs[value.index()] = 1.0;
        DiscreteDist { slot, probs }
    }

    pub fn uniform(slot: SlotId, len: usize) -> Self {
        DiscreteDist { slot, probs: alloc::vec![1.0 / len as f64; len] }
    }

    pub fn slot(&self) -> SlotId {
        self.slot
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, value: ValueId) -> f64 {
        self.probs[value.index()]
    }

    /// Highest-probability value; ties break toward the lowest index, so
    /// `unknown` wins an exact tie.
    pub fn argmax(&self) -> ValueId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        ValueId(best)
    }

    /// The `k` most probable values, descending; ties break toward the
    /// lower index for a deterministic ordering.
    pub fn top_k(&self, k: usize) -> Vec<(ValueId, f64)> {
        let mut order: Vec<usize> = (0..self.probs.len()).collect();
        order.sort_by(|&a, &b| {
            self.probs[b].partial_cmp(&self.probs[a]).unwrap().then(a.cmp(&b))
        });
        order.truncate(k);
        order.into_iter().map(|i| (ValueId(i), self.probs[i])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn construction_renormalizes_within_tolerance_and_rejects_beyond() {
        let d = DiscreteDist::new(SlotId(0), vec![0.5, 0.5000001]).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            DiscreteDist::new(SlotId(0), vec![0.5, 0.6]),
            Err(DistError::NotNormalized { .. })
        ));
        assert!(matches!(
            DiscreteDist::new(SlotId(0), vec![1.2, -0.2]),
            Err(DistError::NegativeMass { .. })
        ));
        assert!(matches!(DiscreteDist::new(SlotId(0), vec![]), Err(DistError::Empty)));
    }

    #[test]
    fn argmax_breaks_ties_toward_lowest_index() {
        let d = DiscreteDist::new(SlotId(0), vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(d.argmax(), ValueId(0));
        let d = DiscreteDist::new(SlotId(0), vec![0.2, 0.4, 0.4]).unwrap();
        assert_eq!(d.argmax(), ValueId(1));
    }

    #[test]
    fn top_k_is_descending_and_deterministic() {
        let d = DiscreteDist::new(SlotId(0), vec![0.25, 0.25, 0.5]).unwrap();
        let top = d.top_k(3);
        assert_eq!(top[0].0, ValueId(2));
        assert_eq!(top[1].0, ValueId(0)); // tie → lower index first
        assert_eq!(top[2].0, ValueId(1));
    }
}
