//! Turning forward-pass node values into label and state predictions.
//!
//! Variants that emit state distributions (`ten`, `ten-y`) predict the
//! state at each turn as that distribution's argmax. Variants that emit
//! only turn labels (`ten-x`, `ten-xh`) take the argmax label per turn and
//! fold the labels into states with the deterministic update rule. All
//! argmax ties break toward the lowest value index.

use alloc::vec::Vec;
use core::fmt;

use crate::dist::{DiscreteDist, DistError};
use crate::model::{DialogueForward, Variant};
use crate::state::{fold_labels, Ontology, SlotId, StateConfig, StateError};
use crate::tape::Tape;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictError {
    /// The forward pass lacks the distribution this variant predicts from.
    MissingDistribution { variant: Variant, slot: usize, turn: usize },
    Dist(DistError),
    State(StateError),
}

impl fmt::Display for PredictError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictError::MissingDistribution { variant, slot, turn } => write!(
                f,
                "variant {variant} produced no distribution to predict from for slot {slot} turn {turn}"
            ),
            PredictError::Dist(e) => write!(f, "{e}"),
            PredictError::State(e) => write!(f, "{e}"),
        }
    }
}

impl From<DistError> for PredictError {
    fn from(e: DistError) -> Self {
        PredictError::Dist(e)
    }
}

impl From<StateError> for PredictError {
    fn from(e: StateError) -> Self {
        PredictError::State(e)
    }
}

/// Numeric distributions for one slot across a dialogue, when the variant
/// produced them.
#[derive(Debug, Clone)]
pub struct SlotTrace {
    /// Per-turn label distributions (absent for `ten-y`).
    pub label_dists: Option<Vec<DiscreteDist>>,
    /// Per-turn state distributions (absent for `ten-x` and `ten-xh`).
    pub state_dists: Option<Vec<DiscreteDist>>,
}

/// Predicted labels and states for a dialogue, plus the raw distributions
/// they were read off from.
#[derive(Debug, Clone)]
pub struct DialoguePrediction {
    /// Per-turn predicted labels (absent for `ten-y`, which has no label
    /// head).
    pub labels: Option<Vec<StateConfig>>,
    /// Per-turn predicted states.
    pub states: Vec<StateConfig>,
    /// Per-slot numeric traces, in slot order.
    pub traces: Vec<SlotTrace>,
}

fn read_dists(
    tape: &Tape,
    forward: &DialogueForward,
    variant: Variant,
    pick_state: bool,
) -> Result<Option<Vec<Vec<DiscreteDist>>>, PredictError> {
    let mut per_slot = Vec::with_capacity(forward.slots.len());
    for (slot_idx, sf) in forward.slots.iter().enumerate() {
        let mut per_turn = Vec::with_capacity(sf.turns.len());
        for (turn_idx, tn) in sf.turns.iter().enumerate() {
            let node = if pick_state { tn.state_dist } else { tn.label_dist };
            match node {
                Some(n) => {
                    let probs = tape.value(n).data().to_vec();
                    per_turn.push(DiscreteDist::new(SlotId(slot_idx), probs)?);
                }
                None => {
                    // A missing distribution is all-or-nothing per variant;
                    // the first absence on the first slot/turn means the
                    // variant simply does not produce this kind.
                    if slot_idx == 0 && turn_idx == 0 {
                        return Ok(None);
                    }
                    return Err(PredictError::MissingDistribution {
                        variant,
                        slot: slot_idx,
                        turn: turn_idx + 1,
                    });
                }
            }
        }
        per_slot.push(per_turn);
    }
    Ok(Some(per_slot))
}

/// Collects per-turn assignments (one value per slot) from per-slot
/// distribution argmaxes.
fn argmax_configs(per_slot: &[Vec<DiscreteDist>]) -> Vec<StateConfig> {
    let n_turns = per_slot.first().map_or(0, Vec::len);
    (0..n_turns)
        .map(|t| {
            StateConfig::from_values(per_slot.iter().map(|dists| dists[t].argmax()).collect())
        })
        .collect()
}

/// Extracts predictions from a completed forward pass.
pub fn predict_dialogue(
    tape: &Tape,
    forward: &DialogueForward,
    variant: Variant,
    ontology: &Ontology,
) -> Result<DialoguePrediction, PredictError> {
    let label_dists = read_dists(tape, forward, variant, false)?;
    let state_dists = read_dists(tape, forward, variant, true)?;

    let labels = label_dists.as_deref().map(argmax_configs);
    let states = match (&state_dists, &labels) {
        (Some(sd), _) => argmax_configs(sd),
        (None, Some(lab)) => fold_labels(ontology, lab)?,
        (None, None) => {
            return Err(PredictError::MissingDistribution { variant, slot: 0, turn: 1 })
        }
    };

    let n_slots = forward.slots.len();
    let mut traces = Vec::with_capacity(n_slots);
    for slot_idx in 0..n_slots {
        traces.push(SlotTrace {
            label_dists: label_dists.as_ref().map(|d| d[slot_idx].clone()),
            state_dists: state_dists.as_ref().map(|d| d[slot_idx].clone()),
        });
    }
    Ok(DialoguePrediction { labels, states, traces })
}
