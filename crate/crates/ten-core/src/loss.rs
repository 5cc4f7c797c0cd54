//! Per-dialogue training objectives.
//!
//! Every variant minimizes a negative log-likelihood summed over slots and
//! turns; they differ only in which distribution is scored against which
//! gold index:
//!
//! * `ten`    — the chained state marginal against the gold state;
//! * `ten-x`  — the turn-label distribution against the gold turn label;
//! * `ten-y`  — the direct state distribution against the gold state;
//! * `ten-xh` — the history-free label distribution against the gold label.
//!
//! Picked probabilities are floored at `PROB_FLOOR` before the log so a
//! confidently wrong model yields a large-but-finite loss; the number of
//! floored terms is reported so callers can surface it as a warning.

use core::fmt;

use crate::dialogue::Dialogue;
use crate::model::{DialogueForward, ModelError, Variant};
use crate::state::{Ontology, StateError};
use crate::tape::{NodeId, Tape, TapeError};

/// Probabilities are clamped to at least this before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    /// The forward pass did not produce the distribution this variant
    /// trains on (an internal wiring bug, not a data problem).
    MissingDistribution { variant: Variant, slot: usize, turn: usize },
    /// Slot/turn structure of the forward pass does not match the dialogue.
    StructureMismatch { detail: &'static str },
    State(StateError),
    Tape(TapeError),
    Model(ModelError),
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::MissingDistribution { variant, slot, turn } => write!(
                f,
                "variant {variant} produced no trainable distribution for slot {slot} turn {turn}"
            ),
            LossError::StructureMismatch { detail } => {
                write!(f, "forward output does not match dialogue: {detail}")
            }
            LossError::State(e) => write!(f, "{e}"),
            LossError::Tape(e) => write!(f, "{e}"),
            LossError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<StateError> for LossError {
    fn from(e: StateError) -> Self {
        LossError::State(e)
    }
}

impl From<TapeError> for LossError {
    fn from(e: TapeError) -> Self {
        LossError::Tape(e)
    }
}

impl From<ModelError> for LossError {
    fn from(e: ModelError) -> Self {
        LossError::Model(e)
    }
}

/// A scalar loss node plus bookkeeping about how it was assembled.
#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    /// Scalar node: the summed negative log-likelihood.
    pub loss: NodeId,
    /// Number of log-likelihood terms (slots x turns).
    pub terms: usize,
    /// How many terms had their probability floored at `PROB_FLOOR`.
    pub clamped: usize,
}

/// Builds the variant's training loss for one dialogue on the tape that
/// already holds its forward pass.
pub fn dialogue_loss(
    tape: &mut Tape,
    forward: &DialogueForward,
    variant: Variant,
    dialogue: &Dialogue,
    ontology: &Ontology,
) -> Result<LossBreakdown, LossError> {
    let n_turns = dialogue.turns.len();
    if forward.slots.len() != ontology.slot_count() {
        return Err(LossError::StructureMismatch { detail: "slot count differs" });
    }
    // Gold index per (slot, turn) depends on what the variant trains on.
    let targets: alloc::vec::Vec<crate::state::StateConfig> = match variant {
        Variant::Ten | Variant::TenY => dialogue.states(),
        Variant::TenX | Variant::TenXh => dialogue.labels(ontology)?,
    };
    let mut terms = alloc::vec::Vec::with_capacity(forward.slots.len() * n_turns);
    let mut clamped = 0usize;
    for (slot_idx, slot_forward) in forward.slots.iter().enumerate() {
        if slot_forward.turns.len() != n_turns {
            return Err(LossError::StructureMismatch { detail: "turn count differs" });
        }
        let slot = crate::state::SlotId(slot_idx);
        for (turn_idx, turn_nodes) in slot_forward.turns.iter().enumerate() {
            let dist = match variant {
                Variant::Ten | Variant::TenY => turn_nodes.state_dist,
                Variant::TenX | Variant::TenXh => turn_nodes.label_dist,
            }
            .ok_or(LossError::MissingDistribution {
                variant,
                slot: slot_idx,
                turn: turn_idx + 1,
            })?;
            let gold = targets[turn_idx].get(slot);
            let p = tape.pick(dist, gold.0)?;
            if tape.value(p).as_scalar() <= PROB_FLOOR {
                clamped += 1;
            }
            let floored = tape.max_const(p, PROB_FLOOR);
            terms.push(tape.log(floored));
        }
    }
    let stacked = tape.concat(&terms)?;
    let total = tape.sum(stacked);
    let loss = tape.affine(total, -1.0, 0.0);
    Ok(LossBreakdown { loss, terms: terms.len(), clamped })
}
