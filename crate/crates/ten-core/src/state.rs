//! Slot ontology and the state-update calculus.
//!
//! A domain declares slots, each with a finite value set 𝒱(s). Tracking
//! adds a distinguished `unknown` ("nothing said yet"), giving the working
//! set 𝒱*(s) = {unknown} ∪ 𝒱(s) with `unknown` pinned at index 0. A
//! *state* assigns every slot a member of 𝒱*(s); a *turn label* does the
//! same but means "what this turn said about s".
//!
//! States evolve by the overwrite-unless-silent update
//!
//! ```text
//! v ◁ v' = v   if v' = unknown
//!          v'  otherwise
//! ```
//!
//! applied per slot: `x_t = x_{t-1} ◁ y_t`, with x_0 all-unknown. The
//! indicator `g(v', v'', v) = [v' ◁ v'' = v]` is the deterministic factor
//! the chain aggregator marginalizes over; for each (v', v'') exactly one
//! v satisfies it.
//!
//! `dontcare` gets no special treatment here — if the ontology declares
//! it, it is an ordinary member of 𝒱(s).

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Index of a slot within an [`Ontology`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SlotId(pub usize);

impl SlotId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Index of a value within a slot's 𝒱*(s). Index 0 is always `unknown`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ValueId(pub usize);

impl ValueId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The reserved "nothing said" value, index 0 of every slot.
pub const UNKNOWN: ValueId = ValueId(0);

pub const UNKNOWN_NAME: &str = "unknown";

#[derive(Debug, Clone, PartialEq)]
pub enum StateError {
    EmptySlotName,
    DuplicateSlot { name: String },
    EmptyValueName { slot: String },
    DuplicateValue { slot: String, value: String },
    /// `unknown` is implicit; declaring it is a mistake.
    ReservedValue { slot: String },
    UnknownSlot { name: String },
    UnknownValue { slot: String, value: String },
    SlotOutOfRange { index: usize, slots: usize },
    ValueOutOfRange { slot: String, index: usize, values: usize },
    /// State vector length disagrees with the ontology's slot count.
    SlotCountMismatch { expected: usize, got: usize },
    /// A state sequence moved a slot from a set value back to unknown —
    /// no turn label can produce that under the ◁ update.
    UnreachableTransition { turn: usize, slot: String },
    EmptySequence,
}

impl fmt::Display for StateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateError::EmptySlotName => write!(f, "slot name must be nonempty"),
            StateError::DuplicateSlot { name } => write!(f, "duplicate slot '{name}'"),
            StateError::EmptyValueName { slot } => {
                write!(f, "slot '{slot}' has an empty value name")
            }
            StateError::DuplicateValue { slot, value } => {
                write!(f, "slot '{slot}' declares value '{value}' twice")
            }
            StateError::ReservedValue { slot } => {
                write!(f, "slot '{slot}' declares reserved value '{UNKNOWN_NAME}'")
            }
            StateError::UnknownSlot { name } => write!(f, "unknown slot '{name}'"),
            StateError::UnknownValue { slot, value } => {
                write!(f, "unknown value '{value}' for slot '{slot}'")
            }
            StateError::SlotOutOfRange { index, slots } => {
                write!(f, "slot index {index} out of range ({slots} slots)")
            }
            StateError::ValueOutOfRange { slot, index, values } => {
                write!(f, "value index {index} out of range for slot '{slot}' ({values} values)")
            }
            StateError::SlotCountMismatch { expected, got } => {
                write!(f, "state has {got} slots, ontology has {expected}")
            }
            StateError::UnreachableTransition { turn, slot } => {
                write!(
                    f,
                    "turn {turn}: slot '{slot}' moves from a set value back to \
                     '{UNKNOWN_NAME}', which no turn label can produce"
                )
            }
            StateError::EmptySequence => write!(f, "state sequence is empty"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct SlotDef {
    name: String,
    /// 𝒱*(s): `unknown` first, then the declared values in declaration
    /// order.
    star_values: Vec<String>,
}

/// The slot/value schema a corpus and model are built against. Slot order
/// and value order are fixed at construction and significant everywhere
/// (states are index vectors, classifier heads are sized off 𝒱*).
#[derive(Clone, Debug, PartialEq)]
pub struct Ontology {
    slots: Vec<SlotDef>,
}

impl Ontology {
    /// Builds from (slot name, declared values) pairs. Values must not
    /// include `unknown`; it is inserted at index 0 automatically.
    pub fn new(slots: Vec<(String, Vec<String>)>) -> Result<Self, StateError> {
        let mut defs: Vec<SlotDef> = Vec::with_capacity(slots.len());
        for (name, values) in slots {
            if name.is_empty() {
                return Err(StateError::EmptySlotName);
            }
            if defs.iter().any(|d| d.name == name) {
                return Err(StateError::DuplicateSlot { name });
            }
            let mut star_values = vec![UNKNOWN_NAME.to_string()];
            for v in values {
                if v.is_empty() {
                    return Err(StateError::EmptyValueName { slot: name });
                }
                if v == UNKNOWN_NAME {
                    return Err(StateError::ReservedValue { slot: name });
                }
                if star_values.contains(&v) {
                    return Err(StateError::DuplicateValue { slot: name, value: v });
                }
                star_values.push(v);
            }
            defs.push(SlotDef { name, star_values });
        }
        Ok(Ontology { slots: defs })
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_ids(&self) -> impl Iterator<Item = SlotId> {
        (0..self.slots.len()).map(SlotId)
    }

    pub fn slot_name(&self, slot: SlotId) -> &str {
        &self.slots[slot.0].name
    }

    pub fn slot_id(&self, name: &str) -> Result<SlotId, StateError> {
        self.slots
            .iter()
            .position(|d| d.name == name)
            .map(SlotId)
            .ok_or_else(|| StateError::UnknownSlot { name: name.to_string() })
    }

    /// |𝒱*(s)|: declared values plus `unknown`.
    pub fn value_count(&self, slot: SlotId) -> usize {
        self.slots[slot.0].star_values.len()
    }

    /// Declared (real) values of a slot, excluding `unknown`.
    pub fn declared_values(&self, slot: SlotId) -> &[String] {
        &self.slots[slot.0].star_values[1..]
    }

    pub fn value_name(&self, slot: SlotId, value: ValueId) -> &str {
        &self.slots[slot.0].star_values[value.0]
    }

    pub fn value_id(&self, slot: SlotId, name: &str) -> Result<ValueId, StateError> {
        self.slots[slot.0]
            .star_values
            .iter()
            .position(|v| v == name)
            .map(ValueId)
            .ok_or_else(|| StateError::UnknownValue {
                slot: self.slot_name(slot).to_string(),
                value: name.to_string(),
            })
    }

    pub fn check_slot(&self, slot: SlotId) -> Result<(), StateError> {
        if slot.0 >= self.slots.len() {
            return Err(StateError::SlotOutOfRange { index: slot.0, slots: self.slots.len() });
        }
        Ok(())
    }

    pub fn check_value(&self, slot: SlotId, value: ValueId) -> Result<(), StateError> {
        self.check_slot(slot)?;
        let n = self.value_count(slot);
        if value.0 >= n {
            return Err(StateError::ValueOutOfRange {
                slot: self.slot_name(slot).to_string(),
                index: value.0,
                values: n,
            });
        }
        Ok(())
    }
}

/// A total assignment slot → 𝒱*(s), in ontology slot order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateConfig {
    values: Vec<ValueId>,
}

impl StateConfig {
    /// The start state x_0: every slot unknown.
    pub fn all_unknown(ontology: &Ontology) -> Self {
        StateConfig { values: vec![UNKNOWN; ontology.slot_count()] }
    }

    pub fn from_values(values: Vec<ValueId>) -> Self {
        StateConfig { values }
    }

    pub fn get(&self, slot: SlotId) -> ValueId {
        self.values[slot.0]
    }

    pub fn set(&mut self, slot: SlotId, value: ValueId) {
        self.values[slot.0] = value;
    }

    pub fn slot_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[ValueId] {
        &self.values
    }

    pub fn is_all_unknown(&self) -> bool {
        self.values.iter().all(|&v| v == UNKNOWN)
    }

    fn check_against(&self, ontology: &Ontology) -> Result<(), StateError> {
        if self.values.len() != ontology.slot_count() {
            return Err(StateError::SlotCountMismatch {
                expected: ontology.slot_count(),
                got: self.values.len(),
            });
        }
        for (i, &v) in self.values.iter().enumerate() {
            ontology.check_value(SlotId(i), v)?;
        }
        Ok(())
    }
}

/// The scalar update `v ◁ v'`: keep `v` when the turn said nothing (`v'` =
/// unknown), otherwise overwrite with `v'`.
pub fn aggregate_value(
    ontology: &Ontology,
    slot: SlotId,
    v: ValueId,
    v_new: ValueId,
) -> Result<ValueId, StateError> {
    ontology.check_value(slot, v)?;
    ontology.check_value(slot, v_new)?;
    Ok(if v_new == UNKNOWN { v } else { v_new })
}

/// The per-slot state update `x_t = x_{t-1} ◁ y_t`.
pub fn aggregate_state(
    ontology: &Ontology,
    x: &StateConfig,
    y: &StateConfig,
) -> Result<StateConfig, StateError> {
    x.check_against(ontology)?;
    y.check_against(ontology)?;
    let values = x
        .values
        .iter()
        .zip(&y.values)
        .map(|(&xv, &yv)| if yv == UNKNOWN { xv } else { yv })
        .collect();
    Ok(StateConfig::from_values(values))
}

/// The deterministic chain factor: true iff `v_prev ◁ v_label = v_next`.
/// For each (v_prev, v_label) pair exactly one v_next satisfies it.
pub fn indicator_g(
    ontology: &Ontology,
    slot: SlotId,
    v_prev: ValueId,
    v_label: ValueId,
    v_next: ValueId,
) -> Result<bool, StateError> {
    let folded = aggregate_value(ontology, slot, v_prev, v_label)?;
    ontology.check_value(slot, v_next)?;
    Ok(folded == v_next)
}

/// Recovers minimal-change turn labels from a gold state sequence:
/// `y_t(s) = x_t(s)` where the slot changed, else `unknown`. Folding the
/// result from x_0 reproduces the input sequence exactly; a slot moving
/// from a set value back to unknown has no valid label and is rejected.
pub fn derive_turn_labels(
    ontology: &Ontology,
    states: &[StateConfig],
) -> Result<Vec<StateConfig>, StateError> {
    if states.is_empty() {
        return Err(StateError::EmptySequence);
    }
    let mut prev = StateConfig::all_unknown(ontology);
    let mut labels = Vec::with_capacity(states.len());
    for (t, x) in states.iter().enumerate() {
        x.check_against(ontology)?;
        let mut y = StateConfig::all_unknown(ontology);
        for slot in ontology.slot_ids() {
            let (was, now) = (prev.get(slot), x.get(slot));
            if now == was {
                continue; // unchanged ⇒ the turn said nothing about it
            }
            if now == UNKNOWN {
                return Err(StateError::UnreachableTransition {
                    turn: t + 1,
                    slot: ontology.slot_name(slot).to_string(),
                });
            }
            y.set(slot, now);
        }
        prev = x.clone();
        labels.push(y);
    }
    Ok(labels)
}

/// Folds turn labels from x_0 into the state sequence they induce; the
/// inverse direction of [`derive_turn_labels`].
pub fn fold_labels(
    ontology: &Ontology,
    labels: &[StateConfig],
) -> Result<Vec<StateConfig>, StateError> {
    let mut x = StateConfig::all_unknown(ontology);
    let mut states = Vec::with_capacity(labels.len());
    for y in labels {
        x = aggregate_state(ontology, &x, y)?;
        states.push(x.clone());
    }
    Ok(states)
}
