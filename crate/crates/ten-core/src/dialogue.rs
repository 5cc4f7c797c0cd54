//! Dialogue data model: turns of (system action, user utterance) with gold
//! states and optional gold turn labels.

use alloc::string::String;
use alloc::vec::Vec;

use crate::state::{derive_turn_labels, fold_labels, Ontology, StateConfig, StateError};

/// One dialogue turn. The system action is a list of phrases (possibly
/// empty — the system may have said nothing actionable); the utterance is
/// the user's tokenized reply and is never empty. `gold_state` is the full
/// dialogue state *after* this turn; `gold_label` is what this turn said
/// per slot, when the corpus provides it.
#[derive(Clone, Debug, PartialEq)]
pub struct Turn {
    pub action: Vec<Vec<String>>,
    pub utterance: Vec<String>,
    pub gold_state: StateConfig,
    pub gold_label: Option<StateConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
    /// True when turn labels were reconstructed from the state sequence
    /// rather than read from the corpus. Trainers that fit turn labels
    /// warn when fitting reconstructed ones.
    pub labels_derived: bool,
}

impl Dialogue {
    pub fn states(&self) -> Vec<StateConfig> {
        self.turns.iter().map(|t| t.gold_state.clone()).collect()
    }

    /// Gold labels if every turn has one, else labels derived from the
    /// state sequence (minimal-change convention).
    pub fn labels(&self, ontology: &Ontology) -> Result<Vec<StateConfig>, StateError> {
        if self.turns.iter().all(|t| t.gold_label.is_some()) {
            return Ok(self.turns.iter().map(|t| t.gold_label.clone().unwrap()).collect());
        }
        derive_turn_labels(ontology, &self.states())
    }

    /// Checks state/label consistency against the ontology: states are
    /// reachable and, where labels are present for all turns, folding them
    /// reproduces the state sequence. Returns the turn number (1-based) of
    /// the first violation.
    pub fn validate(&self, ontology: &Ontology) -> Result<(), DialogueIssue> {
        if self.turns.is_empty() {
            return Err(DialogueIssue { turn: 0, error: StateError::EmptySequence });
        }
        let states = self.states();
        derive_turn_labels(ontology, &states)
            .map_err(|error| DialogueIssue { turn: turn_of(&error), error })?;
        if self.turns.iter().all(|t| t.gold_label.is_some()) {
            let labels: Vec<StateConfig> =
                self.turns.iter().map(|t| t.gold_label.clone().unwrap()).collect();
            let folded = fold_labels(ontology, &labels)
                .map_err(|error| DialogueIssue { turn: 0, error })?;
            for (t, (f, s)) in folded.iter().zip(&states).enumerate() {
                if f != s {
                    return Err(DialogueIssue {
                        turn: t + 1,
                        error: StateError::UnreachableTransition {
                            turn: t + 1,
                            slot: first_mismatch_slot(ontology, f, s),
                        },
                    });
                }
            }
        }
        Ok(())
    }
}

fn turn_of(err: &StateError) -> usize {
    match err {
        StateError::UnreachableTransition { turn, .. } => *turn,
        _ => 0,
    }
}

fn first_mismatch_slot(ontology: &Ontology, a: &StateConfig, b: &StateConfig) -> String {
    use alloc::string::ToString;
    for slot in ontology.slot_ids() {
        if a.get(slot) != b.get(slot) {
            return ontology.slot_name(slot).to_string();
        }
    }
    "?".to_string()
}

/// A validation failure located at a turn (1-based; 0 = whole dialogue).
#[derive(Clone, Debug, PartialEq)]
pub struct DialogueIssue {
    pub turn: usize,
    pub error: StateError,
}

impl core::fmt::Display for DialogueIssue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.turn > 0 {
            write!(f, "turn {}: {}", self.turn, self.error)
        } else {
            write!(f, "{}", self.error)
        }
    }
}
