//! Deterministic synthetic dialogue corpus generator.
//!
//! Each dialogue samples one goal value per slot and conveys the goals
//! through a small set of turn regimes, chosen so the resulting corpora can
//! separate the model variants:
//!
//! * **inform** — the user states the goal value verbatim; the turn's
//!   surface alone determines its label, so even the history-free variant
//!   can learn these. With probability `p_inform` the inform is
//!   user-initiated (no system action); otherwise the system requests the
//!   slot first.
//! * **ambiguous confirm** (rate `p_confirm` per real-valued slot) — the
//!   system proposes the goal value and the user answers `mhm`, which means
//!   *yes* with probability [`CONFIRM_YES`], below one half. The surface is
//!   identical either way, so per-turn evidence stays sub-majority; only
//!   accumulating several independent confirms pushes the state's posterior
//!   past one half. A tracker that aggregates soft per-turn distributions
//!   recovers that posterior, while hard-folding per-turn argmax labels
//!   stays at `unknown` until an explicit inform. The number of confirm
//!   turns is scheduled before any yes/no is drawn, so the schedule leaks
//!   nothing about the answers.
//! * **stall then generic re-ask** (rate [`STALL_SPLIT`] among `dontcare`
//!   slots) — the system asks for a slot, the user stalls, the system
//!   re-asks *without naming the slot*, and the user answers with a
//!   `dontcare` utterance. The re-ask turn's surface does not identify the
//!   slot, so a history-free model cannot label it; a recurrent one can.
//! * **noise** (rate `p_noise` per user utterance) — distractor tokens
//!   spliced into the utterance without changing its label.
//! * **silent** (rate `p_silent`) — filler turns that change nothing.
//!
//! Every utterance that sets a value contains that value's token verbatim
//! (`dontcare` included), so with `p_confirm = 0` each turn is labelable
//! from its own surface alone — except stall re-asks, which need one turn
//! of memory. Everything is drawn from one seeded stream, so equal configs
//! produce identical corpora.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dialogue::{Dialogue, Turn};
use crate::state::{aggregate_state, Ontology, SlotId, StateConfig, StateError, ValueId};

/// Probability that an ambiguous `mhm` answer means *yes*. Kept below one
/// half on purpose: a single confirm should not flip an argmax decision,
/// several independent ones should.
pub const CONFIRM_YES: f64 = 0.4;

/// Per-slot probability that the sampled goal is `dontcare`.
pub const DONTCARE_WEIGHT: f64 = 0.25;

/// Among `dontcare` slots, probability of the stall + generic re-ask form.
pub const STALL_SPLIT: f64 = 0.3;

/// Confirm turns per confirm event are drawn uniformly from
/// `1..=MAX_CONFIRMS`.
pub const MAX_CONFIRMS: usize = 3;

/// Declared value name used for "the user does not care".
pub const DONTCARE: &str = "dontcare";

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    /// A probability field is outside `[0, 1]`.
    BadProbability { field: &'static str, got: f64 },
    BadTurnRange { min: usize, max: usize },
    /// The generator needs every slot to declare a `dontcare` value.
    MissingDontcare { slot: String },
    /// A slot declares no value besides `dontcare`.
    NoRealValues { slot: String },
    /// Even the cheapest realization of every slot needs more turns than
    /// `max_turns` allows.
    Infeasible { needed: usize, max: usize },
    State(StateError),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::BadProbability { field, got } => {
                write!(f, "{field} must lie in [0, 1], got {got}")
            }
            SynthError::BadTurnRange { min, max } => {
                write!(f, "turn range is empty: min_turns {min} > max_turns {max}")
            }
            SynthError::MissingDontcare { slot } => {
                write!(f, "slot {slot:?} does not declare a {DONTCARE:?} value")
            }
            SynthError::NoRealValues { slot } => {
                write!(f, "slot {slot:?} declares no value besides {DONTCARE:?}")
            }
            SynthError::Infeasible { needed, max } => write!(
                f,
                "filling every slot needs at least {needed} turns but max_turns is {max}"
            ),
            SynthError::State(e) => write!(f, "{e}"),
        }
    }
}

impl From<StateError> for SynthError {
    fn from(e: StateError) -> Self {
        SynthError::State(e)
    }
}

/// Generator knobs. The four rates control turn behavior; see the module
/// docs for what each regime looks like.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_dialogues: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    /// Probability an inform turn is user-initiated (no system request).
    pub p_inform: f64,
    /// Per real-valued slot, probability it is conveyed via an ambiguous
    /// confirm sequence instead of a direct inform.
    pub p_confirm: f64,
    /// Per user utterance, probability of splicing in distractor tokens.
    pub p_noise: f64,
    /// Probability of inserting a filler turn before each event turn.
    pub p_silent: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_dialogues: 500,
            min_turns: 3,
            max_turns: 8,
            p_inform: 0.85,
            p_confirm: 0.0,
            p_noise: 0.0,
            p_silent: 0.15,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (field, v) in [
            ("p_inform", self.p_inform),
            ("p_confirm", self.p_confirm),
            ("p_noise", self.p_noise),
            ("p_silent", self.p_silent),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(SynthError::BadProbability { field, got: v });
            }
        }
        if self.min_turns == 0 || self.min_turns > self.max_turns {
            return Err(SynthError::BadTurnRange { min: self.min_turns, max: self.max_turns });
        }
        Ok(())
    }
}

/// The restaurant-domain ontology the generator targets by default: three
/// slots with 5, 4, and 3 real values, each also declaring `dontcare`.
/// Value tokens are single words unique to their slot, so inform utterances
/// are unambiguous.
pub fn default_ontology() -> Ontology {
    let slot = |name: &str, values: &[&str]| {
        let mut vs: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        vs.push(DONTCARE.to_string());
        (name.to_string(), vs)
    };
    Ontology::new(alloc::vec![
        slot("food", &["italian", "chinese", "thai", "indian", "mexican"]),
        slot("area", &["north", "south", "east", "west"]),
        slot("pricerange", &["cheap", "moderate", "expensive"]),
    ])
    .expect("built-in ontology is well-formed")
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|w| w.to_string()).collect()
}

const STALL_UTTERANCES: &[&[&str]] = &[&["hmm", "let", "me", "think"], &["one", "moment"]];
const DONTCARE_UTTERANCES: &[&[&str]] =
    &[&["dontcare"], &["dontcare", "is", "fine"], &["really", "dontcare"]];
const SILENT_UTTERANCES: &[&[&str]] = &[&["thanks"], &["ok", "great"], &["hello", "there"]];
const DISTRACTORS: &[&str] = &["um", "well", "you", "know", "sort", "of"];

fn inform_utterance(rng: &mut ChaCha20Rng, slot_name: &str, value: &str) -> Vec<String> {
    let mut u = match (slot_name, rng.gen_range(0..3u8)) {
        ("food", 0) => words(&["i", "want"]),
        ("food", 1) => words(&["lets", "eat"]),
        ("food", _) => words(&["serve", "me"]),
        ("area", 0) => words(&["somewhere", "in", "the"]),
        ("area", 1) => words(&["the", "town"]),
        ("area", _) => words(&["go"]),
        (_, 0) => words(&["something"]),
        (_, 1) => words(&["make", "it"]),
        (_, _) => words(&["keep", "it"]),
    };
    u.push(value.to_string());
    match slot_name {
        "food" => u.push("food".to_string()),
        "area" => u.push("side".to_string()),
        _ => u.push("priced".to_string()),
    }
    u
}

fn add_noise(rng: &mut ChaCha20Rng, utterance: &mut Vec<String>, p_noise: f64) {
    if p_noise > 0.0 && rng.gen_bool(p_noise) {
        for _ in 0..rng.gen_range(1..=2usize) {
            let tok = DISTRACTORS[rng.gen_range(0..DISTRACTORS.len())].to_string();
            let pos = rng.gen_range(0..=utterance.len());
            utterance.insert(pos, tok);
        }
    }
}

fn pick<'a>(rng: &mut ChaCha20Rng, options: &[&'a [&'a str]]) -> Vec<String> {
    words(options[rng.gen_range(0..options.len())])
}

/// How one slot's goal value gets conveyed.
enum SlotEvent {
    Inform,
    Confirm { turns: usize },
    DontcareDirect,
    DontcareStall,
}

struct PendingTurn {
    action: Vec<Vec<String>>,
    utterance: Vec<String>,
    /// Per-slot turn label (what this turn changes).
    label: StateConfig,
}

fn silent_turn(rng: &mut ChaCha20Rng, ontology: &Ontology) -> PendingTurn {
    PendingTurn {
        action: Vec::new(),
        utterance: pick(rng, SILENT_UTTERANCES),
        label: StateConfig::all_unknown(ontology),
    }
}

fn generate_dialogue(
    rng: &mut ChaCha20Rng,
    ontology: &Ontology,
    config: &SynthConfig,
    id: String,
) -> Result<Dialogue, SynthError> {
    let n_slots = ontology.slot_count();
    // Per-slot dontcare ids, required up front.
    let mut dontcare_ids: Vec<ValueId> = Vec::with_capacity(n_slots);
    for slot in ontology.slot_ids() {
        match ontology.value_id(slot, DONTCARE) {
            Ok(v) => dontcare_ids.push(v),
            Err(_) => {
                return Err(SynthError::MissingDontcare {
                    slot: ontology.slot_name(slot).to_string(),
                })
            }
        }
    }
    // Goal: one target value per slot.
    let mut goals: Vec<ValueId> = Vec::with_capacity(n_slots);
    for slot in ontology.slot_ids() {
        let dontcare = dontcare_ids[slot.0];
        let goal = if rng.gen_bool(DONTCARE_WEIGHT) {
            dontcare
        } else {
            let real: Vec<ValueId> = (1..ontology.value_count(slot))
                .map(ValueId)
                .filter(|&v| v != dontcare)
                .collect();
            if real.is_empty() {
                return Err(SynthError::NoRealValues {
                    slot: ontology.slot_name(slot).to_string(),
                });
            }
            real[rng.gen_range(0..real.len())]
        };
        goals.push(goal);
    }

    // Decide each slot's event form.
    let mut order: Vec<usize> = (0..n_slots).collect();
    order.shuffle(rng);
    let mut events: Vec<SlotEvent> = Vec::with_capacity(n_slots);
    for &slot_idx in &order {
        let event = if goals[slot_idx] == dontcare_ids[slot_idx] {
            if rng.gen_bool(STALL_SPLIT) {
                SlotEvent::DontcareStall
            } else {
                SlotEvent::DontcareDirect
            }
        } else if rng.gen_bool(config.p_confirm) {
            SlotEvent::Confirm { turns: rng.gen_range(1..=MAX_CONFIRMS) }
        } else {
            SlotEvent::Inform
        };
        events.push(event);
    }

    // Any realization needs at least one turn per slot.
    if n_slots > config.max_turns {
        return Err(SynthError::Infeasible { needed: n_slots, max: config.max_turns });
    }
    // Degrade expensive events (in schedule order) until the worst case
    // fits within max_turns.
    let budget = |events: &[SlotEvent]| -> usize {
        events
            .iter()
            .map(|e| match e {
                SlotEvent::Inform | SlotEvent::DontcareDirect => 1,
                SlotEvent::DontcareStall => 2,
                // every confirm turn, plus a possible trailing inform
                SlotEvent::Confirm { turns } => turns + 1,
            })
            .sum()
    };
    while budget(&events) > config.max_turns {
        let expensive = events.iter_mut().find(|e| {
            matches!(e, SlotEvent::Confirm { .. } | SlotEvent::DontcareStall)
        });
        match expensive {
            Some(e @ SlotEvent::Confirm { .. }) => *e = SlotEvent::Inform,
            Some(e @ SlotEvent::DontcareStall) => *e = SlotEvent::DontcareDirect,
            _ => unreachable!("budget exceeds max_turns only via expensive events"),
        }
    }

    // Realize events into turns.
    let mut pending: Vec<PendingTurn> = Vec::new();
    for (&slot_idx, event) in order.iter().zip(&events) {
        let slot = SlotId(slot_idx);
        let slot_name = ontology.slot_name(slot).to_string();
        let goal = goals[slot_idx];
        let goal_name = ontology.value_name(slot, goal).to_string();
        let request_action = alloc::vec![words(&["request", &slot_name])];
        let label_for = |value: ValueId| {
            let mut l = StateConfig::all_unknown(ontology);
            l.set(slot, value);
            l
        };
        match event {
            SlotEvent::Inform => {
                let action =
                    if rng.gen_bool(config.p_inform) { Vec::new() } else { request_action };
                let mut utterance = inform_utterance(rng, &slot_name, &goal_name);
                add_noise(rng, &mut utterance, config.p_noise);
                pending.push(PendingTurn { action, utterance, label: label_for(goal) });
            }
            SlotEvent::DontcareDirect => {
                let mut utterance = pick(rng, DONTCARE_UTTERANCES);
                add_noise(rng, &mut utterance, config.p_noise);
                pending.push(PendingTurn {
                    action: request_action,
                    utterance,
                    label: label_for(goal),
                });
            }
            SlotEvent::DontcareStall => {
                let mut stall = pick(rng, STALL_UTTERANCES);
                add_noise(rng, &mut stall, config.p_noise);
                pending.push(PendingTurn {
                    action: request_action,
                    utterance: stall,
                    label: StateConfig::all_unknown(ontology),
                });
                let mut answer = pick(rng, DONTCARE_UTTERANCES);
                add_noise(rng, &mut answer, config.p_noise);
                pending.push(PendingTurn {
                    action: alloc::vec![words(&["please", "specify"])],
                    utterance: answer,
                    label: label_for(goal),
                });
            }
            SlotEvent::Confirm { turns } => {
                let mut settled = false;
                for _ in 0..*turns {
                    let yes = rng.gen_bool(CONFIRM_YES);
                    settled = settled || yes;
                    pending.push(PendingTurn {
                        action: alloc::vec![words(&["confirm", &slot_name, &goal_name])],
                        utterance: words(&["mhm"]),
                        label: if yes {
                            label_for(goal)
                        } else {
                            StateConfig::all_unknown(ontology)
                        },
                    });
                }
                if !settled {
                    let mut utterance = inform_utterance(rng, &slot_name, &goal_name);
                    add_noise(rng, &mut utterance, config.p_noise);
                    pending.push(PendingTurn {
                        action: Vec::new(),
                        utterance,
                        label: label_for(goal),
                    });
                }
            }
        }
    }

    // Filler turns: maybe one before each event turn, then pad the tail up
    // to min_turns, never exceeding max_turns.
    let mut turns_rev: Vec<PendingTurn> = Vec::new();
    let mut room = config.max_turns - pending.len();
    for t in pending.into_iter().rev() {
        turns_rev.push(t);
        if room > 0 && rng.gen_bool(config.p_silent) {
            turns_rev.push(silent_turn(rng, ontology));
            room -= 1;
        }
    }
    let mut all_turns: Vec<PendingTurn> = turns_rev.into_iter().rev().collect();
    while all_turns.len() < config.min_turns {
        all_turns.push(silent_turn(rng, ontology));
    }

    // Fold labels into gold states.
    let mut x = StateConfig::all_unknown(ontology);
    let mut turns = Vec::with_capacity(all_turns.len());
    for t in all_turns {
        x = aggregate_state(ontology, &x, &t.label)?;
        turns.push(Turn {
            action: t.action,
            utterance: t.utterance,
            gold_state: x.clone(),
            gold_label: Some(t.label),
        });
    }
    Ok(Dialogue { id, turns, labels_derived: false })
}

/// Generates a corpus. Equal `(config, ontology)` pairs yield identical
/// corpora; `n_dialogues = 0` yields an empty corpus.
pub fn generate_corpus(
    ontology: &Ontology,
    config: &SynthConfig,
) -> Result<Vec<Dialogue>, SynthError> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut dialogues = Vec::with_capacity(config.n_dialogues);
    for i in 0..config.n_dialogues {
        let id = alloc::format!("syn-{i:05}");
        dialogues.push(generate_dialogue(&mut rng, ontology, config, id)?);
    }
    Ok(dialogues)
}

/// A deterministic 60/20/20 split by position.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Dialogue>,
    pub dev: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
}

pub fn split_corpus(mut dialogues: Vec<Dialogue>) -> CorpusSplit {
    let n = dialogues.len();
    let n_train = n * 6 / 10;
    let n_dev = n * 2 / 10;
    let rest = dialogues.split_off(n_train);
    let mut rest = rest;
    let test = rest.split_off(n_dev.min(rest.len()));
    CorpusSplit { train: dialogues, dev: rest, test }
}
