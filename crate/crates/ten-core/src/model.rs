//! Model family: shared encoder trunk plus four output wirings.
//!
//! Every variant reads each turn the same way: token embeddings feed two
//! bidirectional recurrent encoders — one for the user utterance, one for
//! the system's action phrases — and per-slot attention pools both into a
//! slot feature vector `z`. Each encoder's parameters are shared across all
//! slots and turns. The variants differ in what happens after `z`:
//!
//! * `ten`    — a recurrent history state per slot feeds a turn-label head;
//!              the per-turn label distributions are chained into state
//!              marginals with the soft update step, and training follows
//!              gradients through that chain.
//! * `ten-x`  — same trunk and label head, but trained on per-turn labels;
//!              states are produced after the fact by hard-folding argmax
//!              labels.
//! * `ten-y`  — the history state feeds a state head directly; no chaining.
//! * `ten-xh` — the label head reads `z` alone (no history state), so each
//!              turn is classified in isolation.
//!
//! `ten` and `ten-x` share identical parameter names and shapes, which is
//! what makes warm-starting one from the other a pure name-matched copy.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha20Rng;

use crate::dialogue::Dialogue;
use crate::encoder::{self, EncoderError, GruNodes, GruParams};
use crate::params::{init_uniform, ParamId, ParamStore};
use crate::state::{Ontology, UNKNOWN};
use crate::tape::{NodeId, Tape, TapeError};
use crate::tensor::Tensor;
use crate::vocab::Vocab;

/// Which output wiring to train and evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Ten,
    TenX,
    TenY,
    TenXh,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ten, Variant::TenX, Variant::TenY, Variant::TenXh];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ten => "ten",
            Variant::TenX => "ten-x",
            Variant::TenY => "ten-y",
            Variant::TenXh => "ten-xh",
        }
    }

    pub fn parse(s: &str) -> Result<Variant, ModelError> {
        match s {
            "ten" => Ok(Variant::Ten),
            "ten-x" => Ok(Variant::TenX),
            "ten-y" => Ok(Variant::TenY),
            "ten-xh" => Ok(Variant::TenXh),
            other => Err(ModelError::UnknownVariant { got: other.to_string() }),
        }
    }

    /// True when the forward pass carries a recurrent history state.
    pub fn uses_history(self) -> bool {
        !matches!(self, Variant::TenXh)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Layer widths. `encoder_hidden` is the total bidirectional state width
/// and must be even (half per direction); the slot feature vector `z` has
/// width `2 * encoder_hidden`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub embedding: usize,
    pub encoder_hidden: usize,
    pub history_hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims { embedding: 32, encoder_hidden: 50, history_hidden: 50 }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embedding == 0 || self.encoder_hidden == 0 || self.history_hidden == 0 {
            return Err(ModelError::InvalidDims {
                reason: "all layer widths must be positive".to_string(),
            });
        }
        if self.encoder_hidden % 2 != 0 {
            return Err(ModelError::InvalidDims {
                reason: "encoder_hidden must be even (it is split across two directions)"
                    .to_string(),
            });
        }
        Ok(())
    }

    /// Width of the per-slot turn feature vector `z`.
    pub fn feature_width(&self) -> usize {
        2 * self.encoder_hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    UnknownVariant { got: String },
    InvalidDims { reason: String },
    EmptyDialogue { id: String },
    EmptyUtterance { dialogue: String, turn: usize },
    EmptyActionPhrase { dialogue: String, turn: usize },
    Tape(TapeError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::UnknownVariant { got } => write!(
                f,
                "unknown variant {got:?}; expected one of ten, ten-x, ten-y, ten-xh"
            ),
            ModelError::InvalidDims { reason } => write!(f, "invalid model dims: {reason}"),
            ModelError::EmptyDialogue { id } => {
                write!(f, "dialogue {id:?} has no turns")
            }
            ModelError::EmptyUtterance { dialogue, turn } => {
                write!(f, "dialogue {dialogue:?} turn {turn} has an empty utterance")
            }
            ModelError::EmptyActionPhrase { dialogue, turn } => {
                write!(f, "dialogue {dialogue:?} turn {turn} has an empty action phrase")
            }
            ModelError::Tape(e) => write!(f, "{e}"),
        }
    }
}

impl From<TapeError> for ModelError {
    fn from(e: TapeError) -> Self {
        ModelError::Tape(e)
    }
}

/// Per-slot output heads and attention keys.
#[derive(Debug, Clone, Copy)]
pub struct SlotParams {
    pub utt_key: ParamId,
    pub act_key: ParamId,
    pub label_w: ParamId,
    pub label_b: ParamId,
    pub labelz_w: ParamId,
    pub labelz_b: ParamId,
    pub state_w: ParamId,
    pub state_b: ParamId,
}

/// All parameter ids of one model, in canonical registration order.
///
/// Registration order is the on-disk order of every checkpoint, so it must
/// stay stable: embedding table, utterance encoder cells (forward then
/// backward), action encoder cells, history cell, then per-slot tensors in
/// ontology slot order.
#[derive(Debug, Clone)]
pub struct ModelLayout {
    pub dims: ModelDims,
    pub embed: ParamId,
    pub utt_fwd: GruParams,
    pub utt_bwd: GruParams,
    pub act_fwd: GruParams,
    pub act_bwd: GruParams,
    pub hist: GruParams,
    pub slots: Vec<SlotParams>,
    pub value_counts: Vec<usize>,
    pub vocab_len: usize,
}

impl ModelLayout {
    /// Registers every tensor of the family into `store`, drawing initial
    /// weights from `rng` in a fixed order.
    pub fn build(
        store: &mut ParamStore,
        rng: &mut ChaCha20Rng,
        ontology: &Ontology,
        vocab: &Vocab,
        dims: ModelDims,
    ) -> Result<ModelLayout, ModelError> {
        dims.validate()?;
        let half = dims.encoder_hidden / 2;
        let feat = dims.feature_width();
        let embed = store
            .insert("embed.table", init_uniform(rng, &[vocab.len(), dims.embedding]))
            .expect("store is empty at build time");
        let utt_fwd = GruParams::register(store, rng, "enc.utt.fwd", dims.embedding, half);
        let utt_bwd = GruParams::register(store, rng, "enc.utt.bwd", dims.embedding, half);
        let act_fwd = GruParams::register(store, rng, "enc.act.fwd", dims.embedding, half);
        let act_bwd = GruParams::register(store, rng, "enc.act.bwd", dims.embedding, half);
        let hist = GruParams::register(store, rng, "hist", feat, dims.history_hidden);
        let mut slots = Vec::with_capacity(ontology.slot_count());
        let mut value_counts = Vec::with_capacity(ontology.slot_count());
        for slot in ontology.slot_ids() {
            let name = ontology.slot_name(slot);
            let n_values = ontology.value_count(slot);
            let add = |store: &mut ParamStore, rng: &mut ChaCha20Rng, suffix: &str, d: &[usize]| {
                let tensor = if d.len() == 1 && (suffix == "label_b" || suffix == "labelz_b" || suffix == "state_b") {
                    Tensor::zeros(d)
                } else {
                    init_uniform(rng, d)
                };
                store
                    .insert(&alloc::format!("slot.{name}.{suffix}"), tensor)
                    .expect("slot names are unique within an ontology")
            };
            let utt_key = add(store, rng, "utt_key", &[dims.encoder_hidden]);
            let act_key = add(store, rng, "act_key", &[dims.encoder_hidden]);
            let label_w = add(store, rng, "label_w", &[n_values, dims.history_hidden]);
            let label_b = add(store, rng, "label_b", &[n_values]);
            let labelz_w = add(store, rng, "labelz_w", &[n_values, feat]);
            let labelz_b = add(store, rng, "labelz_b", &[n_values]);
            let state_w = add(store, rng, "state_w", &[n_values, dims.history_hidden]);
            let state_b = add(store, rng, "state_b", &[n_values]);
            slots.push(SlotParams {
                utt_key,
                act_key,
                label_w,
                label_b,
                labelz_w,
                labelz_b,
                state_w,
                state_b,
            });
            value_counts.push(n_values);
        }
        Ok(ModelLayout {
            dims,
            embed,
            utt_fwd,
            utt_bwd,
            act_fwd,
            act_bwd,
            hist,
            slots,
            value_counts,
            vocab_len: vocab.len(),
        })
    }

    /// Parameter ids a given variant actually reads, in canonical order.
    /// This is the set a checkpoint for that variant stores and the set the
    /// trainer updates.
    pub fn param_ids_for(&self, variant: Variant) -> Vec<ParamId> {
        let mut ids = alloc::vec![self.embed];
        for gru in [&self.utt_fwd, &self.utt_bwd, &self.act_fwd, &self.act_bwd] {
            ids.extend(gru.ids());
        }
        if variant.uses_history() {
            ids.extend(self.hist.ids());
        }
        for s in &self.slots {
            ids.push(s.utt_key);
            ids.push(s.act_key);
            match variant {
                Variant::Ten | Variant::TenX => {
                    ids.push(s.label_w);
                    ids.push(s.label_b);
                }
                Variant::TenY => {
                    ids.push(s.state_w);
                    ids.push(s.state_b);
                }
                Variant::TenXh => {
                    ids.push(s.labelz_w);
                    ids.push(s.labelz_b);
                }
            }
        }
        ids
    }
}

impl GruParams {
    /// The nine ids in registration order.
    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.w_update,
            self.w_reset,
            self.w_cand,
            self.u_update,
            self.u_reset,
            self.u_cand,
            self.b_update,
            self.b_reset,
            self.b_cand,
        ]
    }
}

/// Lazily places each parameter on a tape exactly once, so gradients from
/// every use of a tensor accumulate on a single leaf.
#[derive(Debug, Default)]
pub struct Binder {
    nodes: BTreeMap<usize, NodeId>,
}

impl Binder {
    pub fn new() -> Binder {
        Binder { nodes: BTreeMap::new() }
    }

    pub fn bind(&mut self, tape: &mut Tape, store: &ParamStore, id: ParamId) -> NodeId {
        *self
            .nodes
            .entry(id.index())
            .or_insert_with(|| tape.leaf(store.get(id).clone()))
    }

    fn bind_gru(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        p: &GruParams,
        hidden: usize,
    ) -> GruNodes {
        GruNodes {
            w_update: self.bind(tape, store, p.w_update),
            w_reset: self.bind(tape, store, p.w_reset),
            w_cand: self.bind(tape, store, p.w_cand),
            u_update: self.bind(tape, store, p.u_update),
            u_reset: self.bind(tape, store, p.u_reset),
            u_cand: self.bind(tape, store, p.u_cand),
            b_update: self.bind(tape, store, p.b_update),
            b_reset: self.bind(tape, store, p.b_reset),
            b_cand: self.bind(tape, store, p.b_cand),
            hidden,
        }
    }

    /// After a backward pass, pairs every bound parameter with the gradient
    /// accumulated on its leaf. Parameters whose leaf received no gradient
    /// are omitted.
    pub fn collect_grads(&self, tape: &Tape) -> Vec<(ParamId, Tensor)> {
        self.nodes
            .iter()
            .filter_map(|(&idx, &node)| {
                tape.grad(node)
                    .map(|g| (ParamId::from_index(idx), g.clone()))
            })
            .collect()
    }
}

/// Tape nodes produced for one slot at one turn. Which field is present
/// depends on the variant (see the module docs).
#[derive(Debug, Clone, Copy)]
pub struct TurnNodes {
    /// Distribution over the slot's values for this turn's label.
    pub label_dist: Option<NodeId>,
    /// Distribution over the slot's values for the state after this turn.
    pub state_dist: Option<NodeId>,
}

/// Forward-pass outputs for one slot across a whole dialogue.
#[derive(Debug, Clone)]
pub struct SlotForward {
    pub turns: Vec<TurnNodes>,
}

/// Forward-pass outputs for a dialogue, plus the binder needed to route
/// leaf gradients back to named parameters.
#[derive(Debug)]
pub struct DialogueForward {
    pub slots: Vec<SlotForward>,
    pub binder: Binder,
}

fn unknown_point_mass(n: usize) -> Tensor {
    let mut t = Tensor::zeros(&[n]);
    t.data_mut()[UNKNOWN.0] = 1.0;
    t
}

fn apply_head(
    tape: &mut Tape,
    w: NodeId,
    b: NodeId,
    x: NodeId,
) -> Result<NodeId, TapeError> {
    let wx = tape.matmul(w, x)?;
    let logits = tape.add(wx, b)?;
    tape.softmax(logits)
}

/// Runs a dialogue through the trunk and the variant's output wiring,
/// building the full computation graph on `tape`.
pub fn forward_dialogue(
    tape: &mut Tape,
    store: &ParamStore,
    layout: &ModelLayout,
    variant: Variant,
    dialogue: &Dialogue,
    vocab: &Vocab,
) -> Result<DialogueForward, ModelError> {
    if dialogue.turns.is_empty() {
        return Err(ModelError::EmptyDialogue { id: dialogue.id.clone() });
    }
    let mut binder = Binder::new();
    let half = layout.dims.encoder_hidden / 2;
    let embed = binder.bind(tape, store, layout.embed);
    let utt_fwd = binder.bind_gru(tape, store, &layout.utt_fwd, half);
    let utt_bwd = binder.bind_gru(tape, store, &layout.utt_bwd, half);
    let act_fwd = binder.bind_gru(tape, store, &layout.act_fwd, half);
    let act_bwd = binder.bind_gru(tape, store, &layout.act_bwd, half);
    let hist = variant
        .uses_history()
        .then(|| binder.bind_gru(tape, store, &layout.hist, layout.dims.history_hidden));

    let n_slots = layout.slots.len();
    let mut slot_keys = Vec::with_capacity(n_slots);
    for sp in &layout.slots {
        slot_keys.push((
            binder.bind(tape, store, sp.utt_key),
            binder.bind(tape, store, sp.act_key),
        ));
    }

    let embed_tokens = |tape: &mut Tape, tokens: &[String]| -> Result<Vec<NodeId>, TapeError> {
        tokens
            .iter()
            .map(|tok| tape.row(embed, vocab.index_of(tok)))
            .collect()
    };

    let mut slots: Vec<SlotForward> = (0..n_slots)
        .map(|_| SlotForward { turns: Vec::with_capacity(dialogue.turns.len()) })
        .collect();
    let mut hist_state: Vec<Option<NodeId>> = alloc::vec![None; n_slots];
    let mut state_chain: Vec<Option<NodeId>> = alloc::vec![None; n_slots];

    for (turn_idx, turn) in dialogue.turns.iter().enumerate() {
        let turn_no = turn_idx + 1;
        let utt_embeds = embed_tokens(tape, &turn.utterance)?;
        let utterance_matrix = encoder::encode_sequence(tape, &utt_fwd, &utt_bwd, &utt_embeds)
            .map_err(|e| match e {
                EncoderError::EmptySequence => ModelError::EmptyUtterance {
                    dialogue: dialogue.id.clone(),
                    turn: turn_no,
                },
                EncoderError::Tape(t) => ModelError::Tape(t),
            })?;
        let mut phrase_matrices = Vec::with_capacity(turn.action.len());
        for phrase in &turn.action {
            if phrase.is_empty() {
                return Err(ModelError::EmptyActionPhrase {
                    dialogue: dialogue.id.clone(),
                    turn: turn_no,
                });
            }
            let embeds = embed_tokens(tape, phrase)?;
            let m = encoder::encode_sequence(tape, &act_fwd, &act_bwd, &embeds)
                .map_err(|e| match e {
                    EncoderError::EmptySequence => ModelError::EmptyActionPhrase {
                        dialogue: dialogue.id.clone(),
                        turn: turn_no,
                    },
                    EncoderError::Tape(t) => ModelError::Tape(t),
                })?;
            phrase_matrices.push(m);
        }

        for slot_idx in 0..n_slots {
            let (utt_key, act_key) = slot_keys[slot_idx];
            let enc = encoder::gae_for_slot(tape, utterance_matrix, &phrase_matrices, utt_key, act_key)?;
            let sp = &layout.slots[slot_idx];
            let nodes = match variant {
                Variant::TenXh => {
                    let w = binder.bind(tape, store, sp.labelz_w);
                    let b = binder.bind(tape, store, sp.labelz_b);
                    let alpha = apply_head(tape, w, b, enc.features)?;
                    TurnNodes { label_dist: Some(alpha), state_dist: None }
                }
                Variant::TenX | Variant::Ten | Variant::TenY => {
                    let hist_nodes = hist.as_ref().expect("history cell bound for this variant");
                    let prev = match hist_state[slot_idx] {
                        Some(h) => h,
                        None => encoder::zero_state(tape, layout.dims.history_hidden),
                    };
                    let h = encoder::gru_cell(tape, hist_nodes, enc.features, prev)?;
                    hist_state[slot_idx] = Some(h);
                    match variant {
                        Variant::TenY => {
                            let w = binder.bind(tape, store, sp.state_w);
                            let b = binder.bind(tape, store, sp.state_b);
                            let q = apply_head(tape, w, b, h)?;
                            TurnNodes { label_dist: None, state_dist: Some(q) }
                        }
                        _ => {
                            let w = binder.bind(tape, store, sp.label_w);
                            let b = binder.bind(tape, store, sp.label_b);
                            let alpha = apply_head(tape, w, b, h)?;
                            let state_dist = if variant == Variant::Ten {
                                let prev_mu = match state_chain[slot_idx] {
                                    Some(mu) => mu,
                                    None => tape.leaf(unknown_point_mass(
                                        layout.value_counts[slot_idx],
                                    )),
                                };
                                let mu = tape.bp_step(prev_mu, alpha)?;
                                state_chain[slot_idx] = Some(mu);
                                Some(mu)
                            } else {
                                None
                            };
                            TurnNodes { label_dist: Some(alpha), state_dist }
                        }
                    }
                }
            };
            slots[slot_idx].turns.push(nodes);
        }
    }

    Ok(DialogueForward { slots, binder })
}
