//! Recurrent turn encoders built on the tape.
//!
//! Three pieces compose into the per-turn feature vector:
//!
//! 1. a gated recurrent cell (`gru_cell`) shared by every sequence reader;
//! 2. a bidirectional pass (`encode_sequence`) turning a token-embedding
//!    sequence into a matrix whose columns are per-token states;
//! 3. per-slot attention (`gae_for_slot`) that pools the utterance matrix
//!    with a learned key, pools each system action phrase the same way, and
//!    then weights the phrases by their agreement with the pooled utterance.
//!
//! The result `z` concatenates the pooled utterance and the pooled actions;
//! with hidden size `h` per direction, `z` has length `4h`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::params::{ParamId, ParamStore};
use crate::tape::{NodeId, Tape, TapeError};
use crate::tensor::Tensor;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderError {
    /// A sequence reader was handed zero tokens.
    EmptySequence,
    Tape(TapeError),
}

impl fmt::Display for EncoderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderError::EmptySequence => {
                write!(f, "cannot encode an empty token sequence")
            }
            EncoderError::Tape(e) => write!(f, "{e}"),
        }
    }
}

impl From<TapeError> for EncoderError {
    fn from(e: TapeError) -> Self {
        EncoderError::Tape(e)
    }
}

/// Parameter ids for one gated recurrent cell.
///
/// Gate equations, with `x` the input and `h` the previous state:
/// `u = sigmoid(W_u x + U_u h + b_u)` (update), `r = sigmoid(...)` (reset),
/// `n = tanh(W_n x + r * (U_n h) + b_n)`, `h' = (1-u)*n + u*h`.
#[derive(Debug, Clone, Copy)]
pub struct GruParams {
    pub w_update: ParamId,
    pub w_reset: ParamId,
    pub w_cand: ParamId,
    pub u_update: ParamId,
    pub u_reset: ParamId,
    pub u_cand: ParamId,
    pub b_update: ParamId,
    pub b_reset: ParamId,
    pub b_cand: ParamId,
}

impl GruParams {
    /// Registers the nine tensors of one cell under `prefix.*` names.
    pub fn register(
        store: &mut ParamStore,
        rng: &mut ChaCha20Rng,
        prefix: &str,
        input: usize,
        hidden: usize,
    ) -> GruParams {
        let mat = |store: &mut ParamStore, rng: &mut ChaCha20Rng, name: &str, r, c| {
            let t = crate::params::init_uniform(rng, &[r, c]);
            store
                .insert(&alloc::format!("{prefix}.{name}"), t)
                .expect("gru parameter names are unique per prefix")
        };
        let w_update = mat(store, rng, "w_update", hidden, input);
        let w_reset = mat(store, rng, "w_reset", hidden, input);
        let w_cand = mat(store, rng, "w_cand", hidden, input);
        let u_update = mat(store, rng, "u_update", hidden, hidden);
        let u_reset = mat(store, rng, "u_reset", hidden, hidden);
        let u_cand = mat(store, rng, "u_cand", hidden, hidden);
        let vec_param = |store: &mut ParamStore, name: &str| {
            store
                .insert(&alloc::format!("{prefix}.{name}"), Tensor::zeros(&[hidden]))
                .expect("gru parameter names are unique per prefix")
        };
        let b_update = vec_param(store, "b_update");
        let b_reset = vec_param(store, "b_reset");
        let b_cand = vec_param(store, "b_cand");
        GruParams {
            w_update,
            w_reset,
            w_cand,
            u_update,
            u_reset,
            u_cand,
            b_update,
            b_reset,
            b_cand,
        }
    }

    /// The `prefix.*` names in registration order.
    pub fn names(prefix: &str) -> Vec<String> {
        [
            "w_update", "w_reset", "w_cand", "u_update", "u_reset", "u_cand", "b_update",
            "b_reset", "b_cand",
        ]
        .iter()
        .map(|n| alloc::format!("{prefix}.{n}"))
        .collect()
    }
}

/// Tape nodes for one cell's parameters (leaves bound to a `GruParams`).
#[derive(Debug, Clone, Copy)]
pub struct GruNodes {
    pub w_update: NodeId,
    pub w_reset: NodeId,
    pub w_cand: NodeId,
    pub u_update: NodeId,
    pub u_reset: NodeId,
    pub u_cand: NodeId,
    pub b_update: NodeId,
    pub b_reset: NodeId,
    pub b_cand: NodeId,
    pub hidden: usize,
}

/// One step of the gated recurrent cell. `x` and `h` are vectors.
pub fn gru_cell(
    tape: &mut Tape,
    g: &GruNodes,
    x: NodeId,
    h: NodeId,
) -> Result<NodeId, TapeError> {
    let gate = |tape: &mut Tape, w, u, b| -> Result<NodeId, TapeError> {
        let wx = tape.matmul(w, x)?;
        let uh = tape.matmul(u, h)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    };
    let update = {
        let pre = gate(tape, g.w_update, g.u_update, g.b_update)?;
        tape.sigmoid(pre)
    };
    let reset = {
        let pre = gate(tape, g.w_reset, g.u_reset, g.b_reset)?;
        tape.sigmoid(pre)
    };
    let cand = {
        let wx = tape.matmul(g.w_cand, x)?;
        let uh = tape.matmul(g.u_cand, h)?;
        let gated = tape.hadamard(reset, uh)?;
        let s = tape.add(wx, gated)?;
        let pre = tape.add(s, g.b_cand)?;
        tape.tanh(pre)
    };
    let keep = tape.hadamard(update, h)?;
    let one_minus = tape.affine(update, -1.0, 1.0);
    let new_part = tape.hadamard(one_minus, cand)?;
    tape.add(keep, new_part)
}

/// Constant all-zero state of the given width.
pub fn zero_state(tape: &mut Tape, hidden: usize) -> NodeId {
    tape.leaf(Tensor::zeros(&[hidden]))
}

/// Runs forward and backward cells over a token-embedding sequence and
/// stacks the per-token states `[fwd_i ; bwd_i]` as the columns of a
/// `[2h x n]` matrix.
pub fn encode_sequence(
    tape: &mut Tape,
    fwd: &GruNodes,
    bwd: &GruNodes,
    embeds: &[NodeId],
) -> Result<NodeId, EncoderError> {
    if embeds.is_empty() {
        return Err(EncoderError::EmptySequence);
    }
    let n = embeds.len();
    let mut fwd_states = Vec::with_capacity(n);
    let mut h = zero_state(tape, fwd.hidden);
    for &x in embeds {
        h = gru_cell(tape, fwd, x, h)?;
        fwd_states.push(h);
    }
    let mut bwd_states = Vec::with_capacity(n);
    let mut h = zero_state(tape, bwd.hidden);
    for i in (0..n).rev() {
        h = gru_cell(tape, bwd, embeds[i], h)?;
        bwd_states.push(h);
    }
    bwd_states.reverse();
    let mut columns = Vec::with_capacity(n);
    for i in 0..n {
        columns.push(tape.concat(&[fwd_states[i], bwd_states[i]])?);
    }
    Ok(tape.stack_cols(&columns)?)
}

/// Softmax-attention pooling of the columns of `matrix` (`[d x n]`) with a
/// learned key (`[d]`): scores are `matrix^T key`, the result is the
/// score-weighted column average, a `[d]` vector.
pub fn attention_pool(tape: &mut Tape, matrix: NodeId, key: NodeId) -> Result<NodeId, TapeError> {
    let mt = tape.transpose(matrix)?;
    let scores = tape.matmul(mt, key)?;
    let weights = tape.softmax(scores)?;
    tape.matmul(matrix, weights)
}

/// Per-slot pooled features for one turn.
#[derive(Debug, Clone, Copy)]
pub struct TurnEncoding {
    /// Pooled utterance vector (`[2h]`).
    pub pooled_utterance: NodeId,
    /// Pooled system-action vector (`[2h]`, all zero when the system took
    /// no action this turn).
    pub pooled_actions: NodeId,
    /// `concat(pooled_utterance, pooled_actions)` (`[4h]`).
    pub features: NodeId,
}

/// Combines an encoded utterance matrix and encoded action-phrase matrices
/// into the slot's turn features.
///
/// `utterance_key` pools the utterance columns; `action_key` pools each
/// phrase's columns into one vector per phrase; the phrase vectors are then
/// weighted by the softmax of their dot products with the pooled utterance.
pub fn gae_for_slot(
    tape: &mut Tape,
    utterance_matrix: NodeId,
    phrase_matrices: &[NodeId],
    utterance_key: NodeId,
    action_key: NodeId,
) -> Result<TurnEncoding, TapeError> {
    let pooled_utterance = attention_pool(tape, utterance_matrix, utterance_key)?;
    let width = tape.value(pooled_utterance).numel();
    let pooled_actions = if phrase_matrices.is_empty() {
        tape.leaf(Tensor::zeros(&[width]))
    } else {
        let mut phrase_vecs = Vec::with_capacity(phrase_matrices.len());
        let mut scores = Vec::with_capacity(phrase_matrices.len());
        for &pm in phrase_matrices {
            let c = attention_pool(tape, pm, action_key)?;
            scores.push(tape.dot(pooled_utterance, c)?);
            phrase_vecs.push(c);
        }
        let score_vec = tape.concat(&scores)?;
        let weights = tape.softmax(score_vec)?;
        let stacked = tape.stack_cols(&phrase_vecs)?;
        tape.matmul(stacked, weights)?
    };
    let features = tape.concat(&[pooled_utterance, pooled_actions])?;
    Ok(TurnEncoding {
        pooled_utterance,
        pooled_actions,
        features,
    })
}
