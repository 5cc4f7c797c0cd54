//! Finite-difference validation of the reverse-mode tape.
//!
//! Every check builds a scalar-rooted graph from leaf tensors, runs the
//! backward pass, then re-evaluates the whole graph at `x ± h` for each
//! input element and compares the central difference
//! `(f(x+h) - f(x-h)) / 2h` against the accumulated leaf gradient. The
//! relative error uses `max(|fd|, |ad|, 1)` as denominator so near-zero
//! gradients are compared absolutely.
//!
//! Coverage: each tape primitive in isolation (over 100 random seeds),
//! a diamond-shaped graph with fan-out, the recurrent cell and both
//! attention stages, and the four full training losses with every model
//! parameter perturbed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

use ten_core::dialogue::{Dialogue, Turn};
use ten_core::encoder::{self, GruNodes};
use ten_core::loss::dialogue_loss;
use ten_core::model::{forward_dialogue, ModelDims, ModelLayout, Variant};
use ten_core::params::ParamStore;
use ten_core::state::{Ontology, SlotId, StateConfig, ValueId};
use ten_core::tape::{NodeId, Tape};
use ten_core::tensor::Tensor;
use ten_core::vocab::Vocab;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const SEEDS: u64 = 100;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn rand_vector(rng: &mut ChaCha20Rng, n: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::vector((0..n).map(|_| rng.gen_range(lo..hi)).collect())
}

fn rand_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(lo..hi)).collect())
}

/// Rebuilds the graph from scratch on the given inputs and returns the
/// root's value.
fn eval<B>(builder: &B, inputs: &[Tensor]) -> f64
where
    B: Fn(&mut Tape, &[NodeId]) -> NodeId,
{
    let mut tape = Tape::new();
    let leaves: Vec<NodeId> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = builder(&mut tape, &leaves);
    tape.value(root).as_scalar()
}

/// Checks every element of every input against a central difference.
fn check_gradients<B>(name: &str, builder: &B, inputs: &[Tensor])
where
    B: Fn(&mut Tape, &[NodeId]) -> NodeId,
{
    let mut tape = Tape::new();
    let leaves: Vec<NodeId> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = builder(&mut tape, &leaves);
    let value = tape.value(root).as_scalar();
    assert!(value.is_finite(), "{name}: root value {value} is not finite");
    tape.backward(root).unwrap();
    for (i, input) in inputs.iter().enumerate() {
        let analytic = tape
            .grad(leaves[i])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.dims()));
        for e in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[e] += H;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[e] -= H;
            let fd = (eval(builder, &plus) - eval(builder, &minus)) / (2.0 * H);
            let ad = analytic.data()[e];
            assert!(
                rel_err(fd, ad) < TOL,
                "{name}: input {i} element {e}: finite difference {fd} vs backward {ad}"
            );
        }
    }
}

#[test]
fn matmul_matrix_vector_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_matrix(&mut rng, 3, 4, -1.0, 1.0),
            rand_vector(&mut rng, 4, -1.0, 1.0),
            rand_vector(&mut rng, 3, -1.0, 1.0),
        ];
        check_gradients(
            "matmul mat*vec",
            &|tape: &mut Tape, l: &[NodeId]| {
                let y = tape.matmul(l[0], l[1]).unwrap();
                tape.dot(y, l[2]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn matmul_matrix_matrix_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_matrix(&mut rng, 2, 3, -1.0, 1.0),
            rand_matrix(&mut rng, 3, 4, -1.0, 1.0),
            rand_matrix(&mut rng, 2, 4, -1.0, 1.0),
        ];
        check_gradients(
            "matmul mat*mat",
            &|tape: &mut Tape, l: &[NodeId]| {
                let y = tape.matmul(l[0], l[1]).unwrap();
                let weighted = tape.hadamard(y, l[2]).unwrap();
                tape.sum(weighted)
            },
            &inputs,
        );
    }
}

#[test]
fn transpose_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_matrix(&mut rng, 3, 4, -1.0, 1.0),
            rand_matrix(&mut rng, 4, 3, -1.0, 1.0),
        ];
        check_gradients(
            "transpose",
            &|tape: &mut Tape, l: &[NodeId]| {
                let t = tape.transpose(l[0]).unwrap();
                let weighted = tape.hadamard(t, l[1]).unwrap();
                tape.sum(weighted)
            },
            &inputs,
        );
    }
}

#[test]
fn add_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 5, -1.0, 1.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
        ];
        check_gradients(
            "add",
            &|tape: &mut Tape, l: &[NodeId]| {
                let s = tape.add(l[0], l[1]).unwrap();
                tape.dot(s, l[2]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn hadamard_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 5, -1.0, 1.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
        ];
        check_gradients(
            "hadamard",
            &|tape: &mut Tape, l: &[NodeId]| {
                let p = tape.hadamard(l[0], l[1]).unwrap();
                tape.dot(p, l[2]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn affine_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mul = rng.gen_range(-2.0..2.0);
        let add = rng.gen_range(-1.0..1.0);
        let inputs = [
            rand_vector(&mut rng, 5, -1.0, 1.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
        ];
        check_gradients(
            "affine",
            &move |tape: &mut Tape, l: &[NodeId]| {
                let y = tape.affine(l[0], mul, add);
                tape.dot(y, l[1]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn sigmoid_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 5, -3.0, 3.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
        ];
        check_gradients(
            "sigmoid",
            &|tape: &mut Tape, l: &[NodeId]| {
                let y = tape.sigmoid(l[0]);
                tape.dot(y, l[1]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn tanh_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 5, -3.0, 3.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
        ];
        check_gradients(
            "tanh",
            &|tape: &mut Tape, l: &[NodeId]| {
                let y = tape.tanh(l[0]);
                tape.dot(y, l[1]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn log_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 5, 0.1, 2.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
        ];
        check_gradients(
            "log",
            &|tape: &mut Tape, l: &[NodeId]| {
                let y = tape.log(l[0]);
                tape.dot(y, l[1]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn max_const_matches_finite_differences_on_both_branches() {
    // Elements are sampled on both sides of the floor but never within
    // 1e-3 of it: a central difference straddling the kink is meaningless.
    let floor = 0.5;
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = Tensor::vector(
            (0..6)
                .map(|_| loop {
                    let v: f64 = rng.gen_range(-1.0..2.0);
                    if (v - floor).abs() > 1e-3 {
                        return v;
                    }
                })
                .collect(),
        );
        let inputs = [x, rand_vector(&mut rng, 6, -1.0, 1.0)];
        check_gradients(
            "max_const",
            &move |tape: &mut Tape, l: &[NodeId]| {
                let y = tape.max_const(l[0], floor);
                tape.dot(y, l[1]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn softmax_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 5, -2.0, 2.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
        ];
        check_gradients(
            "softmax",
            &|tape: &mut Tape, l: &[NodeId]| {
                let y = tape.softmax(l[0]).unwrap();
                tape.dot(y, l[1]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn concat_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 3, -1.0, 1.0),
            rand_vector(&mut rng, 2, -1.0, 1.0),
            rand_vector(&mut rng, 4, -1.0, 1.0),
            rand_vector(&mut rng, 9, -1.0, 1.0),
        ];
        check_gradients(
            "concat",
            &|tape: &mut Tape, l: &[NodeId]| {
                let y = tape.concat(&[l[0], l[1], l[2]]).unwrap();
                tape.dot(y, l[3]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn stack_cols_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 3, -1.0, 1.0),
            rand_vector(&mut rng, 3, -1.0, 1.0),
            rand_vector(&mut rng, 3, -1.0, 1.0),
            rand_matrix(&mut rng, 3, 3, -1.0, 1.0),
        ];
        check_gradients(
            "stack_cols",
            &|tape: &mut Tape, l: &[NodeId]| {
                let m = tape.stack_cols(&[l[0], l[1], l[2]]).unwrap();
                let weighted = tape.hadamard(m, l[3]).unwrap();
                tape.sum(weighted)
            },
            &inputs,
        );
    }
}

#[test]
fn dot_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 5, -1.0, 1.0),
            rand_vector(&mut rng, 5, -1.0, 1.0),
        ];
        check_gradients(
            "dot",
            &|tape: &mut Tape, l: &[NodeId]| tape.dot(l[0], l[1]).unwrap(),
            &inputs,
        );
    }
}

#[test]
fn pick_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let index = rng.gen_range(0..5usize);
        let inputs = [rand_vector(&mut rng, 5, -1.0, 1.0)];
        check_gradients(
            "pick",
            &move |tape: &mut Tape, l: &[NodeId]| tape.pick(l[0], index).unwrap(),
            &inputs,
        );
    }
}

#[test]
fn row_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let index = rng.gen_range(0..3usize);
        let inputs = [
            rand_matrix(&mut rng, 3, 4, -1.0, 1.0),
            rand_vector(&mut rng, 4, -1.0, 1.0),
        ];
        check_gradients(
            "row",
            &move |tape: &mut Tape, l: &[NodeId]| {
                let r = tape.row(l[0], index).unwrap();
                tape.dot(r, l[1]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn sum_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [rand_vector(&mut rng, 7, -1.0, 1.0)];
        check_gradients(
            "sum",
            &|tape: &mut Tape, l: &[NodeId]| tape.sum(l[0]),
            &inputs,
        );
    }
}

#[test]
fn message_passing_step_matches_finite_differences() {
    // The aggregation step validates that its inputs are normalized, so the
    // perturbation is applied to logits upstream of two softmaxes; the
    // inputs then stay on the simplex for every finite-difference probe.
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 4, -2.0, 2.0),
            rand_vector(&mut rng, 4, -2.0, 2.0),
            rand_vector(&mut rng, 4, -1.0, 1.0),
        ];
        check_gradients(
            "bp_step",
            &|tape: &mut Tape, l: &[NodeId]| {
                let gamma = tape.softmax(l[0]).unwrap();
                let beta = tape.softmax(l[1]).unwrap();
                let mu = tape.bp_step(gamma, beta).unwrap();
                tape.dot(mu, l[2]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn chained_message_passing_matches_finite_differences() {
    // Three aggregation steps feeding each other, as in a real dialogue
    // chain: checks gradient flow through the recursive state argument.
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 3, -2.0, 2.0),
            rand_vector(&mut rng, 3, -2.0, 2.0),
            rand_vector(&mut rng, 3, -2.0, 2.0),
            rand_vector(&mut rng, 3, -1.0, 1.0),
        ];
        check_gradients(
            "bp chain",
            &|tape: &mut Tape, l: &[NodeId]| {
                let mut mu = {
                    let mut start = Tensor::zeros(&[3]);
                    start.data_mut()[0] = 1.0;
                    tape.leaf(start)
                };
                for &logits in &l[..3] {
                    let alpha = tape.softmax(logits).unwrap();
                    mu = tape.bp_step(mu, alpha).unwrap();
                }
                tape.dot(mu, l[3]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn diamond_fan_out_accumulates_correctly() {
    // x feeds three consumers (sigmoid, tanh, and a direct dot with
    // itself), so its leaf gradient is the sum of three paths.
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_vector(&mut rng, 4, -2.0, 2.0),
            rand_vector(&mut rng, 4, -1.0, 1.0),
        ];
        check_gradients(
            "diamond",
            &|tape: &mut Tape, l: &[NodeId]| {
                let s = tape.sigmoid(l[0]);
                let t = tape.tanh(l[0]);
                let h = tape.hadamard(s, t).unwrap();
                let a = tape.dot(h, l[1]).unwrap();
                let b = tape.dot(l[0], l[0]).unwrap();
                tape.add(a, b).unwrap()
            },
            &inputs,
        );
    }
}

/// Builds `GruNodes` from eleven leaves laid out as the nine cell tensors
/// followed by the step inputs.
fn gru_from_leaves(l: &[NodeId], hidden: usize) -> GruNodes {
    GruNodes {
        w_update: l[0],
        w_reset: l[1],
        w_cand: l[2],
        u_update: l[3],
        u_reset: l[4],
        u_cand: l[5],
        b_update: l[6],
        b_reset: l[7],
        b_cand: l[8],
        hidden,
    }
}

fn rand_gru_tensors(rng: &mut ChaCha20Rng, input: usize, hidden: usize) -> Vec<Tensor> {
    vec![
        rand_matrix(rng, hidden, input, -0.8, 0.8),
        rand_matrix(rng, hidden, input, -0.8, 0.8),
        rand_matrix(rng, hidden, input, -0.8, 0.8),
        rand_matrix(rng, hidden, hidden, -0.8, 0.8),
        rand_matrix(rng, hidden, hidden, -0.8, 0.8),
        rand_matrix(rng, hidden, hidden, -0.8, 0.8),
        rand_vector(rng, hidden, -0.5, 0.5),
        rand_vector(rng, hidden, -0.5, 0.5),
        rand_vector(rng, hidden, -0.5, 0.5),
    ]
}

#[test]
fn recurrent_cell_matches_finite_differences() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut inputs = rand_gru_tensors(&mut rng, 2, 3);
        inputs.push(rand_vector(&mut rng, 2, -1.0, 1.0)); // x
        inputs.push(rand_vector(&mut rng, 3, -1.0, 1.0)); // h
        inputs.push(rand_vector(&mut rng, 3, -1.0, 1.0)); // readout weights
        check_gradients(
            "gru_cell",
            &|tape: &mut Tape, l: &[NodeId]| {
                let g = gru_from_leaves(l, 3);
                let h = encoder::gru_cell(tape, &g, l[9], l[10]).unwrap();
                tape.dot(h, l[11]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn bidirectional_encoding_matches_finite_differences() {
    // Both directions over a three-token sequence, pooled with a key:
    // exercises the stacked columns, the reversal, and parameter reuse
    // across timesteps (each cell tensor feeds every step).
    for seed in 0..25 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut inputs = rand_gru_tensors(&mut rng, 2, 2);
        inputs.extend(rand_gru_tensors(&mut rng, 2, 2));
        for _ in 0..3 {
            inputs.push(rand_vector(&mut rng, 2, -1.0, 1.0)); // token embeddings
        }
        inputs.push(rand_vector(&mut rng, 4, -1.0, 1.0)); // pooling key
        inputs.push(rand_vector(&mut rng, 4, -1.0, 1.0)); // readout weights
        check_gradients(
            "encode_sequence",
            &|tape: &mut Tape, l: &[NodeId]| {
                let fwd = gru_from_leaves(&l[..9], 2);
                let bwd = gru_from_leaves(&l[9..18], 2);
                let m = encoder::encode_sequence(tape, &fwd, &bwd, &l[18..21]).unwrap();
                let pooled = encoder::attention_pool(tape, m, l[21]).unwrap();
                tape.dot(pooled, l[22]).unwrap()
            },
            &inputs,
        );
    }
}

#[test]
fn slot_attention_matches_finite_differences() {
    // Utterance matrix, two action-phrase matrices, and both keys as raw
    // leaves: checks the two-stage pooling and the phrase-weighting softmax.
    for seed in 0..SEEDS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inputs = [
            rand_matrix(&mut rng, 4, 3, -1.0, 1.0), // utterance columns
            rand_matrix(&mut rng, 4, 2, -1.0, 1.0), // phrase 1
            rand_matrix(&mut rng, 4, 3, -1.0, 1.0), // phrase 2
            rand_vector(&mut rng, 4, -1.0, 1.0),    // utterance key
            rand_vector(&mut rng, 4, -1.0, 1.0),    // action key
            rand_vector(&mut rng, 8, -1.0, 1.0),    // readout weights
        ];
        check_gradients(
            "gae_for_slot",
            &|tape: &mut Tape, l: &[NodeId]| {
                let enc = encoder::gae_for_slot(tape, l[0], &[l[1], l[2]], l[3], l[4]).unwrap();
                tape.dot(enc.features, l[5]).unwrap()
            },
            &inputs,
        );
    }
}

// ---------------------------------------------------------------------------
// Full-model checks: perturb every parameter of every variant's loss.
// ---------------------------------------------------------------------------

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn toy_ontology() -> Ontology {
    Ontology::new(vec![
        ("food".to_string(), vec!["thai".to_string(), "pub".to_string()]),
        ("area".to_string(), vec!["north".to_string()]),
    ])
    .unwrap()
}

/// Two turns, two slots; the second turn carries a system action phrase so
/// the action encoder participates in the graph.
fn toy_dialogue(ont: &Ontology) -> Dialogue {
    let s0 = StateConfig::all_unknown(ont);
    let mut s1 = s0.clone();
    s1.set(SlotId(0), ValueId(1));
    let mut s2 = s1.clone();
    s2.set(SlotId(1), ValueId(1));
    Dialogue {
        id: "toy".to_string(),
        turns: vec![
            Turn {
                action: vec![],
                utterance: words("thai food please"),
                gold_state: s1,
                gold_label: None,
            },
            Turn {
                action: vec![words("ask area")],
                utterance: words("north part"),
                gold_state: s2,
                gold_label: None,
            },
        ],
        labels_derived: false,
    }
}

fn loss_at(
    store: &ParamStore,
    layout: &ModelLayout,
    variant: Variant,
    dlg: &Dialogue,
    vocab: &Vocab,
    ont: &Ontology,
) -> f64 {
    let mut tape = Tape::new();
    let fwd = forward_dialogue(&mut tape, store, layout, variant, dlg, vocab).unwrap();
    let b = dialogue_loss(&mut tape, &fwd, variant, dlg, ont).unwrap();
    tape.value(b.loss).as_scalar()
}

#[test]
fn every_variant_loss_matches_finite_differences() {
    let ont = toy_ontology();
    let dlg = toy_dialogue(&ont);
    let vocab = Vocab::from_dialogues(std::slice::from_ref(&dlg)).unwrap();
    let dims = ModelDims { embedding: 4, encoder_hidden: 6, history_hidden: 5 };
    for variant in Variant::ALL {
        for seed in [3u64, 41] {
            let mut store = ParamStore::new();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let layout = ModelLayout::build(&mut store, &mut rng, &ont, &vocab, dims).unwrap();

            let mut tape = Tape::new();
            let fwd = forward_dialogue(&mut tape, &store, &layout, variant, &dlg, &vocab).unwrap();
            let b = dialogue_loss(&mut tape, &fwd, variant, &dlg, &ont).unwrap();
            assert_eq!(b.clamped, 0, "{variant}: fixture must stay off the probability floor");
            tape.backward(b.loss).unwrap();
            let grads: BTreeMap<usize, Tensor> = fwd
                .binder
                .collect_grads(&tape)
                .into_iter()
                .map(|(id, g)| (id.index(), g))
                .collect();

            // The gradient must land on exactly the parameters the variant
            // declares as its own — nothing missing, nothing extra.
            let mut expected: Vec<usize> =
                layout.param_ids_for(variant).iter().map(|id| id.index()).collect();
            expected.sort_unstable();
            let got: Vec<usize> = grads.keys().copied().collect();
            assert_eq!(got, expected, "{variant}: gradient support differs from declared set");

            for id in layout.param_ids_for(variant) {
                let n = store.get(id).numel();
                for e in 0..n {
                    let orig = store.get(id).data()[e];
                    store.get_mut(id).data_mut()[e] = orig + H;
                    let up = loss_at(&store, &layout, variant, &dlg, &vocab, &ont);
                    store.get_mut(id).data_mut()[e] = orig - H;
                    let down = loss_at(&store, &layout, variant, &dlg, &vocab, &ont);
                    store.get_mut(id).data_mut()[e] = orig;
                    let fd = (up - down) / (2.0 * H);
                    let ad = grads[&id.index()].data()[e];
                    assert!(
                        rel_err(fd, ad) < TOL,
                        "{variant} seed {seed}: {} element {e}: finite difference {fd} vs backward {ad}",
                        store.name(id),
                    );
                }
            }
        }
    }
}
