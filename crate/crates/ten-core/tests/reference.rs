//! Cross-checks the tape-built forward pass against a plain-`f64`
//! reimplementation written with none of the library's numeric machinery,
//! plus structural checks on full-model outputs: distributions are
//! normalized and finite across random seeds, and each slot's head depends
//! on its own key but every slot shares the sequence encoders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use ten_core::dialogue::{Dialogue, Turn};
use ten_core::encoder::{self, GruNodes};
use ten_core::model::{forward_dialogue, DialogueForward, ModelDims, ModelLayout, Variant};
use ten_core::params::ParamStore;
use ten_core::state::{Ontology, SlotId, StateConfig, ValueId};
use ten_core::synth::{generate_corpus, default_ontology, SynthConfig};
use ten_core::tape::{NodeId, Tape};
use ten_core::tensor::Tensor;
use ten_core::vocab::Vocab;

const TOL: f64 = 1e-12;

// --- plain reimplementation ------------------------------------------------

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mat_vec(m: &Tensor, v: &[f64]) -> Vec<f64> {
    let (r, c) = (m.rows(), m.cols());
    assert_eq!(c, v.len());
    (0..r)
        .map(|i| (0..c).map(|j| m.data()[i * c + j] * v[j]).sum())
        .collect()
}

fn softmax_ref(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// One recurrent step from the nine cell tensors, in registration order:
/// three input maps, three state maps, three biases.
fn gru_ref(p: &[Tensor], x: &[f64], h: &[f64]) -> Vec<f64> {
    let pre = |w: &Tensor, u: &Tensor, b: &Tensor| -> Vec<f64> {
        let wx = mat_vec(w, x);
        let uh = mat_vec(u, h);
        wx.iter()
            .zip(&uh)
            .zip(b.data())
            .map(|((a, c), d)| a + c + d)
            .collect()
    };
    let update: Vec<f64> = pre(&p[0], &p[3], &p[6]).iter().map(|&v| sig(v)).collect();
    let reset: Vec<f64> = pre(&p[1], &p[4], &p[7]).iter().map(|&v| sig(v)).collect();
    let wx = mat_vec(&p[2], x);
    let uh = mat_vec(&p[5], h);
    let cand: Vec<f64> = wx
        .iter()
        .zip(reset.iter().zip(&uh))
        .zip(p[8].data())
        .map(|((a, (r, c)), d)| (a + r * c + d).tanh())
        .collect();
    update
        .iter()
        .zip(cand.iter().zip(h))
        .map(|(u, (n, hv))| (1.0 - u) * n + u * hv)
        .collect()
}

/// Bidirectional encoding as a list of per-token columns `[fwd_i ; bwd_i]`.
fn encode_ref(fwd: &[Tensor], bwd: &[Tensor], embeds: &[Vec<f64>], hidden: usize) -> Vec<Vec<f64>> {
    let n = embeds.len();
    let mut fwd_states = Vec::with_capacity(n);
    let mut h = vec![0.0; hidden];
    for x in embeds {
        h = gru_ref(fwd, x, &h);
        fwd_states.push(h.clone());
    }
    let mut bwd_states = vec![Vec::new(); n];
    let mut h = vec![0.0; hidden];
    for i in (0..n).rev() {
        h = gru_ref(bwd, &embeds[i], &h);
        bwd_states[i] = h.clone();
    }
    (0..n)
        .map(|i| {
            let mut col = fwd_states[i].clone();
            col.extend(&bwd_states[i]);
            col
        })
        .collect()
}

fn attention_ref(cols: &[Vec<f64>], key: &[f64]) -> Vec<f64> {
    let scores: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().zip(key).map(|(a, b)| a * b).sum())
        .collect();
    let weights = softmax_ref(&scores);
    let d = cols[0].len();
    (0..d)
        .map(|i| cols.iter().zip(&weights).map(|(c, w)| c[i] * w).sum())
        .collect()
}

/// The per-slot turn features: pooled utterance, then action phrases pooled
/// individually and reweighted by agreement with the pooled utterance.
fn gae_ref(utt: &[Vec<f64>], phrases: &[Vec<Vec<f64>>], utt_key: &[f64], act_key: &[f64]) -> Vec<f64> {
    let pooled_utt = attention_ref(utt, utt_key);
    let width = pooled_utt.len();
    let pooled_act = if phrases.is_empty() {
        vec![0.0; width]
    } else {
        let pooled: Vec<Vec<f64>> = phrases.iter().map(|p| attention_ref(p, act_key)).collect();
        let scores: Vec<f64> = pooled
            .iter()
            .map(|c| c.iter().zip(&pooled_utt).map(|(a, b)| a * b).sum())
            .collect();
        let weights = softmax_ref(&scores);
        (0..width)
            .map(|i| pooled.iter().zip(&weights).map(|(c, w)| c[i] * w).sum())
            .collect()
    };
    let mut z = pooled_utt;
    z.extend(pooled_act);
    z
}

// --- harness ----------------------------------------------------------------

fn rand_vec(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rand_gru_tensors(rng: &mut ChaCha20Rng, input: usize, hidden: usize) -> Vec<Tensor> {
    let m = |r: usize, c: usize, rng: &mut ChaCha20Rng| {
        Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-0.8..0.8)).collect())
    };
    let mut out = vec![
        m(hidden, input, rng),
        m(hidden, input, rng),
        m(hidden, input, rng),
        m(hidden, hidden, rng),
        m(hidden, hidden, rng),
        m(hidden, hidden, rng),
    ];
    for _ in 0..3 {
        out.push(Tensor::vector(rand_vec(rng, hidden)));
    }
    out
}

fn gru_leaves(tape: &mut Tape, p: &[Tensor], hidden: usize) -> GruNodes {
    let l: Vec<NodeId> = p.iter().map(|t| tape.leaf(t.clone())).collect();
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

fn assert_close(got: &[f64], want: &[f64], what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: length");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() < TOL, "{what}: element {i}: {g} vs {w}");
    }
}

/// Reads the matrix column `j` out of a tape node.
fn column(t: &Tensor, j: usize) -> Vec<f64> {
    (0..t.rows()).map(|i| t.at(i, j)).collect()
}

// --- agreement tests ---------------------------------------------------------

#[test]
fn recurrent_cell_agrees_with_plain_reimplementation() {
    for seed in 0..50 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = rand_gru_tensors(&mut rng, 3, 4);
        let x = rand_vec(&mut rng, 3);
        let h = rand_vec(&mut rng, 4);
        let want = gru_ref(&p, &x, &h);

        let mut tape = Tape::new();
        let g = gru_leaves(&mut tape, &p, 4);
        let xn = tape.leaf(Tensor::vector(x.clone()));
        let hn = tape.leaf(Tensor::vector(h.clone()));
        let out = encoder::gru_cell(&mut tape, &g, xn, hn).unwrap();
        assert_close(tape.value(out).data(), &want, "gru_cell");
    }
}

#[test]
fn sequence_encoding_agrees_with_plain_reimplementation() {
    for seed in 0..50 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let fwd = rand_gru_tensors(&mut rng, 2, 3);
        let bwd = rand_gru_tensors(&mut rng, 2, 3);
        let n = rng.gen_range(1..=6);
        let embeds: Vec<Vec<f64>> = (0..n).map(|_| rand_vec(&mut rng, 2)).collect();
        let want = encode_ref(&fwd, &bwd, &embeds, 3);

        let mut tape = Tape::new();
        let f = gru_leaves(&mut tape, &fwd, 3);
        let b = gru_leaves(&mut tape, &bwd, 3);
        let nodes: Vec<NodeId> = embeds
            .iter()
            .map(|e| tape.leaf(Tensor::vector(e.clone())))
            .collect();
        let m = encoder::encode_sequence(&mut tape, &f, &b, &nodes).unwrap();
        let got = tape.value(m);
        assert_eq!(got.dims(), &[6, n]);
        for j in 0..n {
            assert_close(&column(got, j), &want[j], "encode_sequence column");
        }
    }
}

#[test]
fn attention_pooling_agrees_with_plain_reimplementation() {
    for seed in 0..50 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=6);
        let cols: Vec<Vec<f64>> = (0..n).map(|_| rand_vec(&mut rng, d)).collect();
        let key = rand_vec(&mut rng, d);
        let want = attention_ref(&cols, &key);

        let mut tape = Tape::new();
        let mut flat = Vec::with_capacity(d * n);
        for i in 0..d {
            for col in &cols {
                flat.push(col[i]);
            }
        }
        let m = tape.leaf(Tensor::matrix(d, n, flat));
        let k = tape.leaf(Tensor::vector(key.clone()));
        let pooled = encoder::attention_pool(&mut tape, m, k).unwrap();
        assert_close(tape.value(pooled).data(), &want, "attention_pool");
    }
}

#[test]
fn slot_features_agree_with_plain_reimplementation() {
    for seed in 0..50 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = 4;
        let utt_len = rng.gen_range(1..=5);
        let n_phrases = rng.gen_range(0..=3);
        let utt: Vec<Vec<f64>> = (0..utt_len).map(|_| rand_vec(&mut rng, d)).collect();
        let phrases: Vec<Vec<Vec<f64>>> = (0..n_phrases)
            .map(|_| {
                let len = rng.gen_range(1..=4);
                (0..len).map(|_| rand_vec(&mut rng, d)).collect()
            })
            .collect();
        let utt_key = rand_vec(&mut rng, d);
        let act_key = rand_vec(&mut rng, d);
        let want = gae_ref(&utt, &phrases, &utt_key, &act_key);

        let mut tape = Tape::new();
        let pack = |tape: &mut Tape, cols: &[Vec<f64>]| -> NodeId {
            let mut flat = Vec::with_capacity(d * cols.len());
            for i in 0..d {
                for col in cols {
                    flat.push(col[i]);
                }
            }
            tape.leaf(Tensor::matrix(d, cols.len(), flat))
        };
        let u = pack(&mut tape, &utt);
        let pm: Vec<NodeId> = phrases.iter().map(|p| pack(&mut tape, p)).collect();
        let uk = tape.leaf(Tensor::vector(utt_key.clone()));
        let ak = tape.leaf(Tensor::vector(act_key.clone()));
        let enc = encoder::gae_for_slot(&mut tape, u, &pm, uk, ak).unwrap();
        assert_close(tape.value(enc.features).data(), &want, "gae_for_slot");
    }
}

// --- structural checks on the full model -------------------------------------

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

/// Every distribution node a forward pass produced, flattened per slot.
fn dist_values(tape: &Tape, fwd: &DialogueForward) -> Vec<Vec<Vec<f64>>> {
    fwd.slots
        .iter()
        .map(|sf| {
            sf.turns
                .iter()
                .flat_map(|tn| [tn.label_dist, tn.state_dist])
                .flatten()
                .map(|n| tape.value(n).data().to_vec())
                .collect()
        })
        .collect()
}

#[test]
fn forward_distributions_are_normalized_and_finite_across_seeds() {
    let ont = default_ontology();
    let corpus = generate_corpus(
        &ont,
        &SynthConfig { n_dialogues: 6, seed: 3, ..SynthConfig::default() },
    )
    .unwrap();
    let vocab = Vocab::from_dialogues(&corpus).unwrap();
    let dims = ModelDims { embedding: 4, encoder_hidden: 6, history_hidden: 5 };
    for seed in 0..5 {
        let mut store = ParamStore::new();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let layout = ModelLayout::build(&mut store, &mut rng, &ont, &vocab, dims).unwrap();
        for variant in Variant::ALL {
            for dlg in &corpus {
                let mut tape = Tape::new();
                let fwd =
                    forward_dialogue(&mut tape, &store, &layout, variant, dlg, &vocab).unwrap();
                for (slot_idx, slot) in dist_values(&tape, &fwd).iter().enumerate() {
                    let n_values = ont.value_count(SlotId(slot_idx));
                    for dist in slot {
                        assert_eq!(dist.len(), n_values);
                        assert!(dist.iter().all(|p| p.is_finite() && *p >= 0.0));
                        let total: f64 = dist.iter().sum();
                        assert!(
                            (total - 1.0).abs() < 1e-9,
                            "{variant} {}: distribution sums to {total}",
                            dlg.id
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn perturbing_one_slots_key_leaves_other_slots_unchanged() {
    let ont = toy_ontology();
    let dlg = toy_dialogue(&ont);
    let vocab = Vocab::from_dialogues(std::slice::from_ref(&dlg)).unwrap();
    let dims = ModelDims { embedding: 4, encoder_hidden: 6, history_hidden: 5 };
    let mut store = ParamStore::new();
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let layout = ModelLayout::build(&mut store, &mut rng, &ont, &vocab, dims).unwrap();

    let run = |store: &ParamStore| {
        let mut tape = Tape::new();
        let fwd = forward_dialogue(&mut tape, store, &layout, Variant::Ten, &dlg, &vocab).unwrap();
        dist_values(&tape, &fwd)
    };
    let before = run(&store);
    store.get_mut(layout.slots[1].utt_key).data_mut()[0] += 0.25;
    let after = run(&store);

    assert_eq!(before[0], after[0], "slot 0 must not see slot 1's key");
    let moved = before[1]
        .iter()
        .zip(&after[1])
        .flat_map(|(b, a)| b.iter().zip(a))
        .any(|(b, a)| (b - a).abs() > 1e-9);
    assert!(moved, "slot 1's own distributions should respond to its key");
}

#[test]
fn perturbing_a_shared_encoder_weight_moves_every_slot() {
    let ont = toy_ontology();
    let dlg = toy_dialogue(&ont);
    let vocab = Vocab::from_dialogues(std::slice::from_ref(&dlg)).unwrap();
    let dims = ModelDims { embedding: 4, encoder_hidden: 6, history_hidden: 5 };
    let mut store = ParamStore::new();
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let layout = ModelLayout::build(&mut store, &mut rng, &ont, &vocab, dims).unwrap();

    let run = |store: &ParamStore| {
        let mut tape = Tape::new();
        let fwd = forward_dialogue(&mut tape, store, &layout, Variant::Ten, &dlg, &vocab).unwrap();
        dist_values(&tape, &fwd)
    };
    let before = run(&store);
    store.get_mut(layout.utt_fwd.w_update).data_mut()[0] += 0.25;
    let after = run(&store);

    for slot_idx in 0..2 {
        let moved = before[slot_idx]
            .iter()
            .zip(&after[slot_idx])
            .flat_map(|(b, a)| b.iter().zip(a))
            .any(|(b, a)| (b - a).abs() > 1e-9);
        assert!(moved, "slot {slot_idx} should depend on the shared utterance encoder");
    }
}
