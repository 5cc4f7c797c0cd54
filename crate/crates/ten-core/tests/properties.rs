//! Randomized invariants: the state-update algebra, label derivation round
//! trips, the soft aggregation chain against brute-force enumeration,
//! vocabulary round trips, argmax tie-breaking, and validity of every
//! generated corpus.

use proptest::prelude::*;

use ten_core::bp::{brute_force_marginal, run_chain};
use ten_core::dist::DiscreteDist;
use ten_core::state::{
    aggregate_state, aggregate_value, derive_turn_labels, fold_labels, indicator_g, Ontology,
    SlotId, StateConfig, ValueId, UNKNOWN,
};
use ten_core::synth::{default_ontology, generate_corpus, SynthConfig};
use ten_core::vocab::Vocab;

/// One to three slots with one to four declared values each (the implicit
/// `unknown` comes on top).
fn small_ontology() -> impl Strategy<Value = Ontology> {
    proptest::collection::vec(1..=4usize, 1..=3).prop_map(|counts| {
        let slots = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| (format!("slot{i}"), (0..n).map(|v| format!("v{v}")).collect()))
            .collect();
        Ontology::new(slots).unwrap()
    })
}

/// An ontology plus one to six turn labels, each slot drawn over its full
/// value range including `unknown`.
fn ontology_and_labels() -> impl Strategy<Value = (Ontology, Vec<StateConfig>)> {
    small_ontology()
        .prop_flat_map(|ont| {
            let n_slots = ont.slot_count();
            let raw = proptest::collection::vec(
                proptest::collection::vec(any::<u8>(), n_slots),
                1..=6,
            );
            (Just(ont), raw)
        })
        .prop_map(|(ont, raw)| {
            let counts: Vec<usize> =
                ont.slot_ids().map(|s| ont.value_count(s)).collect();
            let labels = raw
                .into_iter()
                .map(|turn| {
                    StateConfig::from_values(
                        turn.into_iter()
                            .zip(&counts)
                            .map(|(r, &n)| ValueId(r as usize % n))
                            .collect(),
                    )
                })
                .collect();
            (ont, labels)
        })
}

/// An ontology, a slot of it, and one to five normalized distributions over
/// that slot's values.
fn slot_and_alphas() -> impl Strategy<Value = (Ontology, SlotId, Vec<Vec<f64>>)> {
    small_ontology()
        .prop_flat_map(|ont| {
            let n_slots = ont.slot_count();
            (Just(ont), 0..n_slots)
        })
        .prop_flat_map(|(ont, slot_idx)| {
            let n_values = ont.value_count(SlotId(slot_idx));
            let alphas = proptest::collection::vec(
                proptest::collection::vec(0.01..1.0f64, n_values),
                1..=5,
            );
            (Just(ont), Just(SlotId(slot_idx)), alphas)
        })
        .prop_map(|(ont, slot, raw)| {
            let alphas = raw
                .into_iter()
                .map(|mut w| {
                    let z: f64 = w.iter().sum();
                    for p in &mut w {
                        *p /= z;
                    }
                    w
                })
                .collect();
            (ont, slot, alphas)
        })
}

proptest! {
    #[test]
    fn update_operator_is_associative_with_unknown_as_right_identity(
        (ont, labels) in ontology_and_labels(),
        raw_slot in any::<u8>(),
    ) {
        let slot = SlotId(raw_slot as usize % ont.slot_count());
        let pick = |t: usize| labels[t % labels.len()].get(slot);
        let (a, b, c) = (pick(0), pick(1), pick(2));
        let ab = aggregate_value(&ont, slot, a, b).unwrap();
        let bc = aggregate_value(&ont, slot, b, c).unwrap();
        prop_assert_eq!(
            aggregate_value(&ont, slot, ab, c).unwrap(),
            aggregate_value(&ont, slot, a, bc).unwrap()
        );
        prop_assert_eq!(aggregate_value(&ont, slot, a, UNKNOWN).unwrap(), a);
        if b != UNKNOWN {
            prop_assert_eq!(aggregate_value(&ont, slot, a, b).unwrap(), b);
        }
    }

    #[test]
    fn state_update_keeps_old_on_unknown_and_takes_new_otherwise(
        (ont, labels) in ontology_and_labels(),
    ) {
        let x = &labels[0];
        let y = labels.get(1).cloned().unwrap_or_else(|| StateConfig::all_unknown(&ont));
        let folded = aggregate_state(&ont, x, &y).unwrap();
        for slot in ont.slot_ids() {
            let want = if y.get(slot) == UNKNOWN { x.get(slot) } else { y.get(slot) };
            prop_assert_eq!(folded.get(slot), want);
        }
        let nothing = StateConfig::all_unknown(&ont);
        prop_assert_eq!(&aggregate_state(&ont, x, &nothing).unwrap(), x);
        prop_assert_eq!(&aggregate_state(&ont, &nothing, x).unwrap(), x);
    }

    #[test]
    fn folding_derived_labels_reproduces_the_state_sequence(
        (ont, labels) in ontology_and_labels(),
    ) {
        let states = fold_labels(&ont, &labels).unwrap();
        let minimal = derive_turn_labels(&ont, &states).unwrap();
        let refolded = fold_labels(&ont, &minimal).unwrap();
        prop_assert_eq!(&refolded, &states);
        // Minimality: a derived non-unknown label always marks a change.
        let mut prev = StateConfig::all_unknown(&ont);
        for (t, y) in minimal.iter().enumerate() {
            for slot in ont.slot_ids() {
                if y.get(slot) != UNKNOWN {
                    prop_assert_ne!(prev.get(slot), states[t].get(slot));
                }
            }
            prev = states[t].clone();
        }
    }

    #[test]
    fn chain_factor_has_exactly_one_successor(
        (ont, labels) in ontology_and_labels(),
        raw_slot in any::<u8>(),
    ) {
        let slot = SlotId(raw_slot as usize % ont.slot_count());
        let n = ont.value_count(slot);
        let v_prev = labels[0].get(slot);
        let v_label = labels[labels.len() - 1].get(slot);
        let successors = (0..n)
            .filter(|&v| indicator_g(&ont, slot, v_prev, v_label, ValueId(v)).unwrap())
            .count();
        prop_assert_eq!(successors, 1);
    }

    #[test]
    fn soft_chain_marginals_match_brute_force_enumeration(
        (ont, slot, alphas) in slot_and_alphas(),
    ) {
        let dists: Vec<DiscreteDist> = alphas
            .into_iter()
            .map(|p| DiscreteDist::new(slot, p).unwrap())
            .collect();
        let trace = run_chain(&ont, slot, &dists).unwrap();
        let marginals = trace.marginals();
        for t in 1..=dists.len() {
            let want = brute_force_marginal(&ont, slot, &dists, t).unwrap();
            for (a, b) in marginals[t - 1].probs().iter().zip(want.probs()) {
                prop_assert!((a - b).abs() < 1e-9, "turn {}: {} vs {}", t, a, b);
            }
        }
    }

    #[test]
    fn vocabulary_round_trips_and_routes_unseen_tokens_to_the_reserved_index(
        tokens in proptest::collection::vec("[a-z]{1,8}", 1..20),
    ) {
        let v = Vocab::from_tokens(tokens.iter().map(String::as_str)).unwrap();
        for t in &tokens {
            let i = v.index_of(t);
            prop_assert!(i > 0);
            prop_assert_eq!(v.token(i), t);
        }
        let restored = Vocab::from_saved(v.tokens().to_vec()).unwrap();
        prop_assert_eq!(&restored, &v);
        prop_assert_eq!(v.index_of("7-unseen"), 0);
        prop_assert_eq!(v.lookup("7-unseen"), None);
    }

    #[test]
    fn argmax_breaks_exact_ties_toward_the_lowest_index(
        weights in proptest::collection::vec(0..4u32, 2..6),
    ) {
        prop_assume!(weights.iter().any(|&w| w > 0));
        let z: f64 = weights.iter().map(|&w| w as f64).sum();
        let probs: Vec<f64> = weights.iter().map(|&w| w as f64 / z).collect();
        let d = DiscreteDist::new(SlotId(0), probs.clone()).unwrap();
        let mut manual = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[manual] {
                manual = i;
            }
        }
        prop_assert_eq!(d.argmax(), ValueId(manual));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_generated_corpus_validates_against_its_ontology(
        seed in any::<u64>(),
        n_dialogues in 1..4usize,
        p_inform in 0.0..=1.0f64,
        p_confirm in 0.0..=1.0f64,
        p_noise in 0.0..=1.0f64,
        p_silent in 0.0..=1.0f64,
        min_turns in 1..=4usize,
        extra_turns in 0..=5usize,
    ) {
        let ont = default_ontology();
        let config = SynthConfig {
            seed,
            n_dialogues,
            min_turns,
            max_turns: min_turns + extra_turns,
            p_inform,
            p_confirm,
            p_noise,
            p_silent,
        };
        match generate_corpus(&ont, &config) {
            Ok(corpus) => {
                prop_assert_eq!(corpus.len(), n_dialogues);
                for d in &corpus {
                    prop_assert!(d.validate(&ont).is_ok(), "{} fails validation", d.id);
                    prop_assert!(d.turns.len() >= config.min_turns);
                    prop_assert!(d.turns.len() <= config.max_turns);
                    for turn in &d.turns {
                        prop_assert!(!turn.utterance.is_empty());
                        prop_assert!(turn.gold_label.is_some());
                        prop_assert!(turn.action.iter().all(|p| !p.is_empty()));
                    }
                }
            }
            // The only legitimate rejection here is a turn budget too small
            // for the slot count.
            Err(e) => {
                let msg = e.to_string();
                prop_assert!(msg.contains("turn"), "unexpected failure: {}", msg);
            }
        }
    }
}
