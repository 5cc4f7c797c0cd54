//! `ten inspect` — prints one dialogue's per-turn, per-slot distributions
//! and the two readings of the dialogue state: the hard fold of predicted
//! turn labels and the soft argmax of the aggregated state distribution.
//! Turns where the two disagree are flagged, since that disagreement is
//! exactly what separates distribution-level aggregation from label
//! folding. Writes no files.

use std::path::PathBuf;

use clap::Args;
use ten_core::dist::DiscreteDist;
use ten_core::model::forward_dialogue;
use ten_core::predict::predict_dialogue;
use ten_core::state::{fold_labels, Ontology, SlotId, StateConfig};
use ten_core::tape::Tape;

use crate::commands::eval::resolve_corpus;
use crate::config;
use crate::error::CliError;
use crate::formats::checkpoint::{self, LoadedModel};
use crate::formats::corpus;

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// TOML config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trained model file to inspect.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Corpus containing the dialogue; overrides --split.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Which configured corpus to search when --corpus is absent.
    #[arg(long)]
    pub split: Option<String>,
    /// Identifier of the dialogue to print.
    #[arg(long)]
    pub dialogue: String,
    /// How many values of each distribution to show.
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
}

fn dist_line(ont: &Ontology, slot: SlotId, dist: &DiscreteDist, k: usize) -> String {
    let entries: Vec<String> = dist
        .top_k(k)
        .into_iter()
        .map(|(v, p)| format!("{} {p:.4}", ont.value_name(slot, v)))
        .collect();
    entries.join(", ")
}

fn state_line(ont: &Ontology, config: &StateConfig) -> String {
    let parts: Vec<String> = ont
        .slot_ids()
        .map(|s| format!("{}={}", ont.slot_name(s), ont.value_name(s, config.get(s))))
        .collect();
    parts.join(", ")
}

pub fn run(args: InspectArgs) -> Result<(), CliError> {
    let cfg = config::load_config(args.config.as_deref())?;
    let ck_path = config::require(args.checkpoint, cfg.paths.checkpoint.clone(), "--checkpoint")?;
    let corpus_path = resolve_corpus(args.corpus, args.split.as_deref(), &cfg)?;
    if args.top_k == 0 {
        return Err(CliError::usage("--top-k must be at least 1"));
    }

    let model: LoadedModel = checkpoint::load_model(&ck_path)?;
    let dialogues = corpus::read_gold_corpus(&corpus_path, &model.ontology)?;
    let dlg = dialogues
        .iter()
        .find(|d| d.id == args.dialogue)
        .ok_or_else(|| {
            CliError::data(
                &corpus_path,
                format!("no dialogue with id {:?}", args.dialogue),
            )
        })?;

    let ont = &model.ontology;
    let mut tape = Tape::new();
    let fwd = forward_dialogue(&mut tape, &model.store, &model.layout, model.variant, dlg, &model.vocab)?;
    let pred = predict_dialogue(&tape, &fwd, model.variant, ont)?;
    // States read two ways: folding the hard per-turn labels, and taking
    // the argmax of the per-turn state distribution. Variants provide one
    // or both.
    let folded: Option<Vec<StateConfig>> = match &pred.labels {
        Some(labels) => Some(fold_labels(ont, labels).map_err(|e| CliError::data_no_path(e.to_string()))?),
        None => None,
    };
    let has_state_dist = pred.traces.first().is_some_and(|t| t.state_dists.is_some());
    let soft: Option<&Vec<StateConfig>> = has_state_dist.then_some(&pred.states);

    println!(
        "dialogue {:?} — {}, {} turn(s), {} slot(s)",
        dlg.id,
        model.variant,
        dlg.turns.len(),
        ont.slot_count()
    );
    for (t, turn) in dlg.turns.iter().enumerate() {
        println!();
        println!("turn {}", t + 1);
        if turn.action.is_empty() {
            println!("  system: (no action)");
        } else {
            let phrases: Vec<String> = turn.action.iter().map(|p| p.join(" ")).collect();
            println!("  system: {}", phrases.join(" | "));
        }
        println!("  user: {}", turn.utterance.join(" "));
        for slot in ont.slot_ids() {
            println!("  [{}]", ont.slot_name(slot));
            let trace = &pred.traces[slot.0];
            if let Some(label_dists) = &trace.label_dists {
                println!(
                    "    turn label: {}",
                    dist_line(ont, slot, &label_dists[t], args.top_k)
                );
            }
            if let Some(state_dists) = &trace.state_dists {
                println!(
                    "    state dist: {}  (unknown mass {:.4})",
                    dist_line(ont, slot, &state_dists[t], args.top_k),
                    state_dists[t].probs()[0]
                );
            }
            match (&folded, soft) {
                (Some(hard), Some(soft)) => {
                    let h = hard[t].get(slot);
                    let s = soft[t].get(slot);
                    let marker = if h == s { "" } else { "  <- states diverge" };
                    println!(
                        "    state: folded={} soft={}{marker}",
                        ont.value_name(slot, h),
                        ont.value_name(slot, s)
                    );
                }
                (Some(hard), None) => {
                    println!("    state: folded={}", ont.value_name(slot, hard[t].get(slot)));
                }
                (None, Some(soft)) => {
                    println!("    state: soft={}", ont.value_name(slot, soft[t].get(slot)));
                }
                (None, None) => {}
            }
        }
    }

    println!();
    let last = dlg.turns.len() - 1;
    match (&folded, soft) {
        (Some(hard), Some(soft)) => {
            println!("final state (folded labels): {}", state_line(ont, &hard[last]));
            println!("final state (soft argmax):   {}", state_line(ont, &soft[last]));
        }
        (Some(hard), None) => {
            println!("final state (folded labels): {}", state_line(ont, &hard[last]));
        }
        (None, Some(soft)) => {
            println!("final state (soft argmax): {}", state_line(ont, &soft[last]));
        }
        (None, None) => {}
    }
    Ok(())
}
