//! `ten predict` — runs a checkpoint over a corpus and writes the
//! predicted states (and turn labels, when the variant produces them) in
//! corpus format, marked as predictions so they cannot be mistaken for
//! gold annotation.

use std::path::PathBuf;

use clap::Args;
use ten_core::dialogue::{Dialogue, Turn};
use ten_core::model::forward_dialogue;
use ten_core::predict::predict_dialogue;
use ten_core::tape::Tape;

use crate::commands::eval::resolve_corpus;
use crate::config::{self, FileConfig, PathsSection};
use crate::error::CliError;
use crate::formats::checkpoint::{self, LoadedModel};
use crate::formats::corpus;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// TOML config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trained model file to predict with.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Corpus to annotate; overrides --split.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Which configured corpus to annotate when --corpus is absent:
    /// train, dev or test.
    #[arg(long)]
    pub split: Option<String>,
    /// Output directory for predictions.jsonl and resolved.toml.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: PredictArgs) -> Result<(), CliError> {
    let cfg = config::load_config(args.config.as_deref())?;
    let ck_path = config::require(args.checkpoint, cfg.paths.checkpoint.clone(), "--checkpoint")?;
    let corpus_path = resolve_corpus(args.corpus, args.split.as_deref(), &cfg)?;
    let out = config::require(args.out, cfg.paths.out_dir.clone(), "--out")?;

    let model: LoadedModel = checkpoint::load_model(&ck_path)?;
    let dialogues = corpus::read_gold_corpus(&corpus_path, &model.ontology)?;

    let mut predicted = Vec::with_capacity(dialogues.len());
    let mut with_labels = false;
    for d in &dialogues {
        let mut tape = Tape::new();
        let fwd = forward_dialogue(
            &mut tape,
            &model.store,
            &model.layout,
            model.variant,
            d,
            &model.vocab,
        )?;
        let pred = predict_dialogue(&tape, &fwd, model.variant, &model.ontology)?;
        with_labels = pred.labels.is_some();
        let turns = d
            .turns
            .iter()
            .enumerate()
            .map(|(t, turn)| Turn {
                action: turn.action.clone(),
                utterance: turn.utterance.clone(),
                gold_state: pred.states[t].clone(),
                gold_label: pred.labels.as_ref().map(|l| l[t].clone()),
            })
            .collect();
        predicted.push(Dialogue {
            id: d.id.clone(),
            turns,
            // Without a label head there is nothing annotated per turn;
            // mark the labels as derivable from the states.
            labels_derived: pred.labels.is_none(),
        });
    }

    config::ensure_out_dir(&out)?;
    let pred_path = out.join("predictions.jsonl");
    corpus::write_corpus(&pred_path, &model.ontology, &predicted, true)?;
    config::write_resolved(
        &out,
        &FileConfig {
            paths: PathsSection {
                checkpoint: Some(ck_path),
                input: Some(corpus_path),
                out_dir: Some(out.clone()),
                ..Default::default()
            },
            ..Default::default()
        },
    )?;

    println!(
        "predicted states{} for {} dialogue(s) with {}; wrote {}",
        if with_labels { " and turn labels" } else { "" },
        predicted.len(),
        model.variant,
        pred_path.display()
    );
    Ok(())
}
