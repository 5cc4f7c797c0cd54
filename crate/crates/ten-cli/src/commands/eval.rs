//! `ten eval` — scores a checkpoint against a gold corpus and writes
//! overall, per-slot and per-turn accuracy tables.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ten_core::trainer::{evaluate_corpus, EvalStats};

use crate::config::{self, FileConfig, PathsSection};
use crate::error::CliError;
use crate::formats::checkpoint::{self, LoadedModel};
use crate::formats::corpus;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// TOML config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trained model file to score.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Corpus to score against; overrides --split.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Which configured corpus to score when --corpus is absent:
    /// train, dev or test.
    #[arg(long)]
    pub split: Option<String>,
    /// Output directory for the metric tables and resolved.toml.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Picks the corpus to score: explicit path first, then the `input` key a
/// previous run echoed, then the named split from the config's paths.
pub fn resolve_corpus(
    flag: Option<PathBuf>,
    split: Option<&str>,
    cfg: &FileConfig,
) -> Result<PathBuf, CliError> {
    if let Some(p) = flag {
        return Ok(p);
    }
    if split.is_none() {
        if let Some(p) = &cfg.paths.input {
            return Ok(p.clone());
        }
    }
    let split = split.unwrap_or("test");
    let from_cfg = match split {
        "train" => &cfg.paths.train,
        "dev" => &cfg.paths.dev,
        "test" => &cfg.paths.test,
        other => {
            return Err(CliError::usage(format!(
                "unknown split {other:?}; expected train, dev or test"
            )))
        }
    };
    from_cfg.clone().ok_or_else(|| {
        CliError::usage(format!(
            "no corpus given: pass --corpus, or --split {split} with a config that sets paths.{split}"
        ))
    })
}

fn cell(v: f64) -> String {
    format!("{v:.6}")
}

fn write_overall(path: &Path, stats: &EvalStats) -> Result<(), CliError> {
    let mut out = String::from("metric,value\n");
    out.push_str(&format!("dialogues,{}\n", stats.dialogues));
    out.push_str(&format!("mean_loss,{}\n", cell(stats.mean_loss)));
    out.push_str(&format!("clamped_terms,{}\n", stats.clamped));
    out.push_str(&format!(
        "joint_goal_accuracy,{}\n",
        cell(stats.state_joint.value())
    ));
    if let Some(label) = stats.label_joint {
        out.push_str(&format!("turn_level_accuracy,{}\n", cell(label.value())));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

fn write_per_slot(
    path: &Path,
    ont: &ten_core::state::Ontology,
    stats: &EvalStats,
) -> Result<(), CliError> {
    let mut out = String::from("slot,state_accuracy,label_accuracy\n");
    for (i, slot) in ont.slot_ids().enumerate() {
        let label = match &stats.label_per_slot {
            Some(per) => cell(per[i].value()),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{label}\n",
            ont.slot_name(slot),
            cell(stats.state_per_slot[i].value()),
        ));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

fn write_per_turn(path: &Path, stats: &EvalStats) -> Result<(), CliError> {
    let mut out = String::from("turn,joint_goal_accuracy,hits,total\n");
    for (i, ratio) in stats.state_per_turn.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            cell(ratio.value()),
            ratio.hits,
            ratio.total,
        ));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let cfg = config::load_config(args.config.as_deref())?;
    let ck_path = config::require(args.checkpoint, cfg.paths.checkpoint.clone(), "--checkpoint")?;
    let corpus_path = resolve_corpus(args.corpus, args.split.as_deref(), &cfg)?;
    let out = config::require(args.out, cfg.paths.out_dir.clone(), "--out")?;

    let model: LoadedModel = checkpoint::load_model(&ck_path)?;
    let dialogues = corpus::read_gold_corpus(&corpus_path, &model.ontology)?;
    let stats = evaluate_corpus(
        &model.store,
        &model.layout,
        model.variant,
        &model.vocab,
        &model.ontology,
        &dialogues,
    )?;

    config::ensure_out_dir(&out)?;
    write_overall(&out.join("metrics_overall.csv"), &stats)?;
    write_per_slot(&out.join("metrics_per_slot.csv"), &model.ontology, &stats)?;
    write_per_turn(&out.join("metrics_per_turn.csv"), &stats)?;
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

    let label = match stats.label_joint {
        Some(r) => format!(", turn-level accuracy {:.4}", r.value()),
        None => String::new(),
    };
    println!(
        "evaluated {} on {} dialogue(s): joint goal accuracy {:.4}{label}; tables in {}",
        model.variant,
        stats.dialogues,
        stats.state_joint.value(),
        out.display()
    );
    Ok(())
}
