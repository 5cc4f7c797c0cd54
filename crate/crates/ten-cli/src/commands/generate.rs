//! `ten generate` — builds a seeded synthetic corpus, splits it 60/20/20,
//! and writes an output directory holding the ontology actually used, the
//! three splits, and the resolved settings.

use std::path::PathBuf;

use clap::Args;
use ten_core::synth::{default_ontology, generate_corpus, split_corpus, SynthConfig, SynthError};

use crate::config::{self, FileConfig, SynthSection};
use crate::error::CliError;
use crate::formats::{corpus, ontology};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ontology JSON to generate against (default: the built-in one).
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Output directory for ontology.json, train/dev/test.jsonl and
    /// resolved.toml.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_dialogues: Option<usize>,
    #[arg(long)]
    pub min_turns: Option<usize>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    /// Probability that an inform turn is user-initiated rather than an
    /// answer to a system request.
    #[arg(long)]
    pub p_inform: Option<f64>,
    /// Per-slot probability of an ambiguous confirmation sequence instead
    /// of a plain inform.
    #[arg(long)]
    pub p_confirm: Option<f64>,
    /// Probability of splicing distractor tokens into a user utterance.
    #[arg(long)]
    pub p_noise: Option<f64>,
    /// Probability of inserting a content-free filler turn.
    #[arg(long)]
    pub p_silent: Option<f64>,
}

/// Config problems are usage errors; an ontology that cannot support
/// generation is a data error.
fn map_synth_error(e: SynthError) -> CliError {
    match e {
        SynthError::BadProbability { .. }
        | SynthError::BadTurnRange { .. }
        | SynthError::Infeasible { .. } => CliError::usage(e.to_string()),
        _ => CliError::data_no_path(e.to_string()),
    }
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let cfg = config::load_config(args.config.as_deref())?;
    let out = config::require(args.out, cfg.paths.out_dir.clone(), "--out")?;

    let ontology_path = args.ontology.or_else(|| cfg.paths.ontology.clone());
    let ont = match &ontology_path {
        Some(p) => ontology::read_ontology(p)?,
        None => default_ontology(),
    };

    let defaults = SynthConfig::default();
    let synth = SynthConfig {
        seed: config::pick(args.seed, cfg.synth.seed, defaults.seed),
        n_dialogues: config::pick(args.n_dialogues, cfg.synth.n_dialogues, defaults.n_dialogues),
        min_turns: config::pick(args.min_turns, cfg.synth.min_turns, defaults.min_turns),
        max_turns: config::pick(args.max_turns, cfg.synth.max_turns, defaults.max_turns),
        p_inform: config::pick(args.p_inform, cfg.synth.p_inform, defaults.p_inform),
        p_confirm: config::pick(args.p_confirm, cfg.synth.p_confirm, defaults.p_confirm),
        p_noise: config::pick(args.p_noise, cfg.synth.p_noise, defaults.p_noise),
        p_silent: config::pick(args.p_silent, cfg.synth.p_silent, defaults.p_silent),
    };

    let dialogues = generate_corpus(&ont, &synth).map_err(map_synth_error)?;
    let split = split_corpus(dialogues);

    config::ensure_out_dir(&out)?;
    ontology::write_ontology(&out.join("ontology.json"), &ont)?;
    corpus::write_corpus(&out.join("train.jsonl"), &ont, &split.train, false)?;
    corpus::write_corpus(&out.join("dev.jsonl"), &ont, &split.dev, false)?;
    corpus::write_corpus(&out.join("test.jsonl"), &ont, &split.test, false)?;

    let resolved = FileConfig {
        paths: crate::config::PathsSection {
            ontology: ontology_path,
            out_dir: Some(out.clone()),
            ..Default::default()
        },
        synth: SynthSection {
            seed: Some(synth.seed),
            n_dialogues: Some(synth.n_dialogues),
            min_turns: Some(synth.min_turns),
            max_turns: Some(synth.max_turns),
            p_inform: Some(synth.p_inform),
            p_confirm: Some(synth.p_confirm),
            p_noise: Some(synth.p_noise),
            p_silent: Some(synth.p_silent),
        },
        ..Default::default()
    };
    config::write_resolved(&out, &resolved)?;

    println!(
        "wrote {} dialogues ({} train / {} dev / {} test) to {}",
        split.train.len() + split.dev.len() + split.test.len(),
        split.train.len(),
        split.dev.len(),
        split.test.len(),
        out.display()
    );
    Ok(())
}
