//! `ten train` — fits one model variant on a training corpus, tracks a
//! validation split, and writes the best checkpoint plus a per-epoch
//! metric log.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use ten_core::model::{ModelDims, Variant};
use ten_core::trainer::{train, SplitMetrics, TrainConfig, TrainInputs, TrainOutcome};
use ten_core::vocab::Vocab;

use crate::config::{self, FileConfig, ModelSection, PathsSection, TrainSection};
use crate::error::CliError;
use crate::formats::checkpoint::{self, Checkpoint};
use crate::formats::{corpus, embedding, ontology};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ontology JSON the corpora are annotated against.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Training corpus (JSON Lines).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation corpus for early stopping and best-epoch selection.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Output directory for checkpoint.ckpt, train_log.csv and
    /// resolved.toml.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model family member: ten, ten-x, ten-y or ten-xh.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop after this many consecutive epochs without validation
    /// improvement.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Token embedding width.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Total bidirectional encoder width (split across two directions).
    #[arg(long)]
    pub encoder_hidden: Option<usize>,
    /// History state width.
    #[arg(long)]
    pub history_hidden: Option<usize>,
    /// Pre-trained embedding file overriding random rows.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Checkpoint whose parameters seed this run (name-matched).
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
}

fn metric_cell(r: Option<ten_core::metrics::Ratio>) -> String {
    match r {
        Some(ratio) => format!("{:.6}", ratio.value()),
        None => String::new(),
    }
}

fn log_row(out: &mut String, epoch: usize, split: &str, m: &SplitMetrics) {
    out.push_str(&format!(
        "{epoch},{split},{:.6},{:.6},{}\n",
        m.loss,
        m.state_joint.value(),
        metric_cell(m.label_joint),
    ));
}

fn write_train_log(path: &std::path::Path, outcome: &TrainOutcome) -> Result<(), CliError> {
    let mut out = String::from("epoch,split,loss,joint_goal_accuracy,turn_level_accuracy\n");
    for record in &outcome.history {
        if let Some(m) = &record.train {
            log_row(&mut out, record.epoch, "train", m);
        }
        if let Some(m) = &record.validation {
            log_row(&mut out, record.epoch, "dev", m);
        }
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let cfg = config::load_config(args.config.as_deref())?;
    let out = config::require(args.out, cfg.paths.out_dir.clone(), "--out")?;
    let ontology_path =
        config::require(args.ontology, cfg.paths.ontology.clone(), "--ontology")?;
    let train_path = config::require(args.train, cfg.paths.train.clone(), "--train")?;
    let dev_path = args.dev.or_else(|| cfg.paths.dev.clone());
    let embeddings_path = args.embeddings.or_else(|| cfg.paths.embeddings.clone());
    let warm_start_path = args.warm_start.or_else(|| cfg.paths.warm_start.clone());

    let variant_str =
        config::require(args.variant, cfg.model.variant.clone(), "--variant")?;
    let variant = Variant::parse(&variant_str).map_err(|e| CliError::usage(e.to_string()))?;

    let dim_defaults = ModelDims::default();
    let dims = ModelDims {
        embedding: config::pick(args.embedding_dim, cfg.model.embedding, dim_defaults.embedding),
        encoder_hidden: config::pick(
            args.encoder_hidden,
            cfg.model.encoder_hidden,
            dim_defaults.encoder_hidden,
        ),
        history_hidden: config::pick(
            args.history_hidden,
            cfg.model.history_hidden,
            dim_defaults.history_hidden,
        ),
    };
    let base = TrainConfig::new(variant);
    let train_config = TrainConfig {
        variant,
        epochs: config::pick(args.epochs, cfg.train.epochs, base.epochs),
        learning_rate: config::pick(args.learning_rate, cfg.train.learning_rate, base.learning_rate),
        seed: config::pick(args.seed, cfg.train.seed, base.seed),
        dims,
        patience: args.patience.or(cfg.train.patience),
    };

    let ont = ontology::read_ontology(&ontology_path)?;
    let train_set = corpus::read_gold_corpus(&train_path, &ont)?;
    let dev_set = match &dev_path {
        Some(p) => corpus::read_gold_corpus(p, &ont)?,
        None => Vec::new(),
    };
    let embeddings = match &embeddings_path {
        Some(p) => Some(embedding::read_embeddings(p)?),
        None => None,
    };
    let warm = match &warm_start_path {
        Some(p) => Some(load_warm_start(p, &ont, &train_set, dims)?),
        None => None,
    };

    let inputs = TrainInputs {
        ontology: &ont,
        train: &train_set,
        validation: &dev_set,
        warm_start: warm.as_deref(),
        embeddings: embeddings.as_ref(),
    };
    let outcome = train(&train_config, &inputs)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }

    config::ensure_out_dir(&out)?;
    let ck = checkpoint::checkpoint_of(variant, dims, &ont, &outcome.vocab, &outcome.layout, &outcome.store);
    let ck_path = out.join("checkpoint.ckpt");
    checkpoint::write_checkpoint(&ck_path, &ck)?;
    write_train_log(&out.join("train_log.csv"), &outcome)?;

    let resolved = FileConfig {
        paths: PathsSection {
            ontology: Some(ontology_path),
            train: Some(train_path),
            dev: dev_path,
            out_dir: Some(out.clone()),
            embeddings: embeddings_path,
            warm_start: warm_start_path,
            ..Default::default()
        },
        model: ModelSection {
            variant: Some(variant.as_str().to_string()),
            embedding: Some(dims.embedding),
            encoder_hidden: Some(dims.encoder_hidden),
            history_hidden: Some(dims.history_hidden),
        },
        train: TrainSection {
            epochs: Some(train_config.epochs),
            learning_rate: Some(train_config.learning_rate),
            seed: Some(train_config.seed),
            patience: train_config.patience,
        },
        ..Default::default()
    };
    config::write_resolved(&out, &resolved)?;

    let kept = outcome
        .history
        .iter()
        .find(|r| r.epoch == outcome.kept_epoch)
        .and_then(|r| r.validation.as_ref())
        .map(|m| format!(", validation joint accuracy {:.4}", m.state_joint.value()))
        .unwrap_or_default();
    println!(
        "trained {variant} for {} epoch(s); kept epoch {}{kept}; checkpoint at {}",
        outcome.history.last().map_or(0, |r| r.epoch),
        outcome.kept_epoch,
        ck_path.display()
    );
    Ok(())
}

/// Reads a warm-start checkpoint and insists it indexes the world the same
/// way this run does: same ontology, same training vocabulary, same
/// widths. Anything else would silently misalign rows of the copied
/// tensors.
fn load_warm_start(
    path: &std::path::Path,
    ont: &ten_core::state::Ontology,
    train_set: &[ten_core::dialogue::Dialogue],
    dims: ModelDims,
) -> Result<Vec<(String, ten_core::tensor::Tensor)>, CliError> {
    let ck: Checkpoint = checkpoint::read_checkpoint(path)?;
    if ck.dims != dims {
        return Err(CliError::data(
            path,
            format!(
                "checkpoint dims ({}, {}, {}) differ from this run's ({}, {}, {})",
                ck.dims.embedding,
                ck.dims.encoder_hidden,
                ck.dims.history_hidden,
                dims.embedding,
                dims.encoder_hidden,
                dims.history_hidden
            ),
        ));
    }
    let declared: Vec<(String, Vec<String>)> = ont
        .slot_ids()
        .map(|s| (ont.slot_name(s).to_string(), ont.declared_values(s).to_vec()))
        .collect();
    if ck.ontology != declared {
        return Err(CliError::data(
            path,
            "checkpoint was trained against a different ontology".to_string(),
        ));
    }
    let vocab = Vocab::from_dialogues(train_set)
        .map_err(|e| CliError::data_no_path(e.to_string()))?;
    if ck.vocab != vocab.tokens() {
        return Err(CliError::data(
            path,
            "checkpoint vocabulary differs from this training corpus's; \
             warm starting would misalign embedding rows",
        ));
    }
    Ok(ck.params)
}
