//! Training loop: per-dialogue Adam over a variant's objective, with
//! warm starting, optional pre-trained embeddings, validation tracking,
//! and early stopping.
//!
//! One call to [`train`] owns the whole recipe:
//!
//! 1. build the vocabulary from the training split and register all
//!    parameters with seeded initial values;
//! 2. overwrite embedding rows from a pre-trained table, if given;
//! 3. overwrite parameters from a warm-start snapshot, if given — this is
//!    how the chained-aggregation variant is normally started from a
//!    trained turn-label model, and it wins over step 2 where they overlap;
//! 4. record an epoch-0 validation row, then run shuffled epochs of
//!    per-dialogue forward / backward / Adam updates;
//! 5. after every epoch evaluate the validation split; keep a snapshot of
//!    the best validation joint accuracy and stop early when it has not
//!    improved for `patience` consecutive epochs;
//! 6. return the store holding the best epoch's parameters (the final
//!    epoch's when there is no validation data).
//!
//! Everything is deterministic given `(config, inputs)`: one seeded RNG
//! drives initialization and epoch shuffles, and dialogues are visited in
//! a reproducible order.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::adam::{AdamConfig, AdamError, AdamState};
use crate::dialogue::Dialogue;
use crate::loss::{dialogue_loss, LossError};
use crate::metrics::{joint_accuracy, per_slot_accuracy, per_turn_curve, MetricsError, Ratio};
use crate::model::{forward_dialogue, ModelDims, ModelError, ModelLayout, Variant};
use crate::params::{describe_apply, ParamError, ParamStore};
use crate::predict::{predict_dialogue, PredictError};
use crate::state::{Ontology, StateError};
use crate::tape::{Tape, TapeError};
use crate::tensor::Tensor;
use crate::vocab::{Vocab, VocabError};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub dims: ModelDims,
    /// Stop after this many consecutive epochs without a strict
    /// improvement in validation joint accuracy. `None` disables early
    /// stopping; it is also inert when the validation split is empty.
    pub patience: Option<usize>,
}

impl TrainConfig {
    pub fn new(variant: Variant) -> TrainConfig {
        TrainConfig {
            variant,
            epochs: 30,
            learning_rate: 1e-3,
            seed: 0,
            dims: ModelDims::default(),
            patience: None,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::BadConfig {
                reason: alloc::format!(
                    "learning_rate must be positive and finite, got {}",
                    self.learning_rate
                ),
            });
        }
        self.dims.validate().map_err(TrainError::Model)
    }
}

/// Data and optional parameter seeds for one training run.
pub struct TrainInputs<'a> {
    pub ontology: &'a Ontology,
    pub train: &'a [Dialogue],
    pub validation: &'a [Dialogue],
    /// Named tensors copied over the fresh initialization, typically a
    /// checkpoint of a compatible variant.
    pub warm_start: Option<&'a [(String, Tensor)]>,
    /// Pre-trained token embeddings; rows for tokens present in the
    /// vocabulary replace their random initialization.
    pub embeddings: Option<&'a BTreeMap<String, Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    BadConfig { reason: String },
    /// The objective became NaN/Inf; named by where it happened.
    NonFiniteLoss { epoch: usize, dialogue: String },
    /// The optimizer rejected a gradient; named by where it happened.
    Optimizer { epoch: usize, dialogue: String, source: AdamError },
    /// An embedding row has the wrong width for the configured model.
    EmbeddingDim { token: String, expected: usize, got: usize },
    Vocab(VocabError),
    Model(ModelError),
    Loss(LossError),
    Predict(PredictError),
    Metrics(MetricsError),
    Param(ParamError),
    State(StateError),
    Tape(TapeError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::BadConfig { reason } => write!(f, "bad train config: {reason}"),
            TrainError::NonFiniteLoss { epoch, dialogue } => {
                write!(f, "non-finite loss at epoch {epoch}, dialogue {dialogue:?}")
            }
            TrainError::Optimizer { epoch, dialogue, source } => {
                write!(f, "optimizer failure at epoch {epoch}, dialogue {dialogue:?}: {source}")
            }
            TrainError::EmbeddingDim { token, expected, got } => write!(
                f,
                "embedding for token {token:?} has {got} value(s), model expects {expected}"
            ),
            TrainError::Vocab(e) => write!(f, "{e}"),
            TrainError::Model(e) => write!(f, "{e}"),
            TrainError::Loss(e) => write!(f, "{e}"),
            TrainError::Predict(e) => write!(f, "{e}"),
            TrainError::Metrics(e) => write!(f, "{e}"),
            TrainError::Param(e) => write!(f, "{e}"),
            TrainError::State(e) => write!(f, "{e}"),
            TrainError::Tape(e) => write!(f, "{e}"),
        }
    }
}

macro_rules! wrap_error {
    ($from:ty => $variant:ident) => {
        impl From<$from> for TrainError {
            fn from(e: $from) -> Self {
                TrainError::$variant(e)
            }
        }
    };
}
wrap_error!(VocabError => Vocab);
wrap_error!(ModelError => Model);
wrap_error!(LossError => Loss);
wrap_error!(PredictError => Predict);
wrap_error!(MetricsError => Metrics);
wrap_error!(ParamError => Param);
wrap_error!(StateError => State);
wrap_error!(TapeError => Tape);

/// Loss and accuracy of one split at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitMetrics {
    /// Mean per-dialogue objective value.
    pub loss: f64,
    /// Fraction of turns where the predicted state matches gold on every
    /// slot.
    pub state_joint: Ratio,
    /// Same, for per-turn labels; absent for variants that do not produce
    /// label distributions.
    pub label_joint: Option<Ratio>,
}

/// One row of the training history. Epoch 0 is the pre-training
/// evaluation; the train column of later rows is measured on the fly
/// during the epoch's updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: Option<SplitMetrics>,
    pub validation: Option<SplitMetrics>,
    /// Probability floor activations while computing this epoch's losses.
    pub clamped: usize,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub store: ParamStore,
    pub layout: ModelLayout,
    pub vocab: Vocab,
    pub history: Vec<EpochRecord>,
    pub warnings: Vec<String>,
    /// Which epoch's parameters `store` holds: the best validation epoch,
    /// or the last epoch run when there is no validation data.
    pub kept_epoch: usize,
}

/// Full evaluation of fixed parameters on a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub dialogues: usize,
    pub mean_loss: f64,
    pub clamped: usize,
    pub state_joint: Ratio,
    pub state_per_slot: Vec<Ratio>,
    pub state_per_turn: Vec<Ratio>,
    pub label_joint: Option<Ratio>,
    pub label_per_slot: Option<Vec<Ratio>>,
}

fn produces_labels(variant: Variant) -> bool {
    !matches!(variant, Variant::TenY)
}

/// Runs the forward pass and objective for every dialogue without touching
/// the parameters. Errors on an empty corpus rather than reporting
/// accuracies over nothing.
pub fn evaluate_corpus(
    store: &ParamStore,
    layout: &ModelLayout,
    variant: Variant,
    vocab: &Vocab,
    ontology: &Ontology,
    dialogues: &[Dialogue],
) -> Result<EvalStats, TrainError> {
    if dialogues.is_empty() {
        return Err(TrainError::Metrics(MetricsError::Empty));
    }
    let mut loss_sum = 0.0;
    let mut clamped = 0;
    let mut gold_states = Vec::with_capacity(dialogues.len());
    let mut pred_states = Vec::with_capacity(dialogues.len());
    let mut gold_labels = Vec::new();
    let mut pred_labels = Vec::new();
    for d in dialogues {
        let mut tape = Tape::new();
        let fwd = forward_dialogue(&mut tape, store, layout, variant, d, vocab)?;
        let lb = dialogue_loss(&mut tape, &fwd, variant, d, ontology)?;
        loss_sum += tape.value(lb.loss).data()[0];
        clamped += lb.clamped;
        let pred = predict_dialogue(&tape, &fwd, variant, ontology)?;
        gold_states.push(d.states());
        pred_states.push(pred.states);
        if let Some(labels) = pred.labels {
            gold_labels.push(d.labels(ontology)?);
            pred_labels.push(labels);
        }
    }
    let state_joint = joint_accuracy(&gold_states, &pred_states)?;
    let state_per_slot = per_slot_accuracy(&gold_states, &pred_states)?;
    let state_per_turn = per_turn_curve(&gold_states, &pred_states)?;
    let (label_joint, label_per_slot) = if produces_labels(variant) {
        (
            Some(joint_accuracy(&gold_labels, &pred_labels)?),
            Some(per_slot_accuracy(&gold_labels, &pred_labels)?),
        )
    } else {
        (None, None)
    };
    Ok(EvalStats {
        dialogues: dialogues.len(),
        mean_loss: loss_sum / dialogues.len() as f64,
        clamped,
        state_joint,
        state_per_slot,
        state_per_turn,
        label_joint,
        label_per_slot,
    })
}

fn eval_split_metrics(stats: &EvalStats) -> SplitMetrics {
    SplitMetrics {
        loss: stats.mean_loss,
        state_joint: stats.state_joint,
        label_joint: stats.label_joint,
    }
}

fn apply_embedding_overrides(
    store: &mut ParamStore,
    layout: &ModelLayout,
    vocab: &Vocab,
    embeddings: &BTreeMap<String, Vec<f64>>,
    warnings: &mut Vec<String>,
) -> Result<(), TrainError> {
    let width = layout.dims.embedding;
    let mut applied = 0usize;
    let mut unseen = 0usize;
    {
        let table = store.get_mut(layout.embed).data_mut();
        for (token, row) in embeddings {
            if row.len() != width {
                return Err(TrainError::EmbeddingDim {
                    token: token.clone(),
                    expected: width,
                    got: row.len(),
                });
            }
            match vocab.lookup(token) {
                Some(i) => {
                    table[i * width..(i + 1) * width].copy_from_slice(row);
                    applied += 1;
                }
                None => unseen += 1,
            }
        }
    }
    let missing = vocab.tokens()[1..]
        .iter()
        .filter(|t| !embeddings.contains_key(*t))
        .count();
    if unseen > 0 {
        warnings.push(alloc::format!(
            "{unseen} embedding row(s) are for tokens outside the vocabulary and were ignored"
        ));
    }
    if missing > 0 {
        warnings.push(alloc::format!(
            "{missing} vocabulary token(s) have no embedding row and keep their random init ({applied} row(s) applied)"
        ));
    }
    Ok(())
}

/// Trains one variant from scratch (or from the given seeds) and returns
/// the parameters, the run's history, and any warnings worth logging.
pub fn train(config: &TrainConfig, inputs: &TrainInputs<'_>) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let variant = config.variant;
    let mut warnings: Vec<String> = Vec::new();

    let vocab = Vocab::from_dialogues(inputs.train)?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut store = ParamStore::new();
    let layout =
        ModelLayout::build(&mut store, &mut rng, inputs.ontology, &vocab, config.dims)?;

    if let Some(embeddings) = inputs.embeddings {
        apply_embedding_overrides(&mut store, &layout, &vocab, embeddings, &mut warnings)?;
    }
    match inputs.warm_start {
        Some(snapshot) => {
            let report = store.apply_named(snapshot)?;
            if let Some(note) = describe_apply(&report) {
                warnings.push(alloc::format!("warm start: {note}"));
            }
        }
        None => {
            if variant == Variant::Ten {
                warnings.push(
                    "training the chained-aggregation variant from scratch; it usually needs a \
                     warm start from a trained turn-label model to move off its plateau"
                        .to_string(),
                );
            }
        }
    }
    if inputs.train.is_empty() {
        warnings.push("training corpus is empty; parameters keep their initial values".to_string());
    }
    if produces_labels(variant)
        && inputs
            .train
            .iter()
            .any(|d| d.labels_derived || d.turns.iter().any(|t| t.gold_label.is_none()))
    {
        warnings.push(
            "some training dialogues lack gold turn labels; fitting labels reconstructed from \
             the state sequence (minimal-change convention)"
                .to_string(),
        );
    }

    let all_ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
    let mut adam = AdamState::new(&store);
    let adam_cfg = AdamConfig::with_learning_rate(config.learning_rate);
    let mut history: Vec<EpochRecord> = Vec::with_capacity(config.epochs + 1);

    let evaluate_validation = |store: &ParamStore| -> Result<Option<EvalStats>, TrainError> {
        if inputs.validation.is_empty() {
            return Ok(None);
        }
        evaluate_corpus(store, &layout, variant, &vocab, inputs.ontology, inputs.validation)
            .map(Some)
    };

    // Best-so-far tracking by validation joint accuracy.
    let mut best: Option<(f64, usize, Vec<(String, Tensor)>)> = None;
    let mut stale_epochs = 0usize;
    let consider = |value: Option<Ratio>,
                        epoch: usize,
                        store: &ParamStore,
                        best: &mut Option<(f64, usize, Vec<(String, Tensor)>)>,
                        stale: &mut usize| {
        if let Some(r) = value {
            let v = r.value();
            let improved = match best {
                Some((b, _, _)) => v > *b,
                None => true,
            };
            if improved {
                *best = Some((v, epoch, store.snapshot(all_ids.iter().copied())));
                *stale = 0;
            } else {
                *stale += 1;
            }
        }
    };

    let epoch0 = evaluate_validation(&store)?;
    consider(
        epoch0.as_ref().map(|s| s.state_joint),
        0,
        &store,
        &mut best,
        &mut stale_epochs,
    );
    history.push(EpochRecord {
        epoch: 0,
        train: None,
        validation: epoch0.as_ref().map(eval_split_metrics),
        clamped: epoch0.map(|s| s.clamped).unwrap_or(0),
    });

    let mut order: Vec<usize> = (0..inputs.train.len()).collect();
    let mut last_epoch_run = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut clamped = 0usize;
        let mut gold_states = Vec::with_capacity(order.len());
        let mut pred_states = Vec::with_capacity(order.len());
        let mut gold_labels = Vec::new();
        let mut pred_labels = Vec::new();
        for &i in &order {
            let d = &inputs.train[i];
            let mut tape = Tape::new();
            let fwd = forward_dialogue(&mut tape, &store, &layout, variant, d, &vocab)?;
            let lb = dialogue_loss(&mut tape, &fwd, variant, d, inputs.ontology)?;
            let loss_value = tape.value(lb.loss).data()[0];
            if !loss_value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, dialogue: d.id.clone() });
            }
            loss_sum += loss_value;
            clamped += lb.clamped;
            tape.backward(lb.loss)?;
            let grads = fwd.binder.collect_grads(&tape);
            adam.step(&mut store, &grads, &adam_cfg).map_err(|source| {
                TrainError::Optimizer { epoch, dialogue: d.id.clone(), source }
            })?;
            // Measure this dialogue with the parameters it was trained
            // with: the tape still holds the pre-update forward values.
            let pred = predict_dialogue(&tape, &fwd, variant, inputs.ontology)?;
            gold_states.push(d.states());
            pred_states.push(pred.states);
            if let Some(labels) = pred.labels {
                gold_labels.push(d.labels(inputs.ontology)?);
                pred_labels.push(labels);
            }
        }
        last_epoch_run = epoch;

        let train_metrics = if order.is_empty() {
            None
        } else {
            Some(SplitMetrics {
                loss: loss_sum / order.len() as f64,
                state_joint: joint_accuracy(&gold_states, &pred_states)?,
                label_joint: if produces_labels(variant) {
                    Some(joint_accuracy(&gold_labels, &pred_labels)?)
                } else {
                    None
                },
            })
        };
        let val_stats = evaluate_validation(&store)?;
        consider(
            val_stats.as_ref().map(|s| s.state_joint),
            epoch,
            &store,
            &mut best,
            &mut stale_epochs,
        );
        history.push(EpochRecord {
            epoch,
            train: train_metrics,
            validation: val_stats.as_ref().map(eval_split_metrics),
            clamped: clamped + val_stats.map(|s| s.clamped).unwrap_or(0),
        });

        if let Some(patience) = config.patience {
            if best.is_some() && stale_epochs > patience {
                warnings.push(alloc::format!(
                    "stopped after epoch {epoch}: validation joint accuracy has not improved \
                     for {stale_epochs} epoch(s)"
                ));
                break;
            }
        }
    }

    let kept_epoch = match best {
        Some((_, epoch, snapshot)) => {
            store.apply_named(&snapshot)?;
            epoch
        }
        None => last_epoch_run,
    };

    Ok(TrainOutcome { store, layout, vocab, history, warnings, kept_epoch })
}
