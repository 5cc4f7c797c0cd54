//! Corpus file: JSON Lines. The first line is a header naming the format,
//! its version, and the dialogue count; each following line is one
//! dialogue.
//!
//! ```json
//! {"format":"ten-corpus","version":1,"dialogues":2}
//! {"id":"syn-00000","turns":[{"action":[["request","food"]],
//!   "utterance":["thai","please"],"state":{"food":"thai"},
//!   "label":{"food":"thai"}}]}
//! ```
//!
//! A turn's `state` and `label` map slot names to value names; slots left
//! out are `unknown`. A missing `label` key marks the turn's label as
//! derived rather than annotated. Files written by `predict` carry
//! `"predictions":true` in the header: their states are model outputs, not
//! gold annotations, so they are refused wherever gold is required.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ten_core::dialogue::{Dialogue, Turn};
use ten_core::state::{Ontology, StateConfig, UNKNOWN};

use crate::error::CliError;

pub const CORPUS_FORMAT: &str = "ten-corpus";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusHeader {
    pub format: String,
    pub version: u32,
    pub dialogues: usize,
    /// True when the states/labels are model predictions rather than gold.
    #[serde(default, skip_serializing_if = "is_false")]
    pub predictions: bool,
}

fn is_false(b: &bool) -> bool {
    !b
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DialogueLine {
    id: String,
    turns: Vec<TurnLine>,
    #[serde(default, skip_serializing_if = "is_false")]
    labels_derived: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnLine {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    action: Vec<Vec<String>>,
    utterance: Vec<String>,
    state: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<BTreeMap<String, String>>,
}

fn config_from_map(
    ontology: &Ontology,
    map: &BTreeMap<String, String>,
) -> Result<StateConfig, String> {
    let mut config = StateConfig::all_unknown(ontology);
    for (slot_name, value_name) in map {
        let slot = ontology.slot_id(slot_name).map_err(|e| e.to_string())?;
        let value = ontology.value_id(slot, value_name).map_err(|e| e.to_string())?;
        config.set(slot, value);
    }
    Ok(config)
}

fn map_from_config(ontology: &Ontology, config: &StateConfig) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for slot in ontology.slot_ids() {
        let v = config.get(slot);
        if v != UNKNOWN {
            map.insert(
                ontology.slot_name(slot).to_string(),
                ontology.value_name(slot, v).to_string(),
            );
        }
    }
    map
}

/// Reads a corpus, resolving slot/value names against `ontology`. Unless
/// the header marks the file as predictions, every dialogue is also
/// checked for internal consistency: states reachable turn-to-turn, and
/// any annotated labels folding to exactly the annotated states.
pub fn read_corpus(path: &Path, ontology: &Ontology) -> Result<(Vec<Dialogue>, CorpusHeader), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let header: CorpusHeader = match lines.next() {
        None => return Err(CliError::data(path, "empty file, expected a header line")),
        Some((_, first)) => serde_json::from_str(first)
            .map_err(|e| CliError::data(path, format!("line 1: bad header: {e}")))?,
    };
    if header.format != CORPUS_FORMAT {
        return Err(CliError::data(
            path,
            format!("line 1: format is {:?}, expected {CORPUS_FORMAT:?}", header.format),
        ));
    }
    if header.version != CORPUS_VERSION {
        return Err(CliError::data(
            path,
            format!(
                "line 1: version {} is not supported (this build reads version {CORPUS_VERSION})",
                header.version
            ),
        ));
    }

    let mut dialogues = Vec::with_capacity(header.dialogues);
    let mut seen_ids: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DialogueLine = serde_json::from_str(line)
            .map_err(|e| CliError::data(path, format!("line {line_no}: {e}")))?;
        if let Some(prev) = seen_ids.insert(parsed.id.clone(), line_no) {
            return Err(CliError::data(
                path,
                format!("line {line_no}: dialogue id {:?} already used on line {prev}", parsed.id),
            ));
        }
        let mut derived = parsed.labels_derived;
        let mut turns = Vec::with_capacity(parsed.turns.len());
        for (turn_idx, t) in parsed.turns.into_iter().enumerate() {
            let at = format!("line {line_no} ({:?} turn {})", parsed.id, turn_idx + 1);
            let gold_state = config_from_map(ontology, &t.state)
                .map_err(|e| CliError::data(path, format!("{at}: state: {e}")))?;
            let gold_label = match &t.label {
                Some(map) => Some(
                    config_from_map(ontology, map)
                        .map_err(|e| CliError::data(path, format!("{at}: label: {e}")))?,
                ),
                None => {
                    derived = true;
                    None
                }
            };
            turns.push(Turn { action: t.action, utterance: t.utterance, gold_state, gold_label });
        }
        let dialogue = Dialogue { id: parsed.id, turns, labels_derived: derived };
        if !header.predictions {
            dialogue.validate(ontology).map_err(|e| {
                CliError::data(path, format!("line {line_no} ({:?}): {e}", dialogue.id))
            })?;
        }
        dialogues.push(dialogue);
    }
    if dialogues.len() != header.dialogues {
        return Err(CliError::data(
            path,
            format!(
                "header declares {} dialogue(s) but the file holds {}",
                header.dialogues,
                dialogues.len()
            ),
        ));
    }
    Ok((dialogues, header))
}

/// Reads a corpus and refuses files whose header marks them as model
/// predictions — for commands that need gold annotations.
pub fn read_gold_corpus(path: &Path, ontology: &Ontology) -> Result<Vec<Dialogue>, CliError> {
    let (dialogues, header) = read_corpus(path, ontology)?;
    if header.predictions {
        return Err(CliError::data(
            path,
            "this file holds model predictions, not gold annotations; \
             it cannot be used where gold states are required",
        ));
    }
    Ok(dialogues)
}

pub fn write_corpus(
    path: &Path,
    ontology: &Ontology,
    dialogues: &[Dialogue],
    predictions: bool,
) -> Result<(), CliError> {
    let header = CorpusHeader {
        format: CORPUS_FORMAT.to_string(),
        version: CORPUS_VERSION,
        dialogues: dialogues.len(),
        predictions,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for d in dialogues {
        let line = DialogueLine {
            id: d.id.clone(),
            turns: d
                .turns
                .iter()
                .map(|t| TurnLine {
                    action: t.action.clone(),
                    utterance: t.utterance.clone(),
                    state: map_from_config(ontology, &t.gold_state),
                    label: t.gold_label.as_ref().map(|l| map_from_config(ontology, l)),
                })
                .collect(),
            labels_derived: d.labels_derived,
        };
        out.push_str(&serde_json::to_string(&line).expect("dialogue serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}
