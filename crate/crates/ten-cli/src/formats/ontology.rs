//! Ontology file: a JSON document declaring each slot's value set. The
//! implicit `unknown` is never written — it always exists at index 0.
//!
//! ```json
//! {
//!   "format": "ten-ontology",
//!   "version": 1,
//!   "slots": [
//!     { "name": "food", "values": ["italian", "chinese", "dontcare"] }
//!   ]
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ten_core::state::Ontology;

use crate::error::CliError;

pub const ONTOLOGY_FORMAT: &str = "ten-ontology";
pub const ONTOLOGY_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyFile {
    format: String,
    version: u32,
    slots: Vec<SlotDef>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotDef {
    name: String,
    values: Vec<String>,
}

pub fn read_ontology(path: &Path) -> Result<Ontology, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: OntologyFile =
        serde_json::from_str(&text).map_err(|e| CliError::data(path, e.to_string()))?;
    if file.format != ONTOLOGY_FORMAT {
        return Err(CliError::data(
            path,
            format!("format is {:?}, expected {ONTOLOGY_FORMAT:?}", file.format),
        ));
    }
    if file.version != ONTOLOGY_VERSION {
        return Err(CliError::data(
            path,
            format!("version {} is not supported (this build reads version {ONTOLOGY_VERSION})", file.version),
        ));
    }
    let slots = file.slots.into_iter().map(|s| (s.name, s.values)).collect();
    Ontology::new(slots).map_err(|e| CliError::data(path, e.to_string()))
}

pub fn write_ontology(path: &Path, ontology: &Ontology) -> Result<(), CliError> {
    let file = OntologyFile {
        format: ONTOLOGY_FORMAT.to_string(),
        version: ONTOLOGY_VERSION,
        slots: ontology
            .slot_ids()
            .map(|s| SlotDef {
                name: ontology.slot_name(s).to_string(),
                values: ontology.declared_values(s).to_vec(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("ontology serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
