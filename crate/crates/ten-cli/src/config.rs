//! TOML run configuration. Every setting is optional here and on the
//! command line; flags win over the file, and built-in defaults fill the
//! rest. Unknown keys are rejected so a typo cannot silently fall back to
//! a default. Commands that write artifacts echo the fully resolved
//! settings to `resolved.toml` in their output directory, which can be
//! used as the config of an identical rerun.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "PathsSection::is_empty")]
    pub paths: PathsSection,
    #[serde(skip_serializing_if = "ModelSection::is_empty")]
    pub model: ModelSection,
    #[serde(skip_serializing_if = "TrainSection::is_empty")]
    pub train: TrainSection,
    #[serde(skip_serializing_if = "SynthSection::is_empty")]
    pub synth: SynthSection,
}

macro_rules! optional_section {
    ($name:ident { $($field:ident: $ty:ty),+ $(,)? }) => {
        #[derive(Debug, Clone, Default, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $(
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )+
        }

        impl $name {
            pub fn is_empty(&self) -> bool {
                $(self.$field.is_none())&&+
            }
        }
    };
}

optional_section!(PathsSection {
    ontology: PathBuf,
    train: PathBuf,
    dev: PathBuf,
    test: PathBuf,
    out_dir: PathBuf,
    embeddings: PathBuf,
    warm_start: PathBuf,
    checkpoint: PathBuf,
    input: PathBuf,
});

optional_section!(ModelSection {
    variant: String,
    embedding: usize,
    encoder_hidden: usize,
    history_hidden: usize,
});

optional_section!(TrainSection {
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    patience: usize,
});

optional_section!(SynthSection {
    seed: u64,
    n_dialogues: usize,
    min_turns: usize,
    max_turns: usize,
    p_inform: f64,
    p_confirm: f64,
    p_noise: f64,
    p_silent: f64,
});

/// Loads the config file if one was given. Problems here are invocation
/// errors, not data errors: the config is part of how the run was asked
/// for.
pub fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))
}

/// Writes the effective settings of a run into its output directory.
pub fn write_resolved(out_dir: &Path, resolved: &FileConfig) -> Result<(), CliError> {
    let path = out_dir.join("resolved.toml");
    let text = toml::to_string(resolved).expect("resolved config serializes");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Flag value if given, else config value, else the built-in default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Flag value if given, else config value; an error naming the setting
/// otherwise.
pub fn require<T>(flag: Option<T>, config: Option<T>, what: &str) -> Result<T, CliError> {
    flag.or(config)
        .ok_or_else(|| CliError::usage(format!("{what} is required (flag or config)")))
}

/// Creates the output directory (and parents) if needed.
pub fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}
