//! Command-line front end for the dialogue-state tracking models in
//! `ten-core`: corpus generation, training, evaluation, batch prediction
//! and single-dialogue inspection, plus the file formats they share.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
