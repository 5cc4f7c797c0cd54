//! On-disk formats: ontology JSON, corpus JSON Lines, bit-exact text
//! checkpoints, and plain-text embedding tables.

pub mod checkpoint;
pub mod corpus;
pub mod embedding;
pub mod ontology;
