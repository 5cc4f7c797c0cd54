//! Turn-level dialogue state tracking with probabilistic state aggregation.
//!
//! A dialogue is a sequence of turns, each a (system action, user utterance)
//! pair. Per slot `s`, a neural encoder produces a distribution α_t^s over
//! the slot's values ∪ {unknown} describing what the *current turn* said
//! about `s`. The dialogue *state* x_t then evolves by the update
//!
//! ```text
//! x_t(s) = x_{t-1}(s) ◁ y_t(s)      v ◁ v' = v  if v' = unknown, else v'
//! ```
//!
//! and its posterior is tracked either *hard* (fold the argmax labels) or
//! *soft* (sum-product message passing along the turn chain, which admits a
//! closed form because the ◁ factor is deterministic). Training losses for
//! the four model variants, an Adam optimizer over a minimal reverse-mode
//! tape, evaluation metrics, and a seeded synthetic corpus generator round
//! out the crate.
//!
//! Everything here is `no_std` + `alloc`: pure fp64 computation with no IO.
//! File formats, config, and the command-line front end live in the
//! companion `ten-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adam;
pub mod bp;
pub mod dialogue;
pub mod dist;
pub mod encoder;
pub mod loss;
pub mod math;
pub mod metrics;
pub mod model;
pub mod params;
pub mod predict;
pub mod state;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod trainer;
pub mod vocab;

pub use dialogue::{Dialogue, Turn};
pub use dist::DiscreteDist;
pub use model::{ModelDims, Variant};
pub use state::{Ontology, SlotId, StateConfig, ValueId, UNKNOWN};
pub use tensor::Tensor;
