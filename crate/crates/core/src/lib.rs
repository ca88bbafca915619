//! Morphological reinflection through transducer edit actions.
//!
//! A lemma and a feature bundle are mapped to a sequence of actions (EMIT,
//! COPY, PATCH, MOVE, EOW) by a GRU encoder-decoder with hard monotonic
//! attention; a deterministic transducer applies the actions to the lemma.
//! PATCH actions come from equivalence classes of glyph-bitmap differences
//! between letters that share a base character.

pub mod actions;
pub mod alignment;
pub mod corpus;
pub mod enhancer;
pub mod error;
pub mod glyphs;
pub mod model;
pub mod patches;
pub mod pipeline;

pub use error::{Error, Result};
