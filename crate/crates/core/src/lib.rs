//! Multilingual short-description generation.
//!
//! The generator fuses article encodings from every language an entity is
//! covered in, pools existing descriptions from the other languages, adds a
//! knowledge-graph type embedding, and decodes a description in the
//! requested language. The crate also carries the evaluation toolkit used
//! to compare systems: an optimal-transport similarity metric,
//! Bradley–Terry aggregation with sign tests, propensity weighting, Fleiss'
//! kappa and evaluation-set sampling.

pub mod analysis;
pub mod autograd;
pub mod baselines;
pub mod corpus;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod generator;
pub mod metric;
pub mod nn;
pub mod params;
pub mod text;

pub use error::{Error, Result};
