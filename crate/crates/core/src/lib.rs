//! Temporal knowledge-graph embeddings built from compound geometric
//! operators.
//!
//! A fact (head, relation, tail, timestamp) is scored by transforming the
//! head embedding with a composition of translation, scaling and rotation
//! atoms whose parameters come from relation and timestamp tables, then
//! comparing it with the tail embedding. Time information fuses onto a
//! designated relation atom's parameter vector, so relations evolve over
//! time while keeping a time-invariant translation component.
//!
//! The crate covers the full lifecycle:
//!
//! - [`geometry`] — the operator algebra plus an exact affine-map oracle;
//! - [`model`] — parameter tables, the sixteen-variant registry, scoring,
//!   closed-form and generic gradients, binary checkpoints;
//! - [`train`] — reciprocal full-softmax cross-entropy with cube-norm and
//!   temporal-smoothing regularizers, Adagrad, the epoch loop;
//! - [`data`] — quadruple TSV ingestion, vocabularies, reciprocal
//!   augmentation, filter index, caches and streaming;
//! - [`eval`] — filtered MRR / Hits@k, per-stage rank analysis, exports;
//! - [`patterns`] — constructive witnesses for the relation-pattern
//!   propositions and empirical detectors.

pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod patterns;
pub mod rng;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::{Precision, Real};
