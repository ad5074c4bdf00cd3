//! Compound geometric operator algebra on d-dimensional vectors.
//!
//! Three atoms — translation, scaling, and 2x2 block rotation — compose into
//! pipelines that transform head-entity embeddings. Every pipeline has two
//! evaluation routes:
//!
//! - a vectorized fast path ([`apply_pipeline`]) used for scoring and
//!   training, and
//! - an exact affine-map oracle ([`affine_oracle`]) that materializes each
//!   atom as a d x d matrix plus offset and composes them, used as ground
//!   truth in equivalence tests at small d.
//!
//! Time information enters by *fusing* time atoms onto one designated
//! relation atom's parameter vector (the carrier), treating that vector as a
//! point: translation adds, scaling multiplies elementwise, rotation rotates
//! coordinate pairs. Pipelines whose time atoms cannot be vector-fused
//! declare direct composition instead, appending the time atoms to the
//! applied sequence.
//!
//! Atom order is data, not convention: `[Translate, Scale]` and
//! `[Scale, Translate]` are different pipelines with different outcomes.

mod affine;
mod atom;
mod pipeline;

pub use affine::{affine_oracle, AffineMap};
pub use atom::{apply_atom, apply_atom_inplace, atom_backward, AtomKind, OpAtom, ParamSource};
pub use pipeline::{
    apply_pipeline, apply_time_fusion, fused_rows_for, FusionMode, OperatorPipeline,
};
