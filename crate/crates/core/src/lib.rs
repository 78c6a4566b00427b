//! Stopping-time machinery for Carleson-measure extrapolation on finite
//! dyadic and Christ-type trees, with every inequality audited in exact
//! rational arithmetic.
//!
//! The pieces, bottom-up:
//!
//! - [`tree`]: dyadic cubes of `[0,1)^d` and the weighted-tree abstraction.
//! - [`measures`]: node measures, atomic half-space measures, `C1` and `C2`.
//! - [`extrapolation`]: bad cubes, minimal stopping families, generations,
//!   witnesses and the bound audit.
//! - [`sawtooth`]: tents, sawtooth regions and the reduction of atomic
//!   measures to tree measures.
//! - [`christ`]: Christ-type cubes on finite metric spaces.
//! - [`oracle`]: brute-force reference implementations for small trees.
//! - [`io`], [`generate`], [`cli`]: file formats, seeded corpora, batch runs.

pub mod christ;
pub mod cli;
pub mod error;
pub mod extrapolation;
pub mod generate;
pub mod io;
pub mod measures;
pub mod oracle;
pub mod rational;
pub mod sawtooth;
pub mod tree;

pub use error::{Error, Result};
pub use extrapolation::{
    audit_bound, bad_set, build_decomposition, build_stopping_family, lemma_witnesses,
    local_excess, minimal_augmentation, smallness_holds, AuditReport, Decomposition,
    StoppingFamily, StoppingTime,
};
pub use measures::{
    carleson_constant, subtree_mass, top_constant, tree_measure_from_atoms, Atom,
    AtomicMeasure, TreeMeasure,
};
pub use rational::Rational;
pub use tree::{CubeId, NodeId, WeightedTree};
