//! Top-C classification loss (TCL-C) and the category-based grouping loss
//! over per-category meta-feature vectors.
//!
//! Every differentiable objective in this crate returns a [`GradedValue`]
//! whose gradient is checked against central finite differences in the
//! test suite.

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod gradcheck;
pub mod grouping;
pub mod io;
pub mod losses;
pub mod numerics;
pub mod simlab;

pub use error::{Error, Result};
pub use grouping::{
    group_loss, group_stats, pairwise_term, re_meta_loss, GroupStats, GroupingParams, GroupingTable, MetaFeatureSet,
    Strategy,
};
pub use losses::{
    bce_loss, combined_loss, cross_entropy_loss, focal_loss, tcl2_loss, tcl_loss, top_false_classes, ClassScores,
    LossWeights, TclParams,
};
pub use numerics::{
    finite_diff_gradient, relative_gradient_error, vector_stats, FeatureVector, GradedValue, VectorStats,
};
