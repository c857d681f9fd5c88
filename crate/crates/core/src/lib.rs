//! Simulation toolkit for high-dimensional central limit theorems and
//! bootstrap approximations of maxima of sums.
//!
//! Modules follow the data flow: [`datagen`] produces datasets and population
//! moments, [`sums`] turns them into normalized sums and Gaussian analogs,
//! [`geometry`] describes the sets whose probabilities are compared,
//! [`montecarlo`] estimates those probabilities, [`bounds`] evaluates the
//! theoretical error terms, and [`experiments`] runs the studies.

// Negated comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod report;
pub mod rng;
pub mod special;
pub mod sums;

pub use bounds::{BoundParams, BoundReport, Provenance as BoundProvenance};
pub use datagen::{sample_dataset, CovModel, Dataset, DesignKind, DesignSpec, LogConcaveBase, MomentReport};
pub use error::{Error, Result};
pub use geometry::{Hyperrectangle, Polytope, SetDescriptor, SetFamily, SparseConvexSet};
pub use montecarlo::{MCEstimate, RhoEstimate};
pub use report::{emit_report, OutputFormat};
pub use sums::{CholFactor, CovFlavor, CovMatrix, SumKind, SumVector};
