//! Cramér transforms of even probability measures on the line and Monte
//! Carlo estimates of the threshold at which the convex hull of N i.i.d.
//! random points in R^n starts to swallow most of the measure.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cramer;
pub mod error;
pub mod measures;
pub mod polytope;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod thresholds;
pub mod verify;

pub use cramer::{
    CramerEval, CramerProfile, LambdaStarEvaluator, LogMgfMethod, MgfPoint, ProfileOptions,
};
pub use error::{Error, Result};
pub use measures::{MeasureKind, MeasureSpec, TabulatedDensity};
