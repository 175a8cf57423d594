//! Entropy-regularized estimation from noisy moment constraints.
//!
//! The core computes the minimum-relative-entropy distribution whose moments
//! lie in a convex target set by maximizing a doubly smoothed dual with an
//! accelerated gradient scheme, and certifies the result with a-priori
//! iteration counts and a-posteriori optimality brackets. Two applications
//! sit on top: zero-information moment closure for a reversible
//! dimerization network, and approximate dynamic programming for a
//! constrained inventory MDP.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closure;
pub mod cmdp;
pub mod config;
pub mod discrete;
pub mod error;
pub mod fast_gradient;
pub mod gibbs;
pub mod integration;
mod lp;
pub mod parallel;
pub mod slater;
pub mod target;
pub mod vecops;

pub use error::{Error, Result};
pub use fast_gradient::{Certificate, SlaterData, SolverConfig, Stopping};
pub use gibbs::{DualEvaluation, GibbsModel, GridMeasure, SmoothingParams};
pub use integration::QuadratureRule;
pub use target::{MomentProblem, ReferenceMeasure, SupportInterval, TargetSet};
