//! Road boundary estimation from sparse automotive radar point clouds.
//!
//! An automotive radar reports a handful of noisy polar detections per pulse.
//! This crate tracks the left and right road boundaries through those sparse
//! point clouds by modelling each boundary as a homogeneous conic (a circular
//! arc, or a line as the zero-curvature case) whose coefficient vector lives
//! on the unit 3-sphere and follows a Bingham distribution. Per frame the
//! pipeline is:
//!
//! 1. [`bingham`] — predict every candidate's coefficient distribution under
//!    the known radar motion,
//! 2. [`mixture`] — mean-field variational inference over a Dirichlet process
//!    mixture of an outlier class plus the boundary candidates,
//! 3. [`proposal`] — an outlier-weighted RANSAC variant that proposes new
//!    candidates until no proposal clears the acceptance bar,
//! 4. [`tracker`] — concentration bookkeeping, pruning, and left/right
//!    selection by y-intercept.
//!
//! A deterministic scene [`sim`]ulator and the [`eval`] metric protocol close
//! the loop for desk-scale verification; [`cli`] exposes everything as the
//! `verge` binary (`simulate | track | eval | plot`). See the `examples/`
//! directory for one runnable walkthrough per capability.

pub mod bingham;
pub mod cli;
pub mod config;
pub mod conic;
pub mod eval;
pub mod formats;
pub mod linalg;
pub mod mixture;
pub mod plot;
pub mod proposal;
pub mod sim;
pub mod tracker;

pub use bingham::{BinghamState, MotionDelta, ProcessNoise};
pub use conic::{BoundaryCoefficients, FieldOfView, PolarPoint};
