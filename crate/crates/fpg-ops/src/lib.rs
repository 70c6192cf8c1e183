//! Fisher-preserving guided diffusion sampling over waypoint trajectories.
//!
//! The crate implements the full inference stack around a small conditional
//! noise-prediction network with a strictly linear output head:
//!
//! - [`schedule`]: diffusion noise schedules plus the contraction factors and
//!   cumulative propagation weights used by sensitivity truncation bounds.
//! - [`denoiser`]: the conditional denoiser with exact condition/state
//!   Jacobians, the step Fisher sensitivity scalar, and its exact and latent
//!   (head-space) gradients.
//! - [`fds`]: chain-level Fisher sensitivity, Hutchinson estimation of the
//!   chain Frobenius norm, and the truncated tail score with its error bound.
//! - [`fpg`]: Fisher-orthogonal projection of guidance gradients — exact
//!   tangent projection and the low-rank outer-product-span (OPS) variant —
//!   applied inside the reverse sampler.
//! - [`blending`]: density clustering of sampled candidates, typicality and
//!   composite confidence scores, and uncertainty-weighted averaging.
//! - [`maze`]: a reproducible Maze2D world generator with occupancy grids,
//!   truncated signed distance fields, an expert grid planner, the clearance
//!   guidance objective, and rollout metrics.
//! - [`training`]: noise-prediction training of the denoiser on expert
//!   trajectories.
//! - [`harness`]: experiment orchestration, configuration, checkpoint and
//!   dataset formats, benchmark evaluation, and the CLI surface.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod blending;
pub mod denoiser;
mod error;
pub mod fds;
pub mod gradcheck;
pub mod fpg;
pub mod harness;
pub mod maze;
pub mod rng;
pub mod schedule;
pub mod training;

pub use error::{Error, Result};
