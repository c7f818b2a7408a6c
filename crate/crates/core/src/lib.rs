//! Diffusion-based kernel estimation of the condensed density of the
//! generalized eigenvalues of noisy Hankel pencils.
//!
//! The pipeline: simulate replicated samples of a sum of complex exponentials
//! ([`signal`]), solve each replicate's Hankel pencil ([`pencil`]), cluster the
//! pooled eigenvalues ([`cluster`]), build residual and diffusion fields on a
//! Chebyshev grid ([`fields`]), integrate the anisotropic diffusion to the
//! chosen bandwidth ([`diffusion`], [`bandwidth`]) and combine the per-cluster
//! estimates. A closed-form pilot ([`pilot`]) fixes the number of clusters.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate openblas_src;

pub mod analytic;
pub mod bandwidth;
pub mod cluster;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod fields;
pub mod grid;
pub mod numerics;
pub mod pencil;
pub mod pilot;
pub mod pipeline;
pub mod rng;
pub mod signal;
pub mod validate;

pub use error::{Error, Result};
pub use grid::{ChebGrid, Region, ScalarField};
pub use pencil::{EigenSample, HankelPencil, PooledPoint};
pub use rng::RngConfig;
pub use signal::{ExponentialModel, NoiseConvention, ReplicateSet};
