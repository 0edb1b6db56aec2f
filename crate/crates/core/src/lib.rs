// SPDX-License-Identifier: Apache-2.0

//! Balanced embeddings of the Riemann sphere under `O(k)`.
//!
//! The crate computes the moment map of a basis of sections, the Deligne
//! energy along one-parameter subgroups, the gradient flow towards the
//! balanced basis, and the smallest nonzero eigenvalue of the quadratic
//! form `Q_z` on `su(k+1)`.

pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod flow;
pub mod lie;
pub mod projective;
pub mod moment;
pub mod sections;
pub mod spectral;

pub use error::{Error, Result};
