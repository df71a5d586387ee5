//! Community detection on fluid-diffusion graph representations.
//!
//! The pipeline models information propagation between samples as advection
//! plus diffusion in a porous medium instead of pure heat diffusion. Per-sample
//! feature relevance gates the pairwise transport velocities, closed-form
//! first-passage probabilities give a row-stochastic transition matrix `Q`,
//! and spectral clustering on the derived fluid Laplacian yields the
//! communities.
//!
//! Module map:
//!
//! - [`data`] — dataset ingestion, normalization, synthetic generators, and
//!   the perturbation protocols (missing features, class imbalance, appended
//!   noise features).
//! - [`relevance`] — per-sample relevant-feature selection via joint
//!   diagonalization of a Gaussian-kernel graph and a mutual-information
//!   graph; builds the permeability tensor.
//! - [`fluidgraph`] — transport velocities, the first-passage transition
//!   kernel, the `Q` matrix, and the fluid Laplacian.
//! - [`tdrw`] — independent oracle for the transition kernel: analytic
//!   splitting probability and Euler–Maruyama first-passage simulation.
//! - [`cluster`] — spectral embedding, automatic cluster-count selection,
//!   k-means, normalized cut, heat-diffusion baselines.
//! - [`metrics`] — topology-weighted clustering scores (mP, mARI, mNMI) and
//!   spiked-model diagnostics.

pub mod cluster;
pub mod data;
pub mod error;
pub mod fluidgraph;
pub mod kneedle;
pub mod linalg;
pub mod metrics;
pub mod relevance;
pub mod seed;
pub mod tdrw;

pub use error::{Error, Result};
