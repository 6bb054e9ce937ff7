//! Streaming estimation for first-order autoregressive multilayer stochastic
//! block models.
//!
//! A dynamic multilayer network is a sequence of symmetric binary adjacency
//! tensors `A^t` (`n x n x L`). Every edge of every layer is a two-state
//! Markov chain: an absent edge forms with probability `Theta_{ijl}` and a
//! present edge dissolves with probability `Delta_{ijl}`, and both tensors
//! are block-structured by a latent community membership shared across
//! layers. This crate
//!
//! * simulates such networks, stationary or with time-varying parameters
//!   ([`model`]);
//! * keeps the transition counts needed for the closed-form maximum
//!   likelihood estimates online, over every window length on a logarithmic
//!   grid ([`stats`]);
//! * picks the look-back window adaptively by a likelihood stability test
//!   and calibrates its tolerance by parametric bootstrap ([`window`]);
//! * sharpens the raw estimates with heteroskedastic PCA and a low-rank
//!   Tucker projection ([`spectral`]), and recovers communities by k-means
//!   on the node subspace ([`community`]);
//! * ties it together as per-time estimators and baselines ([`pipeline`])
//!   and a Monte Carlo harness with file formats ([`harness`], [`io`]).
//!
//! Runnable walkthroughs of each capability live in the crate's
//! `examples/` directory.

pub mod community;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod spectral;
pub mod stats;
pub mod tensor;
pub mod window;

pub use error::{Error, Result};
pub use tensor::{Matrix, Tensor3};
