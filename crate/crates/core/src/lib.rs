//! Finite-resolution similarity and the generalization/identification tradeoff.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is pure
//! computation:
//!
//! - [`spaces`]: metric probability spaces with uniform sampling, distances and
//!   ball measures `b_p(eps)`.
//! - [`similarity`]: distance-dependent similarity functions `g(d)` and learned
//!   similarity tables.
//! - [`decision`]: the Luce choice rule and the scoring of similarity and
//!   identification trials.
//! - [`theory`]: closed-form `(p_S, p_I)` evaluators and Pareto fronts.
//! - [`montecarlo`]: seeded trial-sampling estimators of `p_S` and `p_I`.
//! - [`toy`]: the `relu(W^T W x)` toy autoencoder with hand-written gradients
//!   and Adam.
//!
//! IO, file formats and the command-line tool live in the `semres` crate.
#![no_std]

extern crate alloc;

pub mod decision;
mod error;
pub mod matrix;
pub mod montecarlo;
mod quadrature;
pub mod rng;
pub mod similarity;
pub mod spaces;
pub mod theory;
pub mod toy;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use similarity::{Similarity, SimilaritySource, SimilarityTable};
pub use spaces::{BallMoments, Point, Space};
