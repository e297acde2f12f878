//! Squared-Hellinger subadditivity for discrete Bayesian networks and the
//! identity testers built on it.
//!
//! Modules, bottom-up:
//!
//! - [`bn`]: networks, exact joints and marginals, sampling, counts, file I/O.
//! - [`divergences`]: exact H², total variation, KL, χ² and scalar bounds.
//! - [`decomposition`]: common factorizations, per-block H², localization.
//! - [`tree_order`]: orderings with small dependent sets for two trees.
//! - [`subtest`]: the two-sample squared-Hellinger test on small marginals.
//! - [`testers`]: composite identity testers (known DAG, unknown DAG, two trees).
//! - [`gof`]: goodness-of-fit for product distributions on the hypercube.
//! - [`harness`]: seeded experiment runner and CSV reports.

pub mod bn;
pub mod decomposition;
pub mod divergences;
pub mod error;
pub mod gof;
pub mod harness;
pub mod rng;
pub mod subtest;
pub mod testers;
pub mod tree_order;

pub use error::{Error, Result};
