//! One-class classification toolkit built around the SVDD model family:
//! plain SVDD, subspace SVDD (SSVDD), graph-embedded subspace SVDD
//! (GESSVDD), plus OCSVM and ESVDD baselines, RBF kernelization through the
//! non-linear projection trick, and a benchmark pipeline for highly
//! imbalanced fraud-style data (stratified splits, skew-preserving
//! resampling, target-class normalization, 5-fold cross-validation,
//! G-mean reporting).

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod graphs;
pub mod kernelization;
pub(crate) mod linalg;
pub mod model;
pub mod subspace;
pub mod svdd;

pub use error::{Error, Result};
