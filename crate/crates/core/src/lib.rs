//! Learning a proper canonical loss jointly with a linear classifier.
//!
//! The loss is represented by its inverse canonical link, a piecewise-affine
//! monotone map from scores to probabilities. Training alternates a gradient
//! step on the weights with a constrained refit of the link.

pub mod baselines;
pub mod chain;
pub mod data;
pub mod error;
pub mod link;
pub mod loss;
pub mod metrics;
pub mod train;

pub use baselines::{BaselineKind, BaselineModel};
pub use chain::{solve_chain, Boundary, ChainProblem};
pub use data::Dataset;
pub use error::{Error, Result};
pub use link::PiecewiseAffineLink;
pub use loss::{ConvexGenerator, ReferenceLoss};
pub use metrics::auc;
pub use train::{train, RunReport, TrainConfig, TrainState};
