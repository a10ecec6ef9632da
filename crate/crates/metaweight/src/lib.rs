//! metaweight: meta-learned per-example weighting of related-task data.
//!
//! Trains a model on a data-poor primary task together with a data-rich
//! related task, learning a scalar weight in (0,1) for every related-task
//! example via meta-gradients so that the weighted related data helps
//! rather than hurts. Ships two experiment setups: corrupted-label image
//! classification with a linear model, and retrieval-based goal-oriented
//! dialog with end-to-end memory networks.

pub mod checkpoint;
pub mod classifier;
pub mod dialog;
pub mod error;
pub mod fdcheck;
pub mod memnet;
pub mod meta;
pub mod model;
pub mod ops;
pub mod optim;
pub mod regimes;
pub mod report;
pub mod rng;
pub mod strategies;
pub mod tensor;
pub mod vision;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{DenseMatrix, ParamVector};
