//! Boosted zero-shot classification with semantic correlation regularization.
//!
//! An ensemble of rank-one bilinear models `h(x, r) = (x . u)(v . phi(r))`
//! is grown by column generation. The training objective combines a
//! logistic margin loss over seen classes, a covariance penalty that ties
//! unseen-class scores to semantic divergences, and self-paced sample
//! weights that admit hard samples gradually.

pub mod boosting;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod objective;
pub mod scoring;
pub mod selection;
pub mod trainer;

pub use data::{ClassId, ClassSplit, Dataset, DivergenceMatrix, LabelEmbeddings};
pub use error::{Error, Result};
pub use scoring::{Ensemble, WeakModel};
pub use trainer::{evaluate, train, train_boosting_only, EvalReport, TrainConfig, TrainInputs, TrainTrace};
