//! Explaining kernel machines and nearest-neighbour classifiers by rewriting
//! them as neural networks and propagating relevance through them.
//!
//! [`neuralize`] turns a trained model into a min-over-max network whose
//! output agrees in sign with the original decision function. [`lrp`]
//! propagates that output back to the input features, in time linear in the
//! number of support points. [`baselines`] holds the comparison explainers and
//! [`eval`] the feature-removal benchmark used to compare them.

pub mod baselines;
pub mod dataset;
mod error;
pub mod eval;
pub mod explainer;
pub mod linalg;
pub mod lrp;
pub mod model;
pub mod neuralize;
pub mod seed;
pub mod tuning;

pub use error::{Error, Result};
pub use explainer::{Explainer, Method};
pub use linalg::Points;
pub use lrp::{explain, explain_fast_path, heuristic_params, Explanation, LrpHyperparams};
pub use model::{Class, KnnModel, KrrModel, Model, ModelDocument, SvmModel};
pub use neuralize::{neuralize, NeuralizedNet, Pooling};
