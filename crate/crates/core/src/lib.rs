//! Recurrent-network steganalysis for generated text.
//!
//! The numeric core is generic over [`numerics::Scalar`] (`f32` or `f64`).
//! Training and checkpoints run at 32 bits; the 64-bit instantiation exists
//! for gradient checking and oracle comparisons. The aliases below name
//! the two concrete instantiations.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod network;
pub mod numerics;
pub mod persist;
pub mod stegogen;
pub mod training;

pub use error::{Error, Result};

pub type Mat32 = numerics::Mat<f32>;
pub type Mat64 = numerics::Mat<f64>;
pub type ModelParams32 = network::ModelParams<f32>;
pub type ModelParams64 = network::ModelParams<f64>;
pub type LstmLayerParams32 = network::LstmLayerParams<f32>;
pub type LstmLayerParams64 = network::LstmLayerParams<f64>;
pub type ForwardTrace32 = network::ForwardTrace<f32>;
pub type ForwardTrace64 = network::ForwardTrace<f64>;
pub type AdamState32 = training::AdamState<f32>;
pub type AdamState64 = training::AdamState<f64>;
pub type TrainOutcome32 = training::TrainOutcome<f32>;
pub type TrainOutcome64 = training::TrainOutcome<f64>;
