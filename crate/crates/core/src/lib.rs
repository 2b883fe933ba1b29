pub mod analysis;
pub mod corpus;
pub mod error;
mod fsutil;
pub mod graph;
pub mod losses;
pub mod model;
pub mod pipeline;
pub mod qagen;
pub mod sampling;
pub mod synth;
pub mod text;

pub use error::{Error, Result};

/// Double-precision model parameters, used by the CLI.
pub type Params = model::ModelParams<f64>;
/// Single-precision model parameters.
pub type ParamsF32 = model::ModelParams<f32>;
pub type Gradients = model::Gradients<f64>;
pub type Checkpoint = model::Checkpoint<f64>;
