pub mod circumplex;
pub mod dsp;
pub mod error;
pub mod matrix;

pub use circumplex::{EmotionPoint, QuadrantLabel};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub mod annotations;
pub mod nn;
pub mod models;
pub mod baseline;
pub mod queue;
pub mod cli;
mod par;
