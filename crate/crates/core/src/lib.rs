//! Desk-scale laboratory for learning-rate timing and curriculum ordering
//! in encoder–decoder fine-tuning.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod optim;
pub mod report;
pub mod rng;
pub mod runner;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
