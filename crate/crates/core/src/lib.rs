//! Explains extractive question-answering models by fitting a local linear
//! surrogate over question-word deletions, then shrinks each question to the
//! shortest word subset that still gets a correct answer.

pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod models;
pub mod reducer;
pub mod report;
pub mod surrogate;
pub mod text;

pub use error::{Error, ModelError, Result};
