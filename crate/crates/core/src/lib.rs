pub mod cli;
pub mod cone;
pub mod error;
pub mod fmt;
pub mod lemma;
pub mod power;
pub mod matrix;
pub mod stats;
pub mod streams;

pub use error::{Error, Result};
