pub mod bell;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod local;
pub mod optimizer;
pub mod quantum;
pub mod strength;

pub use error::{Error, Result};
