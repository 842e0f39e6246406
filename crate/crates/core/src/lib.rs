//! Relaxed-assignment satisfiability search and factoring experiments.

pub mod bench;
pub mod cnf;
pub mod error;
pub mod factor;
pub mod functional;
pub mod oracle;
pub mod preprocess;
pub mod solver;
pub mod split;

pub use error::{Error, Result};
