pub mod censored;
pub mod coupling;
pub mod error;
pub mod gof;
pub mod harness;
pub mod numerics;
pub mod oracle;
pub mod process;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
