pub mod error;
pub mod estimator;
pub mod game;
pub mod graph;
pub mod learner;
pub mod oracle;
pub mod polytope;
pub mod space;
pub mod spanner;

pub use error::{Error, Result};
