pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod finance;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod seeding;

pub use error::{Error, Result};
