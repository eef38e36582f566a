pub mod config;
pub mod drivetrain;
pub mod error;
pub mod metrics;
pub mod nav;
pub mod pipeline;
pub mod rng;
pub mod sensors;
pub mod sim;
pub mod simcore;
pub mod world;

pub use error::{Error, Result};
