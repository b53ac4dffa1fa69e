pub mod anchors;
pub mod config;
pub mod error;
pub mod harvesting;
pub mod linalg;
pub mod montecarlo;
#[cfg(test)]
mod properties;
pub mod rates;
pub mod saddle;
pub mod scenario;
pub mod sweep;
pub mod transfer;

pub use error::{Error, Result};
