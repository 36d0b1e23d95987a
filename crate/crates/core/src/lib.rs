//! Estimation of domestic and cross-border cannibalization of wind and solar
//! market values on an unbalanced panel of bidding zones.

pub mod error;
pub mod cli;
pub mod effects;
pub mod estimate;
pub mod ingest;
pub mod metrics;
pub mod panel;
pub mod sensitivity;
pub mod spatial;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
