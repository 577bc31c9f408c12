//! Joint throughput and positioning planning of 5G base-station sites over a
//! pre-deployed LTE layer.

pub mod error;
pub mod model;
pub mod peb;

pub use error::{Error, Result};
pub mod convex;
pub mod rng;
pub mod routines;
pub mod scenarios;
pub mod report;
pub mod kpi;
pub mod baselines;
