//! Simulation of prefix replication and placement in a cluster of
//! video-on-demand proxy groups.
//!
//! The crate is layered bottom-up:
//! - [`catalog`]: videos, the Zipf-like popularity law, per-proxy demand windows.
//! - [`planner`]: prefix sizing and replica placement (regional-popularity
//!   strategy plus two baselines) and the constraint validator.
//! - [`sccache`]: VBR frame traces, scene-change detection, block allocation.
//! - [`sim`]: topology, workload, request routing and the event loop.
//! - [`metrics`]: objective quantities, log verification, CSV/JSON output.
//! - [`harness`]: strategy × seed experiment matrix.
//!
//! Formula code is generic over the scalar type; the aliases below fix it to `f64`.

pub mod catalog;
pub mod error;
pub mod harness;
pub mod ids;
pub mod metrics;
pub mod planner;
pub mod rng;
pub mod scalar;
pub mod sccache;
pub mod sim;

pub use error::{Error, Result};
pub use ids::{PsId, VideoId};
pub use planner::Strategy;
pub use scalar::{Real, Scalar};

pub type ZipfModel = catalog::ZipfModel<f64>;
pub type PrefixSizes = planner::PrefixSizes<f64>;
pub type RegionalSizes = planner::RegionalSizes<f64>;
