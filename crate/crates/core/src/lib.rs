//! Decide whether two Wi-Fi RSSI fingerprints were recorded in immediate
//! physical proximity.
//!
//! The pipeline is split into stages that communicate through plain data:
//!
//! * [`ingest`] loads scans (line-delimited JSON or wide CSV matrices),
//!   groups bursts and builds median pseudo-fingerprints,
//! * [`pairing`] enumerates labeled pairs per floor,
//! * [`features`] turns a pair into a fixed, named feature vector,
//! * [`model`] trains and applies attribute-bagged decision trees,
//! * [`selection`] and [`metrics`] cover mRMR feature ranking and evaluation,
//! * [`synth`] generates log-distance path loss environments for testing.

pub mod error;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pairing;
pub mod selection;
pub mod stats;
pub mod synth;
pub mod table;
pub mod types;

pub use error::{Error, ErrorKind, Result};
pub use types::{
    shared_aps, ApId, Burst, Fingerprint, FingerprintPair, FloorKey, Position, ProximityClass, Reading, Readings,
};
