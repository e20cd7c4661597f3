//! Desk-scale simulator for a directional-modulation secure transceiver:
//! DOA estimation on a uniform linear array, Bayesian refinement of repeated
//! measurements, matched-filter precoding with null-space artificial noise,
//! secrecy-rate link budgets with optimal power allocation, and
//! frequency-diverse-array SINR maps for range-and-angle-selective
//! transmission.

pub mod array;
pub mod beam;
pub mod config;
pub mod csvout;
pub mod doa;
pub mod error;
pub mod experiment;
pub mod learn;
pub mod seed;
pub mod spwt;
pub mod stats;

pub use error::{DmError, Result};
