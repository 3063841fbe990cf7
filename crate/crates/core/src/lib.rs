//! Cell-free massive MIMO joint communication and proactive monitoring.
//!
//! A set of access points is split between downlink mode (serving legitimate
//! users and jamming untrusted receivers with partial zero-forcing) and
//! monitoring mode (observing untrusted transmitters). This crate evaluates
//! closed-form downlink spectral efficiency and monitoring success
//! probability, searches AP mode assignments, and checks the closed forms
//! against a channel-level Monte Carlo simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod config;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod grouping;
pub mod mc;
pub mod perf;
pub mod rng;
pub mod scenario;

pub use config::SystemConfig;
pub use error::{Error, Result};
