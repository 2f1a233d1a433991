//! Discrete-event simulator of a tiered DDR + CXL memory subsystem.
//!
//! Requests flow from cores through per-CHA ingress queues into a shared
//! tracking table and on to memory devices. A closed-loop controller
//! estimates slow-tier latency from table counters and confines the cores
//! that cause backlog.

pub mod controller;
pub mod engine;
pub mod error;
pub mod llc;
pub mod metrics;
pub mod platform;
pub mod runner;
pub mod scenario;
pub mod workloads;

pub use error::{Error, Result};
