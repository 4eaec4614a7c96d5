//! Deterministic microscopic simulator of a single unsignalized intersection
//! shared by human-driven vehicles and robot vehicles that learn a
//! decentralized Stop/Go policy.

pub mod comms;
pub mod config;
pub mod control;
pub mod demand;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod idm;
pub mod intersection;
pub mod learn;
pub mod metrics;
pub mod perception;
pub mod rng;
pub mod runlog;
pub mod sim;
pub mod stream;
pub mod training;
pub mod vehicle;
pub mod world;

pub use error::{Error, Result};
