//! Spatiotemporal tool orchestration for video question answering.

pub mod config;
pub mod frames;
pub mod generate;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod protocol;
pub mod registry;
pub mod rng;
pub mod runner;
pub mod scheduler;
pub mod sim;
pub mod suite;
pub mod text;
pub mod tool;
pub mod trace;
