//! Discrete-event laboratory for social-aware opportunistic routing.
//!
//! Replays contact traces (recorded or synthetic) through SCORP, dLife,
//! Bubble Rap and binary Spray and Wait, and aggregates delivery
//! probability, cost and latency across seeds.
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod experiment;
pub mod model;
pub mod protocols;
pub mod report;
pub mod social;
pub mod traces;
