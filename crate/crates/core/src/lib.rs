//! Cooperative task scheduling for space-air-ground integrated networks.
//!
//! The crate bundles a seeded slot-based simulator of UAVs offloading tasks
//! to base stations and a LEO satellite, dynamic UAV clustering, a small
//! dense-network engine, and the cluster-based multi-agent actor-critic
//! scheduler together with its comparison baselines and experiment harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod clustering;
pub mod driver;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod link;
pub mod marl;
pub mod mobility;
pub mod nn;
pub mod rng;
pub mod task;

pub use error::{Error, Result};
pub use geometry::{Area, Position};
pub use link::{ChannelParams, ComputeDevice, DeviceId};
pub use mobility::MobilityState;
pub use task::{task_profit, NodeId, ProfitParams, Task, TaskId};
