//! Mobility prediction and stable-path routing for simulated wireless ad hoc
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`mobility`]: Random Waypoint traces, sampling, and named scenarios.
//! - [`predictor`]: a three-layer recurrent network with output feedback,
//!   trained by back propagation through time over a multi-step horizon.
//! - [`stability`]: link expiration times from predicted distances, and path
//!   expiration times as the minimum over a path's links.
//! - [`routing`]: connectivity snapshots, path enumeration, route selection
//!   policies and the route-lifetime simulation.
//! - [`experiment`]: the end-to-end evaluation pipelines used by the CLI.
//!
//! Batch workloads (grid selection, multi-seed evaluation, policy
//! comparison) run on rayon when the `parallel` feature is enabled and fall
//! back to plain iteration otherwise; see [`par`].

pub mod error;
pub mod experiment;
pub mod io;
pub mod mobility;
pub mod par;
pub mod predictor;
pub mod routing;
pub mod seed;
pub mod stability;

pub use error::{Error, Result};
pub use mobility::{Position, Territory};
pub use stability::ExpirationTime;
