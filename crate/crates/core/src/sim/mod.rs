//! Event-driven simulation kernel: clock, calendar, random streams and
//! service-time distributions.

mod dist;
mod kernel;
mod rng;
mod time;

pub use dist::ServiceDistribution;
pub use kernel::{Kernel, Model, Scheduled, Simulation, Snapshot, TraceEvent, TraceFields};
pub use rng::{derive_seed, RngStreams, StreamKey};
pub use time::{SimTime, DAY_MINUTES};
