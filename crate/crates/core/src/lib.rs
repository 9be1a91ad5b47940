//! Simulation and optimization of two-layer movable-antenna uplink arrays.
//!
//! Antennas are grouped into subarrays that slide along a line segment, and
//! each antenna can additionally be fine-tuned inside its subarray. The crate
//! provides:
//!
//! * [`geometry`]: layouts, feasibility, hinge penalties and displacement cost;
//! * [`channel`]: far-field multipath channels as functions of positions;
//! * [`beamforming`]: MMSE receive beamforming and sum-rate;
//! * [`pso`]: a penalty-aware particle swarm engine;
//! * [`optimizer`]: alternating subarray/antenna optimization and benchmarks;
//! * [`harness`]: seeded Monte-Carlo sweeps with CSV output.
//!
//! Lengths are measured in wavelengths throughout.

// Negated float comparisons are deliberate: they count NaN as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod optimizer;
pub mod pso;
pub mod stream;

pub use beamforming::{sum_rate_optimal, BeamformingResult};
pub use channel::{sample_scenario, Scenario};
pub use error::{Error, Result};
pub use geometry::{ArrayArchitecture, TwoLayerLayout};
pub use optimizer::{AoConfig, Scheme, SchemeResult};
pub use pso::SwarmConfig;
pub use stream::SeedStream;
