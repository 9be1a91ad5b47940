//! Seed layout of a sweep.
//!
//! ```text
//! root(master) ─ child(trial) ─┬─ label("scenario")             scenario draw
//!                              └─ label(scheme run) ─ child(call) ─ child(iteration) ─ child(particle)
//! ```
//!
//! Iteration 0 is swarm initialization. Alternating optimization uses call
//! `2r` for the subarray swarm of round `r` and `2r + 1` for the antenna
//! swarm; single-swarm schemes use call 0.

use crate::stream::SeedStream;

pub const SCENARIO_LABEL: &str = "scenario";

pub fn trial_stream(master_seed: u64, trial: u64) -> SeedStream {
    SeedStream::root(master_seed).child(trial)
}

pub fn scenario_stream(master_seed: u64, trial: u64) -> SeedStream {
    trial_stream(master_seed, trial).child_label(SCENARIO_LABEL)
}

pub fn scheme_stream(master_seed: u64, trial: u64, scheme_label: &str) -> SeedStream {
    trial_stream(master_seed, trial).child_label(scheme_label)
}

/// Stream that seeds one particle's randomness in one PSO iteration.
pub fn seed_derivation(
    master_seed: u64,
    trial: u64,
    scheme_label: &str,
    call: u64,
    iteration: u64,
    particle: u64,
) -> SeedStream {
    scheme_stream(master_seed, trial, scheme_label)
        .child(call)
        .child(iteration)
        .child(particle)
}
