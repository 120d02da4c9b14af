//! Round-synchronous dynamic networks.
//!
//! Everything the agents cannot see lives here: the network trace an
//! adversary picks, the ground-truth oracles derived from it, the engine
//! that moves messages and steps agents, and the run-time property checks
//! the engine can layer on top.

mod checks;
mod engine;
mod faults;
pub mod oracle;
pub mod trace;

pub use engine::{
    run, run_with_options, AdversaryConfig, BranchEvents, ConfigError, DotRequest, DotSnapshot,
    DotTarget, ExperimentConfig, FaultConfig, HorizonSpec, InputsSpec, RoundRecord, RunArtifacts,
    RunOptions, Summary,
};
pub use faults::FaultSpec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic per-purpose stream derivation. All randomness in a run is
/// drawn from generators derived this way, so nothing depends on thread
/// scheduling or evaluation order, and the mixing is plain integer
/// arithmetic so streams are stable across platforms.
pub(crate) fn derived_rng(seed: u64, purpose: &str, counter: u64) -> ChaCha8Rng {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in purpose.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= seed.rotate_left(17);
    h = h.wrapping_mul(0x0000_0100_0000_01b3);
    h ^= counter.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    ChaCha8Rng::seed_from_u64(h)
}
