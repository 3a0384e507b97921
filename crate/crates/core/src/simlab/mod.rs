//! Seeded data generators and the replicate runner for coverage/size
//! experiments.
//!
//! Reproducibility contract: `(design, method, n_trials, seed)` fully
//! determines every random draw. Each trial derives its own generator from
//! the master seed and the trial index through a counter-based SplitMix64
//! scheme, so trials can run on any number of threads without coupling draw
//! order, and aggregation is a deterministic reduction in trial order.

mod design;
mod runner;
pub mod tables;

pub use design::{
    dataset_fingerprint, gen_sup, gen_unsup, GroupSizes, PathologicalConvention, SupDataset,
    SupDesign, UnsupDataset, UnsupDesign,
};
pub use runner::{
    run_experiment, shrinkage_experiment, DesignSpec, ExperimentSummary, MethodSpec,
    ShrinkageSetup, TrialResult, CSV_HEADER,
};

use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one trial of one experiment.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut state = master_seed ^ trial.wrapping_mul(0xA076_1D64_78BD_642F);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    <ChaCha8Rng as rand::SeedableRng>::from_seed(key)
}

/// Derived stream for a named sub-experiment (used by the acceptance suite to
/// decouple criteria from each other).
pub fn derive_seed(master_seed: u64, tag: &str) -> u64 {
    let mut state = master_seed;
    for &b in tag.as_bytes() {
        state = state.wrapping_mul(0x100_0000_01B3) ^ b as u64;
        splitmix64(&mut state);
    }
    splitmix64(&mut state)
}
