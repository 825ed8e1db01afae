//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustcal_core::data::{synthetic_study, Dataset, StudyDesign};
use trustcal_core::{ActionStructure, TrustWorkloadModel};

/// Random model with the `paper` preset structure.
pub fn model(seed: u64) -> TrustWorkloadModel {
    TrustWorkloadModel::random(ActionStructure::paper(), &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Study-sized dataset (240 sequences) with `frames` frames each.
pub fn study(frames: usize) -> Dataset {
    let design = StudyDesign { frames_per_sequence: frames, ..StudyDesign::default() };
    synthetic_study(&model(1), design, 2).expect("valid design")
}
