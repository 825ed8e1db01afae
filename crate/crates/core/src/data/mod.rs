//! Sequence ingestion, preprocessing and synthetic data.

pub mod preprocess;
pub mod sequence;
pub mod synth;

pub use preprocess::{
    label_reliability, propagate_fixations, read_fixations, segment_episode, segment_window, FixationEvent, FPS,
};
pub use sequence::{Dataset, InteractionSequence, Step};
pub use synth::{generate_synthetic, sample_with_states, synthetic_study, StudyDesign};
