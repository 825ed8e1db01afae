//! Factored trust/workload POMDP toolkit.
//!
//! The latent state is a pair (trust, workload). Actions combine the
//! controllable AR transparency with an observed context (reliability,
//! traffic, pedestrians). Observations pair a reliance signal with a gaze
//! target.
//!
//! Pipeline: [`data`] ingests sequences, [`estimation`] fits models by EM,
//! [`selection`] picks the action structure by cross-validated AIC,
//! [`solver`] computes a Q-MDP policy, and [`simulation`] evaluates it.

pub mod data;
pub mod docs;
pub mod error;
pub mod estimation;
pub mod labeling;
pub mod likelihood;
pub mod model;
pub mod reward;
pub mod selection;
pub mod simulation;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use model::{
    belief_update, belief_observe, reduce_action, Belief, BeliefTracker, EpisodeMode, ModelTables, ReducedAction,
    TrackerStep, TrustWorkloadModel,
};
pub use reward::RewardSpec;
pub use types::*;
