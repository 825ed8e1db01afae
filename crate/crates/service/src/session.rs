//! Session state and the act-then-observe step, independent of HTTP.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use trustcal_core::docs::{ModelDoc, PolicyDoc};
use trustcal_core::solver::{expected_reward, qmdp_action, DwellGate, QmdpPolicy};
use trustcal_core::{
    belief_update, ActionTuple, Belief, Context, EpisodeMode, Error as CoreError, ObservationTuple, Transparency,
    TrustWorkloadModel,
};

use crate::error::ServiceError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub model: ModelDoc,
    pub policy: PolicyDoc,
    #[serde(default)]
    pub carry_belief: bool,
    /// Minimum frames between transparency switches; 0 disables the gate.
    #[serde(default)]
    pub min_dwell: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRequest {
    pub context: Context,
    pub observation: ObservationTuple,
    /// Marks the first frame of a new intersection episode.
    #[serde(default)]
    pub new_episode: bool,
}

/// One entry of a session trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub context: Context,
    pub observation: ObservationTuple,
    pub new_episode: bool,
    /// Chosen from the belief before this step's observation.
    pub action: Transparency,
    /// Posterior over `T_low/W_low, T_low/W_high, T_high/W_low, T_high/W_high`.
    pub belief: [f64; 4],
    pub p_trust_high: f64,
    pub p_workload_high: f64,
    /// Belief-expected reward of the chosen action's context, before the update.
    pub reward: f64,
    /// The observation was impossible and the belief fell back to the priors.
    pub reset: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionInfo {
    pub id: String,
    pub created_at: u64,
    pub carry_belief: bool,
    pub min_dwell: usize,
    pub steps: usize,
    pub belief: [f64; 4],
    pub p_trust_high: f64,
    pub p_workload_high: f64,
}

pub struct Session {
    id: String,
    created_at: u64,
    model: TrustWorkloadModel,
    policy: QmdpPolicy,
    mode: EpisodeMode,
    min_dwell: usize,
    gate: DwellGate,
    belief: Belief,
    trace: Vec<StepRecord>,
}

impl Session {
    /// Validates both documents and starts at the model priors.
    pub fn new(id: String, req: &CreateSession) -> Result<Self, ServiceError> {
        if req.model.categories != req.policy.categories {
            return Err(CoreError::SchemaMismatch("model and policy category sets differ".into()).into());
        }
        let model = req.model.to_model()?;
        let policy = req.policy.to_policy()?;
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Ok(Self {
            id,
            created_at,
            belief: model.prior_belief(),
            model,
            policy,
            mode: if req.carry_belief { EpisodeMode::Carry } else { EpisodeMode::Reset },
            min_dwell: req.min_dwell,
            gate: DwellGate::new(req.min_dwell),
            trace: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn trace(&self) -> &[StepRecord] {
        &self.trace
    }

    pub fn info(&self) -> SessionInfo {
        SessionInfo {
            id: self.id.clone(),
            created_at: self.created_at,
            carry_belief: self.mode == EpisodeMode::Carry,
            min_dwell: self.min_dwell,
            steps: self.trace.len(),
            belief: *self.belief.probs(),
            p_trust_high: self.belief.p_trust_high(),
            p_workload_high: self.belief.p_workload_high(),
        }
    }

    /// Chooses the transparency from the current belief, then folds in the
    /// observation. Matches the closed-loop simulator frame for frame.
    pub fn step(&mut self, req: &StepRequest) -> StepRecord {
        if req.new_episode && self.mode == EpisodeMode::Reset {
            self.belief = self.model.prior_belief();
        }
        let action = self.gate.apply(qmdp_action(&self.policy, &self.belief, &req.context));
        let reward = expected_reward(self.policy.reward(), &self.belief, &req.context);
        let a = ActionTuple::from_parts(action, req.context);
        let (belief, reset) = match belief_update(&self.model, &self.belief, &a, &req.observation) {
            Ok(b) => (b, false),
            Err(_) => (self.model.prior_belief(), true),
        };
        self.belief = belief;
        let record = StepRecord {
            step: self.trace.len(),
            context: req.context,
            observation: req.observation,
            new_episode: req.new_episode,
            action,
            belief: *belief.probs(),
            p_trust_high: belief.p_trust_high(),
            p_workload_high: belief.p_workload_high(),
            reward,
            reset,
        };
        self.trace.push(record);
        record
    }
}
