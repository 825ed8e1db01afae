//! Exhaustive finite-horizon POMDP value, used as a test oracle.
//!
//! The tree branches over the context drawn at each step, the transparency
//! choice, and every observation with nonzero probability, so it is only
//! usable for short horizons and sparse context distributions.

use super::{all_transitions, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{correct, predict, Belief, TrustWorkloadModel};
use crate::reward::RewardSpec;
use crate::types::*;

pub const MAX_EXACT_HORIZON: usize = 6;

struct Oracle<'a> {
    reward: &'a RewardSpec,
    config: &'a SolverConfig,
    trans: Vec<[[f64; N_JOINT]; N_JOINT]>,
    emissions: Vec<[f64; N_JOINT]>,
}

impl Oracle<'_> {
    fn value(&self, b: &[f64; N_JOINT], horizon: usize) -> f64 {
        if horizon == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for u in Context::all() {
            let pu = self.config.context_dist[u.index()];
            if pu == 0.0 {
                continue;
            }
            let immediate: f64 = JointState::ALL
                .iter()
                .map(|s| b[s.index()] * self.reward.reward(s.trust, u.reliability))
                .sum();
            let mut best = f64::NEG_INFINITY;
            for &tau in Transparency::ALL {
                let a = ActionTuple::from_parts(tau, u);
                let mut future = 0.0;
                if horizon > 1 {
                    let pred = predict(&self.trans[a.index()], b);
                    for e in &self.emissions {
                        let mass = correct(e, &pred);
                        let po: f64 = mass.iter().sum();
                        if po > 0.0 {
                            future += po * self.value(&mass.map(|m| m / po), horizon - 1);
                        }
                    }
                }
                best = best.max(immediate + self.config.gamma * future);
            }
            total += pu * best;
        }
        total
    }
}

/// Optimal expected discounted reward over `horizon` steps from belief `b`,
/// by exhaustive expansion. At each step the context is drawn from
/// `config.context_dist` and revealed before the transparency choice.
pub fn exact_finite_horizon_value(
    model: &TrustWorkloadModel,
    reward: &RewardSpec,
    config: &SolverConfig,
    b: &Belief,
    horizon: usize,
) -> Result<f64> {
    if horizon > MAX_EXACT_HORIZON {
        return Err(Error::HorizonTooLarge(horizon));
    }
    config.validate()?;
    let oracle = Oracle {
        reward,
        config,
        trans: all_transitions(model),
        emissions: ObservationTuple::all().map(|o| model.emission_vector(&o)).collect(),
    };
    Ok(oracle.value(b.probs(), horizon))
}
