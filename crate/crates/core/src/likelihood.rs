//! Scaled forward recursion over one interaction sequence.

use crate::data::InteractionSequence;
use crate::error::{Error, Result};
use crate::model::{correct, predict, Belief, TrustWorkloadModel};

/// Normalized forward variables and the per-step scaling constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// `alpha[t]` is the filtered belief after frame `t`.
    pub alpha: Vec<Belief>,
    /// `scale[t]` is `p(o_t | o_1..o_{t-1}, a_1..a_t)`.
    pub scale: Vec<f64>,
}

impl ForwardPass {
    pub fn log_likelihood(&self) -> f64 {
        self.scale.iter().map(|c| c.ln()).sum()
    }
}

/// Runs the filter over `seq`: the first frame conditions the priors on `o_1`,
/// each later frame predicts through `a_t` and conditions on `o_t`.
/// `ZeroLikelihood` if some prefix of the sequence is impossible.
pub fn forward(model: &TrustWorkloadModel, seq: &InteractionSequence) -> Result<ForwardPass> {
    let steps = seq.steps();
    if steps.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut alpha = Vec::with_capacity(steps.len());
    let mut scale = Vec::with_capacity(steps.len());
    let first = &steps[0];
    let (b, c) = Belief::normalized(correct(&model.emission_vector(&first.observation), &model.prior()))?;
    alpha.push(b);
    scale.push(c);
    for st in &steps[1..] {
        let prev = alpha.last().expect("nonempty").probs();
        let pred = predict(&model.transition_matrix(&st.action), prev);
        let (b, c) = Belief::normalized(correct(&model.emission_vector(&st.observation), &pred))?;
        alpha.push(b);
        scale.push(c);
    }
    Ok(ForwardPass { alpha, scale })
}

/// `log p(o_1..o_N | a_1..a_N)`; negative infinity when the sequence is
/// impossible under the model.
pub fn sequence_log_likelihood(model: &TrustWorkloadModel, seq: &InteractionSequence) -> Result<f64> {
    match forward(model, seq) {
        Ok(f) => Ok(f.log_likelihood()),
        Err(Error::ZeroLikelihood) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Sum of per-sequence log-likelihoods.
pub fn total_log_likelihood<'a>(
    model: &TrustWorkloadModel,
    seqs: impl IntoIterator<Item = &'a InteractionSequence>,
) -> Result<f64> {
    seqs.into_iter().map(|s| sequence_log_likelihood(model, s)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{belief_observe, belief_update, ModelTables};
    use crate::types::*;

    #[test]
    fn single_frame_is_prior_weighted_emission() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        let m = TrustWorkloadModel::random(ActionStructure::paper(), &mut rng);
        let a = ActionTuple::from_index(3).unwrap();
        let o = ObservationTuple::from_index(6).unwrap();
        let seq = InteractionSequence::from_pairs("x", 0, [(a, o)]).unwrap();
        let p = m.prior();
        let expected: f64 = JointState::ALL.iter().map(|s| p[s.index()] * m.joint_emission(*s, &o)).sum();
        assert!((sequence_log_likelihood(&m, &seq).unwrap() - expected.ln()).abs() < 1e-14);
    }

    #[test]
    fn deterministic_consistent_data_has_zero_log_likelihood() {
        let st = ActionStructure::minimal();
        let mut t = ModelTables::uniform(&st);
        t.prior_trust = [0.0, 1.0];
        t.prior_workload = [1.0, 0.0];
        t.trans_trust.iter_mut().for_each(|r| *r = [0.0, 1.0]);
        t.trans_workload.iter_mut().for_each(|r| *r = [1.0, 0.0]);
        t.emit_trust = [[1.0, 0.0], [0.0, 1.0]];
        t.emit_workload = [[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0]];
        let m = TrustWorkloadModel::new(st, t).unwrap();
        let a = ActionTuple::from_index(0).unwrap();
        let o = ObservationTuple::new(Reliance::Plus, Gaze::Road);
        let seq = InteractionSequence::from_pairs("x", 0, vec![(a, o); 10]).unwrap();
        assert_eq!(sequence_log_likelihood(&m, &seq).unwrap(), 0.0);

        let bad = ObservationTuple::new(Reliance::Minus, Gaze::Road);
        let seq = InteractionSequence::from_pairs("y", 0, vec![(a, o), (a, bad)]).unwrap();
        assert_eq!(sequence_log_likelihood(&m, &seq).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn forward_matches_belief_filter_exactly() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(2);
        let m = TrustWorkloadModel::random(ActionStructure::full(), &mut rng);
        let pairs: Vec<_> = (0..30)
            .map(|i| (ActionTuple::from_index((i * 7) % 24).unwrap(), ObservationTuple::from_index((i * 3) % 10).unwrap()))
            .collect();
        let seq = InteractionSequence::from_pairs("x", 0, pairs.clone()).unwrap();
        let f = forward(&m, &seq).unwrap();
        let mut b = belief_observe(&m, &m.prior_belief(), &pairs[0].1).unwrap();
        assert_eq!(b, f.alpha[0]);
        for (t, (a, o)) in pairs.iter().enumerate().skip(1) {
            b = belief_update(&m, &b, a, o).unwrap();
            assert_eq!(b, f.alpha[t]);
        }
    }
}
