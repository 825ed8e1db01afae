//! Sampling interaction sequences from a known model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::sequence::{Dataset, InteractionSequence};
use crate::error::{Error, Result};
use crate::model::TrustWorkloadModel;
use crate::types::*;

/// Draws an index from a probability row. Zero-probability entries are never
/// returned, so deterministic rows always give the same outcome.
pub fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in row.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub fn sample_state<R: Rng + ?Sized>(dist: &[f64; N_JOINT], rng: &mut R) -> JointState {
    JointState::ALL[sample_index(dist, rng)]
}

/// Samples reliance and gaze independently given the joint state.
pub fn sample_observation<R: Rng + ?Sized>(
    model: &TrustWorkloadModel,
    s: JointState,
    rng: &mut R,
) -> ObservationTuple {
    let t = model.tables();
    let r = sample_index(&t.emit_trust[s.trust.index()], rng);
    let g = sample_index(&t.emit_workload[s.workload.index()], rng);
    ObservationTuple::new(Reliance::ALL[r], Gaze::ALL[g])
}

/// Samples the next joint state, trust first and then workload.
pub fn sample_transition<R: Rng + ?Sized>(
    model: &TrustWorkloadModel,
    s: JointState,
    a: &ActionTuple,
    rng: &mut R,
) -> JointState {
    let st = model.structure();
    let t = sample_index(model.trust_row(s, st.trust_dims().reduce(a)), rng);
    let w = sample_index(model.workload_row(s, st.workload_dims().reduce(a)), rng);
    JointState::new(TrustState::ALL[t], WorkloadState::ALL[w])
}

/// Samples a sequence along with its hidden state path.
///
/// The first state comes from the priors; the action at frame `t+1` drives
/// the transition into frame `t+1`, matching the likelihood convention.
pub fn sample_with_states<R: Rng + ?Sized>(
    model: &TrustWorkloadModel,
    actions: &[ActionTuple],
    id: impl Into<String>,
    rng: &mut R,
) -> Result<(InteractionSequence, Vec<JointState>)> {
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut states = Vec::with_capacity(actions.len());
    let mut pairs = Vec::with_capacity(actions.len());
    let mut s = sample_state(&model.prior(), rng);
    for (i, a) in actions.iter().enumerate() {
        if i > 0 {
            s = sample_transition(model, s, a, rng);
        }
        states.push(s);
        pairs.push((*a, sample_observation(model, s, rng)));
    }
    Ok((InteractionSequence::from_pairs(id, 0, pairs)?, states))
}

/// Seeded synthetic sequence for a per-frame action scenario.
pub fn generate_synthetic(
    model: &TrustWorkloadModel,
    scenario: &[ActionTuple],
    rng_seed: u64,
) -> Result<InteractionSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_with_states(model, scenario, "synthetic", &mut rng).map(|(s, _)| s)
}

/// Layout of a synthetic within-subject study: every participant drives each
/// of the eight (transparency, traffic, pedestrians) conditions with
/// `intersections_per_condition` intersections per condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudyDesign {
    pub participants: usize,
    pub intersections_per_condition: usize,
    pub frames_per_sequence: usize,
}

impl Default for StudyDesign {
    /// 10 participants x 8 conditions x 3 intersections.
    fn default() -> Self {
        Self { participants: 10, intersections_per_condition: 3, frames_per_sequence: 200 }
    }
}

/// Condition label of a sequence: `AR_on+Traffic_high+Peds_present`.
pub fn condition_label(t: Transparency, tr: Traffic, p: Pedestrians) -> String {
    format!("{t}+{tr}+{p}")
}

/// Generates a study dataset. Sequence ids are
/// `p<participant>/<condition>/i<intersection>`, which is what cross-validation
/// stratifies on. Reliability cycles through low/mid/high across the
/// intersections of a condition; the action is constant within a sequence.
pub fn synthetic_study(model: &TrustWorkloadModel, design: StudyDesign, rng_seed: u64) -> Result<Dataset> {
    if design.frames_per_sequence == 0 {
        return Err(Error::InvalidConfig("frames_per_sequence must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut sequences = Vec::new();
    for p in 0..design.participants {
        for &t in Transparency::ALL {
            for &tr in Traffic::ALL {
                for &ped in Pedestrians::ALL {
                    for k in 0..design.intersections_per_condition {
                        let rel = Reliability::ALL[(k + p) % 3];
                        let a = ActionTuple::new(t, rel, tr, ped);
                        let id = format!("p{:02}/{}/i{}", p, condition_label(t, tr, ped), k);
                        let actions = vec![a; design.frames_per_sequence];
                        sequences.push(sample_with_states(model, &actions, id, &mut rng)?.0);
                    }
                }
            }
        }
    }
    let mut ds = Dataset::new(sequences)?;
    ds.notes.push(format!(
        "synthetic study: {} participants x 8 conditions x {} intersections x {} frames, seed {}",
        design.participants, design.intersections_per_condition, design.frames_per_sequence, rng_seed
    ));
    Ok(ds)
}
