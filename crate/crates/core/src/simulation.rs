//! Open-loop step responses and closed-loop policy evaluation.

use std::fmt::Write as _;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::synth::{sample_index, sample_observation, sample_state, sample_transition};
use crate::error::{Error, Result};
use crate::model::{predict, Belief, BeliefTracker, EpisodeMode, TrustWorkloadModel};
use crate::solver::{qmdp_action, DwellGate, QmdpPolicy};
use crate::types::*;

/// Marginal trajectories under a constant action.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub action: ActionTuple,
    pub horizon: usize,
    /// Full joint distribution per frame, `horizon + 1` entries.
    pub distributions: Vec<[f64; N_JOINT]>,
    pub p_trust_high: Vec<f64>,
    pub p_workload_high: Vec<f64>,
}

/// Propagates the joint state distribution under `a` for `horizon` frames,
/// starting from `initial` (the priors when `None`).
pub fn step_response(
    model: &TrustWorkloadModel,
    a: &ActionTuple,
    horizon: usize,
    initial: Option<[f64; N_JOINT]>,
) -> Result<StepResponse> {
    let start = match initial {
        Some(p) => *Belief::new(p)?.probs(),
        None => model.prior(),
    };
    let m = model.transition_matrix(a);
    let mut distributions = Vec::with_capacity(horizon + 1);
    distributions.push(start);
    for _ in 0..horizon {
        let next = predict(&m, distributions.last().expect("nonempty"));
        distributions.push(next);
    }
    let p_trust_high = distributions.iter().map(|p| p[2] + p[3]).collect();
    let p_workload_high = distributions.iter().map(|p| p[1] + p[3]).collect();
    Ok(StepResponse { action: *a, horizon, distributions, p_trust_high, p_workload_high })
}

impl StepResponse {
    /// `t,action,p_trust_high,p_workload_high` rows with leading `#` comments.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("t,action,p_trust_high,p_workload_high\n");
        let label = self.action.label();
        for t in 0..=self.horizon {
            let _ = writeln!(out, "{},{},{:?},{:?}", t, label, self.p_trust_high[t], self.p_workload_high[t]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioFrame {
    pub context: Context,
    /// First frame of an intersection episode.
    pub new_episode: bool,
}

/// Per-frame uncontrollable contexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub frames: Vec<ScenarioFrame>,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn contexts(&self) -> Vec<Context> {
        self.frames.iter().map(|f| f.context).collect()
    }

    /// Concatenates constant-context segments; each segment is one episode.
    pub fn from_segments(spec: &[(Context, usize)]) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::EmptySpec);
        }
        let mut frames = Vec::new();
        for &(context, duration) in spec {
            if duration == 0 {
                return Err(Error::InvalidConfig("segment durations must be >= 1".into()));
            }
            frames.extend((0..duration).map(|i| ScenarioFrame { context, new_episode: i == 0 }));
        }
        Ok(Self { frames })
    }

    /// `n_episodes` episodes of `episode_frames` frames, each with a context
    /// drawn i.i.d. from `dist`.
    pub fn random(n_episodes: usize, episode_frames: usize, dist: &[f64; N_CONTEXTS], seed: u64) -> Result<Self> {
        if n_episodes == 0 {
            return Err(Error::EmptySpec);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec: Vec<(Context, usize)> = (0..n_episodes)
            .map(|_| (Context::from_index(sample_index(dist, &mut rng)).expect("index < 12"), episode_frames))
            .collect();
        Self::from_segments(&spec)
    }
}

/// Anything that chooses a transparency from a belief and the current context.
pub trait TransparencyPolicy {
    fn choose(&self, b: &Belief, u: &Context) -> Transparency;
}

impl TransparencyPolicy for QmdpPolicy {
    fn choose(&self, b: &Belief, u: &Context) -> Transparency {
        qmdp_action(self, b, u)
    }
}

/// Baseline that ignores the belief.
#[derive(Debug, Clone, Copy)]
pub struct FixedTransparency(pub Transparency);

impl TransparencyPolicy for FixedTransparency {
    fn choose(&self, _: &Belief, _: &Context) -> Transparency {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopConfig {
    pub episode_mode: EpisodeMode,
    pub min_dwell: usize,
    /// Discount for the return; normally the solver's gamma.
    pub gamma: f64,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self { episode_mode: EpisodeMode::Reset, min_dwell: 0, gamma: crate::solver::DEFAULT_GAMMA }
    }
}

/// One simulated frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub context: Context,
    pub action: Transparency,
    pub observation: ObservationTuple,
    /// Belief after incorporating `observation`.
    pub belief: Belief,
    /// Reward of the true state at this frame, before the transition.
    pub reward: f64,
    pub new_episode: bool,
    /// The observation was impossible under the belief model.
    pub reset: bool,
    pub true_state: JointState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub frames: usize,
    pub discounted_return: f64,
    pub calibration_rate: f64,
    pub transparency_on_rate: f64,
    pub belief_rmse: f64,
    pub zero_likelihood_resets: usize,
}

/// Simulates a human from `true_model` interacting with the policy, which
/// tracks its belief with `belief_model`.
///
/// Per frame: the policy acts on the current belief and context, the reward
/// of the true state is recorded, the true state transitions and emits an
/// observation, and the belief is updated with that action and observation.
pub fn run_closed_loop<P: TransparencyPolicy + ?Sized>(
    true_model: &TrustWorkloadModel,
    belief_model: &TrustWorkloadModel,
    policy: &P,
    reward: &crate::reward::RewardSpec,
    scenario: &Scenario,
    rng_seed: u64,
    config: &ClosedLoopConfig,
) -> Result<(EvalMetrics, Vec<TraceRow>)> {
    if scenario.is_empty() {
        return Err(Error::EmptySpec);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut tracker = BeliefTracker::new(belief_model, config.episode_mode);
    let mut gate = DwellGate::new(config.min_dwell);
    let mut state = sample_state(&true_model.prior(), &mut rng);
    let mut trace = Vec::with_capacity(scenario.len());
    let (mut ret, mut discount) = (0.0, 1.0);
    let (mut calibrated, mut on, mut sq_err) = (0usize, 0usize, 0.0);
    for (t, frame) in scenario.frames.iter().enumerate() {
        let new_episode = frame.new_episode && t > 0;
        if new_episode {
            tracker.begin_episode();
        }
        let u = frame.context;
        let b = *tracker.belief();
        let tau = gate.apply(policy.choose(&b, &u));
        let a = ActionTuple::from_parts(tau, u);
        let r = reward.reward(state.trust, u.reliability);
        ret += discount * r;
        discount *= config.gamma;
        calibrated += usize::from(r >= 0.0);
        on += usize::from(tau == Transparency::On);
        let truth = if state.trust == TrustState::High { 1.0 } else { 0.0 };
        sq_err += (b.p_trust_high() - truth).powi(2);

        let next = sample_transition(true_model, state, &a, &mut rng);
        let o = sample_observation(true_model, next, &mut rng);
        let step = tracker.step(&a, &o);
        trace.push(TraceRow {
            t,
            context: u,
            action: tau,
            observation: o,
            belief: step.belief,
            reward: r,
            new_episode,
            reset: step.reset,
            true_state: state,
        });
        state = next;
    }
    let n = scenario.len() as f64;
    let metrics = EvalMetrics {
        frames: scenario.len(),
        discounted_return: ret,
        calibration_rate: calibrated as f64 / n,
        transparency_on_rate: on as f64 / n,
        belief_rmse: (sq_err / n).sqrt(),
        zero_likelihood_resets: tracker.zero_likelihood_resets(),
    };
    Ok((metrics, trace))
}

const TRACE_HEADER: &str =
    "t,context,action,reliance,gaze,belief_0,belief_1,belief_2,belief_3,reward,new_episode,reset";

/// Trace CSV with leading `#` comments.
pub fn trace_csv(trace: &[TraceRow], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let b = r.belief.probs();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{},{}",
            r.t,
            r.context,
            r.action,
            r.observation.reliance,
            r.observation.gaze,
            b[0],
            b[1],
            b[2],
            b[3],
            r.reward,
            u8::from(r.new_episode),
            u8::from(r.reset)
        );
    }
    out
}

/// A trace row as read back from CSV (no hidden state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub context: Context,
    pub action: Transparency,
    pub observation: ObservationTuple,
    pub belief: [f64; N_JOINT],
    pub reward: f64,
    pub new_episode: bool,
    pub reset: bool,
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err(Error::Parse(format!("trace header must be `{TRACE_HEADER}`")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    let flag = |s: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Parse(format!("expected 0/1, got `{s}`"))),
    };
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TraceRecord {
                t: rec[0].parse().map_err(|e| Error::Parse(format!("t: {e}")))?,
                context: Context::parse_label(&rec[1])?,
                action: rec[2].parse()?,
                observation: ObservationTuple::new(rec[3].parse()?, rec[4].parse()?),
                belief: [num(&rec[5])?, num(&rec[6])?, num(&rec[7])?, num(&rec[8])?],
                reward: num(&rec[9])?,
                new_episode: flag(&rec[10])?,
                reset: flag(&rec[11])?,
            })
        })
        .collect()
}

/// Re-runs the belief filter over recorded actions and observations.
pub fn replay_beliefs(model: &TrustWorkloadModel, mode: EpisodeMode, records: &[TraceRecord]) -> Vec<Belief> {
    let mut tracker = BeliefTracker::new(model, mode);
    records
        .iter()
        .map(|r| {
            if r.new_episode {
                tracker.begin_episode();
            }
            tracker.step(&ActionTuple::from_parts(r.action, r.context), &r.observation).belief
        })
        .collect()
}
