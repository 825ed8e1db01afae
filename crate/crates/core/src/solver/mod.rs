//! Transparency policy synthesis.
//!
//! Q-values are computed on the fully observable MDP over joint states. The
//! context (reliability, traffic, pedestrians) at the current step is known,
//! while future contexts are averaged under `SolverConfig::context_dist`:
//!
//! ```text
//! Q(s, τ, u) = R(s_T, u.rel) + γ Σ_s' T(s'|s, (τ,u)) Σ_u' p(u') max_τ' Q(s', τ', u')
//! ```
//!
//! At run time the policy picks `argmax_τ Σ_s b(s) Q(s, τ, u)` (Q-MDP).

pub mod exact;

use crate::error::{Error, Result};
use crate::model::{Belief, TrustWorkloadModel};
use crate::reward::RewardSpec;
use crate::types::*;

pub use exact::exact_finite_horizon_value;

/// Per-frame discount giving a one-second horizon at 25 frames per second.
pub const DEFAULT_GAMMA: f64 = 25.0 / 26.0;
pub const MAX_VI_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub vi_tol: f64,
    /// Distribution of future contexts, indexed by [`Context::index`].
    pub context_dist: [f64; N_CONTEXTS],
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA, vi_tol: 1e-10, context_dist: [1.0 / N_CONTEXTS as f64; N_CONTEXTS] }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.vi_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("vi_tol must be > 0, got {}", self.vi_tol)));
        }
        if self.context_dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig("context distribution has a negative entry".into()));
        }
        let sum: f64 = self.context_dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("context distribution sums to {sum}")));
        }
        Ok(())
    }
}

/// Q-table indexed by (joint state, transparency, context).
#[derive(Debug, Clone, PartialEq)]
pub struct QmdpPolicy {
    q: Vec<f64>,
    reward: RewardSpec,
    config: SolverConfig,
}

fn q_index(s: usize, tau: usize, u: usize) -> usize {
    (s * 2 + tau) * N_CONTEXTS + u
}

impl QmdpPolicy {
    pub const TABLE_LEN: usize = N_JOINT * 2 * N_CONTEXTS;

    pub fn from_parts(q: Vec<f64>, reward: RewardSpec, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        if q.len() != Self::TABLE_LEN {
            return Err(Error::InvalidConfig(format!("Q table has {} entries, expected {}", q.len(), Self::TABLE_LEN)));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("Q table has a non-finite entry".into()));
        }
        Ok(Self { q, reward, config })
    }

    pub fn q(&self, s: JointState, tau: Transparency, u: &Context) -> f64 {
        self.q[q_index(s.index(), tau.index(), u.index())]
    }

    pub fn table(&self) -> &[f64] {
        &self.q
    }

    pub fn reward(&self) -> &RewardSpec {
        &self.reward
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// `Σ_s b(s) Q(s, τ, u)`.
    pub fn belief_q(&self, b: &Belief, tau: Transparency, u: &Context) -> f64 {
        JointState::ALL.iter().map(|s| b.prob(*s) * self.q(*s, tau, u)).sum()
    }

    /// Q-MDP value of a belief before the context is revealed.
    pub fn belief_value(&self, b: &Belief) -> f64 {
        Context::all()
            .map(|u| {
                let best = Transparency::ALL
                    .iter()
                    .map(|t| self.belief_q(b, *t, &u))
                    .fold(f64::NEG_INFINITY, f64::max);
                self.config.context_dist[u.index()] * best
            })
            .sum()
    }
}

/// Sup-norm residual after each sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueIterationTrace {
    pub residuals: Vec<f64>,
}

/// All 24 transition matrices, indexed by [`ActionTuple::index`].
pub(crate) fn all_transitions(model: &TrustWorkloadModel) -> Vec<[[f64; N_JOINT]; N_JOINT]> {
    ActionTuple::all().map(|a| model.transition_matrix(&a)).collect()
}

fn bellman_sweep(
    q: &[f64],
    trans: &[[[f64; N_JOINT]; N_JOINT]],
    reward: &RewardSpec,
    config: &SolverConfig,
) -> Vec<f64> {
    let mut v = [0.0; N_JOINT];
    for (s, vs) in v.iter_mut().enumerate() {
        *vs = (0..N_CONTEXTS)
            .map(|u| config.context_dist[u] * q[q_index(s, 0, u)].max(q[q_index(s, 1, u)]))
            .sum();
    }
    let mut out = vec![0.0; QmdpPolicy::TABLE_LEN];
    for s in JointState::ALL {
        for &tau in Transparency::ALL {
            for u in Context::all() {
                let a = ActionTuple::from_parts(tau, u);
                let row = &trans[a.index()][s.index()];
                let future: f64 = row.iter().zip(&v).map(|(p, x)| p * x).sum();
                out[q_index(s.index(), tau.index(), u.index())] =
                    reward.reward(s.trust, u.reliability) + config.gamma * future;
            }
        }
    }
    out
}

/// Value iteration to a sup-norm residual below `config.vi_tol`, with the
/// residual history.
pub fn value_iteration_traced(
    model: &TrustWorkloadModel,
    reward: &RewardSpec,
    config: &SolverConfig,
) -> Result<(QmdpPolicy, ValueIterationTrace)> {
    config.validate()?;
    let trans = all_transitions(model);
    let mut q = vec![0.0; QmdpPolicy::TABLE_LEN];
    let mut residuals = Vec::new();
    for _ in 0..MAX_VI_ITERATIONS {
        let next = bellman_sweep(&q, &trans, reward, config);
        let residual = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        residuals.push(residual);
        if residual < config.vi_tol {
            let policy = QmdpPolicy { q, reward: *reward, config: *config };
            return Ok((policy, ValueIterationTrace { residuals }));
        }
    }
    Err(Error::NonConvergence(MAX_VI_ITERATIONS))
}

pub fn value_iteration(model: &TrustWorkloadModel, reward: &RewardSpec, config: &SolverConfig) -> Result<QmdpPolicy> {
    value_iteration_traced(model, reward, config).map(|(p, _)| p)
}

/// Q-table after exactly `horizon` Bellman sweeps from zero: the Q-MDP
/// values of a problem that ends after `horizon` rewards.
pub fn finite_horizon_q(
    model: &TrustWorkloadModel,
    reward: &RewardSpec,
    config: &SolverConfig,
    horizon: usize,
) -> Result<QmdpPolicy> {
    config.validate()?;
    let trans = all_transitions(model);
    let mut q = vec![0.0; QmdpPolicy::TABLE_LEN];
    for _ in 0..horizon {
        q = bellman_sweep(&q, &trans, reward, config);
    }
    Ok(QmdpPolicy { q, reward: *reward, config: *config })
}

/// Belief-weighted argmax over transparency. Ties go to `AR_off`.
pub fn qmdp_action(policy: &QmdpPolicy, b: &Belief, u: &Context) -> Transparency {
    let off = policy.belief_q(b, Transparency::Off, u);
    let on = policy.belief_q(b, Transparency::On, u);
    if on > off {
        Transparency::On
    } else {
        Transparency::Off
    }
}

/// Belief-expected immediate reward `Σ_s b(s) R(s_T, u.rel)`.
pub fn expected_reward(reward: &RewardSpec, b: &Belief, u: &Context) -> f64 {
    JointState::ALL.iter().map(|s| b.prob(*s) * reward.reward(s.trust, u.reliability)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub context: Context,
    pub p_trust_high: f64,
    pub p_workload_high: f64,
    pub action: Transparency,
}

/// The policy over a `resolution x resolution` grid of product-form beliefs
/// `b(s_T, s_W) = b_T(s_T) b_W(s_W)`, for every context.
pub fn policy_grid(policy: &QmdpPolicy, resolution: usize) -> Result<Vec<GridCell>> {
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!("grid resolution must be >= 2, got {resolution}")));
    }
    let step = |i: usize| i as f64 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(N_CONTEXTS * resolution * resolution);
    for u in Context::all() {
        for i in 0..resolution {
            for j in 0..resolution {
                let (pt, pw) = (step(i), step(j));
                let b = Belief::from_marginals(pt, pw)?;
                out.push(GridCell { context: u, p_trust_high: pt, p_workload_high: pw, action: qmdp_action(policy, &b, &u) });
            }
        }
    }
    Ok(out)
}

/// `context,pT_high,pW_high,action` rows with leading `#` comments.
pub fn policy_grid_csv(cells: &[GridCell], comments: &[String]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("context,pT_high,pW_high,action\n");
    for c in cells {
        let _ = writeln!(out, "{},{},{},{}", c.context, c.p_trust_high, c.p_workload_high, c.action);
    }
    out
}

/// Holds the shown transparency for at least `min_dwell` frames before
/// switching. `min_dwell = 0` passes every decision through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DwellGate {
    min_dwell: usize,
    current: Option<Transparency>,
    held: usize,
}

impl DwellGate {
    pub fn new(min_dwell: usize) -> Self {
        Self { min_dwell, current: None, held: 0 }
    }

    pub fn apply(&mut self, proposed: Transparency) -> Transparency {
        match self.current {
            Some(cur) if cur != proposed && self.held < self.min_dwell => {
                self.held += 1;
                cur
            }
            Some(cur) if cur == proposed => {
                self.held += 1;
                cur
            }
            _ => {
                self.current = Some(proposed);
                self.held = 1;
                proposed
            }
        }
    }
}
