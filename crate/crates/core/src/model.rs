//! The factored trust–workload POMDP.
//!
//! The joint latent state is `(trust, workload)`. Given the previous joint
//! state and the action, the next trust and next workload are drawn
//! independently:
//!
//! ```text
//! p(s_T', s_W' | s, a) = T_T(s_T' | s, a|trust) * T_W(s_W' | s, a|workload)
//! ```
//!
//! where `a|trust` is the action restricted to the dimensions named in the
//! model's [`ActionStructure`]. Reliance depends only on trust and gaze only on
//! workload, so the joint emission is `E_T(o_R | s_T) * E_W(o_G | s_W)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::types::*;

/// Row-sum tolerance for every probability table.
pub const PROB_TOL: f64 = 1e-9;

/// A reduced action: the levels of `a` along one factor's dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReducedAction {
    pub dims: DimSet,
    pub index: usize,
}

impl ReducedAction {
    /// Category names of the retained components, in canonical dimension order.
    pub fn names(&self) -> Vec<&'static str> {
        self.dims
            .levels(self.index)
            .into_iter()
            .map(|(d, l)| d.level_name(l))
            .collect()
    }

    pub fn components(&self) -> Vec<(ActionDim, usize)> {
        self.dims.levels(self.index)
    }
}

/// Restricts `a` to the dimensions that condition `factor`.
pub fn reduce_action(structure: &ActionStructure, a: &ActionTuple, factor: Factor) -> ReducedAction {
    let dims = structure.dims(factor);
    ReducedAction { dims, index: dims.reduce(a) }
}

/// Raw probability tables of a [`TrustWorkloadModel`].
///
/// Transition rows are indexed `joint_state * n_reduced + reduced_action`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTables {
    pub prior_trust: [f64; N_TRUST],
    pub prior_workload: [f64; N_WORKLOAD],
    pub trans_trust: Vec<[f64; N_TRUST]>,
    pub trans_workload: Vec<[f64; N_WORKLOAD]>,
    pub emit_trust: [[f64; N_RELIANCE]; N_TRUST],
    pub emit_workload: [[f64; N_GAZE]; N_WORKLOAD],
}

impl ModelTables {
    /// Every row uniform.
    pub fn uniform(structure: &ActionStructure) -> Self {
        let nt = structure.trust_dims().n_reduced();
        let nw = structure.workload_dims().n_reduced();
        Self {
            prior_trust: [0.5; 2],
            prior_workload: [0.5; 2],
            trans_trust: vec![[0.5; 2]; N_JOINT * nt],
            trans_workload: vec![[0.5; 2]; N_JOINT * nw],
            emit_trust: [[0.5; 2]; 2],
            emit_workload: [[0.2; 5]; 2],
        }
    }
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidModel(format!("{what}: negative or non-finite entry {row:?}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("{what}: row sums to {sum}")));
    }
    Ok(())
}

/// Samples a row from a flat Dirichlet distribution.
pub fn dirichlet_row<const N: usize, R: Rng + ?Sized>(rng: &mut R) -> [f64; N] {
    let mut row = [0.0; N];
    for x in row.iter_mut() {
        *x = Exp1.sample(rng);
    }
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= sum);
    row
}

/// Factored trust–workload POMDP. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustWorkloadModel {
    structure: ActionStructure,
    tables: ModelTables,
}

impl TrustWorkloadModel {
    pub fn new(structure: ActionStructure, tables: ModelTables) -> Result<Self> {
        let nt = structure.trust_dims().n_reduced();
        let nw = structure.workload_dims().n_reduced();
        if tables.trans_trust.len() != N_JOINT * nt {
            return Err(Error::InvalidModel(format!(
                "trust transition table has {} rows, expected {}",
                tables.trans_trust.len(),
                N_JOINT * nt
            )));
        }
        if tables.trans_workload.len() != N_JOINT * nw {
            return Err(Error::InvalidModel(format!(
                "workload transition table has {} rows, expected {}",
                tables.trans_workload.len(),
                N_JOINT * nw
            )));
        }
        check_row(&tables.prior_trust, "trust prior")?;
        check_row(&tables.prior_workload, "workload prior")?;
        for (i, row) in tables.trans_trust.iter().enumerate() {
            check_row(row, &format!("trust transition row {i}"))?;
        }
        for (i, row) in tables.trans_workload.iter().enumerate() {
            check_row(row, &format!("workload transition row {i}"))?;
        }
        for row in &tables.emit_trust {
            check_row(row, "trust emission")?;
        }
        for row in &tables.emit_workload {
            check_row(row, "workload emission")?;
        }
        Ok(Self { structure, tables })
    }

    pub fn uniform(structure: ActionStructure) -> Self {
        let tables = ModelTables::uniform(&structure);
        Self { structure, tables }
    }

    /// Every row drawn independently from a flat Dirichlet.
    pub fn random<R: Rng + ?Sized>(structure: ActionStructure, rng: &mut R) -> Self {
        let nt = structure.trust_dims().n_reduced();
        let nw = structure.workload_dims().n_reduced();
        let tables = ModelTables {
            prior_trust: dirichlet_row(rng),
            prior_workload: dirichlet_row(rng),
            trans_trust: (0..N_JOINT * nt).map(|_| dirichlet_row(rng)).collect(),
            trans_workload: (0..N_JOINT * nw).map(|_| dirichlet_row(rng)).collect(),
            emit_trust: [dirichlet_row(rng), dirichlet_row(rng)],
            emit_workload: [dirichlet_row(rng), dirichlet_row(rng)],
        };
        Self { structure, tables }
    }

    pub fn structure(&self) -> &ActionStructure {
        &self.structure
    }

    pub fn tables(&self) -> &ModelTables {
        &self.tables
    }

    pub fn into_tables(self) -> ModelTables {
        self.tables
    }

    pub fn n_trust_actions(&self) -> usize {
        self.structure.trust_dims().n_reduced()
    }

    pub fn n_workload_actions(&self) -> usize {
        self.structure.workload_dims().n_reduced()
    }

    pub fn trust_row(&self, s: JointState, reduced: usize) -> &[f64; N_TRUST] {
        &self.tables.trans_trust[s.index() * self.n_trust_actions() + reduced]
    }

    pub fn workload_row(&self, s: JointState, reduced: usize) -> &[f64; N_WORKLOAD] {
        &self.tables.trans_workload[s.index() * self.n_workload_actions() + reduced]
    }

    /// Joint prior `pi(s_T) * pi(s_W)`.
    pub fn prior(&self) -> [f64; N_JOINT] {
        let mut p = [0.0; N_JOINT];
        for s in JointState::ALL {
            p[s.index()] = self.tables.prior_trust[s.trust.index()]
                * self.tables.prior_workload[s.workload.index()];
        }
        p
    }

    pub fn prior_belief(&self) -> Belief {
        Belief(self.prior())
    }

    /// Next-state distribution from `s` under `a`.
    pub fn joint_transition(&self, s: JointState, a: &ActionTuple) -> [f64; N_JOINT] {
        let rt = self.structure.trust_dims().reduce(a);
        let rw = self.structure.workload_dims().reduce(a);
        self.joint_transition_reduced(s, rt, rw)
    }

    pub(crate) fn joint_transition_reduced(
        &self,
        s: JointState,
        trust_action: usize,
        workload_action: usize,
    ) -> [f64; N_JOINT] {
        let t = self.trust_row(s, trust_action);
        let w = self.workload_row(s, workload_action);
        [t[0] * w[0], t[0] * w[1], t[1] * w[0], t[1] * w[1]]
    }

    /// Row-stochastic 4x4 matrix `m[s][s']` for action `a`.
    pub fn transition_matrix(&self, a: &ActionTuple) -> [[f64; N_JOINT]; N_JOINT] {
        let rt = self.structure.trust_dims().reduce(a);
        let rw = self.structure.workload_dims().reduce(a);
        self.transition_matrix_reduced(rt, rw)
    }

    pub(crate) fn transition_matrix_reduced(
        &self,
        trust_action: usize,
        workload_action: usize,
    ) -> [[f64; N_JOINT]; N_JOINT] {
        let mut m = [[0.0; N_JOINT]; N_JOINT];
        for s in JointState::ALL {
            m[s.index()] = self.joint_transition_reduced(s, trust_action, workload_action);
        }
        m
    }

    pub fn joint_emission(&self, s: JointState, o: &ObservationTuple) -> f64 {
        self.tables.emit_trust[s.trust.index()][o.reliance.index()]
            * self.tables.emit_workload[s.workload.index()][o.gaze.index()]
    }

    /// Joint emission of `o` for every state, in canonical order.
    pub fn emission_vector(&self, o: &ObservationTuple) -> [f64; N_JOINT] {
        let mut e = [0.0; N_JOINT];
        for s in JointState::ALL {
            e[s.index()] = self.joint_emission(s, o);
        }
        e
    }

    /// Copies every row of this model into a structure whose dimension sets
    /// are supersets of this one's. The embedded model ignores the added
    /// dimensions, so it assigns every sequence the same likelihood.
    pub fn embed(&self, superset: ActionStructure) -> Result<TrustWorkloadModel> {
        if !self.structure.is_subset_of(&superset) {
            return Err(Error::InvalidStructure(format!(
                "{} is not a superset of {}",
                superset, self.structure
            )));
        }
        let lift = |from: DimSet, to: DimSet| -> Vec<usize> {
            // map each reduced index of `to` to the matching reduced index of `from`
            (0..to.n_reduced())
                .map(|idx| {
                    let levels = to.levels(idx);
                    from.dims().fold(0, |acc, d| {
                        let lvl = levels.iter().find(|(dd, _)| *dd == d).map(|x| x.1).unwrap_or(0);
                        acc * d.cardinality() + lvl
                    })
                })
                .collect()
        };
        let tmap = lift(self.structure.trust_dims(), superset.trust_dims());
        let wmap = lift(self.structure.workload_dims(), superset.workload_dims());
        let mut tables = self.tables.clone();
        tables.trans_trust = JointState::ALL
            .iter()
            .flat_map(|s| tmap.iter().map(move |&r| (s, r)))
            .map(|(s, r)| *self.trust_row(*s, r))
            .collect();
        tables.trans_workload = JointState::ALL
            .iter()
            .flat_map(|s| wmap.iter().map(move |&r| (s, r)))
            .map(|(s, r)| *self.workload_row(*s, r))
            .collect();
        TrustWorkloadModel::new(superset, tables)
    }
}

/// Probability distribution over the four joint states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Belief([f64; N_JOINT]);

impl Belief {
    pub fn new(probs: [f64; N_JOINT]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidBelief(format!("{probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidBelief(format!("sums to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn uniform() -> Self {
        Self([0.25; N_JOINT])
    }

    pub fn point(s: JointState) -> Self {
        let mut p = [0.0; N_JOINT];
        p[s.index()] = 1.0;
        Self(p)
    }

    /// Product-form belief from the two marginals.
    pub fn from_marginals(p_trust_high: f64, p_workload_high: f64) -> Result<Self> {
        let t = [1.0 - p_trust_high, p_trust_high];
        let w = [1.0 - p_workload_high, p_workload_high];
        Self::new([t[0] * w[0], t[0] * w[1], t[1] * w[0], t[1] * w[1]])
    }

    pub fn probs(&self) -> &[f64; N_JOINT] {
        &self.0
    }

    pub fn prob(&self, s: JointState) -> f64 {
        self.0[s.index()]
    }

    pub fn p_trust_high(&self) -> f64 {
        self.0[2] + self.0[3]
    }

    pub fn p_workload_high(&self) -> f64 {
        self.0[1] + self.0[3]
    }

    /// Normalizes a nonnegative mass vector; `ZeroLikelihood` when it sums to zero.
    pub(crate) fn normalized(mass: [f64; N_JOINT]) -> Result<(Self, f64)> {
        let sum: f64 = mass.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::ZeroLikelihood);
        }
        Ok((Self(mass.map(|m| m / sum)), sum))
    }
}

/// One-step prediction `sum_s T(s'|s,a) b(s)`.
pub(crate) fn predict(m: &[[f64; N_JOINT]; N_JOINT], b: &[f64; N_JOINT]) -> [f64; N_JOINT] {
    let mut out = [0.0; N_JOINT];
    for (s, row) in m.iter().enumerate() {
        let bs = b[s];
        for (o, p) in out.iter_mut().zip(row) {
            *o += p * bs;
        }
    }
    out
}

pub(crate) fn correct(e: &[f64; N_JOINT], pred: &[f64; N_JOINT]) -> [f64; N_JOINT] {
    [e[0] * pred[0], e[1] * pred[1], e[2] * pred[2], e[3] * pred[3]]
}

/// Bayes filter step: predict through `a`, then condition on `o`.
pub fn belief_update(
    model: &TrustWorkloadModel,
    b: &Belief,
    a: &ActionTuple,
    o: &ObservationTuple,
) -> Result<Belief> {
    let m = model.transition_matrix(a);
    let pred = predict(&m, &b.0);
    Belief::normalized(correct(&model.emission_vector(o), &pred)).map(|(b, _)| b)
}

/// Conditions `b` on `o` without a transition (first frame of a sequence).
pub fn belief_observe(model: &TrustWorkloadModel, b: &Belief, o: &ObservationTuple) -> Result<Belief> {
    Belief::normalized(correct(&model.emission_vector(o), &b.0)).map(|(b, _)| b)
}

/// What to do with the belief at an episode (intersection) boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpisodeMode {
    /// Restart from the model priors.
    #[default]
    Reset,
    /// Keep the posterior from the previous episode.
    Carry,
}

/// Act-then-observe belief tracker. On a zero-likelihood observation it
/// resets to the priors and reports the event.
#[derive(Debug, Clone)]
pub struct BeliefTracker<'m> {
    model: &'m TrustWorkloadModel,
    belief: Belief,
    mode: EpisodeMode,
    resets: usize,
}

/// Outcome of one tracker step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerStep {
    pub belief: Belief,
    /// The observation was impossible and the belief fell back to the priors.
    pub reset: bool,
}

impl<'m> BeliefTracker<'m> {
    pub fn new(model: &'m TrustWorkloadModel, mode: EpisodeMode) -> Self {
        Self { model, belief: model.prior_belief(), mode, resets: 0 }
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn zero_likelihood_resets(&self) -> usize {
        self.resets
    }

    pub fn begin_episode(&mut self) {
        if self.mode == EpisodeMode::Reset {
            self.belief = self.model.prior_belief();
        }
    }

    pub fn step(&mut self, a: &ActionTuple, o: &ObservationTuple) -> TrackerStep {
        match belief_update(self.model, &self.belief, a, o) {
            Ok(b) => {
                self.belief = b;
                TrackerStep { belief: b, reset: false }
            }
            Err(_) => {
                self.resets += 1;
                self.belief = self.model.prior_belief();
                TrackerStep { belief: self.belief, reset: true }
            }
        }
    }
}
