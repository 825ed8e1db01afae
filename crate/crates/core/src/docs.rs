//! Self-describing JSON documents for models (`twmodel/1`) and policies
//! (`twpolicy/1`).
//!
//! Every table is keyed by category name. Floats are written in shortest
//! round-trip form, so a write/read cycle is lossless.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelTables, TrustWorkloadModel};
use crate::reward::RewardSpec;
use crate::solver::{QmdpPolicy, SolverConfig};
use crate::types::*;

pub const MODEL_SCHEMA: &str = "twmodel/1";
pub const POLICY_SCHEMA: &str = "twpolicy/1";

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub invocation: String,
}

impl Provenance {
    pub fn new(invocation: impl Into<String>) -> Self {
        Self { generator: format!("trustcal {}", env!("CARGO_PKG_VERSION")), invocation: invocation.into() }
    }
}

/// Category names of every variable, in canonical order.
pub type Categories = IndexMap<String, Vec<String>>;

pub fn categories() -> Categories {
    fn names<C: Category>() -> (String, Vec<String>) {
        (C::VARIABLE.to_string(), C::names().into_iter().map(String::from).collect())
    }
    [
        names::<TrustState>(),
        names::<WorkloadState>(),
        names::<Transparency>(),
        names::<Reliability>(),
        names::<Traffic>(),
        names::<Pedestrians>(),
        names::<Reliance>(),
        names::<Gaze>(),
    ]
    .into_iter()
    .collect()
}

type Dist = IndexMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDoc {
    pub trust: Vec<String>,
    pub workload: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub from: String,
    /// Retained action components joined by `+`, or `none`.
    pub action: String,
    pub to: Dist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub schema: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub categories: Categories,
    pub structure: StructureDoc,
    pub prior_trust: Dist,
    pub prior_workload: Dist,
    pub transition_trust: Vec<TransitionRow>,
    pub transition_workload: Vec<TransitionRow>,
    pub emission_trust: IndexMap<String, Dist>,
    pub emission_workload: IndexMap<String, Dist>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn dist<C: Category>(row: &[f64]) -> Dist {
    C::ALL.iter().zip(row).map(|(c, p)| (c.name().to_string(), *p)).collect()
}

fn read_dist<C: Category, const N: usize>(d: &Dist, what: &str) -> Result<[f64; N]> {
    let names = C::names();
    if d.len() != N || d.keys().zip(&names).any(|(k, n)| k != n) {
        return Err(Error::SchemaMismatch(format!("{what}: expected keys {names:?}, got {:?}", d.keys().collect::<Vec<_>>())));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(d.values()) {
        *o = *p;
    }
    Ok(out)
}

fn dim_names(dims: DimSet) -> Vec<String> {
    dims.dims().map(|d| d.name().to_string()).collect()
}

fn parse_dims(names: &[String]) -> Result<DimSet> {
    let dims = names.iter().map(|n| ActionDim::from_name(n)).collect::<Result<Vec<_>>>()?;
    Ok(DimSet::of(&dims))
}

fn reduced_label(dims: DimSet, idx: usize) -> String {
    if dims.is_empty() {
        return "none".into();
    }
    dims.levels(idx).into_iter().map(|(d, l)| d.level_name(l)).collect::<Vec<_>>().join("+")
}

fn transition_rows<C: Category>(dims: DimSet, rows: &[impl AsRef<[f64]>]) -> Vec<TransitionRow> {
    let n = dims.n_reduced();
    rows.iter()
        .enumerate()
        .map(|(i, row)| TransitionRow {
            from: JointState::ALL[i / n].to_string(),
            action: reduced_label(dims, i % n),
            to: dist::<C>(row.as_ref()),
        })
        .collect()
}

fn read_transitions<C: Category, const N: usize>(dims: DimSet, rows: &[TransitionRow], what: &str) -> Result<Vec<[f64; N]>> {
    let n = dims.n_reduced();
    if rows.len() != N_JOINT * n {
        return Err(Error::SchemaMismatch(format!("{what}: expected {} rows, got {}", N_JOINT * n, rows.len())));
    }
    let states: HashMap<String, usize> = JointState::ALL.iter().map(|s| (s.to_string(), s.index())).collect();
    let actions: HashMap<String, usize> = (0..n).map(|r| (reduced_label(dims, r), r)).collect();
    let mut out = vec![None; rows.len()];
    for row in rows {
        let s = states
            .get(&row.from)
            .ok_or_else(|| Error::SchemaMismatch(format!("{what}: unknown state `{}`", row.from)))?;
        let r = actions
            .get(&row.action)
            .ok_or_else(|| Error::SchemaMismatch(format!("{what}: unknown action `{}`", row.action)))?;
        let slot = &mut out[s * n + r];
        if slot.is_some() {
            return Err(Error::SchemaMismatch(format!("{what}: duplicate row {}/{}", row.from, row.action)));
        }
        *slot = Some(read_dist::<C, N>(&row.to, what)?);
    }
    Ok(out.into_iter().map(|r| r.expect("all rows present")).collect())
}

fn check_header(schema: &str, expected: &str, cats: &Categories) -> Result<()> {
    if schema != expected {
        return Err(Error::SchemaMismatch(format!("expected schema `{expected}`, got `{schema}`")));
    }
    if *cats != categories() {
        return Err(Error::SchemaMismatch("category sets differ from this build".into()));
    }
    Ok(())
}

impl ModelDoc {
    pub fn from_model(model: &TrustWorkloadModel, provenance: Provenance) -> Self {
        let st = model.structure();
        let t = model.tables();
        Self {
            schema: MODEL_SCHEMA.into(),
            provenance,
            categories: categories(),
            structure: StructureDoc { trust: dim_names(st.trust_dims()), workload: dim_names(st.workload_dims()) },
            prior_trust: dist::<TrustState>(&t.prior_trust),
            prior_workload: dist::<WorkloadState>(&t.prior_workload),
            transition_trust: transition_rows::<TrustState>(st.trust_dims(), &t.trans_trust),
            transition_workload: transition_rows::<WorkloadState>(st.workload_dims(), &t.trans_workload),
            emission_trust: TrustState::ALL
                .iter()
                .map(|s| (s.name().to_string(), dist::<Reliance>(&t.emit_trust[s.index()])))
                .collect(),
            emission_workload: WorkloadState::ALL
                .iter()
                .map(|s| (s.name().to_string(), dist::<Gaze>(&t.emit_workload[s.index()])))
                .collect(),
            notes: Vec::new(),
        }
    }

    pub fn to_model(&self) -> Result<TrustWorkloadModel> {
        check_header(&self.schema, MODEL_SCHEMA, &self.categories)?;
        let structure = ActionStructure::new(parse_dims(&self.structure.trust)?, parse_dims(&self.structure.workload)?)?;
        let emit = |m: &IndexMap<String, Dist>, names: Vec<&str>, what: &str| -> Result<()> {
            if m.keys().map(String::as_str).ne(names.iter().copied()) {
                return Err(Error::SchemaMismatch(format!("{what}: expected rows {names:?}")));
            }
            Ok(())
        };
        emit(&self.emission_trust, TrustState::names(), "emission_trust")?;
        emit(&self.emission_workload, WorkloadState::names(), "emission_workload")?;
        let mut emit_trust = [[0.0; N_RELIANCE]; N_TRUST];
        for (row, d) in emit_trust.iter_mut().zip(self.emission_trust.values()) {
            *row = read_dist::<Reliance, N_RELIANCE>(d, "emission_trust")?;
        }
        let mut emit_workload = [[0.0; N_GAZE]; N_WORKLOAD];
        for (row, d) in emit_workload.iter_mut().zip(self.emission_workload.values()) {
            *row = read_dist::<Gaze, N_GAZE>(d, "emission_workload")?;
        }
        let tables = ModelTables {
            prior_trust: read_dist::<TrustState, N_TRUST>(&self.prior_trust, "prior_trust")?,
            prior_workload: read_dist::<WorkloadState, N_WORKLOAD>(&self.prior_workload, "prior_workload")?,
            trans_trust: read_transitions::<TrustState, N_TRUST>(
                structure.trust_dims(),
                &self.transition_trust,
                "transition_trust",
            )?,
            trans_workload: read_transitions::<WorkloadState, N_WORKLOAD>(
                structure.workload_dims(),
                &self.transition_workload,
                "transition_workload",
            )?,
            emit_trust,
            emit_workload,
        };
        TrustWorkloadModel::new(structure, tables)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s)?;
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub state: String,
    pub transparency: Transparency,
    pub context: String,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDoc {
    pub schema: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub categories: Categories,
    pub gamma: f64,
    pub vi_tol: f64,
    /// Context label to probability.
    pub context_distribution: Dist,
    /// Trust level to reliability to reward.
    pub reward: IndexMap<String, Dist>,
    pub q: Vec<QEntry>,
}

impl PolicyDoc {
    pub fn from_policy(policy: &QmdpPolicy, provenance: Provenance) -> Self {
        let cfg = policy.config();
        let mut q = Vec::with_capacity(QmdpPolicy::TABLE_LEN);
        for s in JointState::ALL {
            for &tau in Transparency::ALL {
                for u in Context::all() {
                    q.push(QEntry { state: s.to_string(), transparency: tau, context: u.label(), q: policy.q(s, tau, &u) });
                }
            }
        }
        Self {
            schema: POLICY_SCHEMA.into(),
            provenance,
            categories: categories(),
            gamma: cfg.gamma,
            vi_tol: cfg.vi_tol,
            context_distribution: Context::all().map(|u| (u.label(), cfg.context_dist[u.index()])).collect(),
            reward: TrustState::ALL
                .iter()
                .map(|t| (t.name().to_string(), dist::<Reliability>(&policy.reward().table()[t.index()])))
                .collect(),
            q,
        }
    }

    pub fn to_policy(&self) -> Result<QmdpPolicy> {
        check_header(&self.schema, POLICY_SCHEMA, &self.categories)?;
        let mut context_dist = [0.0; N_CONTEXTS];
        if self.context_distribution.len() != N_CONTEXTS {
            return Err(Error::SchemaMismatch(format!("context_distribution needs {N_CONTEXTS} entries")));
        }
        for (label, p) in &self.context_distribution {
            context_dist[Context::parse_label(label)?.index()] = *p;
        }
        if self.reward.keys().map(String::as_str).ne(TrustState::names()) {
            return Err(Error::SchemaMismatch("reward: expected rows T_low, T_high".into()));
        }
        let mut table = [[0.0; 3]; 2];
        for (row, d) in table.iter_mut().zip(self.reward.values()) {
            *row = read_dist::<Reliability, 3>(d, "reward")?;
        }
        if self.q.len() != QmdpPolicy::TABLE_LEN {
            return Err(Error::SchemaMismatch(format!("q: expected {} entries", QmdpPolicy::TABLE_LEN)));
        }
        let states: HashMap<String, JointState> = JointState::ALL.iter().map(|s| (s.to_string(), *s)).collect();
        let mut q = vec![f64::NAN; QmdpPolicy::TABLE_LEN];
        let mut seen = [false; QmdpPolicy::TABLE_LEN];
        for e in &self.q {
            let s = states
                .get(&e.state)
                .ok_or_else(|| Error::SchemaMismatch(format!("q: unknown state `{}`", e.state)))?;
            let u = Context::parse_label(&e.context)?;
            let i = (s.index() * 2 + e.transparency.index()) * N_CONTEXTS + u.index();
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::SchemaMismatch(format!("q: duplicate entry {}/{}/{}", e.state, e.transparency, e.context)));
            }
            q[i] = e.q;
        }
        let config = SolverConfig { gamma: self.gamma, vi_tol: self.vi_tol, context_dist };
        QmdpPolicy::from_parts(q, RewardSpec::new(table)?, config)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("policy document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s)?;
        Ok(doc)
    }
}
