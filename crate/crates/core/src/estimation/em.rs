//! Maximum-likelihood fitting by EM (Baum–Welch with actions).
//!
//! The E-step runs forward–backward on the joint 4-state chain. The M-step
//! re-estimates each factor separately by marginalizing the pairwise
//! posteriors over the other factor's next state:
//!
//! ```text
//! T_T(t'|s,ã) ∝ Σ_seq Σ_{t: a_{t+1}|trust = ã} Σ_{w'} xi_t(s, (t',w'))
//! E_T(r|t)    ∝ Σ_seq Σ_{t: r_t = r} Σ_w gamma_t(t, w)
//! ```
//!
//! and symmetrically for workload.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::forward_backward::{gamma_at, run, step_matrix, xi_at, Encoded, Workspace};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::labeling::label_states;
use crate::model::{ModelTables, TrustWorkloadModel};
use crate::types::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub rng_seed: u64,
    /// Optional floor applied to every estimated row after the M-step.
    /// Zero (the default) keeps exact zeros.
    pub prob_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500, n_restarts: 1000, rng_seed: 0, prob_floor: 0.0 }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if self.n_restarts < 1 {
            return Err(Error::InvalidConfig("n_restarts must be >= 1".into()));
        }
        if !(0.0..0.1).contains(&self.prob_floor) {
            return Err(Error::InvalidConfig(format!("prob_floor must be in [0, 0.1), got {}", self.prob_floor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted model in canonical label order.
    pub model: TrustWorkloadModel,
    pub total_log_likelihood: f64,
    /// Training log-likelihood before the first M-step and after each one.
    pub ll_trajectory: Vec<f64>,
    pub restart_index: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct Counts {
    prior_trust: [f64; 2],
    prior_workload: [f64; 2],
    trans_trust: Vec<[f64; 2]>,
    trans_workload: Vec<[f64; 2]>,
    emit_trust: [[f64; 2]; 2],
    emit_workload: [[f64; 5]; 2],
}

impl Counts {
    fn zeros(model: &TrustWorkloadModel) -> Self {
        Self {
            prior_trust: [0.0; 2],
            prior_workload: [0.0; 2],
            trans_trust: vec![[0.0; 2]; N_JOINT * model.n_trust_actions()],
            trans_workload: vec![[0.0; 2]; N_JOINT * model.n_workload_actions()],
            emit_trust: [[0.0; 2]; 2],
            emit_workload: [[0.0; 5]; 2],
        }
    }
}

fn accumulate(model: &TrustWorkloadModel, enc: &Encoded, ws: &Workspace, counts: &mut Counts) {
    let nt = model.n_trust_actions();
    let nw = model.n_workload_actions();
    let n = enc.len();
    for t in 0..n {
        let g = gamma_at(ws, t);
        let gt = [g[0] + g[1], g[2] + g[3]];
        let gw = [g[0] + g[2], g[1] + g[3]];
        if t == 0 {
            for i in 0..2 {
                counts.prior_trust[i] += gt[i];
                counts.prior_workload[i] += gw[i];
            }
        }
        let r = enc.reliance[t] as usize;
        let o = enc.gaze[t] as usize;
        for i in 0..2 {
            counts.emit_trust[i][r] += gt[i];
            counts.emit_workload[i][o] += gw[i];
        }
        if t + 1 < n {
            let m = step_matrix(model, enc, t + 1);
            let xi = xi_at(ws, &m, t);
            let rt = enc.trust_action[t + 1] as usize;
            let rw = enc.workload_action[t + 1] as usize;
            for (s, row) in xi.iter().enumerate() {
                let tr = &mut counts.trans_trust[s * nt + rt];
                tr[0] += row[0] + row[1];
                tr[1] += row[2] + row[3];
                let wr = &mut counts.trans_workload[s * nw + rw];
                wr[0] += row[0] + row[2];
                wr[1] += row[1] + row[3];
            }
        }
    }
}

/// Normalizes `counts` into `row`; rows with no expected counts keep their
/// previous value.
fn normalize_into<const N: usize>(row: &mut [f64; N], counts: &[f64; N], floor: f64) {
    let sum: f64 = counts.iter().sum();
    if sum > 0.0 {
        for (r, c) in row.iter_mut().zip(counts) {
            *r = c / sum;
        }
    }
    if floor > 0.0 {
        row.iter_mut().for_each(|r| *r = r.max(floor));
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|r| *r /= s);
    }
}

fn m_step(model: &TrustWorkloadModel, counts: &Counts, floor: f64) -> Result<TrustWorkloadModel> {
    let mut t: ModelTables = model.tables().clone();
    normalize_into(&mut t.prior_trust, &counts.prior_trust, floor);
    normalize_into(&mut t.prior_workload, &counts.prior_workload, floor);
    for (row, c) in t.trans_trust.iter_mut().zip(&counts.trans_trust) {
        normalize_into(row, c, floor);
    }
    for (row, c) in t.trans_workload.iter_mut().zip(&counts.trans_workload) {
        normalize_into(row, c, floor);
    }
    for i in 0..2 {
        normalize_into(&mut t.emit_trust[i], &counts.emit_trust[i], floor);
        normalize_into(&mut t.emit_workload[i], &counts.emit_workload[i], floor);
    }
    TrustWorkloadModel::new(*model.structure(), t)
}

fn e_step(model: &TrustWorkloadModel, encoded: &[Encoded], ws: &mut Workspace) -> Result<(f64, Counts)> {
    let mut counts = Counts::zeros(model);
    let mut ll = 0.0;
    for enc in encoded {
        ll += run(model, enc, ws)?;
        accumulate(model, enc, ws, &mut counts);
    }
    Ok((ll, counts))
}

fn em_encoded(
    encoded: &[Encoded],
    init: &TrustWorkloadModel,
    config: &FitConfig,
    restart_index: usize,
) -> Result<FitResult> {
    let mut ws = Workspace::default();
    let mut model = init.clone();
    let (mut ll, mut counts) = e_step(&model, encoded, &mut ws)?;
    let mut trajectory = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let next = m_step(&model, &counts, config.prob_floor)?;
        let (next_ll, next_counts) = e_step(&next, encoded, &mut ws)?;
        iterations += 1;
        trajectory.push(next_ll);
        let improvement = next_ll - ll;
        model = next;
        ll = next_ll;
        counts = next_counts;
        if improvement < config.tol {
            converged = true;
            break;
        }
    }
    let (model, _) = label_states(&model)?;
    Ok(FitResult { model, total_log_likelihood: ll, ll_trajectory: trajectory, restart_index, iterations, converged })
}

fn encode_all(dataset: &Dataset, structure: &ActionStructure) -> Result<Vec<Encoded>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(dataset.sequences().iter().map(|s| Encoded::new(structure, s)).collect())
}

/// EM from `init` until the improvement drops below `config.tol` or
/// `config.max_iter` M-steps have run.
pub fn em_fit(
    dataset: &Dataset,
    structure: &ActionStructure,
    init: &TrustWorkloadModel,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    if init.structure() != structure {
        return Err(Error::InvalidStructure(format!(
            "initial model has structure {}, expected {}",
            init.structure(),
            structure
        )));
    }
    em_encoded(&encode_all(dataset, structure)?, init, config, 0)
}

/// Initial model of restart `index`: flat-Dirichlet rows from an independent
/// stream of the configured seed.
pub fn restart_init(structure: &ActionStructure, seed: u64, index: usize) -> TrustWorkloadModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    TrustWorkloadModel::random(*structure, &mut rng)
}

/// Outcome of one restart, for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartSummary {
    pub index: usize,
    pub log_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiFit {
    pub best: FitResult,
    pub restarts: Vec<RestartSummary>,
}

/// Picks the higher log-likelihood; on ties the lower restart index.
fn better(a: FitResult, b: FitResult) -> FitResult {
    match a.total_log_likelihood.total_cmp(&b.total_log_likelihood) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.restart_index <= b.restart_index {
                a
            } else {
                b
            }
        }
    }
}

/// Runs `config.n_restarts` independent EM fits and keeps the best.
pub fn multi_restart_fit_report(
    dataset: &Dataset,
    structure: &ActionStructure,
    config: &FitConfig,
) -> Result<MultiFit> {
    config.validate()?;
    let encoded = encode_all(dataset, structure)?;
    let results: Vec<Result<FitResult>> = (0..config.n_restarts)
        .into_par_iter()
        .map(|i| em_encoded(&encoded, &restart_init(structure, config.rng_seed, i), config, i))
        .collect();
    let restarts = results
        .iter()
        .enumerate()
        .map(|(index, r)| match r {
            Ok(f) => RestartSummary {
                index,
                log_likelihood: Some(f.total_log_likelihood),
                iterations: f.iterations,
                converged: f.converged,
                error: None,
            },
            Err(e) => RestartSummary { index, log_likelihood: None, iterations: 0, converged: false, error: Some(e.to_string()) },
        })
        .collect();
    let best = results
        .into_iter()
        .filter_map(Result::ok)
        .reduce(better)
        .ok_or(Error::AllRestartsFailed(config.n_restarts))?;
    Ok(MultiFit { best, restarts })
}

pub fn multi_restart_fit(dataset: &Dataset, structure: &ActionStructure, config: &FitConfig) -> Result<FitResult> {
    multi_restart_fit_report(dataset, structure, config).map(|m| m.best)
}

impl MultiFit {
    /// Plain-text restart table; the model document is appended by the caller.
    pub fn report_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "restart,log_likelihood,iterations,converged,error");
        for r in &self.restarts {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.index,
                r.log_likelihood.map(|x| x.to_string()).unwrap_or_default(),
                r.iterations,
                r.converged,
                r.error.as_deref().unwrap_or("")
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{synthetic_study, StudyDesign};
    use crate::model::ModelTables;

    fn deterministic() -> TrustWorkloadModel {
        let st = ActionStructure::paper();
        let mut t = ModelTables::uniform(&st);
        t.prior_trust = [0.0, 1.0];
        t.prior_workload = [1.0, 0.0];
        t.trans_trust.iter_mut().for_each(|r| *r = [0.0, 1.0]);
        t.trans_workload.iter_mut().for_each(|r| *r = [1.0, 0.0]);
        t.emit_trust = [[1.0, 0.0], [0.0, 1.0]];
        t.emit_workload = [[1.0, 0.0, 0.0, 0.0, 0.0], [0.2; 5]];
        TrustWorkloadModel::new(st, t).unwrap()
    }

    #[test]
    fn ground_truth_deterministic_model_is_a_fixed_point() {
        let truth = deterministic();
        let ds = synthetic_study(
            &truth,
            StudyDesign { participants: 1, intersections_per_condition: 3, frames_per_sequence: 5 },
            1,
        )
        .unwrap();
        let fit = em_fit(&ds, &ActionStructure::paper(), &truth, &FitConfig::default()).unwrap();
        assert_eq!(fit.iterations, 1);
        assert!(fit.converged);
        assert_eq!(fit.ll_trajectory, vec![0.0, 0.0]);
        assert_eq!(fit.model, truth);
    }

    #[test]
    fn trajectory_is_monotone() {
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(8);
        let truth = TrustWorkloadModel::random(ActionStructure::paper(), &mut rng);
        let ds = synthetic_study(
            &truth,
            StudyDesign { participants: 1, intersections_per_condition: 3, frames_per_sequence: 30 },
            2,
        )
        .unwrap();
        let init = restart_init(&ActionStructure::paper(), 3, 0);
        let cfg = FitConfig { max_iter: 100, ..FitConfig::default() };
        let fit = em_fit(&ds, &ActionStructure::paper(), &init, &cfg).unwrap();
        for w in fit.ll_trajectory.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn single_restart_equals_em_from_its_init() {
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(10);
        let truth = TrustWorkloadModel::random(ActionStructure::minimal(), &mut rng);
        let ds = synthetic_study(
            &truth,
            StudyDesign { participants: 1, intersections_per_condition: 3, frames_per_sequence: 20 },
            3,
        )
        .unwrap();
        let st = ActionStructure::minimal();
        let cfg = FitConfig { n_restarts: 1, rng_seed: 77, max_iter: 50, ..FitConfig::default() };
        let multi = multi_restart_fit(&ds, &st, &cfg).unwrap();
        let single = em_fit(&ds, &st, &restart_init(&st, 77, 0), &cfg).unwrap();
        assert_eq!(multi, single);
    }

    #[test]
    fn config_and_input_errors() {
        let st = ActionStructure::minimal();
        let ds = Dataset::default();
        assert!(matches!(
            em_fit(&ds, &st, &TrustWorkloadModel::uniform(st), &FitConfig::default()),
            Err(Error::EmptyDataset)
        ));
        assert!(FitConfig { tol: 0.0, ..FitConfig::default() }.validate().is_err());
        assert!(FitConfig { n_restarts: 0, ..FitConfig::default() }.validate().is_err());
        assert!(FitConfig { max_iter: 0, ..FitConfig::default() }.validate().is_err());
    }

    #[test]
    fn zero_count_rows_keep_previous_value() {
        let mut row = [0.3, 0.7];
        normalize_into(&mut row, &[0.0, 0.0], 0.0);
        assert_eq!(row, [0.3, 0.7]);
        normalize_into(&mut row, &[1.0, 3.0], 0.0);
        assert_eq!(row, [0.25, 0.75]);
        let mut row = [1.0, 0.0];
        normalize_into(&mut row, &[2.0, 0.0], 0.01);
        assert!(row[1] > 0.0 && (row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
