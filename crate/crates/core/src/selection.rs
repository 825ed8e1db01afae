//! Action-structure selection by repeated stratified k-fold cross-validation.
//!
//! Each candidate structure is scored by `AIC = 2k - 2 * avg_validation_ll`,
//! where `avg_validation_ll` is the mean held-out total log-likelihood over
//! every (repeat, fold) split. This deliberately plugs the *validation*
//! likelihood into AIC rather than the training likelihood.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimation::{multi_restart_fit, FitConfig};
use crate::likelihood::total_log_likelihood;
use crate::types::*;

/// All 128 candidate structures: trust dimensions always include
/// reliability (8 choices), workload dimensions are any subset (16 choices).
/// Ordered by trust mask, then workload mask.
pub fn enumerate_structures() -> Vec<ActionStructure> {
    let mut out = Vec::with_capacity(128);
    for tb in 0..16u8 {
        let trust = DimSet::from_bits(tb).expect("4-bit mask");
        if !trust.contains(ActionDim::Reliability) {
            continue;
        }
        for wb in 0..16u8 {
            let workload = DimSet::from_bits(wb).expect("4-bit mask");
            out.push(ActionStructure::new(trust, workload).expect("trust includes reliability"));
        }
    }
    out
}

/// Free parameters: one per two-valued row (priors, transitions, reliance
/// emissions) and four per gaze emission row.
pub fn count_parameters(structure: &ActionStructure) -> usize {
    let nt = structure.trust_dims().n_reduced();
    let nw = structure.workload_dims().n_reduced();
    1 + 1 + N_JOINT * nt + N_JOINT * nw + N_TRUST * (N_RELIANCE - 1) + N_WORKLOAD * (N_GAZE - 1)
}

pub fn aic(n_params: usize, log_likelihood: f64) -> f64 {
    2.0 * n_params as f64 - 2.0 * log_likelihood
}

/// Grouping key used to stratify folds. Sequence ids are
/// `<participant>/<condition>/<intersection>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stratify {
    /// One intersection per (participant, condition) in every fold.
    #[default]
    ParticipantCondition,
    Condition,
}

impl Stratify {
    fn key(self, id: &str) -> Option<String> {
        let parts: Vec<&str> = id.split('/').collect();
        if parts.len() < 3 || parts.iter().any(|p| p.is_empty()) {
            return None;
        }
        Some(match self {
            Stratify::ParticipantCondition => format!("{}/{}", parts[0], parts[1]),
            Stratify::Condition => parts[1].to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub k_folds: usize,
    pub n_repeats: usize,
    pub restarts_per_fit: usize,
    pub rng_seed: u64,
    pub stratify_by: Stratify,
    /// EM settings for each fit; `n_restarts` and `rng_seed` are overridden.
    pub fit: FitConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k_folds: 3,
            n_repeats: 24,
            restarts_per_fit: 20,
            rng_seed: 0,
            stratify_by: Stratify::ParticipantCondition,
            fit: FitConfig::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::InvalidConfig("k_folds must be >= 2".into()));
        }
        if self.n_repeats < 1 {
            return Err(Error::InvalidConfig("n_repeats must be >= 1".into()));
        }
        if self.restarts_per_fit < 1 {
            return Err(Error::InvalidConfig("restarts_per_fit must be >= 1".into()));
        }
        FitConfig { n_restarts: self.restarts_per_fit, ..self.fit }.validate()
    }
}

/// Deterministic 64-bit mixer for deriving per-job seeds.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Splits the dataset into `k` folds for one repeat. Every stratum's
/// sequences are shuffled and dealt round-robin, so each fold receives the
/// same number from each stratum.
pub fn stratified_folds(dataset: &Dataset, config: &SelectionConfig, repeat: usize) -> Result<Vec<Vec<usize>>> {
    let k = config.k_folds;
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.sequences().iter().enumerate() {
        let key = config.stratify_by.key(s.id()).ok_or_else(|| {
            Error::StratificationImpossible(format!(
                "sequence id `{}` lacks participant/condition/intersection fields",
                s.id()
            ))
        })?;
        strata.entry(key).or_default().push(i);
    }
    if strata.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.rng_seed));
    rng.set_stream(repeat as u64);
    let mut folds = vec![Vec::new(); k];
    for (key, mut members) in strata {
        if members.len() % k != 0 {
            return Err(Error::StratificationImpossible(format!(
                "stratum `{key}` has {} sequences, not divisible into {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, idx) in members.into_iter().enumerate() {
            folds[j % k].push(idx);
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Held-out log-likelihood of every (repeat, fold) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub validation_ll: Vec<f64>,
}

impl CvOutcome {
    pub fn mean(&self) -> f64 {
        self.validation_ll.iter().sum::<f64>() / self.validation_ll.len() as f64
    }
}

pub fn cross_validate_detailed(
    dataset: &Dataset,
    structure: &ActionStructure,
    config: &SelectionConfig,
) -> Result<CvOutcome> {
    config.validate()?;
    let k = config.k_folds;
    let splits: Vec<(usize, Vec<Vec<usize>>)> = (0..config.n_repeats)
        .map(|r| stratified_folds(dataset, config, r).map(|f| (r, f)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..config.n_repeats).flat_map(|r| (0..k).map(move |f| (r, f))).collect();
    let validation_ll = jobs
        .par_iter()
        .map(|&(r, f)| {
            let folds = &splits[r].1;
            let train: Vec<usize> = (0..k).filter(|&g| g != f).flat_map(|g| folds[g].iter().copied()).collect();
            let fit_cfg = FitConfig {
                n_restarts: config.restarts_per_fit,
                rng_seed: mix(config.rng_seed ^ mix((r * k + f) as u64 + 1)),
                ..config.fit
            };
            let fit = multi_restart_fit(&dataset.select(&train), structure, &fit_cfg)?;
            let held_out = dataset.select(&folds[f]);
            total_log_likelihood(&fit.model, held_out.sequences())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CvOutcome { validation_ll })
}

/// Mean held-out total log-likelihood over all repeats and folds.
pub fn cross_validate(dataset: &Dataset, structure: &ActionStructure, config: &SelectionConfig) -> Result<f64> {
    cross_validate_detailed(dataset, structure, config).map(|o| o.mean())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub structure: ActionStructure,
    pub n_params: usize,
    pub avg_validation_ll: f64,
    pub aic: f64,
    /// 1 for the chosen structure.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// One row per candidate, in candidate order.
    pub rows: Vec<SelectionRow>,
    pub chosen: ActionStructure,
}

/// Ranking order: AIC, then fewer parameters, then candidate order.
fn rank_rows(rows: &mut [SelectionRow]) -> Result<ActionStructure> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .aic
            .total_cmp(&rows[b].aic)
            .then(rows[a].n_params.cmp(&rows[b].n_params))
            .then(a.cmp(&b))
    });
    for (rank, &i) in order.iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    order.first().map(|&i| rows[i].structure).ok_or(Error::EmptyDataset)
}

/// Builds a report from precomputed validation likelihoods.
pub fn report_from_scores(scores: &[(ActionStructure, f64)]) -> Result<SelectionReport> {
    let mut rows: Vec<SelectionRow> = scores
        .iter()
        .map(|&(structure, avg)| {
            let n_params = count_parameters(&structure);
            SelectionRow { structure, n_params, avg_validation_ll: avg, aic: aic(n_params, avg), rank: 0 }
        })
        .collect();
    let chosen = rank_rows(&mut rows)?;
    Ok(SelectionReport { rows, chosen })
}

/// Scores the given candidates.
pub fn select_among(
    dataset: &Dataset,
    candidates: &[ActionStructure],
    config: &SelectionConfig,
) -> Result<SelectionReport> {
    let scores = candidates
        .par_iter()
        .map(|st| cross_validate(dataset, st, config).map(|ll| (*st, ll)))
        .collect::<Result<Vec<_>>>()?;
    report_from_scores(&scores)
}

/// Scores all 128 structures.
pub fn select_structure(dataset: &Dataset, config: &SelectionConfig) -> Result<SelectionReport> {
    select_among(dataset, &enumerate_structures(), config)
}

impl SelectionReport {
    /// `trust_dims,workload_dims,n_params,avg_val_ll,aic,rank`, preceded by
    /// the given `#` comment lines.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("trust_dims,workload_dims,n_params,avg_val_ll,aic,rank\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{:?},{}",
                r.structure.trust_dims(),
                r.structure.workload_dims(),
                r.n_params,
                r.avg_validation_ll,
                r.aic,
                r.rank
            );
        }
        out
    }

    pub fn row(&self, structure: &ActionStructure) -> Option<&SelectionRow> {
        self.rows.iter().find(|r| &r.structure == structure)
    }
}
