//! Assigning meaning to fitted latent indices.
//!
//! EM identifies the latent states only up to a permutation. The trust state
//! with the higher probability of reliance is High Trust; the workload state
//! whose gaze distribution has the higher Shannon entropy is High Workload.

use crate::error::{Error, Result};
use crate::model::{ModelTables, TrustWorkloadModel};
use crate::types::*;

const TIE_TOL: f64 = 1e-9;

/// Which latent indices were swapped to reach canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Labeling {
    pub trust_swapped: bool,
    pub workload_swapped: bool,
}

impl Labeling {
    /// Latent trust index that carries the `T_high` label.
    pub fn high_trust_index(&self) -> usize {
        if self.trust_swapped { 0 } else { 1 }
    }

    pub fn high_workload_index(&self) -> usize {
        if self.workload_swapped { 0 } else { 1 }
    }
}

/// Shannon entropy (natural log) with `0 log 0 = 0`.
pub fn entropy(row: &[f64]) -> f64 {
    -row.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Relabels the latent indices of `model` into canonical order.
pub fn label_states(model: &TrustWorkloadModel) -> Result<(TrustWorkloadModel, Labeling)> {
    let t = model.tables();
    let plus = Reliance::Plus.index();
    let (r0, r1) = (t.emit_trust[0][plus], t.emit_trust[1][plus]);
    if (r0 - r1).abs() <= TIE_TOL {
        return Err(Error::AmbiguousLabel(format!(
            "both trust states rely with probability {r0}"
        )));
    }
    let (h0, h1) = (entropy(&t.emit_workload[0]), entropy(&t.emit_workload[1]));
    if (h0 - h1).abs() <= TIE_TOL {
        return Err(Error::AmbiguousLabel(format!(
            "both workload states have gaze entropy {h0}"
        )));
    }
    let labeling = Labeling { trust_swapped: r0 > r1, workload_swapped: h0 > h1 };
    Ok((permute(model, labeling.trust_swapped, labeling.workload_swapped), labeling))
}

/// Swaps the trust and/or workload latent indices. The result describes the
/// same stochastic process with renamed states.
pub fn permute(model: &TrustWorkloadModel, swap_trust: bool, swap_workload: bool) -> TrustWorkloadModel {
    let st = |i: usize| if swap_trust { 1 - i } else { i };
    let sw = |i: usize| if swap_workload { 1 - i } else { i };
    let mapped = |s: JointState| {
        JointState::new(
            TrustState::ALL[st(s.trust.index())],
            WorkloadState::ALL[sw(s.workload.index())],
        )
    };
    let old = model.tables();
    let nt = model.n_trust_actions();
    let nw = model.n_workload_actions();
    let mut new = old.clone();
    for i in 0..2 {
        new.prior_trust[st(i)] = old.prior_trust[i];
        new.prior_workload[sw(i)] = old.prior_workload[i];
        new.emit_trust[st(i)] = old.emit_trust[i];
        new.emit_workload[sw(i)] = old.emit_workload[i];
    }
    for s in JointState::ALL {
        let to = mapped(s);
        for r in 0..nt {
            let row = old.trans_trust[s.index() * nt + r];
            let mut out = [0.0; 2];
            for (j, p) in row.iter().enumerate() {
                out[st(j)] = *p;
            }
            new.trans_trust[to.index() * nt + r] = out;
        }
        for r in 0..nw {
            let row = old.trans_workload[s.index() * nw + r];
            let mut out = [0.0; 2];
            for (j, p) in row.iter().enumerate() {
                out[sw(j)] = *p;
            }
            new.trans_workload[to.index() * nw + r] = out;
        }
    }
    rebuild(model, new)
}

fn rebuild(model: &TrustWorkloadModel, tables: ModelTables) -> TrustWorkloadModel {
    TrustWorkloadModel::new(*model.structure(), tables)
        .expect("a permutation of a valid model is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::belief_update;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn with_emissions(trust: [[f64; 2]; 2], workload: [[f64; 5]; 2]) -> TrustWorkloadModel {
        let st = ActionStructure::paper();
        let mut t = ModelTables::uniform(&st);
        t.emit_trust = trust;
        t.emit_workload = workload;
        TrustWorkloadModel::new(st, t).unwrap()
    }

    #[test]
    fn reliant_state_is_high_trust() {
        let m = with_emissions([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0, 0.0, 0.0, 0.0], [0.2; 5]]);
        let (_, l) = label_states(&m).unwrap();
        assert_eq!(l.high_trust_index(), 1);
        assert!(!l.trust_swapped);

        let m = with_emissions([[0.0, 1.0], [1.0, 0.0]], [[1.0, 0.0, 0.0, 0.0, 0.0], [0.2; 5]]);
        let (relabeled, l) = label_states(&m).unwrap();
        assert_eq!(l.high_trust_index(), 0);
        assert_eq!(relabeled.tables().emit_trust, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn higher_entropy_state_is_high_workload() {
        let m = with_emissions([[0.9, 0.1], [0.1, 0.9]], [[0.2; 5], [1.0, 0.0, 0.0, 0.0, 0.0]]);
        assert!((entropy(&[0.2; 5]) - 5f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
        let (relabeled, l) = label_states(&m).unwrap();
        assert!(l.workload_swapped);
        assert_eq!(relabeled.tables().emit_workload[1], [0.2; 5]);

        // hand-computed: H(a) = 0.9264..., H(b) = 1.5571...
        let a = [0.7, 0.2, 0.03, 0.04, 0.03];
        let b = [0.3, 0.2, 0.2, 0.15, 0.15];
        let ha = -(0.7f64 * 0.7f64.ln() + 0.2 * 0.2f64.ln() + 2.0 * 0.03 * 0.03f64.ln() + 0.04 * 0.04f64.ln());
        let hb = -(0.3f64 * 0.3f64.ln() + 2.0 * 0.2 * 0.2f64.ln() + 2.0 * 0.15 * 0.15f64.ln());
        assert!((entropy(&a) - ha).abs() < 1e-12);
        assert!((entropy(&b) - hb).abs() < 1e-12);
        let m = with_emissions([[0.9, 0.1], [0.1, 0.9]], [a, b]);
        let (_, l) = label_states(&m).unwrap();
        assert_eq!(l.high_workload_index(), 1);
    }

    #[test]
    fn ties_are_ambiguous() {
        let m = with_emissions([[0.5, 0.5], [0.5, 0.5]], [[0.2; 5], [1.0, 0.0, 0.0, 0.0, 0.0]]);
        assert!(matches!(label_states(&m), Err(Error::AmbiguousLabel(_))));
        let m = with_emissions([[0.9, 0.1], [0.1, 0.9]], [[0.2; 5], [0.2; 5]]);
        assert!(matches!(label_states(&m), Err(Error::AmbiguousLabel(_))));
    }

    #[test]
    fn labeling_is_idempotent_and_permutation_preserves_filtering() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = TrustWorkloadModel::random(ActionStructure::paper(), &mut rng);
            let (once, _) = label_states(&m).unwrap();
            let (twice, l2) = label_states(&once).unwrap();
            assert_eq!(once, twice);
            assert_eq!(l2, Labeling::default());

            let p = permute(&m, true, true);
            assert_eq!(permute(&p, true, true), m);
            let (pl, _) = label_states(&p).unwrap();
            assert_eq!(pl, once);

            // filtering commutes with relabeling
            let act = ActionTuple::from_index(7).unwrap();
            let o = ObservationTuple::from_index(3).unwrap();
            let b = belief_update(&m, &m.prior_belief(), &act, &o).unwrap();
            let bp = belief_update(&p, &p.prior_belief(), &act, &o).unwrap();
            for s in JointState::ALL {
                let ps = JointState::new(
                    TrustState::ALL[1 - s.trust.index()],
                    WorkloadState::ALL[1 - s.workload.index()],
                );
                assert!((b.prob(s) - bp.prob(ps)).abs() < 1e-12);
            }
        }
    }
}
