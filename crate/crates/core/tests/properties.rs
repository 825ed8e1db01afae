mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustcal_core::data::{sample_with_states, synthetic_study, InteractionSequence, StudyDesign};
use trustcal_core::estimation::{em_fit, FitConfig};
use trustcal_core::labeling::{label_states, permute};
use trustcal_core::likelihood::{forward, sequence_log_likelihood, total_log_likelihood};
use trustcal_core::simulation::step_response;
use trustcal_core::solver::{policy_grid, qmdp_action, value_iteration, SolverConfig};
use trustcal_core::*;

fn random_actions<R: Rng>(rng: &mut R, n: usize) -> Vec<ActionTuple> {
    (0..n).map(|_| ActionTuple::from_index(rng.random_range(0..24)).unwrap()).collect()
}

fn random_sequence<R: Rng>(model: &TrustWorkloadModel, rng: &mut R, n: usize) -> InteractionSequence {
    let actions = random_actions(rng, n);
    sample_with_states(model, &actions, "s", rng).unwrap().0
}

#[test]
fn forward_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..20 {
        let m = TrustWorkloadModel::random(ActionStructure::full(), &mut rng);
        let n = rng.random_range(1..=6);
        let seq = random_sequence(&m, &mut rng, n);
        let brute = oracles::path_enumeration_likelihood(&m, &seq).ln();
        let ll = sequence_log_likelihood(&m, &seq).unwrap();
        assert!((ll - brute).abs() < 1e-10, "{ll} vs {brute}");
        let fwd = forward(&m, &seq).unwrap();
        for (a, e) in fwd.alpha.iter().zip(oracles::enumerated_filter(&m, &seq)) {
            for s in 0..4 {
                assert!((a.probs()[s] - e[s]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn impossible_sequence_has_negative_infinite_likelihood() {
    let st = ActionStructure::paper();
    let mut t = ModelTables::uniform(&st);
    t.emit_trust = [[1.0, 0.0], [1.0, 0.0]];
    let m = TrustWorkloadModel::new(st, t).unwrap();
    let a = ActionTuple::from_index(0).unwrap();
    let o = ObservationTuple::new(Reliance::Plus, Gaze::Road);
    let seq = InteractionSequence::from_pairs("x", 0, vec![(a, o)]).unwrap();
    assert_eq!(oracles::path_enumeration_likelihood(&m, &seq), 0.0);
    assert_eq!(sequence_log_likelihood(&m, &seq).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn synthetic_data_passes_chi_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let m = TrustWorkloadModel::random(ActionStructure::paper(), &mut rng);
    let a = ActionTuple::from_index(7).unwrap();
    let (seq, states) = sample_with_states(&m, &vec![a; 50_000], "chi", &mut rng).unwrap();

    let mut gaze = [[0usize; N_GAZE]; N_WORKLOAD];
    let mut reliance = [[0usize; N_RELIANCE]; N_TRUST];
    let mut trans = [[0usize; N_JOINT]; N_JOINT];
    for (t, (step, s)) in seq.steps().iter().zip(&states).enumerate() {
        gaze[s.workload.index()][step.observation.gaze.index()] += 1;
        reliance[s.trust.index()][step.observation.reliance.index()] += 1;
        if t > 0 {
            trans[states[t - 1].index()][s.index()] += 1;
        }
    }
    let tables = m.tables();
    for w in 0..N_WORKLOAD {
        assert!(oracles::chi_square(&gaze[w], &tables.emit_workload[w]) < oracles::CHI2_999[4]);
    }
    for tr in 0..N_TRUST {
        assert!(oracles::chi_square(&reliance[tr], &tables.emit_trust[tr]) < oracles::CHI2_999[1]);
    }
    for s in JointState::ALL {
        let row = m.joint_transition(s, &a);
        assert!(oracles::chi_square(&trans[s.index()], &row) < oracles::CHI2_999[3]);
    }
}

#[test]
fn step_response_converges_to_stationary_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..20 {
        let m = TrustWorkloadModel::random(ActionStructure::full(), &mut rng);
        let a = ActionTuple::from_index(rng.random_range(0..24)).unwrap();
        let p = oracles::chain(&m, &a);
        let pi = oracles::stationary(&p).unwrap();
        let rho = oracles::slem(&p);
        let horizon = ((1e-12f64).ln() / rho.ln()).ceil().max(10.0) as usize + 10;
        let sr = step_response(&m, &a, horizon, None).unwrap();
        assert_eq!(sr.p_trust_high.len(), horizon + 1);
        for d in &sr.distributions {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let last = sr.distributions.last().unwrap();
        for s in 0..4 {
            assert!((last[s] - pi[s]).abs() < 1e-8, "{last:?} vs {pi:?}");
        }
    }
}

#[test]
fn point_mass_transitions_follow_the_deterministic_path() {
    let st = ActionStructure::full();
    let mut t = ModelTables::uniform(&st);
    t.prior_trust = [1.0, 0.0];
    t.prior_workload = [1.0, 0.0];
    let n = st.trust_dims().n_reduced();
    for (i, row) in t.trans_trust.iter_mut().enumerate() {
        // trust flips every frame
        let s = JointState::from_index(i / n).unwrap();
        *row = if s.trust == TrustState::Low { [0.0, 1.0] } else { [1.0, 0.0] };
    }
    for (i, row) in t.trans_workload.iter_mut().enumerate() {
        // workload rises once trust is high and stays there
        let s = JointState::from_index(i / n).unwrap();
        *row = if s.trust == TrustState::High || s.workload == WorkloadState::High { [0.0, 1.0] } else { [1.0, 0.0] };
    }
    let m = TrustWorkloadModel::new(st, t).unwrap();
    let sr = step_response(&m, &ActionTuple::from_index(3).unwrap(), 5, None).unwrap();
    assert_eq!(sr.p_trust_high, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    assert_eq!(sr.p_workload_high, vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
}

fn swap_state(s: usize, swap_t: bool, swap_w: bool) -> usize {
    let (t, w) = (s / 2, s % 2);
    (if swap_t { 1 - t } else { t }) * 2 + if swap_w { 1 - w } else { w }
}

#[test]
fn relabeling_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..10 {
        let m = TrustWorkloadModel::random(ActionStructure::paper(), &mut rng);
        let seq = random_sequence(&m, &mut rng, 30);
        let ll = sequence_log_likelihood(&m, &seq).unwrap();
        let (labeled, _) = label_states(&m).unwrap();
        for (st, sw) in [(false, true), (true, false), (true, true)] {
            let p = permute(&m, st, sw);
            assert!((sequence_log_likelihood(&p, &seq).unwrap() - ll).abs() < 1e-9);
            assert_eq!(label_states(&p).unwrap().0, labeled);
            let fa = forward(&m, &seq).unwrap();
            let fb = forward(&p, &seq).unwrap();
            for (a, b) in fa.alpha.iter().zip(&fb.alpha) {
                for s in 0..4 {
                    assert!((a.probs()[s] - b.probs()[swap_state(s, st, sw)]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn superset_structures_are_at_least_as_expressive() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let truth = TrustWorkloadModel::random(ActionStructure::paper(), &mut rng);
    let design = StudyDesign { participants: 2, intersections_per_condition: 3, frames_per_sequence: 40 };
    let data = synthetic_study(&truth, design, 5).unwrap();
    let cfg = FitConfig { max_iter: 60, tol: 1e-8, ..FitConfig::default() };

    let small = ActionStructure::minimal();
    let fit = em_fit(&data, &small, &TrustWorkloadModel::random(small, &mut rng), &cfg).unwrap();
    for big in [ActionStructure::paper(), ActionStructure::full()] {
        let lifted = fit.model.embed(big).unwrap();
        let same = total_log_likelihood(&lifted, data.sequences()).unwrap();
        assert!((same - fit.total_log_likelihood).abs() < 1e-8);
        let refit = em_fit(&data, &big, &lifted, &cfg).unwrap();
        assert!(refit.total_log_likelihood >= fit.total_log_likelihood - 1e-9);
    }
}

#[test]
fn qmdp_action_is_invariant_under_positive_affine_rewards() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let m = TrustWorkloadModel::random(ActionStructure::paper(), &mut rng);
    let cfg = SolverConfig::default();
    let base = value_iteration(&m, &RewardSpec::default(), &cfg).unwrap();
    for (scale, shift) in [(2.0, 0.0), (0.37, 5.0), (13.0, -4.5)] {
        let r = RewardSpec::default().affine(scale, shift).unwrap();
        let moved = value_iteration(&m, &r, &cfg).unwrap();
        for _ in 0..300 {
            let b = Belief::new(oracles::simplex::<4, _>(&mut rng)).unwrap();
            let u = Context::from_index(rng.random_range(0..12)).unwrap();
            let gap = base.belief_q(&b, Transparency::On, &u) - base.belief_q(&b, Transparency::Off, &u);
            if gap.abs() > 1e-9 {
                assert_eq!(qmdp_action(&base, &b, &u), qmdp_action(&moved, &b, &u));
            }
        }
    }
}

#[test]
fn policy_grid_follows_bilinear_corner_advantages() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let res = 21;
    for _ in 0..5 {
        let m = TrustWorkloadModel::random(ActionStructure::paper(), &mut rng);
        let p = value_iteration(&m, &RewardSpec::default(), &SolverConfig::default()).unwrap();
        let cells = policy_grid(&p, res).unwrap();
        for u in Context::all() {
            let adv = |s: JointState| p.q(s, Transparency::On, &u) - p.q(s, Transparency::Off, &u);
            let corner: Vec<f64> = JointState::ALL.iter().map(|s| adv(*s)).collect();
            let block: Vec<_> = cells.iter().filter(|c| c.context == u).collect();
            assert_eq!(block.len(), res * res);
            for c in &block {
                let (pt, pw) = (c.p_trust_high, c.p_workload_high);
                let a = (1.0 - pt) * (1.0 - pw) * corner[0]
                    + (1.0 - pt) * pw * corner[1]
                    + pt * (1.0 - pw) * corner[2]
                    + pt * pw * corner[3];
                if a.abs() > 1e-9 {
                    assert_eq!(c.action == Transparency::On, a > 0.0);
                }
            }
            for i in 0..res {
                let row: Vec<_> = (0..res).map(|j| block[i * res + j].action).collect();
                let col: Vec<_> = (0..res).map(|j| block[j * res + i].action).collect();
                for line in [row, col] {
                    assert!(line.windows(2).filter(|w| w[0] != w[1]).count() <= 1);
                }
            }
        }
    }
}
