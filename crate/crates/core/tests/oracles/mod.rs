//! Independent reference computations shared by the property and acceptance
//! suites. Nothing here calls the filter, EM or solver under test.

#![allow(dead_code)]

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use trustcal_core::data::InteractionSequence;
use trustcal_core::{ActionTuple, JointState, TrustWorkloadModel, N_JOINT};

/// Joint probability of the observations by summing over all 4^N state paths.
pub fn path_enumeration_likelihood(model: &TrustWorkloadModel, seq: &InteractionSequence) -> f64 {
    let steps = seq.steps();
    let n = steps.len();
    let prior = model.prior();
    let mut total = 0.0;
    for code in 0..N_JOINT.pow(n as u32) {
        let path: Vec<JointState> = (0..n)
            .map(|t| JointState::from_index((code / N_JOINT.pow(t as u32)) % N_JOINT).unwrap())
            .collect();
        let mut p = prior[path[0].index()] * model.joint_emission(path[0], &steps[0].observation);
        for t in 1..n {
            if p == 0.0 {
                break;
            }
            p *= model.joint_transition(path[t - 1], &steps[t].action)[path[t].index()];
            p *= model.joint_emission(path[t], &steps[t].observation);
        }
        total += p;
    }
    total
}

/// `P(s_t | o_1..o_t)` for every t, by enumerating paths of each prefix.
pub fn enumerated_filter(model: &TrustWorkloadModel, seq: &InteractionSequence) -> Vec<[f64; N_JOINT]> {
    let steps = seq.steps();
    let prior = model.prior();
    (0..steps.len())
        .map(|t_end| {
            let len = t_end + 1;
            let mut joint = [0.0; N_JOINT];
            for code in 0..N_JOINT.pow(len as u32) {
                let state = |t: usize| JointState::from_index((code / N_JOINT.pow(t as u32)) % N_JOINT).unwrap();
                let mut p = prior[state(0).index()] * model.joint_emission(state(0), &steps[0].observation);
                for t in 1..len {
                    p *= model.joint_transition(state(t - 1), &steps[t].action)[state(t).index()];
                    p *= model.joint_emission(state(t), &steps[t].observation);
                }
                joint[state(t_end).index()] += p;
            }
            let z: f64 = joint.iter().sum();
            joint.map(|x| x / z)
        })
        .collect()
}

/// Row-stochastic 4x4 transition matrix under a constant action, built from
/// the factor tables entry by entry.
pub fn chain(model: &TrustWorkloadModel, a: &ActionTuple) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| model.joint_transition(JointState::from_index(i).unwrap(), a)[j])
}

/// Stationary distribution from the linear system `pi (P - I) = 0`,
/// `sum(pi) = 1`, with the last balance equation replaced by normalization.
pub fn stationary(p: &Matrix4<f64>) -> Option<[f64; N_JOINT]> {
    let mut a = p.transpose() - Matrix4::identity();
    for j in 0..N_JOINT {
        a[(N_JOINT - 1, j)] = 1.0;
    }
    let rhs = Vector4::new(0.0, 0.0, 0.0, 1.0);
    let pi = a.lu().solve(&rhs)?;
    Some([pi[0], pi[1], pi[2], pi[3]])
}

/// Second-largest eigenvalue modulus; the convergence rate of the chain.
pub fn slem(p: &Matrix4<f64>) -> f64 {
    let mut moduli: Vec<f64> = p.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    moduli[1]
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Uniform draw from the probability simplex.
pub fn simplex<const N: usize, R: Rng + ?Sized>(rng: &mut R) -> [f64; N] {
    let mut x = [0.0; N];
    for v in x.iter_mut() {
        *v = -rng.random::<f64>().max(f64::MIN_POSITIVE).ln();
    }
    let s: f64 = x.iter().sum();
    x.map(|v| v / s)
}

/// Pearson chi-square statistic of observed counts against probabilities.
/// Cells with zero expected count must have zero observations.
pub fn chi_square(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = n as f64 * p;
            if e == 0.0 {
                assert_eq!(c, 0, "observed an impossible outcome");
                0.0
            } else {
                (c as f64 - e).powi(2) / e
            }
        })
        .sum()
}

/// Upper 0.1% points of the chi-square distribution, indexed by degrees of freedom.
pub const CHI2_999: [f64; 6] = [f64::NAN, 10.828, 13.816, 16.266, 18.467, 20.515];

/// Optimal finite-horizon value by full expansion over drawn contexts,
/// transparency choices and observations, using only the factor tables.
pub fn exact_value(
    model: &TrustWorkloadModel,
    reward: &trustcal_core::RewardSpec,
    gamma: f64,
    context_dist: &[f64; 12],
    b: &[f64; N_JOINT],
    horizon: usize,
) -> f64 {
    use trustcal_core::{Context, ObservationTuple, Transparency};
    if horizon == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for u in Context::all() {
        let pu = context_dist[u.index()];
        if pu == 0.0 {
            continue;
        }
        let immediate: f64 =
            JointState::ALL.iter().map(|s| b[s.index()] * reward.reward(s.trust, u.reliability)).sum();
        let mut best = f64::NEG_INFINITY;
        for tau in [Transparency::Off, Transparency::On] {
            let a = ActionTuple::from_parts(tau, u);
            let mut pred = [0.0; N_JOINT];
            for s in JointState::ALL.iter() {
                let row = model.joint_transition(*s, &a);
                for j in 0..N_JOINT {
                    pred[j] += b[s.index()] * row[j];
                }
            }
            let mut future = 0.0;
            if horizon > 1 {
                for o in ObservationTuple::all() {
                    let mut post = [0.0; N_JOINT];
                    for s in JointState::ALL.iter() {
                        post[s.index()] = pred[s.index()] * model.joint_emission(*s, &o);
                    }
                    let po: f64 = post.iter().sum();
                    if po > 0.0 {
                        let next = post.map(|x| x / po);
                        future += po * exact_value(model, reward, gamma, context_dist, &next, horizon - 1);
                    }
                }
            }
            best = best.max(immediate + gamma * future);
        }
        total += pu * best;
    }
    total
}
