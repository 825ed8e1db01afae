//! Scaled forward–backward on the action-conditioned 4-state chain.

use crate::data::InteractionSequence;
use crate::error::{Error, Result};
use crate::model::TrustWorkloadModel;
use crate::types::*;

type Vec4 = [f64; N_JOINT];
type Mat4 = [[f64; N_JOINT]; N_JOINT];

/// A sequence pre-indexed for one action structure.
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub trust_action: Vec<u16>,
    pub workload_action: Vec<u16>,
    pub reliance: Vec<u8>,
    pub gaze: Vec<u8>,
}

impl Encoded {
    pub fn new(structure: &ActionStructure, seq: &InteractionSequence) -> Self {
        let steps = seq.steps();
        Self {
            trust_action: steps.iter().map(|s| structure.trust_dims().reduce(&s.action) as u16).collect(),
            workload_action: steps.iter().map(|s| structure.workload_dims().reduce(&s.action) as u16).collect(),
            reliance: steps.iter().map(|s| s.observation.reliance.index() as u8).collect(),
            gaze: steps.iter().map(|s| s.observation.gaze.index() as u8).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.reliance.len()
    }
}

/// Reusable scratch buffers for one pass over a sequence.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    pub alpha: Vec<Vec4>,
    pub beta: Vec<Vec4>,
    pub scale: Vec<f64>,
    pub emis: Vec<Vec4>,
}

#[inline]
fn emission(model: &TrustWorkloadModel, r: u8, g: u8) -> Vec4 {
    let t = model.tables();
    let (et, ew) = (&t.emit_trust, &t.emit_workload);
    let (r, g) = (r as usize, g as usize);
    [et[0][r] * ew[0][g], et[0][r] * ew[1][g], et[1][r] * ew[0][g], et[1][r] * ew[1][g]]
}

#[inline]
pub(crate) fn step_matrix(model: &TrustWorkloadModel, enc: &Encoded, t: usize) -> Mat4 {
    model.transition_matrix_reduced(enc.trust_action[t] as usize, enc.workload_action[t] as usize)
}

/// Fills `ws` with normalized alpha/beta and scaling constants; returns the
/// log-likelihood.
pub(crate) fn run(model: &TrustWorkloadModel, enc: &Encoded, ws: &mut Workspace) -> Result<f64> {
    let n = enc.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    ws.alpha.clear();
    ws.beta.clear();
    ws.scale.clear();
    ws.emis.clear();
    ws.emis.extend((0..n).map(|t| emission(model, enc.reliance[t], enc.gaze[t])));

    let prior = model.prior();
    let mut a: Vec4 = std::array::from_fn(|s| prior[s] * ws.emis[0][s]);
    let mut ll = 0.0;
    for t in 0..n {
        if t > 0 {
            let m = step_matrix(model, enc, t);
            let prev = ws.alpha[t - 1];
            let mut pred = [0.0; N_JOINT];
            for (s, row) in m.iter().enumerate() {
                for (p, q) in pred.iter_mut().zip(row) {
                    *p += q * prev[s];
                }
            }
            a = std::array::from_fn(|s| ws.emis[t][s] * pred[s]);
        }
        let c: f64 = a.iter().sum();
        if !(c > 0.0) {
            return Err(Error::ZeroLikelihood);
        }
        ws.alpha.push(a.map(|x| x / c));
        ws.scale.push(c);
        ll += c.ln();
    }

    ws.beta.resize(n, [1.0; N_JOINT]);
    for t in (0..n - 1).rev() {
        let m = step_matrix(model, enc, t + 1);
        let next = ws.beta[t + 1];
        let e = ws.emis[t + 1];
        let c = ws.scale[t + 1];
        let w: Vec4 = std::array::from_fn(|s| e[s] * next[s] / c);
        ws.beta[t] = std::array::from_fn(|s| m[s].iter().zip(&w).map(|(p, x)| p * x).sum());
    }
    Ok(ll)
}

/// Smoothed posteriors of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// `gamma[t][s] = p(s_t = s | all data)`.
    pub gamma: Vec<[f64; N_JOINT]>,
    /// `xi[t][s][s'] = p(s_t = s, s_{t+1} = s' | all data)`, `t < N-1`.
    pub xi: Vec<[[f64; N_JOINT]; N_JOINT]>,
    pub log_likelihood: f64,
}

pub(crate) fn gamma_at(ws: &Workspace, t: usize) -> Vec4 {
    let g: Vec4 = std::array::from_fn(|s| ws.alpha[t][s] * ws.beta[t][s]);
    let sum: f64 = g.iter().sum();
    g.map(|x| x / sum)
}

pub(crate) fn xi_at(ws: &Workspace, m: &Mat4, t: usize) -> Mat4 {
    let c = ws.scale[t + 1];
    let mut xi = [[0.0; N_JOINT]; N_JOINT];
    let mut sum = 0.0;
    for s in 0..N_JOINT {
        for s2 in 0..N_JOINT {
            let v = ws.alpha[t][s] * m[s][s2] * ws.emis[t + 1][s2] * ws.beta[t + 1][s2] / c;
            xi[s][s2] = v;
            sum += v;
        }
    }
    xi.iter_mut().flatten().for_each(|x| *x /= sum);
    xi
}

/// Posterior state and transition marginals for `seq` under `model`.
pub fn forward_backward(model: &TrustWorkloadModel, seq: &InteractionSequence) -> Result<Posterior> {
    let enc = Encoded::new(model.structure(), seq);
    let mut ws = Workspace::default();
    let log_likelihood = run(model, &enc, &mut ws)?;
    let n = enc.len();
    let gamma = (0..n).map(|t| gamma_at(&ws, t)).collect();
    let xi = (0..n.saturating_sub(1))
        .map(|t| xi_at(&ws, &step_matrix(model, &enc, t + 1), t))
        .collect();
    Ok(Posterior { gamma, xi, log_likelihood })
}
