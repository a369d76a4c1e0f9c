//! Belief state over the hypothesis set, Bayesian filtering, and decision
//! costs.

use crate::obsmodel::{HypothesisSet, ObsIndex, ObsModelError, PlanningObsModel};
use crate::sensing::OcclusionState;
use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum BeliefError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical underflow: likelihood normalizer {0:e} below 1e-300")]
    Underflow(f64),
    #[error(transparent)]
    ObsModel(#[from] ObsModelError),
}

/// Probability vector over hypotheses, in enumeration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    p: Vec<f64>,
}

impl Belief {
    pub fn uniform(m: usize) -> Belief {
        assert!(m >= 2, "need at least two hypotheses");
        Belief {
            p: vec![1.0 / m as f64; m],
        }
    }

    pub fn point_mass(m: usize, index: usize) -> Belief {
        assert!(index < m);
        let mut p = vec![0.0; m];
        p[index] = 1.0;
        Belief { p }
    }

    pub fn from_probs(p: Vec<f64>) -> Result<Belief, BeliefError> {
        if p.len() < 2 {
            return Err(BeliefError::InvalidArgument(
                "belief needs at least two hypotheses".into(),
            ));
        }
        if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(BeliefError::InvalidArgument(
                "belief entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(BeliefError::InvalidArgument(format!(
                "belief must sum to 1, got {sum}"
            )));
        }
        Ok(Belief { p })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn prob(&self, m: usize) -> f64 {
        self.p[m]
    }

    /// Most probable hypothesis; ties break toward the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.p.iter().enumerate() {
            if v > self.p[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        self.p[self.argmax()]
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.p
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| -v * v.log2())
            .sum()
    }
}

/// Multiply a belief by a positive likelihood vector and renormalize.
pub fn filter_belief(p: &Belief, likelihood: &[f64]) -> Result<Belief, BeliefError> {
    if likelihood.len() != p.len() {
        return Err(BeliefError::InvalidArgument(format!(
            "likelihood length {} does not match belief length {}",
            likelihood.len(),
            p.len()
        )));
    }
    let mut post: Vec<f64> = p
        .probs()
        .iter()
        .zip(likelihood)
        .map(|(&pi, &li)| pi * li)
        .collect();
    let norm: f64 = post.iter().sum();
    if norm < 1e-300 {
        return Err(BeliefError::Underflow(norm));
    }
    for v in post.iter_mut() {
        *v /= norm;
    }
    Ok(Belief { p: post })
}

/// One Bayes step: condition on observing `z` from viewpoint `x` under
/// occlusion state `psi`.
pub fn bayes_update(
    p: &Belief,
    x: usize,
    z: ObsIndex,
    psi: OcclusionState,
    h: &PlanningObsModel,
) -> Result<Belief, BeliefError> {
    if p.len() != h.hypothesis_count() {
        return Err(BeliefError::InvalidArgument(format!(
            "belief length {} does not match the model's {} hypotheses",
            p.len(),
            h.hypothesis_count()
        )));
    }
    let likelihood: Vec<f64> = (0..p.len())
        .map(|m| h.likelihood(z, x, m, psi))
        .collect::<Result<_, _>>()?;
    filter_belief(p, &likelihood)
}

/// Decision costs: an M x M matrix over (decision, truth) hypothesis pairs
/// built from false-positive/false-negative/wrong-answer constants, plus
/// the measurement trade-off scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub lambda: f64,
    pub g0: f64,
    m: usize,
    j_d: Vec<f64>,
}

impl CostSpec {
    /// General constructor. `k_orientation` prices deciding the right class
    /// in the wrong orientation and must be zero on identical orientations.
    pub fn build(
        hyps: &HypothesisSet,
        k_pos: f64,
        k_neg: f64,
        k_wrong_class: f64,
        k_orientation: impl Fn(&UnitQuaternion<f64>, &UnitQuaternion<f64>) -> f64,
        lambda: f64,
        g0: f64,
    ) -> Result<CostSpec, BeliefError> {
        for (name, v) in [
            ("k_pos", k_pos),
            ("k_neg", k_neg),
            ("k_wrong_class", k_wrong_class),
            ("lambda", lambda),
            ("g0", g0),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(BeliefError::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        let m = hyps.len();
        let mut j_d = vec![0.0; m * m];
        for d in 0..m {
            for j in 0..m {
                let cost = match (hyps.get(d).l, hyps.get(j).l) {
                    (None, None) => 0.0,
                    (Some(_), None) => k_pos,
                    (None, Some(_)) => k_neg,
                    (Some(ld), Some(lj)) => {
                        if ld != lj {
                            k_wrong_class
                        } else {
                            k_orientation(&hyps.get(d).orientation, &hyps.get(j).orientation)
                        }
                    }
                };
                if cost < 0.0 || !cost.is_finite() {
                    return Err(BeliefError::InvalidArgument(format!(
                        "decision cost ({d},{j}) must be finite and nonnegative, got {cost}"
                    )));
                }
                j_d[d * m + j] = cost;
            }
        }
        Ok(CostSpec { lambda, g0, m, j_d })
    }

    /// The experiments' 0/75 matrix: every mistake costs 75, lambda = g0 = 1.
    pub fn standard(hyps: &HypothesisSet) -> CostSpec {
        Self::symmetric(hyps, 75.0, 1.0, 1.0)
    }

    /// All mistakes cost `k`; correct decisions cost 0.
    pub fn symmetric(hyps: &HypothesisSet, k: f64, lambda: f64, g0: f64) -> CostSpec {
        Self::build(
            hyps,
            k,
            k,
            k,
            |a, b| if a.angle_to(b) < 1e-9 { 0.0 } else { k },
            lambda,
            g0,
        )
        .expect("constant costs are valid")
    }

    pub fn hypothesis_count(&self) -> usize {
        self.m
    }

    /// Raw matrix entry `J_D(decision, truth)`.
    pub fn decision_cost(&self, decision: usize, truth: usize) -> f64 {
        self.j_d[decision * self.m + truth]
    }

    /// Row of `J_D` for a fixed decision.
    pub fn decision_row(&self, decision: usize) -> &[f64] {
        &self.j_d[decision * self.m..(decision + 1) * self.m]
    }
}

/// `lambda * sum_j J_D(decision, j) p(j)`.
pub fn expected_decision_cost(p: &Belief, decision: usize, costs: &CostSpec) -> f64 {
    assert_eq!(p.len(), costs.m, "belief/cost dimensions must match");
    costs.lambda
        * costs
            .decision_row(decision)
            .iter()
            .zip(p.probs())
            .map(|(&c, &pi)| c * pi)
            .sum::<f64>()
}

/// Minimum-expected-cost decision; ties break toward the lowest index.
pub fn best_decision(p: &Belief, costs: &CostSpec) -> (usize, f64) {
    let mut best = (0, expected_decision_cost(p, 0, costs));
    for d in 1..costs.m {
        let cost = expected_decision_cost(p, d, costs);
        if cost < best.1 {
            best = (d, cost);
        }
    }
    best
}
