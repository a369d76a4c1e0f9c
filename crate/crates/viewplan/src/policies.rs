//! Action selection: static, random-walk, greedy mutual-information, and
//! the nonmyopic point-based POMDP policy, plus exact brute-force oracles.
//!
//! Planning treats the sensor position as fully observed and the
//! hypothesis as hidden, so value functions live on (viewpoint, belief)
//! pairs. Lookahead assumes unoccluded future measurements; execution
//! still conditions on the occlusion state it actually observes.
//!
//! Canonical action order for every tie-break: `MoveTo(0..X)` first, then
//! `Decide(0..M)`; lower index wins.

use crate::belief::{
    best_decision, expected_decision_cost, filter_belief, Belief, BeliefError, CostSpec,
};
use crate::obsmodel::{ObsModelError, PlanningObsModel};
use crate::sensing::OcclusionState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const ALPHASET_FORMAT_VERSION: u32 = 1;

/// Baseline policies stop once one hypothesis reaches this probability.
pub const STOP_THRESHOLD: f64 = 0.6;

/// Random-walk candidate pool: the nearest unvisited viewpoints.
pub const RANDOM_POOL: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("artifact hash mismatch: {0}")]
    HashMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    ObsModel(#[from] ObsModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveTo(usize),
    Decide(usize),
}

impl Action {
    /// Position in the canonical action order.
    pub fn order_index(&self, viewpoint_count: usize) -> usize {
        match *self {
            Action::MoveTo(x) => x,
            Action::Decide(d) => viewpoint_count + d,
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::MoveTo(x) => write!(f, "move_to({x})"),
            Action::Decide(d) => write!(f, "decide({d})"),
        }
    }
}

/// Record of one executed trial: measurement viewpoints, observations,
/// belief trajectory, and the terminal decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyTrace {
    /// Viewpoints measured from, in order (x_1 .. x_tau).
    pub visited: Vec<usize>,
    pub observations: Vec<(crate::obsmodel::ObsIndex, OcclusionState)>,
    /// p_0 followed by the posterior after each observation.
    pub beliefs: Vec<Belief>,
    pub final_action: Action,
    /// True when the step cap forced the decision.
    pub forced: bool,
}

impl PolicyTrace {
    /// Stopping time: number of measurements taken.
    pub fn tau(&self) -> usize {
        self.observations.len()
    }
}

/// Decide immediately from the post-measurement belief at the starting
/// viewpoint.
pub fn static_policy(p_after_first: &Belief, costs: &CostSpec) -> Action {
    Action::Decide(best_decision(p_after_first, costs).0)
}

/// Decide once confident or exhausted; otherwise move uniformly at random
/// among the `pool` nearest unvisited viewpoints.
pub fn random_walk_policy(
    x: usize,
    p: &Belief,
    visited: &[bool],
    graph: &crate::geometry::ViewGraph,
    threshold: f64,
    pool: usize,
    rng: &mut impl Rng,
) -> Action {
    if p.max_prob() >= threshold {
        return Action::Decide(p.argmax());
    }
    let mut candidates: Vec<(f64, usize)> = (0..graph.len())
        .filter(|&id| !visited[id])
        .map(|id| (graph.move_cost(x, id), id))
        .collect();
    if candidates.is_empty() {
        return Action::Decide(p.argmax());
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    let pick = rng.gen_range(0..pool.max(1).min(candidates.len()));
    Action::MoveTo(candidates[pick].1)
}

/// Mutual information (bits) between the hypothesis and the next
/// observation taken unoccluded from viewpoint `x`.
pub fn mutual_information(p: &Belief, h: &PlanningObsModel, x: usize) -> f64 {
    let m = p.len();
    let z_count = h.obs_count as usize;
    let mut marginal = vec![0.0f64; z_count];
    for j in 0..m {
        let row = h.row(x, j, OcclusionState::CLEAR);
        let pj = p.prob(j);
        for (acc, &v) in marginal.iter_mut().zip(row) {
            *acc += pj * v;
        }
    }
    let mut info = 0.0;
    for j in 0..m {
        let pj = p.prob(j);
        if pj == 0.0 {
            continue;
        }
        let row = h.row(x, j, OcclusionState::CLEAR);
        for (z, &v) in row.iter().enumerate() {
            if v > 0.0 {
                info += pj * v * (v / marginal[z]).log2();
            }
        }
    }
    info.max(0.0)
}

/// Greedy mutual information per unit movement cost. Ties break toward
/// the cheaper move, then the lower viewpoint id.
pub fn gmi_policy(
    x: usize,
    p: &Belief,
    visited: &[bool],
    h: &PlanningObsModel,
    threshold: f64,
) -> Action {
    if p.max_prob() >= threshold {
        return Action::Decide(p.argmax());
    }
    let graph = &h.viewsphere;
    let mut best: Option<(f64, f64, usize)> = None; // (ratio, cost, id)
    for id in 0..graph.len() {
        if visited[id] {
            continue;
        }
        let cost = graph.move_cost(x, id);
        let ratio = mutual_information(p, h, id) / cost;
        let better = match best {
            None => true,
            Some((br, bc, bid)) => {
                ratio > br || (ratio == br && (cost < bc || (cost == bc && id < bid)))
            }
        };
        if better {
            best = Some((ratio, cost, id));
        }
    }
    match best {
        Some((_, _, id)) => Action::MoveTo(id),
        None => Action::Decide(p.argmax()),
    }
}

/// Point-based value iteration parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NvpConfig {
    pub belief_points: usize,
    pub max_iters: u32,
    pub epsilon: f64,
    /// Depth of the forward simulations that collect belief points.
    pub horizon_cap: u32,
    pub seed: u64,
}

impl Default for NvpConfig {
    fn default() -> Self {
        NvpConfig {
            belief_points: 500,
            max_iters: 200,
            epsilon: 1e-4,
            horizon_cap: 8,
            seed: 0,
        }
    }
}

/// Linear lower-bound piece of the value function with its greedy action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVec {
    pub values: Vec<f64>,
    pub action: Action,
}

/// Solved policy: alpha-vector sets per viewpoint. Decision states are
/// absorbing with value zero and carry no vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PbviSolution {
    format_version: u32,
    pub model_hash: String,
    pub costs: CostSpec,
    pub config: NvpConfig,
    pub converged: bool,
    pub iterations: u32,
    pub residual: f64,
    pub alphas: Vec<Vec<AlphaVec>>,
}

impl PbviSolution {
    pub fn hypothesis_count(&self) -> usize {
        self.costs.hypothesis_count()
    }

    /// `J(x, p)`: pointwise minimum over the alpha set.
    pub fn value(&self, x: usize, p: &Belief) -> f64 {
        self.alphas[x]
            .iter()
            .map(|a| dot(&a.values, p.probs()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path, expect: Option<&PlanningObsModel>) -> Result<Self, PolicyError> {
        let file = std::fs::File::open(path)?;
        let sol: PbviSolution = serde_json::from_reader(std::io::BufReader::new(file))?;
        if sol.format_version != ALPHASET_FORMAT_VERSION {
            return Err(PolicyError::FormatVersion {
                found: sol.format_version,
                expected: ALPHASET_FORMAT_VERSION,
            });
        }
        if let Some(h) = expect {
            let found = h.content_hash();
            if found != sol.model_hash {
                return Err(PolicyError::HashMismatch(format!(
                    "alpha set was solved for model {}, got {found}",
                    sol.model_hash
                )));
            }
        }
        Ok(sol)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Greedy action of the solved policy at (viewpoint, belief).
pub fn nvp_policy_action(
    sol: &PbviSolution,
    x: usize,
    p: &Belief,
) -> Result<Action, PolicyError> {
    if x >= sol.alphas.len() {
        return Err(PolicyError::InvalidArgument(format!(
            "viewpoint {x} outside 0..{}",
            sol.alphas.len()
        )));
    }
    if p.len() != sol.hypothesis_count() {
        return Err(PolicyError::InvalidArgument(format!(
            "belief length {} does not match the solution's {} hypotheses",
            p.len(),
            sol.hypothesis_count()
        )));
    }
    let x_count = sol.alphas.len();
    let mut best: Option<(f64, usize, Action)> = None;
    for alpha in &sol.alphas[x] {
        let value = dot(&alpha.values, p.probs());
        let order = alpha.action.order_index(x_count);
        let better = match best {
            None => true,
            Some((bv, bo, _)) => value < bv || (value == bv && order < bo),
        };
        if better {
            best = Some((value, order, alpha.action));
        }
    }
    Ok(best.expect("alpha sets are nonempty").2)
}

/// Observation likelihoods transposed for the solver: `lik[x][z*M + j]`.
struct LikTable {
    x_count: usize,
    z_count: usize,
    m: usize,
    values: Vec<f64>,
}

impl LikTable {
    fn build(h: &PlanningObsModel) -> LikTable {
        let x_count = h.viewsphere.len();
        let z_count = h.obs_count as usize;
        let m = h.hypothesis_count();
        let mut values = vec![0.0; x_count * z_count * m];
        for x in 0..x_count {
            for j in 0..m {
                let row = h.row(x, j, OcclusionState::CLEAR);
                for z in 0..z_count {
                    values[(x * z_count + z) * m + j] = row[z];
                }
            }
        }
        LikTable {
            x_count,
            z_count,
            m,
            values,
        }
    }

    /// Likelihood vector over hypotheses for observing `z` at `x`.
    fn at(&self, x: usize, z: usize) -> &[f64] {
        let start = (x * self.z_count + z) * self.m;
        &self.values[start..start + self.m]
    }
}

/// Reachable beliefs: uniform, all corners, then forward simulation under
/// random viewpoint sequences and sampled observations.
fn collect_beliefs(lik: &LikTable, config: &NvpConfig) -> Vec<Belief> {
    let m = lik.m;
    let mut set = vec![Belief::uniform(m)];
    for j in 0..m {
        set.push(Belief::point_mass(m, j));
    }
    set.truncate(config.belief_points.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stalls = 0;
    while set.len() < config.belief_points && stalls < 50 {
        let truth = rng.gen_range(0..m);
        let mut p = Belief::uniform(m);
        let mut grew = false;
        for _ in 0..config.horizon_cap.max(1) {
            let x = rng.gen_range(0..lik.x_count);
            // Sample z from the truth's row at x.
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut z = lik.z_count - 1;
            for cand in 0..lik.z_count {
                acc += lik.at(x, cand)[truth];
                if u < acc {
                    z = cand;
                    break;
                }
            }
            match filter_belief(&p, lik.at(x, z)) {
                Ok(next) => p = next,
                Err(_) => break,
            }
            let fresh = set
                .iter()
                .all(|q| q.probs().iter().zip(p.probs()).any(|(a, b)| (a - b).abs() > 1e-12));
            if fresh {
                set.push(p.clone());
                grew = true;
                if set.len() == config.belief_points {
                    break;
                }
            }
        }
        stalls = if grew { 0 } else { stalls + 1 };
    }
    set
}

/// Solve the augmented POMDP by point-based value iteration.
///
/// Alpha sets always contain the decision vectors `lambda * J_D(d, .)`,
/// so the value never exceeds the immediate decision cost. Each sweep
/// replaces the move vectors with the Bellman backups at the belief set;
/// iteration stops when the max value change at the points drops below
/// `epsilon`.
pub fn nvp_solve(
    h: &PlanningObsModel,
    costs: &CostSpec,
    config: &NvpConfig,
) -> Result<PbviSolution, PolicyError> {
    if costs.hypothesis_count() != h.hypothesis_count() {
        return Err(PolicyError::InvalidArgument(format!(
            "cost matrix covers {} hypotheses, model has {}",
            costs.hypothesis_count(),
            h.hypothesis_count()
        )));
    }
    if config.belief_points == 0 || config.max_iters == 0 || config.epsilon <= 0.0 {
        return Err(PolicyError::InvalidArgument(
            "belief_points, max_iters, and epsilon must be positive".into(),
        ));
    }
    let lik = LikTable::build(h);
    let (x_count, z_count, m) = (lik.x_count, lik.z_count, lik.m);
    let beliefs = collect_beliefs(&lik, config);
    let n_b = beliefs.len();

    let decide_alphas: Vec<AlphaVec> = (0..m)
        .map(|d| AlphaVec {
            values: costs
                .decision_row(d)
                .iter()
                .map(|&c| costs.lambda * c)
                .collect(),
            action: Action::Decide(d),
        })
        .collect();
    // Best immediate decision per belief point (value, alpha index).
    let best_decide: Vec<(f64, usize)> = beliefs
        .iter()
        .map(|b| {
            let mut best = (f64::INFINITY, 0);
            for (d, alpha) in decide_alphas.iter().enumerate() {
                let v = dot(&alpha.values, b.probs());
                if v < best.0 {
                    best = (v, d);
                }
            }
            best
        })
        .collect();

    let mut gamma: Vec<Vec<AlphaVec>> = vec![decide_alphas.clone(); x_count];
    let mut v_old: Vec<f64> = (0..x_count)
        .flat_map(|_| best_decide.iter().map(|&(v, _)| v))
        .collect();

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    while iterations < config.max_iters {
        iterations += 1;
        // Stage 1: per (arrival viewpoint, belief point), the expected
        // continuation vector beta(x', b)_j = sum_z h_z(x',j) a*_{x',z,b,j}.
        let mut beta = vec![0.0f64; x_count * n_b * m];
        for xp in 0..x_count {
            let gam = &gamma[xp];
            for z in 0..z_count {
                let lz = lik.at(xp, z);
                for (bi, b) in beliefs.iter().enumerate() {
                    let mut best_k = 0;
                    let mut best_v = f64::INFINITY;
                    for (k, alpha) in gam.iter().enumerate() {
                        let mut s = 0.0;
                        for j in 0..m {
                            s += alpha.values[j] * lz[j] * b.probs()[j];
                        }
                        if s < best_v {
                            best_v = s;
                            best_k = k;
                        }
                    }
                    let out = &mut beta[(xp * n_b + bi) * m..(xp * n_b + bi) * m + m];
                    for j in 0..m {
                        out[j] += lz[j] * gam[best_k].values[j];
                    }
                }
            }
        }
        // Stage 2: Bellman backup at every (viewpoint, belief point).
        let graph = &h.viewsphere;
        let mut v_new = vec![0.0f64; x_count * n_b];
        let mut next_gamma: Vec<Vec<AlphaVec>> = Vec::with_capacity(x_count);
        for x in 0..x_count {
            let mut set = decide_alphas.clone();
            let mut seen: std::collections::HashSet<(usize, Vec<u64>)> =
                std::collections::HashSet::new();
            for (bi, b) in beliefs.iter().enumerate() {
                // Canonical order: moves by ascending id, then decides.
                let mut winner: Option<(f64, Action, usize)> = None; // (value, action, xp)
                for xp in 0..x_count {
                    let base = (xp * n_b + bi) * m;
                    let v = graph.move_cost(x, xp) + dot(&beta[base..base + m], b.probs());
                    if winner.as_ref().is_none_or(|w| v < w.0) {
                        winner = Some((v, Action::MoveTo(xp), xp));
                    }
                }
                let (dec_v, _) = best_decide[bi];
                let (win_v, win_action, win_xp) = winner.expect("at least one viewpoint");
                if dec_v < win_v {
                    // Decide alphas are already in the set.
                    v_new[x * n_b + bi] = dec_v;
                } else {
                    v_new[x * n_b + bi] = win_v;
                    let base = (win_xp * n_b + bi) * m;
                    let g = graph.move_cost(x, win_xp);
                    let values: Vec<f64> =
                        beta[base..base + m].iter().map(|&v| v + g).collect();
                    let key = (
                        win_action.order_index(x_count),
                        values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    );
                    if seen.insert(key) {
                        set.push(AlphaVec {
                            values,
                            action: win_action,
                        });
                    }
                }
            }
            next_gamma.push(set);
        }
        residual = v_new
            .iter()
            .zip(&v_old)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        gamma = next_gamma;
        v_old = v_new;
        if residual < config.epsilon {
            converged = true;
            break;
        }
    }

    Ok(PbviSolution {
        format_version: ALPHASET_FORMAT_VERSION,
        model_hash: h.content_hash(),
        costs: costs.clone(),
        config: config.clone(),
        converged,
        iterations,
        residual,
        alphas: gamma,
    })
}

fn check_instance(
    h: &PlanningObsModel,
    costs: &CostSpec,
    x: usize,
    p: &Belief,
) -> Result<(), PolicyError> {
    if costs.hypothesis_count() != h.hypothesis_count() || p.len() != h.hypothesis_count() {
        return Err(PolicyError::InvalidArgument(
            "belief/cost/model dimensions must match".into(),
        ));
    }
    if x >= h.viewsphere.len() {
        return Err(PolicyError::InvalidArgument(format!(
            "viewpoint {x} outside 0..{}",
            h.viewsphere.len()
        )));
    }
    Ok(())
}

/// Exact expectimax over the augmented Bellman recursion with a forced
/// decision at the horizon. Test oracle; exponential in `horizon`.
pub fn brute_force_value(
    h: &PlanningObsModel,
    costs: &CostSpec,
    x: usize,
    p: &Belief,
    horizon: u32,
) -> Result<f64, PolicyError> {
    check_instance(h, costs, x, p)?;
    if horizon > 4 {
        return Err(PolicyError::InvalidArgument(format!(
            "oracle horizon capped at 4, got {horizon}"
        )));
    }
    let nodes = ((h.viewsphere.len() * h.obs_count as usize) as f64).powi(horizon as i32);
    if nodes > 1e7 {
        return Err(PolicyError::ResourceLimit(format!(
            "about {nodes:.0} expectimax nodes exceed the 1e7 oracle budget"
        )));
    }
    let lik = LikTable::build(h);
    Ok(expectimax(&lik, &h.viewsphere, costs, x, p, horizon).0)
}

/// First minimizing action of the exact recursion, canonical tie-breaks.
pub fn brute_force_action(
    h: &PlanningObsModel,
    costs: &CostSpec,
    x: usize,
    p: &Belief,
    horizon: u32,
) -> Result<(Action, f64), PolicyError> {
    brute_force_value(h, costs, x, p, horizon)?;
    let lik = LikTable::build(h);
    let (value, action) = expectimax(&lik, &h.viewsphere, costs, x, p, horizon);
    Ok((action, value))
}

fn expectimax(
    lik: &LikTable,
    graph: &crate::geometry::ViewGraph,
    costs: &CostSpec,
    x: usize,
    p: &Belief,
    horizon: u32,
) -> (f64, Action) {
    let (dec_d, dec_v) = best_decision(p, costs);
    if horizon == 0 {
        return (dec_v, Action::Decide(dec_d));
    }
    let mut best = (f64::INFINITY, Action::Decide(dec_d));
    for xp in 0..lik.x_count {
        let mut ev = graph.move_cost(x, xp);
        for z in 0..lik.z_count {
            let lz = lik.at(xp, z);
            let pz = dot(lz, p.probs());
            if pz <= 0.0 {
                continue;
            }
            let post = filter_belief(p, lz).expect("pz > 0 implies a valid posterior");
            ev += pz * expectimax(lik, graph, costs, xp, &post, horizon - 1).0;
        }
        if ev < best.0 {
            best = (ev, Action::MoveTo(xp));
        }
    }
    if dec_v < best.0 {
        best = (dec_v, Action::Decide(dec_d));
    }
    best
}

/// Exact expected cost of following the solved policy from (x, p),
/// deciding by force when `depth_cap` runs out.
pub fn policy_expected_cost(
    sol: &PbviSolution,
    h: &PlanningObsModel,
    costs: &CostSpec,
    x: usize,
    p: &Belief,
    depth_cap: u32,
) -> Result<f64, PolicyError> {
    check_instance(h, costs, x, p)?;
    let lik = LikTable::build(h);
    eval_policy(sol, &lik, &h.viewsphere, costs, x, p, depth_cap)
}

fn eval_policy(
    sol: &PbviSolution,
    lik: &LikTable,
    graph: &crate::geometry::ViewGraph,
    costs: &CostSpec,
    x: usize,
    p: &Belief,
    depth: u32,
) -> Result<f64, PolicyError> {
    if depth == 0 {
        return Ok(best_decision(p, costs).1);
    }
    match nvp_policy_action(sol, x, p)? {
        Action::Decide(d) => Ok(expected_decision_cost(p, d, costs)),
        Action::MoveTo(xp) => {
            let mut ev = graph.move_cost(x, xp);
            for z in 0..lik.z_count {
                let lz = lik.at(xp, z);
                let pz = dot(lz, p.probs());
                if pz <= 0.0 {
                    continue;
                }
                let post = filter_belief(p, lz)?;
                ev += pz * eval_policy(sol, lik, graph, costs, xp, &post, depth - 1)?;
            }
            Ok(ev)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_viewsphere;
    use crate::obsmodel::HypothesisSet;
    use approx::assert_relative_eq;

    /// Synthetic instance on a real viewsphere with hand-picked rows.
    fn toy(
        viewpoints: usize,
        interest_orients: u32,
        obs: u32,
        rows: impl Fn(usize, usize) -> Vec<f64>,
    ) -> (PlanningObsModel, CostSpec) {
        let sphere = build_viewsphere(viewpoints, 1.0, false, viewpoints - 1, 1.0).unwrap();
        let hyps = HypothesisSet::new(vec![(
            1,
            "obj".into(),
            HypothesisSet::yaw_grid(interest_orients),
        )])
        .unwrap();
        let costs = CostSpec::standard(&hyps);
        let h = PlanningObsModel::from_rows(sphere, hyps, obs, rows).unwrap();
        (h, costs)
    }

    fn uniform_rows(obs: u32) -> impl Fn(usize, usize) -> Vec<f64> {
        move |_x, _m| vec![1.0 / obs as f64; obs as usize]
    }

    /// 2 antipodal viewpoints, 2 hypotheses, 2 observations; viewpoint 0 is
    /// informative (0.9/0.1), viewpoint 1 is useless.
    fn hand_instance() -> (PlanningObsModel, CostSpec) {
        toy(2, 1, 2, |x, m| {
            if x == 0 {
                if m == 0 {
                    vec![0.9, 0.1]
                } else {
                    vec![0.1, 0.9]
                }
            } else {
                vec![0.5, 0.5]
            }
        })
    }

    /// Random instance whose optimal stopping time is short (mistake costs
    /// a single-digit multiple of the measurement cost), so a depth-3
    /// oracle plays near-optimally and is a fair reference.
    fn random_instance(seed: u64) -> (PlanningObsModel, CostSpec, usize, u32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let viewpoints = rng.gen_range(2..=3usize);
        let orients = rng.gen_range(1..=3u32);
        let obs = rng.gen_range(2..=5u32);
        let mistake = rng.gen_range(6.0..15.0);
        let mut rows = std::collections::HashMap::new();
        let m = orients as usize + 1;
        for x in 0..viewpoints {
            for j in 0..m {
                let mut row: Vec<f64> =
                    (0..obs).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                rows.insert((x, j), row);
            }
        }
        let (h, _) = toy(viewpoints, orients, obs, |x, j| rows[&(x, j)].clone());
        let costs = CostSpec::symmetric(&h.hypotheses, mistake, 1.0, 1.0);
        (h, costs, viewpoints, obs)
    }

    #[test]
    fn action_order_is_moves_then_decides() {
        assert_eq!(Action::MoveTo(2).order_index(5), 2);
        assert_eq!(Action::Decide(0).order_index(5), 5);
        assert!(Action::MoveTo(4).order_index(5) < Action::Decide(0).order_index(5));
        assert_eq!(format!("{}", Action::Decide(3)), "decide(3)");
    }

    #[test]
    fn static_policy_decides_best() {
        let (h, costs) = hand_instance();
        let p = Belief::uniform(2);
        // z = 1 at viewpoint 0: likelihood across hypotheses is (0.9, 0.1).
        let z1: Vec<f64> = (0..2).map(|m| h.row(0, m, OcclusionState::CLEAR)[0]).collect();
        let post = filter_belief(&p, &z1).unwrap();
        assert_eq!(static_policy(&post, &costs), Action::Decide(0));
        // Uniform belief: tie-break to the first hypothesis.
        assert_eq!(static_policy(&p, &costs), Action::Decide(0));
        // Matches the horizon-0 oracle on random instances.
        for seed in 0..20 {
            let (h, costs, viewpoints, _) = random_instance(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let m = h.hypothesis_count();
            let mut p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            let p = Belief::from_probs(p).unwrap();
            let x = rng.gen_range(0..viewpoints);
            let (oracle_action, oracle_value) =
                brute_force_action(&h, &costs, x, &p, 0).unwrap();
            assert_eq!(static_policy(&p, &costs), oracle_action);
            assert_relative_eq!(
                expected_decision_cost(&p, best_decision(&p, &costs).0, &costs),
                oracle_value,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn random_walk_threshold_exhaustion_and_pool() {
        let (h, _costs) = hand_instance();
        let graph = &h.viewsphere;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Belief::from_probs(vec![0.7, 0.3]).unwrap();
        assert_eq!(
            random_walk_policy(0, &p, &[false, false], graph, 0.6, 3, &mut rng),
            Action::Decide(0)
        );
        let low = Belief::from_probs(vec![0.55, 0.45]).unwrap();
        assert_eq!(
            random_walk_policy(0, &low, &[true, true], graph, 0.6, 3, &mut rng),
            Action::Decide(0),
            "exhaustion decides the argmax"
        );
        // Bigger sphere: the move always lands in the 3 nearest unvisited.
        let sphere = build_viewsphere(16, 1.0, false, 4, 1.0).unwrap();
        let mut nearest: Vec<(f64, usize)> = (1..16).map(|i| (sphere.move_cost(0, i), i)).collect();
        nearest.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pool: Vec<usize> = nearest.iter().take(3).map(|&(_, i)| i).collect();
        let mut visited = vec![false; 16];
        visited[0] = true;
        let mut seen = std::collections::HashSet::new();
        for trial in 0..60 {
            let mut rng = ChaCha8Rng::seed_from_u64(trial);
            let a = random_walk_policy(0, &low, &visited, &sphere, 0.6, 3, &mut rng);
            let Action::MoveTo(id) = a else {
                panic!("expected a move")
            };
            assert!(pool.contains(&id), "{id} not among the 3 nearest {pool:?}");
            seen.insert(id);
            // Same seed, same choice.
            let mut rng2 = ChaCha8Rng::seed_from_u64(trial);
            assert_eq!(a, random_walk_policy(0, &low, &visited, &sphere, 0.6, 3, &mut rng2));
        }
        assert_eq!(seen.len(), 3, "all pool members eventually drawn");
    }

    #[test]
    fn gmi_zero_information_moves_to_cheapest() {
        let (h, _) = toy(3, 2, 4, |_x, _m| vec![0.25; 4]);
        let p = Belief::uniform(3);
        let visited = vec![true, false, false];
        let a = gmi_policy(0, &p, &visited, &h, 0.6);
        // MI is exactly zero everywhere; the cheaper unvisited viewpoint wins.
        let g = &h.viewsphere;
        let expect = if g.move_cost(0, 1) <= g.move_cost(0, 2) { 1 } else { 2 };
        assert_eq!(a, Action::MoveTo(expect));
        // Threshold stop and exhaustion still apply.
        let hi = Belief::from_probs(vec![0.65, 0.25, 0.10]).unwrap();
        assert_eq!(gmi_policy(0, &hi, &visited, &h, 0.6), Action::Decide(0));
        assert_eq!(gmi_policy(0, &p, &[true, true, true], &h, 0.6), Action::Decide(0));
    }

    #[test]
    fn gmi_attains_entropy_on_separating_rows() {
        // Viewpoint 1 separates all three hypotheses deterministically.
        let (h, _) = toy(2, 2, 3, |x, m| {
            if x == 1 {
                let mut row = vec![0.0; 3];
                row[m] = 1.0;
                row
            } else {
                vec![1.0 / 3.0; 3]
            }
        });
        let p = Belief::from_probs(vec![0.5, 0.25, 0.25]).unwrap();
        let mi = mutual_information(&p, &h, 1);
        assert_relative_eq!(mi, p.entropy_bits(), epsilon = 1e-12);
        assert_relative_eq!(mutual_information(&p, &h, 0), 0.0, epsilon = 1e-12);
        assert!(mi <= p.entropy_bits() + 1e-9);
        let a = gmi_policy(0, &p, &[true, false], &h, 0.6);
        assert_eq!(a, Action::MoveTo(1));
    }

    #[test]
    fn gmi_matches_direct_double_sum() {
        // Independent oracle: I = H(Z) - H(Z|H), entropies in bits.
        for seed in 0..20 {
            let (h, _, viewpoints, obs) = random_instance(seed);
            let m = h.hypothesis_count();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
            let mut p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            let p = Belief::from_probs(p).unwrap();
            for x in 0..viewpoints {
                let mut hz = 0.0;
                let mut hz_given = 0.0;
                for z in 0..obs as usize {
                    let pz: f64 = (0..m)
                        .map(|j| p.prob(j) * h.row(x, j, OcclusionState::CLEAR)[z])
                        .sum();
                    if pz > 0.0 {
                        hz -= pz * pz.log2();
                    }
                }
                for j in 0..m {
                    let row = h.row(x, j, OcclusionState::CLEAR);
                    let cond: f64 = row
                        .iter()
                        .filter(|&&v| v > 0.0)
                        .map(|&v| -v * v.log2())
                        .sum();
                    hz_given += p.prob(j) * cond;
                }
                let oracle = (hz - hz_given).max(0.0);
                assert_relative_eq!(
                    mutual_information(&p, &h, x),
                    oracle,
                    epsilon = 1e-9
                );
                assert!(mutual_information(&p, &h, x) >= 0.0);
                assert!(mutual_information(&p, &h, x) <= p.entropy_bits() + 1e-9);
            }
        }
    }

    #[test]
    fn brute_force_hand_computed_one_step() {
        let (h, costs) = hand_instance();
        let p = Belief::uniform(2);
        // Horizon 0: forced decision, 75 * 0.5.
        assert_relative_eq!(
            brute_force_value(&h, &costs, 0, &p, 0).unwrap(),
            37.5,
            epsilon = 1e-12
        );
        // Horizon 1 from viewpoint 0: stay (cost g0 = 1), each z equally
        // likely, posterior (0.9, 0.1) -> decide at 7.5. Total 8.5. Moving
        // to the useless antipode costs pi + 1 + 37.5; deciding now 37.5.
        assert_relative_eq!(
            brute_force_value(&h, &costs, 0, &p, 1).unwrap(),
            8.5,
            epsilon = 1e-9
        );
        let (action, _) = brute_force_action(&h, &costs, 0, &p, 1).unwrap();
        assert_eq!(action, Action::MoveTo(0), "re-measuring in place is optimal");
        // Value is non-increasing in horizon.
        let mut prev = f64::INFINITY;
        for horizon in 0..=3 {
            let v = brute_force_value(&h, &costs, 0, &p, horizon).unwrap();
            assert!(v <= prev + 1e-9);
            prev = v;
        }
        assert!(brute_force_value(&h, &costs, 0, &p, 5).is_err());
    }

    #[test]
    fn brute_force_resource_limit() {
        let (h, costs) = toy(3, 3, 5, |_x, _m| vec![0.2; 5]);
        let p = Belief::uniform(4);
        // 15^4 = 50625 nodes: fine. Fabricate a tighter case via horizon 4
        // on a larger observation space.
        assert!(brute_force_value(&h, &costs, 0, &p, 4).is_ok());
        let (h2, costs2) = toy(3, 3, 60, |_x, _m| vec![1.0 / 60.0; 60]);
        assert!(matches!(
            brute_force_value(&h2, &costs2, 0, &Belief::uniform(4), 4),
            Err(PolicyError::ResourceLimit(_))
        ));
    }

    #[test]
    fn nvp_free_decisions_and_uninformative_models() {
        // lambda = 0: deciding is free, value 0 everywhere.
        let (h, _) = hand_instance();
        let hyps = HypothesisSet::new(vec![(1, "obj".into(), HypothesisSet::yaw_grid(1))]).unwrap();
        let free = CostSpec::symmetric(&hyps, 75.0, 0.0, 1.0);
        let sol = nvp_solve(&h, &free, &NvpConfig::default()).unwrap();
        assert!(sol.converged);
        for x in 0..2 {
            for p in [Belief::uniform(2), Belief::point_mass(2, 1)] {
                assert_relative_eq!(sol.value(x, &p), 0.0, epsilon = 1e-12);
                assert!(matches!(
                    nvp_policy_action(&sol, x, &p).unwrap(),
                    Action::Decide(_)
                ));
            }
        }
        // Uninformative rows: measurements cannot move the belief, so the
        // value equals the immediate decision cost and the policy decides.
        let (hu, costs) = toy(2, 1, 3, uniform_rows(3));
        let sol = nvp_solve(&hu, &costs, &NvpConfig::default()).unwrap();
        assert!(sol.converged);
        let p = Belief::from_probs(vec![0.6, 0.4]).unwrap();
        let (d, dec_cost) = best_decision(&p, &costs);
        assert_relative_eq!(sol.value(0, &p), dec_cost, epsilon = 1e-9);
        assert_eq!(nvp_policy_action(&sol, 0, &p).unwrap(), Action::Decide(d));
        assert_eq!(
            nvp_policy_action(&sol, 1, &Belief::uniform(2)).unwrap(),
            Action::Decide(0),
            "uniform ties break to the first hypothesis"
        );
    }

    #[test]
    fn nvp_respects_value_bounds_and_concavity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..5 {
            let (h, costs, viewpoints, _) = random_instance(seed);
            let m = h.hypothesis_count();
            let sol = nvp_solve(&h, &costs, &NvpConfig {
                belief_points: 80,
                ..NvpConfig::default()
            })
            .unwrap();
            for _ in 0..200 {
                let mut p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= s);
                let p = Belief::from_probs(p).unwrap();
                let x = rng.gen_range(0..viewpoints);
                let v = sol.value(x, &p);
                assert!(v >= 0.0);
                assert!(v <= best_decision(&p, &costs).1 + 1e-9);
            }
            // Concavity: J(theta a + (1-theta) b) >= theta J(a) + (1-theta) J(b).
            for _ in 0..200 {
                let mk = |rng: &mut ChaCha8Rng| {
                    let mut p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.01..1.0)).collect();
                    let s: f64 = p.iter().sum();
                    p.iter_mut().for_each(|v| *v /= s);
                    Belief::from_probs(p).unwrap()
                };
                let (a, b) = (mk(&mut rng), mk(&mut rng));
                let theta: f64 = rng.gen_range(0.0..1.0);
                let mix: Vec<f64> = a
                    .probs()
                    .iter()
                    .zip(b.probs())
                    .map(|(&u, &v)| theta * u + (1.0 - theta) * v)
                    .collect();
                let mix = Belief::from_probs(mix).unwrap();
                let x = rng.gen_range(0..viewpoints);
                assert!(
                    sol.value(x, &mix)
                        >= theta * sol.value(x, &a) + (1.0 - theta) * sol.value(x, &b) - 1e-9
                );
            }
        }
    }

    #[test]
    fn nvp_tracks_the_exhaustive_optimum_on_toys() {
        let mut agreements = 0usize;
        let mut samples = 0usize;
        for seed in 0..10 {
            let (h, costs, viewpoints, _) = random_instance(seed);
            let m = h.hypothesis_count();
            let sol = nvp_solve(&h, &costs, &NvpConfig {
                belief_points: 200,
                seed,
                ..NvpConfig::default()
            })
            .unwrap();
            let p0 = Belief::uniform(m);
            for x in 0..viewpoints {
                let pbvi = policy_expected_cost(&sol, &h, &costs, x, &p0, 6).unwrap();
                let oracle = brute_force_value(&h, &costs, x, &p0, 3).unwrap();
                assert!(
                    pbvi <= 1.05 * oracle + 1e-9,
                    "seed {seed} x {x}: pbvi {pbvi} vs oracle {oracle}"
                );
            }
            // Action agreement on random beliefs.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
            for _ in 0..30 {
                let mut p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.01..1.0)).collect();
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= s);
                let p = Belief::from_probs(p).unwrap();
                let x = rng.gen_range(0..viewpoints);
                let ours = nvp_policy_action(&sol, x, &p).unwrap();
                let (oracle, _) = brute_force_action(&h, &costs, x, &p, 3).unwrap();
                samples += 1;
                if ours == oracle {
                    agreements += 1;
                }
            }
        }
        assert!(
            agreements as f64 >= 0.9 * samples as f64,
            "only {agreements}/{samples} actions agree with the oracle"
        );
    }

    #[test]
    fn solution_round_trip_and_hash_guard() {
        let (h, costs) = hand_instance();
        let sol = nvp_solve(&h, &costs, &NvpConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alphas.json");
        sol.save(&path).unwrap();
        let loaded = PbviSolution::load(&path, Some(&h)).unwrap();
        assert_eq!(loaded.alphas.len(), sol.alphas.len());
        let p = Belief::from_probs(vec![0.3, 0.7]).unwrap();
        assert_relative_eq!(loaded.value(0, &p), sol.value(0, &p));
        assert_eq!(
            nvp_policy_action(&loaded, 0, &p).unwrap(),
            nvp_policy_action(&sol, 0, &p).unwrap()
        );
        // Mismatched model rejected; dimension misuse rejected.
        let (other, _) = toy(2, 2, 2, |_x, _m| vec![0.5, 0.5]);
        assert!(matches!(
            PbviSolution::load(&path, Some(&other)),
            Err(PolicyError::HashMismatch(_))
        ));
        assert!(nvp_policy_action(&sol, 9, &p).is_err());
        assert!(nvp_policy_action(&sol, 0, &Belief::uniform(3)).is_err());
    }
}
