//! Single- and multi-object trial execution: the observe → update → act
//! loop with full cost bookkeeping.

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{bayes_update, best_decision, Belief, CostSpec};
use crate::features::{extract_features, FeatureError};
use crate::geometry::{nearest_viewpoint, Pose, ViewGraph, Viewpoint};
use crate::obsmodel::{observation_index, ObsIndex, PlanningObsModel};
use crate::policies::{
    gmi_policy, nvp_policy_action, random_walk_policy, static_policy, Action, PbviSolution,
    PolicyTrace,
};
use crate::seed::derive_seed;
use crate::sensing::{add_depth_noise, classify_occlusion, ObjectModel, OcclusionState, Scene as Stage};
use crate::vptree::VpTree;

use super::scenario::ScenarioSpec;
use super::scene::{stage_with_table, Placement, Scene};
use super::HarnessError;

/// Immutable artifacts shared by every trial of a run; the constructor
/// checks the hash chain so mismatched artifacts fail fast.
pub struct TrialContext<'a> {
    pub models: &'a [ObjectModel],
    pub tree: &'a VpTree,
    pub h: &'a PlanningObsModel,
    pub costs: &'a CostSpec,
    pub spec: &'a ScenarioSpec,
    planning_hash: String,
}

impl<'a> TrialContext<'a> {
    pub fn new(
        models: &'a [ObjectModel],
        tree: &'a VpTree,
        h: &'a PlanningObsModel,
        costs: &'a CostSpec,
        spec: &'a ScenarioSpec,
    ) -> Result<Self, HarnessError> {
        if h.tree_hash != tree.content_hash() {
            return Err(HarnessError::Config(
                "planning model was derived from a different VP-Tree".into(),
            ));
        }
        if costs.hypothesis_count() != h.hypothesis_count() {
            return Err(HarnessError::Config(format!(
                "cost matrix covers {} hypotheses, model has {}",
                costs.hypothesis_count(),
                h.hypothesis_count()
            )));
        }
        if models.len() != tree.l_to_class.len() {
            return Err(HarnessError::Config(format!(
                "tree was trained on {} models, got {}",
                tree.l_to_class.len(),
                models.len()
            )));
        }
        let planning_hash = h.content_hash();
        Ok(TrialContext {
            models,
            tree,
            h,
            costs,
            spec,
            planning_hash,
        })
    }

    pub fn graph(&self) -> &ViewGraph {
        &self.h.viewsphere
    }
}

/// The four executable policies.
#[derive(Clone, Copy)]
pub enum Policy<'a> {
    Static,
    RandomWalk,
    Gmi,
    Nonmyopic(&'a PbviSolution),
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Static => "static",
            Policy::RandomWalk => "random",
            Policy::Gmi => "gmi",
            Policy::Nonmyopic(_) => "nvp",
        }
    }
}

/// Outcome of one trial; costs satisfy `total = measurement + movement +
/// decision` exactly, and at least one measurement is always taken.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub true_hypothesis: usize,
    pub decided: usize,
    pub measurement_cost: f64,
    pub movement_cost: f64,
    pub decision_cost: f64,
    /// True when the step cap forced the decision.
    pub forced: bool,
    pub trace: PolicyTrace,
}

impl TrialResult {
    /// Stopping time: number of measurements taken.
    pub fn tau(&self) -> usize {
        self.trace.tau()
    }

    pub fn total_cost(&self) -> f64 {
        self.measurement_cost + self.movement_cost + self.decision_cost
    }

    pub fn correct(&self) -> bool {
        self.decided == self.true_hypothesis
    }
}

/// One rendered measurement of a labeled object: the observation index, the
/// classified occlusion state, and the noisy cloud lifted to world frame
/// (for ICP accumulation). A cloud too poor to use is reported as fully
/// occluded, which makes the Bayes update a no-op.
pub(super) struct Measurement {
    pub z: ObsIndex,
    pub psi: OcclusionState,
    pub world_points: Vec<Point3<f64>>,
}

pub(super) fn observe(
    ctx: &TrialContext,
    stage: &Stage,
    label: u32,
    position: &Point3<f64>,
    orientation: &UnitQuaternion<f64>,
    seed: u64,
) -> Result<Measurement, HarnessError> {
    let labeled = stage.render(position, orientation, &ctx.spec.sensor);
    let target = labeled.filter_label(label);
    let noisy = add_depth_noise(&target, ctx.spec.sigma, derive_seed(seed, &[0]));
    let world_points = noisy
        .points
        .iter()
        .map(|p| Point3::from(orientation * p.coords + position.coords))
        .collect();
    let psi = classify_occlusion(&noisy, &ctx.spec.occlusion);
    let unusable = |psi: OcclusionState, world_points| Measurement {
        z: ObsIndex(1),
        psi,
        world_points,
    };
    if psi.is_full() {
        return Ok(unusable(psi, world_points));
    }
    let features = match extract_features(
        &noisy,
        &ctx.tree.feature_config,
        derive_seed(seed, &[1]),
        "trial",
    ) {
        Ok(f) if !f.is_degenerate() => f,
        Ok(_) | Err(FeatureError::DegenerateInput(_)) => {
            return Ok(unusable(OcclusionState::FULL, world_points))
        }
        Err(e) => return Err(e.into()),
    };
    let ranked = ctx.tree.query(&features)?;
    let top = ranked[0].0;
    let z = observation_index(
        top.l,
        top.g,
        ctx.tree.g_count,
        ctx.tree.interest_count,
        ctx.tree.l_to_class.len() as u32,
    )?;
    Ok(Measurement {
        z,
        psi,
        world_points,
    })
}

fn policy_action(
    ctx: &TrialContext,
    policy: &Policy,
    x: usize,
    p: &Belief,
    visited: &[bool],
    rng: &mut ChaCha8Rng,
) -> Result<Action, HarnessError> {
    Ok(match policy {
        Policy::Static => static_policy(p, ctx.costs),
        Policy::RandomWalk => random_walk_policy(
            x,
            p,
            visited,
            ctx.graph(),
            ctx.spec.stop_threshold,
            ctx.spec.random_pool,
            rng,
        ),
        Policy::Gmi => gmi_policy(x, p, visited, ctx.h, ctx.spec.stop_threshold),
        Policy::Nonmyopic(sol) => {
            if sol.model_hash != ctx.planning_hash {
                return Err(HarnessError::Config(
                    "solution was computed for a different planning model".into(),
                ));
            }
            nvp_policy_action(sol, x, p)?
        }
    })
}

fn check_action(action: Action, viewpoints: usize, hypotheses: usize) -> Result<(), HarnessError> {
    let ok = match action {
        Action::MoveTo(x) => x < viewpoints,
        Action::Decide(d) => d < hypotheses,
    };
    if ok {
        Ok(())
    } else {
        Err(HarnessError::ProtocolViolation(format!(
            "{action} outside {viewpoints} viewpoints / {hypotheses} hypotheses"
        )))
    }
}

/// Run one single-object trial from `start`, seeded deterministically.
pub fn run_trial(
    ctx: &TrialContext,
    policy: &Policy,
    scene: &Scene,
    stage: &Stage,
    start: usize,
    seed: u64,
) -> Result<TrialResult, HarnessError> {
    let graph = ctx.graph();
    if start >= graph.len() {
        return Err(HarnessError::InvalidArgument(format!(
            "start viewpoint {start} outside 0..{}",
            graph.len()
        )));
    }
    let m = ctx.h.hypothesis_count();
    if scene.true_hypothesis >= m {
        return Err(HarnessError::InvalidArgument(format!(
            "scene's true hypothesis {} outside 0..{m}",
            scene.true_hypothesis
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[100]));
    let mut p = Belief::uniform(m);
    let mut x = start;
    let mut visited = vec![false; graph.len()];
    visited[x] = true;
    let mut trace = PolicyTrace {
        visited: Vec::new(),
        observations: Vec::new(),
        beliefs: vec![p.clone()],
        final_action: Action::Decide(0),
        forced: false,
    };
    let mut measurement_cost = 0.0;
    let mut movement_cost = 0.0;

    for step in 1..=ctx.spec.max_steps {
        let view = graph.viewpoint(x);
        let meas = observe(
            ctx,
            stage,
            scene.target_label(),
            &view.position,
            &view.orientation,
            // Object-0 stream of the multi-object scheme, so a single-object
            // MultiScene reproduces this trial exactly.
            derive_seed(seed, &[ACTIVE_SEED_BASE, step as u64]),
        )?;
        measurement_cost += ctx.costs.g0;
        p = bayes_update(&p, x, meas.z, meas.psi, ctx.h)?;
        trace.visited.push(x);
        trace.observations.push((meas.z, meas.psi));
        trace.beliefs.push(p.clone());

        let action = if step == ctx.spec.max_steps {
            trace.forced = true;
            Action::Decide(best_decision(&p, ctx.costs).0)
        } else {
            policy_action(ctx, policy, x, &p, &visited, &mut rng)?
        };
        check_action(action, graph.len(), m)?;
        match action {
            Action::Decide(d) => {
                trace.final_action = action;
                return Ok(TrialResult {
                    true_hypothesis: scene.true_hypothesis,
                    decided: d,
                    measurement_cost,
                    movement_cost,
                    decision_cost: ctx.costs.lambda
                        * ctx.costs.decision_cost(d, scene.true_hypothesis),
                    forced: trace.forced,
                    trace,
                });
            }
            Action::MoveTo(next) => {
                movement_cost += graph.movement_cost(x, next);
                x = next;
                visited[x] = true;
            }
        }
    }
    unreachable!("the final step always decides");
}

/// A scene with several objects of interest, each the center of its own
/// viewsphere. Objects get render labels `0..objects.len()`, distractor
/// clutter follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiScene {
    pub objects: Vec<Placement>,
    /// True hypothesis per object, parallel to `objects`.
    pub true_hypotheses: Vec<usize>,
    pub clutter: Vec<Placement>,
    pub table_z: Option<f64>,
}

impl MultiScene {
    pub fn stage(&self, models: &[ObjectModel]) -> Stage {
        let mut placements = self.objects.clone();
        placements.extend(self.clutter.iter().cloned());
        stage_with_table(&placements, models, self.table_z)
    }
}

/// Opportunistic updates only apply when the sensor sits near the object's
/// viewsphere, where the observation model is valid.
const OPPORTUNISTIC_RANGE: (f64, f64) = (0.75, 1.3);

/// Measurement-seed tags: object j's active measurements draw from the
/// `ACTIVE_SEED_BASE + j` stream, opportunistic ones from a counter stream.
const ACTIVE_SEED_BASE: u64 = 10;
const OPPORTUNISTIC_SEED_BASE: u64 = 1000;

/// Process every object to a decision, highest `1 - p(null)` first, with
/// optional zero-cost opportunistic updates of the other pending objects
/// after each measurement. Returns one TrialResult per object, in
/// processing order.
pub fn run_multi_object(
    ctx: &TrialContext,
    policy: &Policy,
    scene: &MultiScene,
    start: usize,
    seed: u64,
    opportunistic: bool,
) -> Result<Vec<TrialResult>, HarnessError> {
    let graph = ctx.graph();
    let n = scene.objects.len();
    if n == 0 || scene.true_hypotheses.len() != n {
        return Err(HarnessError::InvalidArgument(
            "need one true hypothesis per object".into(),
        ));
    }
    if start >= graph.len() {
        return Err(HarnessError::InvalidArgument(format!(
            "start viewpoint {start} outside 0..{}",
            graph.len()
        )));
    }
    let m = ctx.h.hypothesis_count();
    for &t in &scene.true_hypotheses {
        if t >= m {
            return Err(HarnessError::InvalidArgument(format!(
                "true hypothesis {t} outside 0..{m}"
            )));
        }
    }
    let null = ctx.h.hypotheses.null_index();
    let stage = scene.stage(ctx.models);
    let mut beliefs: Vec<Belief> = vec![Belief::uniform(m); n];
    let mut pending: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[100]));
    let mut results = Vec::with_capacity(n);
    let mut x = start;
    let mut obs_counter = 0u64;

    while !pending.is_empty() {
        // Highest interest probability first; ties to the lowest index.
        let (qi, &j) = pending
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| {
                let score = |o: usize| 1.0 - beliefs[o].prob(null);
                score(a)
                    .partial_cmp(&score(b))
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap();
        pending.remove(qi);
        let center = scene.objects[j].translation;

        let mut p = beliefs[j].clone();
        let mut visited = vec![false; graph.len()];
        visited[x] = true;
        let mut trace = PolicyTrace {
            visited: Vec::new(),
            observations: Vec::new(),
            beliefs: vec![p.clone()],
            final_action: Action::Decide(0),
            forced: false,
        };
        let mut measurement_cost = 0.0;
        let mut movement_cost = 0.0;
        let mut decided = None;

        for step in 1..=ctx.spec.max_steps {
            let view = graph.viewpoint(x);
            let world_pos = Point3::from(view.position.coords + center);
            let meas = observe(
                ctx,
                &stage,
                j as u32,
                &world_pos,
                &view.orientation,
                derive_seed(seed, &[ACTIVE_SEED_BASE + j as u64, step as u64]),
            )?;
            measurement_cost += ctx.costs.g0;
            p = bayes_update(&p, x, meas.z, meas.psi, ctx.h)?;
            trace.visited.push(x);
            trace.observations.push((meas.z, meas.psi));
            trace.beliefs.push(p.clone());

            if opportunistic {
                for &k in &pending {
                    obs_counter += 1;
                    opportunistic_update(
                        ctx,
                        &stage,
                        scene,
                        k,
                        &world_pos,
                        &mut beliefs[k],
                        derive_seed(seed, &[OPPORTUNISTIC_SEED_BASE + k as u64, obs_counter]),
                    )?;
                }
            }

            let action = if step == ctx.spec.max_steps {
                trace.forced = true;
                Action::Decide(best_decision(&p, ctx.costs).0)
            } else {
                policy_action(ctx, policy, x, &p, &visited, &mut rng)?
            };
            check_action(action, graph.len(), m)?;
            match action {
                Action::Decide(d) => {
                    trace.final_action = action;
                    decided = Some(d);
                    break;
                }
                Action::MoveTo(next) => {
                    movement_cost += graph.movement_cost(x, next);
                    x = next;
                    visited[x] = true;
                }
            }
        }
        let d = decided.expect("the final step always decides");
        results.push(TrialResult {
            true_hypothesis: scene.true_hypotheses[j],
            decided: d,
            measurement_cost,
            movement_cost,
            decision_cost: ctx.costs.lambda * ctx.costs.decision_cost(d, scene.true_hypotheses[j]),
            forced: trace.forced,
            trace,
        });
    }
    Ok(results)
}

/// Turn toward object `k` (free per the cost model), render, and update its
/// belief if it yields a usable in-range view.
fn opportunistic_update(
    ctx: &TrialContext,
    stage: &Stage,
    scene: &MultiScene,
    k: usize,
    world_pos: &Point3<f64>,
    belief: &mut Belief,
    seed: u64,
) -> Result<(), HarnessError> {
    let rel = world_pos.coords - scene.objects[k].translation;
    let radius = ctx.graph().radius;
    let (lo, hi) = OPPORTUNISTIC_RANGE;
    if rel.norm() < lo * radius || rel.norm() > hi * radius {
        return Ok(());
    }
    let look = Viewpoint::looking_at_origin(0, Point3::from(rel));
    let meas = observe(ctx, stage, k as u32, world_pos, &look.orientation, seed)?;
    if meas.psi.is_full() {
        return Ok(()); // nothing usable; skip rather than burn a no-op
    }
    let xk = nearest_viewpoint(
        &Pose {
            position: Point3::from(rel),
            rotation: look.orientation,
        },
        ctx.graph(),
    )
    .id;
    *belief = bayes_update(belief, xk, meas.z, meas.psi, ctx.h)?;
    Ok(())
}

/// Convenience for tests and sweeps: a two-object scene side by side.
pub fn two_object_scene(
    models: &[ObjectModel],
    a: (usize, usize),
    b: (usize, usize),
    hypotheses: &crate::obsmodel::HypothesisSet,
    separation: f64,
) -> Result<MultiScene, HarnessError> {
    if a.1 >= hypotheses.len() || b.1 >= hypotheses.len() || a.0 >= models.len() || b.0 >= models.len() {
        return Err(HarnessError::InvalidArgument(
            "model or hypothesis index out of range".into(),
        ));
    }
    let place = |(model, hyp): (usize, usize), y: f64| Placement {
        model,
        orientation: hypotheses.get(hyp).orientation,
        translation: Vector3::new(0.0, y, 0.0),
    };
    Ok(MultiScene {
        objects: vec![place(a, -separation / 2.0), place(b, separation / 2.0)],
        true_hypotheses: vec![a.1, b.1],
        clutter: Vec::new(),
        table_z: None,
    })
}
