//! Synthetic tabletop scenes: one target at the viewsphere center plus
//! seeded occluders resting on a table plane.

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::obsmodel::HypothesisSet;
use crate::sensing::models::push_quad;
use crate::sensing::{ObjectModel, Scene as Stage, SceneBuilder, Triangle};

use super::scenario::ScenarioSpec;
use super::HarnessError;

/// Render label reserved for the table; object labels index placements.
pub const TABLE_LABEL: u32 = u32::MAX;

/// One posed model instance; `model` indexes the scenario's ordered list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub model: usize,
    pub orientation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

/// A generated single-target scene. The target is `placements[0]`, labeled
/// 0; occluders follow with labels 1..; the table quad gets `TABLE_LABEL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub true_hypothesis: usize,
    pub placements: Vec<Placement>,
    pub table_z: f64,
}

impl Scene {
    pub fn target_label(&self) -> u32 {
        0
    }

    /// Build the ray-castable stage for this scene.
    pub fn stage(&self, models: &[ObjectModel]) -> Stage {
        stage_with_table(&self.placements, models, Some(self.table_z))
    }
}

pub(super) fn stage_with_table(
    placements: &[Placement],
    models: &[ObjectModel],
    table_z: Option<f64>,
) -> Stage {
    let mut builder = SceneBuilder::new();
    for (label, p) in placements.iter().enumerate() {
        builder.add_model(&models[p.model], &p.orientation, &p.translation, label as u32);
    }
    if let Some(z) = table_z {
        let mut tris: Vec<Triangle> = Vec::new();
        let half = 0.9;
        push_quad(
            &mut tris,
            [
                Point3::new(-half, -half, z),
                Point3::new(half, -half, z),
                Point3::new(half, half, z),
                Point3::new(-half, half, z),
            ],
        );
        let table = ObjectModel::new(TABLE_LABEL, "table", tris);
        builder.add_model(
            &table,
            &UnitQuaternion::identity(),
            &Vector3::zeros(),
            TABLE_LABEL,
        );
    }
    builder.build()
}

/// Deterministically generate the scene for one true hypothesis: the target
/// (or, for the null hypothesis, a random non-interest model at a random
/// yaw) centered at the origin, with occluders scattered on the table
/// outside the clearance ring.
pub fn generate_scene(
    spec: &ScenarioSpec,
    models: &[ObjectModel],
    interest_count: u32,
    hypotheses: &HypothesisSet,
    true_hyp: usize,
    seed: u64,
) -> Result<Scene, HarnessError> {
    if true_hyp >= hypotheses.len() {
        return Err(HarnessError::InvalidArgument(format!(
            "true hypothesis {true_hyp} out of range for {} hypotheses",
            hypotheses.len()
        )));
    }
    if models.len() <= interest_count as usize {
        return Err(HarnessError::InvalidArgument(
            "need at least one non-interest model for occluders".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distractors = interest_count as usize..models.len();

    let hyp = hypotheses.get(true_hyp);
    let target = match hyp.l {
        Some(l) => Placement {
            model: l as usize - 1,
            orientation: hyp.orientation,
            translation: Vector3::zeros(),
        },
        None => Placement {
            model: rng.gen_range(distractors.clone()),
            orientation: UnitQuaternion::from_axis_angle(
                &Vector3::z_axis(),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ),
            translation: Vector3::zeros(),
        },
    };
    let table_z = -(models[target.model].bounding_radius() + spec.occluders.table_margin);

    let mut placements = vec![target];
    let count = rng.gen_range(spec.occluders.min..=spec.occluders.max);
    for _ in 0..count {
        let model = rng.gen_range(distractors.clone());
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let dist = rng.gen_range(spec.occluders.clearance..spec.occluders.ring);
        let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
        // Rest the occluder on the table; slight interpenetration of the
        // plane is harmless for occlusion purposes.
        let z = table_z + models[model].bounding_radius() * 0.8;
        placements.push(Placement {
            model,
            orientation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            translation: Vector3::new(dist * angle.cos(), dist * angle.sin(), z),
        });
    }
    Ok(Scene {
        true_hypothesis: true_hyp,
        placements,
        table_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::testkit::TINY;
    use crate::seed::derive_seed;

    #[test]
    fn scenes_are_deterministic_and_respect_spacing() {
        let (spec, a) = &*TINY;
        for true_hyp in 0..a.hypotheses.len() {
            for s in 0..4u64 {
                let seed = derive_seed(41, &[s]);
                let scene = generate_scene(
                    spec,
                    &a.models,
                    a.interest_count,
                    &a.hypotheses,
                    true_hyp,
                    seed,
                )
                .unwrap();
                let again = generate_scene(
                    spec,
                    &a.models,
                    a.interest_count,
                    &a.hypotheses,
                    true_hyp,
                    seed,
                )
                .unwrap();
                assert_eq!(scene, again);

                let target = &scene.placements[0];
                assert_eq!(target.translation, Vector3::zeros());
                let occluders = &scene.placements[1..];
                assert!((spec.occluders.min..=spec.occluders.max).contains(&occluders.len()));
                for p in occluders {
                    // Occluders come from the distractor classes and stay
                    // outside the clearance ring.
                    assert!(p.model >= a.interest_count as usize);
                    let horizontal = (p.translation.x.powi(2) + p.translation.y.powi(2)).sqrt();
                    assert!(horizontal >= spec.occluders.clearance - 1e-12);
                    assert!(horizontal < spec.occluders.ring);
                }
                assert!(scene.table_z < 0.0);
            }
        }
        let different = generate_scene(spec, &a.models, a.interest_count, &a.hypotheses, 0, 1)
            .unwrap();
        let base = generate_scene(spec, &a.models, a.interest_count, &a.hypotheses, 0, 2).unwrap();
        assert_ne!(different, base);
    }

    #[test]
    fn target_matches_hypothesis() {
        let (spec, a) = &*TINY;
        // Interest hypothesis: the interest model in the hypothesis pose.
        let scene =
            generate_scene(spec, &a.models, a.interest_count, &a.hypotheses, 1, 7).unwrap();
        assert_eq!(scene.placements[0].model, 0);
        assert_eq!(
            scene.placements[0].orientation,
            a.hypotheses.get(1).orientation
        );
        // Null hypothesis: a seeded distractor model.
        let null = a.hypotheses.null_index();
        for seed in 0..12 {
            let scene =
                generate_scene(spec, &a.models, a.interest_count, &a.hypotheses, null, seed)
                    .unwrap();
            assert!(scene.placements[0].model >= a.interest_count as usize);
        }
        let err = generate_scene(
            spec,
            &a.models,
            a.interest_count,
            &a.hypotheses,
            a.hypotheses.len(),
            0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn stage_renders_labeled_objects_and_table() {
        let (spec, a) = &*TINY;
        let scene =
            generate_scene(spec, &a.models, a.interest_count, &a.hypotheses, 0, 3).unwrap();
        let stage = scene.stage(&a.models);
        // A top-down view sees the target at the center and the table.
        let top = a.planning.viewsphere.viewpoint(0);
        let labeled = stage.render_from(top, &spec.sensor);
        assert!(!labeled.filter_label(scene.target_label()).is_empty());
        let mut labels: Vec<u32> = labeled.labels.clone();
        labels.sort_unstable();
        labels.dedup();
        assert!(labels.contains(&TABLE_LABEL));
        for l in &labels {
            assert!(*l == TABLE_LABEL || (*l as usize) < scene.placements.len());
        }
    }
}
