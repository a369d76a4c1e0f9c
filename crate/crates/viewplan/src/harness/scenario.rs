//! Scenario configuration and the artifact pipeline it drives: training set
//! -> VP-Tree -> nominal model -> planning model -> solved policy.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::belief::CostSpec;
use crate::features::{extract_features, FeatureConfig};
use crate::geometry::{build_viewsphere, ViewGraph};
use crate::obsmodel::{
    build_nominal_model, derive_planning_model, HypothesisSet, NominalConfig, NominalObsModel,
    PlanningObsModel,
};
use crate::policies::{nvp_solve, NvpConfig, PbviSolution};
use crate::seed::derive_seed;
use crate::sensing::models::standard_database;
use crate::sensing::{render_depth, ObjectModel, OcclusionSpec, SensorIntrinsics};
use crate::vptree::{TemplateId, TrainingSet, VpTree, VpTreeParams};

use super::{HarnessError, SEED_NOMINAL, SEED_TEMPLATE, SEED_TREE};

/// Occluder placement parameters for generated scenes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OccluderSpec {
    pub min: usize,
    pub max: usize,
    /// Minimum horizontal distance from the target centroid.
    pub clearance: f64,
    /// Maximum horizontal distance from the target centroid.
    pub ring: f64,
    /// Gap between the target's lowest extent and the table plane.
    pub table_margin: f64,
}

impl Default for OccluderSpec {
    fn default() -> Self {
        OccluderSpec {
            min: 3,
            max: 6,
            clearance: 0.3,
            ring: 0.5,
            table_margin: 0.02,
        }
    }
}

/// Everything needed to reproduce an experiment end to end. Loaded from a
/// TOML file; every field has a default so configs stay minimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub name: String,
    /// Directory of JSON-serialized meshes; `None` uses the built-in set.
    pub models_dir: Option<PathBuf>,
    /// Interest-class model names, in hypothesis order.
    pub interest: Vec<String>,
    pub yaw_bins: u32,
    /// 0 disables roll discretization (yaw-only grids).
    pub roll_bins: u32,
    pub k_pos: f64,
    pub k_neg: f64,
    /// Wrong interest class, or right class in the wrong orientation.
    pub k_wrong: f64,
    pub lambda: f64,
    pub g0: f64,
    pub train_viewpoints: u32,
    /// Full-sphere lattice size; the hemisphere filter keeps about half.
    pub planning_lattice: usize,
    pub planning_full_sphere: bool,
    pub nominal_viewpoints: usize,
    pub radius: f64,
    pub neighbors: usize,
    pub sigma: f64,
    pub samples: u32,
    pub samples_occluded: Option<u32>,
    pub alpha: f64,
    pub sensor: SensorIntrinsics,
    pub occlusion: OcclusionSpec,
    pub features: FeatureConfig,
    pub scenes: usize,
    pub repetitions: usize,
    pub occluders: OccluderSpec,
    pub stop_threshold: f64,
    pub random_pool: usize,
    /// Safety cap on measurements per trial; the final step force-decides.
    pub max_steps: usize,
    pub solver: NvpConfig,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            name: "scenario".into(),
            models_dir: None,
            interest: vec!["handlebottle".into()],
            yaw_bins: 6,
            roll_bins: 0,
            k_pos: 75.0,
            k_neg: 75.0,
            k_wrong: 75.0,
            lambda: 1.0,
            g0: 1.0,
            train_viewpoints: 48,
            planning_lattice: 84,
            planning_full_sphere: false,
            nominal_viewpoints: 48,
            radius: 1.0,
            neighbors: 6,
            sigma: 0.0005,
            samples: 48,
            samples_occluded: Some(8),
            alpha: 0.5,
            sensor: SensorIntrinsics {
                width: 96,
                height: 72,
                vfov: 60f64.to_radians(),
            },
            occlusion: OcclusionSpec::default(),
            features: FeatureConfig::default(),
            scenes: 70,
            repetitions: 50,
            occluders: OccluderSpec::default(),
            stop_threshold: 0.6,
            random_pool: 3,
            max_steps: 60,
            solver: NvpConfig::default(),
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn load(path: &Path) -> Result<ScenarioSpec, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let spec: ScenarioSpec =
            toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text =
            toml::to_string_pretty(self).map_err(|e| HarnessError::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut problems = Vec::new();
        if self.interest.is_empty() {
            problems.push("interest set is empty".to_string());
        }
        for (i, name) in self.interest.iter().enumerate() {
            if self.interest[..i].contains(name) {
                problems.push(format!("duplicate interest model {name}"));
            }
        }
        if self.yaw_bins == 0 {
            problems.push("yaw_bins must be at least 1".into());
        }
        if !(self.radius > 0.0) {
            problems.push(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.g0 > 0.0) {
            problems.push(format!("g0 must be positive, got {}", self.g0));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            problems.push(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            problems.push(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if self.train_viewpoints < 2 {
            problems.push("train_viewpoints must be at least 2".into());
        }
        if self.planning_lattice < 4 {
            problems.push("planning_lattice must be at least 4".into());
        }
        if self.nominal_viewpoints < 2 {
            problems.push("nominal_viewpoints must be at least 2".into());
        }
        if self.samples == 0 || self.samples_occluded == Some(0) {
            problems.push("sample counts must be at least 1".into());
        }
        if !(self.alpha > 0.0) {
            problems.push(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.scenes == 0 || self.repetitions == 0 {
            problems.push("scenes and repetitions must be at least 1".into());
        }
        if self.occluders.min > self.occluders.max {
            problems.push("occluders.min exceeds occluders.max".into());
        }
        if !(self.occluders.clearance > 0.0) || self.occluders.ring <= self.occluders.clearance {
            problems.push("need 0 < occluders.clearance < occluders.ring".into());
        }
        if !(self.stop_threshold > 0.0 && self.stop_threshold <= 1.0) {
            problems.push(format!(
                "stop_threshold must be in (0, 1], got {}",
                self.stop_threshold
            ));
        }
        if self.random_pool == 0 {
            problems.push("random_pool must be at least 1".into());
        }
        if self.max_steps == 0 {
            problems.push("max_steps must be at least 1".into());
        }
        if self.sensor.width < 8 || self.sensor.height < 8 {
            problems.push("sensor resolution must be at least 8x8".into());
        }
        if !(self.sensor.vfov > 0.0 && self.sensor.vfov < std::f64::consts::PI) {
            problems.push("sensor vfov must be in (0, pi)".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(problems.join("; ")))
        }
    }

    /// The model database, built-in or loaded from `models_dir`.
    pub fn database(&self) -> Result<Vec<ObjectModel>, HarnessError> {
        let Some(dir) = &self.models_dir else {
            return Ok(standard_database());
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(HarnessError::Config(format!(
                "no .json meshes under {}",
                dir.display()
            )));
        }
        let mut models = Vec::new();
        for p in paths {
            let file = std::fs::File::open(&p)?;
            let model: ObjectModel = serde_json::from_reader(std::io::BufReader::new(file))
                .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
            models.push(model);
        }
        Ok(models)
    }

    /// Database reordered interest-first (list order), then the rest by
    /// class id — the l order shared by every artifact.
    pub fn ordered_models(&self) -> Result<(Vec<ObjectModel>, u32), HarnessError> {
        self.validate()?;
        let db = self.database()?;
        let mut models = Vec::new();
        for name in &self.interest {
            let found = db.iter().find(|m| &m.name == name).ok_or_else(|| {
                HarnessError::Config(format!("interest model {name} not in database"))
            })?;
            models.push(found.clone());
        }
        let interest_count = models.len() as u32;
        let mut rest: Vec<ObjectModel> = db
            .iter()
            .filter(|m| !self.interest.contains(&m.name))
            .cloned()
            .collect();
        if rest.is_empty() {
            return Err(HarnessError::Config(
                "database has no non-interest models; the null hypothesis needs one".into(),
            ));
        }
        rest.sort_by_key(|m| m.class_id);
        models.extend(rest);
        Ok((models, interest_count))
    }

    pub fn hypotheses(&self) -> Result<HypothesisSet, HarnessError> {
        self.validate()?;
        let grid = if self.roll_bins > 0 {
            HypothesisSet::yaw_roll_grid(self.yaw_bins, self.roll_bins)
        } else {
            HypothesisSet::yaw_grid(self.yaw_bins)
        };
        let classes = self
            .interest
            .iter()
            .enumerate()
            .map(|(i, name)| (i as u32 + 1, name.clone(), grid.clone()))
            .collect();
        Ok(HypothesisSet::new(classes)?)
    }

    pub fn costs(&self, hyps: &HypothesisSet) -> Result<CostSpec, HarnessError> {
        let k = self.k_wrong;
        Ok(CostSpec::build(
            hyps,
            self.k_pos,
            self.k_neg,
            self.k_wrong,
            |a, b| if a.angle_to(b) < 1e-9 { 0.0 } else { k },
            self.lambda,
            self.g0,
        )?)
    }

    pub fn train_sphere(&self) -> Result<ViewGraph, HarnessError> {
        Ok(build_viewsphere(
            self.train_viewpoints as usize,
            self.radius,
            false,
            self.neighbors,
            self.g0,
        )?)
    }

    pub fn planning_sphere(&self) -> Result<ViewGraph, HarnessError> {
        Ok(build_viewsphere(
            self.planning_lattice,
            self.radius,
            !self.planning_full_sphere,
            self.neighbors,
            self.g0,
        )?)
    }

    pub fn nominal_sphere(&self) -> Result<ViewGraph, HarnessError> {
        Ok(build_viewsphere(
            self.nominal_viewpoints,
            self.radius,
            false,
            self.neighbors,
            self.g0,
        )?)
    }

    pub fn nominal_config(&self) -> NominalConfig {
        NominalConfig {
            sensor: self.sensor,
            occlusion: self.occlusion,
            sigma: self.sigma,
            samples: self.samples,
            samples_occluded: self.samples_occluded,
            alpha: self.alpha,
            seed: derive_seed(self.seed, &[SEED_NOMINAL]),
        }
    }
}

/// Render every (model, training viewpoint) template and extract features.
/// Templates are noiseless; noise belongs to the observation simulation.
pub fn build_training_set(
    spec: &ScenarioSpec,
    models: &[ObjectModel],
    interest_count: u32,
) -> Result<TrainingSet, HarnessError> {
    let sphere = spec.train_sphere()?;
    let mut templates = BTreeMap::new();
    for (c, model) in models.iter().enumerate() {
        let l = c as u32 + 1;
        for g in 1..=spec.train_viewpoints {
            let view = sphere.viewpoint(g as usize - 1);
            let cloud = render_depth(
                model,
                view,
                (spec.sensor.width, spec.sensor.height),
                spec.sensor.vfov,
            );
            let features = extract_features(
                &cloud,
                &spec.features,
                derive_seed(spec.seed, &[SEED_TEMPLATE, l as u64, g as u64]),
                format!("{}@g{g}", model.name),
            )?;
            templates.insert(TemplateId::new(l, g), features);
        }
    }
    Ok(TrainingSet {
        g_count: spec.train_viewpoints,
        interest_count,
        l_to_class: models.iter().map(|m| m.class_id).collect(),
        model_names: models.iter().map(|m| m.name.clone()).collect(),
        templates,
    })
}

/// The full artifact chain for a scenario.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub models: Vec<ObjectModel>,
    pub interest_count: u32,
    pub tree: VpTree,
    pub nominal: NominalObsModel,
    pub hypotheses: HypothesisSet,
    pub planning: PlanningObsModel,
    pub costs: CostSpec,
    pub solution: Option<PbviSolution>,
}

/// Build the whole chain in memory. `solve` controls whether the PBVI
/// solution is computed (the expensive part when only baselines run).
/// Stage 1: render templates and train the detector.
pub fn train_detector(spec: &ScenarioSpec) -> Result<VpTree, HarnessError> {
    let (models, interest_count) = spec.ordered_models()?;
    let set = build_training_set(spec, &models, interest_count)?;
    Ok(VpTree::train(
        &set,
        spec.features,
        VpTreeParams {
            seed: derive_seed(spec.seed, &[SEED_TREE]),
            ..VpTreeParams::default()
        },
    )?)
}

/// Stage 2: Monte-Carlo nominal observation model against a trained detector.
pub fn build_nominal(spec: &ScenarioSpec, tree: &VpTree) -> Result<NominalObsModel, HarnessError> {
    let (models, _) = spec.ordered_models()?;
    Ok(build_nominal_model(
        &models,
        &spec.nominal_sphere()?,
        tree,
        &spec.nominal_config(),
    )?)
}

/// Stage 3: planning-sphere likelihoods for the scenario's hypothesis set.
pub fn derive_planning(
    spec: &ScenarioSpec,
    nominal: &NominalObsModel,
) -> Result<PlanningObsModel, HarnessError> {
    let (models, _) = spec.ordered_models()?;
    Ok(derive_planning_model(
        nominal,
        &models,
        &spec.planning_sphere()?,
        &spec.hypotheses()?,
    )?)
}

pub fn build_artifacts(spec: &ScenarioSpec, solve: bool) -> Result<Artifacts, HarnessError> {
    spec.validate()?;
    let (models, interest_count) = spec.ordered_models()?;
    let tree = train_detector(spec)?;
    let nominal = build_nominal(spec, &tree)?;
    let hypotheses = spec.hypotheses()?;
    let planning = derive_planning(spec, &nominal)?;
    let costs = spec.costs(&hypotheses)?;
    let solution = if solve {
        Some(nvp_solve(&planning, &costs, &spec.solver)?)
    } else {
        None
    };
    Ok(Artifacts {
        models,
        interest_count,
        tree,
        nominal,
        hypotheses,
        planning,
        costs,
        solution,
    })
}
