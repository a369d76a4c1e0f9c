//! Discrete observation space, nominal observation model estimation, and
//! derivation of the planning observation model.
//!
//! The static detector's answer to a query is reduced to a single discrete
//! observation: the identity of the best-matching template. Matches against
//! interest models keep their viewpoint index (they carry orientation
//! information); matches against other models collapse to one observation
//! per class. The *nominal* model tabulates observation distributions for
//! canonical object poses on a fine viewsphere; the *planning* model
//! re-expresses them over the planning viewsphere and hypothesis set by
//! frame rotation and nearest-viewpoint lookup.

use crate::features::extract_features;
use crate::geometry::{nearest_viewpoint, sensor_pose_in_object_frame, ViewGraph};
use crate::seed::derive_seed;
use crate::sensing::{
    add_depth_noise, apply_occlusion, classify_occlusion, HalfPlane, ObjectModel, OcclusionSpec,
    OcclusionState, Scene, SceneBuilder, SensorIntrinsics,
};
use crate::vptree::VpTree;
use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const OBSMODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ObsModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal consistency: {0}")]
    Inconsistent(String),
    #[error("artifact hash mismatch: {0}")]
    HashMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Features(#[from] crate::features::FeatureError),
    #[error(transparent)]
    VpTree(#[from] crate::vptree::VpTreeError),
}

/// 1-based index into the discrete observation space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObsIndex(pub u32);

impl ObsIndex {
    /// 0-based offset for table access.
    pub fn offset(self) -> usize {
        self.0 as usize - 1
    }
}

/// Size of the observation space: interest templates keep their viewpoint,
/// other models collapse to one observation each.
pub fn obs_space_size(g_count: u32, n_interest: u32, n_models: u32) -> u32 {
    g_count * n_interest + (n_models - n_interest)
}

/// Map a best-match template to its observation index.
pub fn observation_index(
    l: u32,
    g: u32,
    g_count: u32,
    n_interest: u32,
    n_models: u32,
) -> Result<ObsIndex, ObsModelError> {
    if l == 0 || l > n_models {
        return Err(ObsModelError::InvalidArgument(format!(
            "model index {l} outside 1..={n_models}"
        )));
    }
    if g == 0 || g > g_count {
        return Err(ObsModelError::InvalidArgument(format!(
            "viewpoint index {g} outside 1..={g_count}"
        )));
    }
    if n_interest == 0 || n_interest > n_models {
        return Err(ObsModelError::InvalidArgument(format!(
            "interest count {n_interest} outside 1..={n_models}"
        )));
    }
    Ok(if l <= n_interest {
        ObsIndex((l - 1) * g_count + g)
    } else {
        ObsIndex(g_count * n_interest + (l - n_interest))
    })
}

/// One hypothesis: an interest model in a specific orientation, or the
/// null hypothesis "none of the interest models is present".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// 1-based model index for interest hypotheses; `None` for the null.
    pub l: Option<u32>,
    pub orientation: UnitQuaternion<f64>,
    pub name: String,
}

/// Fixed-order hypothesis enumeration: interest classes by ascending model
/// index with their orientation grids, the null hypothesis last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    hypotheses: Vec<Hypothesis>,
}

impl HypothesisSet {
    /// `classes` maps each interest model (1-based l, display name) to its
    /// orientation grid. The null hypothesis is appended automatically.
    pub fn new(
        classes: Vec<(u32, String, Vec<(UnitQuaternion<f64>, String)>)>,
    ) -> Result<Self, ObsModelError> {
        let mut hypotheses = Vec::new();
        let mut prev_l = 0;
        for (l, class_name, orientations) in classes {
            if l <= prev_l {
                return Err(ObsModelError::InvalidArgument(
                    "interest classes must come in ascending model order".into(),
                ));
            }
            prev_l = l;
            if orientations.is_empty() {
                return Err(ObsModelError::InvalidArgument(format!(
                    "class {class_name} has an empty orientation set"
                )));
            }
            for (orientation, tag) in orientations {
                hypotheses.push(Hypothesis {
                    l: Some(l),
                    orientation,
                    name: format!("{class_name}@{tag}"),
                });
            }
        }
        if hypotheses.is_empty() {
            return Err(ObsModelError::InvalidArgument(
                "hypothesis set needs at least one interest hypothesis".into(),
            ));
        }
        hypotheses.push(Hypothesis {
            l: None,
            orientation: UnitQuaternion::identity(),
            name: "null".into(),
        });
        Ok(HypothesisSet { hypotheses })
    }

    /// Evenly spaced yaw bins about +z: `i * 360/bins` degrees.
    pub fn yaw_grid(bins: u32) -> Vec<(UnitQuaternion<f64>, String)> {
        (0..bins)
            .map(|i| {
                let deg = 360.0 * i as f64 / bins as f64;
                (
                    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg.to_radians()),
                    format!("y{deg:03.0}"),
                )
            })
            .collect()
    }

    /// Yaw x roll grid (roll about +x applied first, then yaw about +z).
    pub fn yaw_roll_grid(yaw_bins: u32, roll_bins: u32) -> Vec<(UnitQuaternion<f64>, String)> {
        let mut out = Vec::new();
        for iy in 0..yaw_bins {
            for ir in 0..roll_bins {
                let yaw = 360.0 * iy as f64 / yaw_bins as f64;
                let roll = 360.0 * ir as f64 / roll_bins as f64;
                let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw.to_radians())
                    * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), roll.to_radians());
                out.push((q, format!("y{yaw:03.0}r{roll:03.0}")));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn get(&self, m: usize) -> &Hypothesis {
        &self.hypotheses[m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Hypothesis> {
        self.hypotheses.iter()
    }

    pub fn null_index(&self) -> usize {
        self.hypotheses.len() - 1
    }

    /// Index of the hypothesis matching (l, orientation) exactly, if any.
    pub fn find(&self, l: u32, orientation: &UnitQuaternion<f64>) -> Option<usize> {
        self.hypotheses.iter().position(|h| {
            h.l == Some(l) && h.orientation.angle_to(orientation) < 1e-9
        })
    }
}

/// Provenance/configuration header shared by the model artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalConfig {
    pub sensor: SensorIntrinsics,
    pub occlusion: OcclusionSpec,
    pub sigma: f64,
    pub samples: u32,
    /// Sample count for occluded states (`None` = same as `samples`). The
    /// clear state drives most updates, so it can afford more samples.
    #[serde(default)]
    pub samples_occluded: Option<u32>,
    pub alpha: f64,
    pub seed: u64,
}

impl NominalConfig {
    pub fn samples_for(&self, psi: OcclusionState) -> u32 {
        if psi == OcclusionState::CLEAR {
            self.samples
        } else {
            self.samples_occluded.unwrap_or(self.samples)
        }
    }
}

/// Observation distributions `h^o(v, c, psi)` over the fine viewsphere for
/// canonically posed models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NominalObsModel {
    format_version: u32,
    pub config: NominalConfig,
    pub tree_hash: String,
    pub g_count: u32,
    pub interest_count: u32,
    pub l_to_class: Vec<u32>,
    pub model_names: Vec<String>,
    pub viewsphere: ViewGraph,
    pub obs_count: u32,
    /// Samples whose feature extraction degenerated (spread uniformly).
    pub degenerate_samples: u64,
    rows: Vec<f64>,
}

impl NominalObsModel {
    pub fn model_count(&self) -> u32 {
        self.l_to_class.len() as u32
    }

    fn row_offset(&self, v: usize, c: usize, psi: OcclusionState) -> usize {
        debug_assert!(v < self.viewsphere.len());
        debug_assert!(c < self.l_to_class.len());
        ((v * self.l_to_class.len() + c) * OcclusionState::COUNT + psi.index())
            * self.obs_count as usize
    }

    pub fn row(&self, v: usize, c: usize, psi: OcclusionState) -> &[f64] {
        let start = self.row_offset(v, c, psi);
        &self.rows[start..start + self.obs_count as usize]
    }

    pub fn row_count(&self) -> usize {
        self.rows.len() / self.obs_count as usize
    }

    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("nominal model serializes");
        format!("{:x}", Sha256::digest(bytes))
    }

    pub fn save(&self, path: &Path) -> Result<(), ObsModelError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    /// Load and, when a tree is supplied, insist it is the exact tree the
    /// model was built against.
    pub fn load(path: &Path, expect_tree: Option<&VpTree>) -> Result<Self, ObsModelError> {
        let file = std::fs::File::open(path)?;
        let model: NominalObsModel = serde_json::from_reader(std::io::BufReader::new(file))?;
        if model.format_version != OBSMODEL_FORMAT_VERSION {
            return Err(ObsModelError::FormatVersion {
                found: model.format_version,
                expected: OBSMODEL_FORMAT_VERSION,
            });
        }
        if let Some(tree) = expect_tree {
            let found = tree.content_hash();
            if found != model.tree_hash {
                return Err(ObsModelError::HashMismatch(format!(
                    "nominal model was built against tree {}, got {found}",
                    model.tree_hash
                )));
            }
        }
        Ok(model)
    }
}

/// Estimate the nominal observation model by Monte Carlo simulation of the
/// full render -> occlude -> noise -> detect pipeline.
///
/// Deterministic given `config.seed`: each (viewpoint, class, state,
/// sample) cell derives its own RNG stream, so the table is independent of
/// scheduling. Fully-occluded cells are uniform by definition. Samples
/// whose feature extraction degenerates contribute uniform mass and are
/// counted in `degenerate_samples`.
pub fn build_nominal_model(
    models: &[ObjectModel],
    viewsphere: &ViewGraph,
    tree: &VpTree,
    config: &NominalConfig,
) -> Result<NominalObsModel, ObsModelError> {
    if config.alpha <= 0.0 {
        return Err(ObsModelError::InvalidArgument(format!(
            "smoothing alpha must be positive, got {}",
            config.alpha
        )));
    }
    if config.samples == 0 || config.samples_occluded == Some(0) {
        return Err(ObsModelError::InvalidArgument(
            "need at least one sample per cell".into(),
        ));
    }
    if models.len() != tree.l_to_class.len() {
        return Err(ObsModelError::InvalidArgument(format!(
            "tree was trained on {} models, got {}",
            tree.l_to_class.len(),
            models.len()
        )));
    }
    for (i, m) in models.iter().enumerate() {
        if m.class_id != tree.l_to_class[i] {
            return Err(ObsModelError::InvalidArgument(format!(
                "model order mismatch at l={}: class {} vs tree's {}",
                i + 1,
                m.class_id,
                tree.l_to_class[i]
            )));
        }
    }

    let n_models = models.len() as u32;
    let obs_count = obs_space_size(tree.g_count, tree.interest_count, n_models);
    let uniform = 1.0 / obs_count as f64;

    // One render per (viewpoint, class); all occlusion states and samples
    // reuse it. Cells are independent, so build them in parallel.
    let cells: Vec<(usize, usize)> = (0..viewsphere.len())
        .flat_map(|v| (0..models.len()).map(move |c| (v, c)))
        .collect();
    let results: Vec<(Vec<f64>, u64)> = cells
        .par_iter()
        .map(|&(v, c)| {
            build_cell(
                models, viewsphere, tree, config, v, c, obs_count, uniform,
            )
        })
        .collect::<Result<_, ObsModelError>>()?;

    let mut rows = Vec::with_capacity(results.len() * OcclusionState::COUNT * obs_count as usize);
    let mut degenerate_samples = 0;
    for (cell_rows, degenerate) in results {
        rows.extend(cell_rows);
        degenerate_samples += degenerate;
    }

    Ok(NominalObsModel {
        format_version: OBSMODEL_FORMAT_VERSION,
        config: config.clone(),
        tree_hash: tree.content_hash(),
        g_count: tree.g_count,
        interest_count: tree.interest_count,
        l_to_class: tree.l_to_class.clone(),
        model_names: tree.model_names.clone(),
        viewsphere: viewsphere.clone(),
        obs_count,
        degenerate_samples,
        rows,
    })
}

/// All 16 occlusion-state rows for one (viewpoint, class) cell.
#[allow(clippy::too_many_arguments)]
fn build_cell(
    models: &[ObjectModel],
    viewsphere: &ViewGraph,
    tree: &VpTree,
    config: &NominalConfig,
    v: usize,
    c: usize,
    obs_count: u32,
    uniform: f64,
) -> Result<(Vec<f64>, u64), ObsModelError> {
    let base = crate::sensing::render_depth(
        &models[c],
        viewsphere.viewpoint(v),
        (config.sensor.width, config.sensor.height),
        config.sensor.vfov,
    );
    let mut rows = Vec::with_capacity(OcclusionState::COUNT * obs_count as usize);
    let mut degenerate = 0u64;
    for psi in OcclusionState::all() {
        if psi.is_full() {
            rows.extend(std::iter::repeat_n(uniform, obs_count as usize));
            continue;
        }
        let masked = apply_occlusion(&base, &psi.occluding_mask(config.occlusion.epsilon));
        let samples = config.samples_for(psi);
        let mut hist = vec![0.0f64; obs_count as usize];
        for s in 0..samples {
            let cell_seed = derive_seed(
                config.seed,
                &[v as u64, c as u64, psi.bits() as u64, s as u64],
            );
            let z = simulate_observation(&masked, tree, config, cell_seed)?;
            match z {
                Some(obs) => hist[obs.offset()] += 1.0,
                None => {
                    degenerate += 1;
                    for h in hist.iter_mut() {
                        *h += uniform;
                    }
                }
            }
        }
        let denom = samples as f64 + config.alpha * obs_count as f64;
        rows.extend(hist.into_iter().map(|h| (h + config.alpha) / denom));
    }
    Ok((rows, degenerate))
}

/// One pass of noise -> features -> retrieval on an already-masked cloud.
/// `None` marks a degenerate sample (too few points or descriptors).
fn simulate_observation(
    masked: &crate::sensing::PointCloud,
    tree: &VpTree,
    config: &NominalConfig,
    seed: u64,
) -> Result<Option<ObsIndex>, ObsModelError> {
    if masked.is_empty() {
        return Ok(None);
    }
    let noisy = add_depth_noise(masked, config.sigma, derive_seed(seed, &[0]));
    let features = match extract_features(
        &noisy,
        &tree.feature_config,
        derive_seed(seed, &[1]),
        "nominal-sample",
    ) {
        Ok(fs) if !fs.is_degenerate() => fs,
        Ok(_) => return Ok(None),
        Err(crate::features::FeatureError::DegenerateInput(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let ranked = tree.query(&features)?;
    let top = ranked[0].0;
    let z = observation_index(
        top.l,
        top.g,
        tree.g_count,
        tree.interest_count,
        tree.l_to_class.len() as u32,
    )?;
    Ok(Some(z))
}

/// Observation distributions `h(x, H(c,r), psi)` over the planning
/// viewsphere and hypothesis set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanningObsModel {
    format_version: u32,
    pub nominal_hash: String,
    pub tree_hash: String,
    pub hypotheses: HypothesisSet,
    pub viewsphere: ViewGraph,
    pub occlusion: OcclusionSpec,
    pub obs_count: u32,
    rows: Vec<f64>,
}

impl PlanningObsModel {
    pub fn hypothesis_count(&self) -> usize {
        self.hypotheses.len()
    }

    fn row_offset(&self, x: usize, m: usize, psi: OcclusionState) -> usize {
        debug_assert!(x < self.viewsphere.len());
        debug_assert!(m < self.hypotheses.len());
        ((x * self.hypotheses.len() + m) * OcclusionState::COUNT + psi.index())
            * self.obs_count as usize
    }

    pub fn row(&self, x: usize, m: usize, psi: OcclusionState) -> &[f64] {
        let start = self.row_offset(x, m, psi);
        &self.rows[start..start + self.obs_count as usize]
    }

    /// Checked probability lookup `P(Z = z | x, H_m, psi)`.
    pub fn likelihood(
        &self,
        z: ObsIndex,
        x: usize,
        m: usize,
        psi: OcclusionState,
    ) -> Result<f64, ObsModelError> {
        if x >= self.viewsphere.len() {
            return Err(ObsModelError::InvalidArgument(format!(
                "viewpoint {x} outside 0..{}",
                self.viewsphere.len()
            )));
        }
        if m >= self.hypotheses.len() {
            return Err(ObsModelError::InvalidArgument(format!(
                "hypothesis {m} outside 0..{}",
                self.hypotheses.len()
            )));
        }
        if z.0 == 0 || z.0 > self.obs_count {
            return Err(ObsModelError::InvalidArgument(format!(
                "observation {} outside 1..={}",
                z.0, self.obs_count
            )));
        }
        Ok(self.row(x, m, psi)[z.offset()])
    }

    /// Draw an observation from the row's distribution.
    pub fn sample_observation(
        &self,
        x: usize,
        m: usize,
        psi: OcclusionState,
        rng: &mut impl Rng,
    ) -> ObsIndex {
        let row = self.row(x, m, psi);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return ObsIndex(i as u32 + 1);
            }
        }
        ObsIndex(self.obs_count)
    }

    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("planning model serializes");
        format!("{:x}", Sha256::digest(bytes))
    }

    pub fn save(&self, path: &Path) -> Result<(), ObsModelError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path, expect_nominal: Option<&NominalObsModel>) -> Result<Self, ObsModelError> {
        let file = std::fs::File::open(path)?;
        let model: PlanningObsModel = serde_json::from_reader(std::io::BufReader::new(file))?;
        if model.format_version != OBSMODEL_FORMAT_VERSION {
            return Err(ObsModelError::FormatVersion {
                found: model.format_version,
                expected: OBSMODEL_FORMAT_VERSION,
            });
        }
        if let Some(nominal) = expect_nominal {
            let found = nominal.content_hash();
            if found != model.nominal_hash {
                return Err(ObsModelError::HashMismatch(format!(
                    "planning model was derived from nominal {}, got {found}",
                    model.nominal_hash
                )));
            }
        }
        Ok(model)
    }
}

/// Rotate image-plane half-planes by a sensor-frame change `delta`: lift
/// each normal to 3D, rotate, and project back. Masks whose rotated normal
/// leaves the image plane (projection nearly zero) are kept unchanged.
fn rotate_half_planes(mask: &[HalfPlane], delta: &UnitQuaternion<f64>) -> Vec<HalfPlane> {
    mask.iter()
        .map(|hp| {
            let n = delta * Vector3::new(hp.a, hp.b, 0.0);
            let planar = (n.x * n.x + n.y * n.y).sqrt();
            if planar < 1e-6 {
                *hp
            } else {
                HalfPlane::new(n.x / planar, n.y / planar, hp.c)
            }
        })
        .collect()
}

/// Derive the planning model from a nominal model:
///
/// 1. express the sensor pose in the hypothesized object frame,
/// 2. snap to the nearest nominal viewpoint `v`,
/// 3. rotate the occlusion mask into that frame, re-render, re-classify to
///    get the nominal-frame state,
/// 4. copy the nominal row.
///
/// The full occlusion state short-circuits to the nominal full row: no
/// data is no data in any frame. Null-hypothesis rows average the
/// non-interest classes, each with its own re-classified state.
pub fn derive_planning_model(
    nominal: &NominalObsModel,
    models: &[ObjectModel],
    planning: &ViewGraph,
    hypotheses: &HypothesisSet,
) -> Result<PlanningObsModel, ObsModelError> {
    let n_models = nominal.model_count();
    if models.len() as u32 != n_models {
        return Err(ObsModelError::InvalidArgument(format!(
            "nominal model covers {n_models} classes, got {}",
            models.len()
        )));
    }
    for hyp in hypotheses.iter() {
        if let Some(l) = hyp.l {
            if l == 0 || l > nominal.interest_count {
                return Err(ObsModelError::Inconsistent(format!(
                    "hypothesis {} references model {l}, but only {} interest models exist",
                    hyp.name, nominal.interest_count
                )));
            }
        }
    }
    if n_models == nominal.interest_count {
        return Err(ObsModelError::InvalidArgument(
            "null hypothesis needs at least one non-interest model".into(),
        ));
    }

    let spec = nominal.config.occlusion;
    let m_count = hypotheses.len();
    let obs_count = nominal.obs_count as usize;

    // Cache nominal-frame renders per (v, c); rows reuse them heavily.
    let render = |v: usize, c: usize| {
        crate::sensing::render_depth(
            &models[c],
            nominal.viewsphere.viewpoint(v),
            (nominal.config.sensor.width, nominal.config.sensor.height),
            nominal.config.sensor.vfov,
        )
    };
    let mut render_cache: Vec<Option<crate::sensing::PointCloud>> =
        vec![None; nominal.viewsphere.len() * models.len()];

    let mut rows = vec![0.0f64; planning.len() * m_count * OcclusionState::COUNT * obs_count];
    for x in 0..planning.len() {
        for (m, hyp) in hypotheses.iter().enumerate() {
            let pose = sensor_pose_in_object_frame(planning.viewpoint(x), &hyp.orientation);
            let v = nearest_viewpoint(&pose, &nominal.viewsphere).id;
            let delta =
                nominal.viewsphere.viewpoint(v).orientation.inverse() * pose.rotation;
            let classes: Vec<usize> = match hyp.l {
                Some(l) => vec![l as usize - 1],
                None => (nominal.interest_count as usize..models.len()).collect(),
            };
            for psi in OcclusionState::all() {
                let start = ((x * m_count + m) * OcclusionState::COUNT + psi.index()) * obs_count;
                let out = &mut rows[start..start + obs_count];
                if psi.is_full() {
                    out.copy_from_slice(nominal.row(v, classes[0], OcclusionState::FULL));
                    continue;
                }
                let rotated = rotate_half_planes(&psi.occluding_mask(spec.epsilon), &delta);
                for &c in &classes {
                    let cloud = render_cache[v * models.len() + c]
                        .get_or_insert_with(|| render(v, c));
                    let psi_nominal = classify_occlusion(&apply_occlusion(cloud, &rotated), &spec);
                    let source = nominal.row(v, c, psi_nominal);
                    for (o, s) in out.iter_mut().zip(source) {
                        *o += s / classes.len() as f64;
                    }
                }
            }
        }
    }

    Ok(PlanningObsModel {
        format_version: OBSMODEL_FORMAT_VERSION,
        nominal_hash: nominal.content_hash(),
        tree_hash: nominal.tree_hash.clone(),
        hypotheses: hypotheses.clone(),
        viewsphere: planning.clone(),
        occlusion: spec,
        obs_count: nominal.obs_count,
        rows,
    })
}

/// World-frame scene assembly used when executing trials: the hypothesized
/// object (or a distractor) sits at the origin in some orientation.
pub fn single_object_scene(model: &ObjectModel, orientation: &UnitQuaternion<f64>) -> Scene {
    let mut builder = SceneBuilder::new();
    builder.add_model(model, orientation, &Vector3::zeros(), 0);
    builder.build()
}

impl PlanningObsModel {
    /// Assemble a planning model from explicit distributions: `rows(x, m)`
    /// gives the clear-state row, reused for every occlusion state. Meant
    /// for synthetic/toy instances; derived models come from
    /// [`derive_planning_model`].
    pub fn from_rows(
        viewsphere: ViewGraph,
        hypotheses: HypothesisSet,
        obs_count: u32,
        rows: impl Fn(usize, usize) -> Vec<f64>,
    ) -> Result<PlanningObsModel, ObsModelError> {
        if obs_count == 0 {
            return Err(ObsModelError::InvalidArgument(
                "observation space must be nonempty".into(),
            ));
        }
        let m_count = hypotheses.len();
        let mut table = Vec::with_capacity(
            viewsphere.len() * m_count * OcclusionState::COUNT * obs_count as usize,
        );
        for x in 0..viewsphere.len() {
            for m in 0..m_count {
                let row = rows(x, m);
                if row.len() != obs_count as usize {
                    return Err(ObsModelError::InvalidArgument(format!(
                        "row ({x},{m}) has {} entries, expected {obs_count}",
                        row.len()
                    )));
                }
                // Derived models are strictly positive; synthetic instances
                // may use exact zeros (filtering still guards underflow).
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                    return Err(ObsModelError::InvalidArgument(format!(
                        "row ({x},{m}) must be a distribution"
                    )));
                }
                for _psi in 0..OcclusionState::COUNT {
                    table.extend_from_slice(&row);
                }
            }
        }
        Ok(PlanningObsModel {
            format_version: OBSMODEL_FORMAT_VERSION,
            nominal_hash: "synthetic".into(),
            tree_hash: "synthetic".into(),
            hypotheses,
            viewsphere,
            occlusion: OcclusionSpec::default(),
            obs_count,
            rows: table,
        })
    }
}
