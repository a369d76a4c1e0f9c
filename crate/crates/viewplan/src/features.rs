//! Keypoint sampling and local surface descriptors.
//!
//! The descriptor is a pair-angle histogram: for pairs of points in a
//! keypoint's neighborhood, the three Darboux-frame angles between the pair
//! normals and the connecting line are binned into an 11x3 concatenated,
//! L1-normalized histogram. It captures the same local-geometry statistics
//! class as point-feature histograms while staying independent of any
//! particular library's binning.
//!
//! Point normals come from the smallest covariance eigenvector of each
//! point's own neighborhood, with the sign flipped toward the sensor side
//! (negative z in the sensor frame, where clouds are expressed). The flip
//! rule depends only on direction, never position, which keeps descriptors
//! invariant under rigid translation of the cloud.

use crate::sensing::PointCloud;
use nalgebra::{Matrix3, Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const DESCRIPTOR_DIM: usize = 33;
const ANGLE_BINS: usize = 11;
/// Minimum neighborhood size below which a descriptor is degenerate.
const MIN_NEIGHBORS: usize = 5;
/// Covariance condition-number cutoff (largest/middle eigenvalue) beyond
/// which the neighborhood is effectively collinear.
const MAX_CONDITION: f64 = 1e6;
/// Cap on neighbors entering the quadratic pair loop; past this, a strided
/// subsample of the distance-sorted neighborhood is used so descriptor cost
/// stays bounded on dense clouds.
const MAX_PAIR_NEIGHBORS: usize = 25;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// L1-normalized 11x3 pair-angle histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub values: Vec<f64>,
}

impl Descriptor {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Descriptors extracted from one cloud (a training template or a query).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub descriptors: Vec<Descriptor>,
    pub source: String,
}

impl FeatureSet {
    /// Too few well-conditioned descriptors to say anything.
    pub fn is_degenerate(&self) -> bool {
        self.descriptors.len() < 3
    }
}

/// Extraction parameters, recorded in downstream artifact headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub keypoints: usize,
    pub radius: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            keypoints: 100,
            radius: 0.04,
        }
    }
}

/// Uniform hash grid for fixed-radius neighbor queries.
struct SpatialGrid<'a> {
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
    points: &'a [Point3<f64>],
    cell_size: f64,
}

impl<'a> SpatialGrid<'a> {
    fn build(points: &'a [Point3<f64>], cell_size: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells
                .entry(Self::key(p, cell_size))
                .or_default()
                .push(i as u32);
        }
        SpatialGrid {
            cells,
            points,
            cell_size,
        }
    }

    fn key(p: &Point3<f64>, s: f64) -> (i64, i64, i64) {
        (
            (p.x / s).floor() as i64,
            (p.y / s).floor() as i64,
            (p.z / s).floor() as i64,
        )
    }

    /// Indices of points with `|p - center| <= radius` (radius must not
    /// exceed the cell size).
    fn within(&self, center: &Point3<f64>, radius: f64) -> Vec<u32> {
        debug_assert!(radius <= self.cell_size + 1e-12);
        let (cx, cy, cz) = Self::key(center, self.cell_size);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &i in bucket {
                            if (self.points[i as usize] - center).norm_squared() <= r2 {
                                out.push(i);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Covariance decomposition of a neighborhood: (unit normal candidate,
/// largest/middle eigenvalue ratio). The normal sign is unresolved here.
fn neighborhood_normal(points: &[Point3<f64>], indices: &[u32]) -> Option<(Vector3<f64>, f64)> {
    if indices.len() < 3 {
        return None;
    }
    let n = indices.len() as f64;
    let mean = indices
        .iter()
        .fold(Vector3::zeros(), |acc, &i| acc + points[i as usize].coords)
        / n;
    let mut cov = Matrix3::zeros();
    for &i in indices {
        let d = points[i as usize].coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let [hi, mid, lo] = order;
    let cond = if eig.eigenvalues[mid] <= 0.0 {
        f64::INFINITY
    } else {
        eig.eigenvalues[hi] / eig.eigenvalues[mid]
    };
    let _ = lo;
    let normal = eig.eigenvectors.column(order[2]).into_owned();
    Some((normal.normalize(), cond))
}

/// Deterministic sign: point the normal toward the sensor side (-z), with
/// x/y tie-breaks for normals lying exactly in the image plane.
fn orient_normal(n: Vector3<f64>) -> Vector3<f64> {
    if n.z > 0.0 || (n.z == 0.0 && (n.x > 0.0 || (n.x == 0.0 && n.y > 0.0))) {
        -n
    } else {
        n
    }
}

/// Draw `k` keypoints uniformly without replacement (the whole cloud when
/// it has at most `k` points). Deterministic given `seed`.
pub fn sample_keypoints(
    cloud: &PointCloud,
    k: usize,
    seed: u64,
) -> Result<Vec<Point3<f64>>, FeatureError> {
    if k == 0 {
        return Err(FeatureError::InvalidArgument("k must be at least 1".into()));
    }
    if cloud.is_empty() {
        return Err(FeatureError::DegenerateInput("empty cloud".into()));
    }
    if cloud.len() <= k {
        return Ok(cloud.points.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, cloud.len(), k).into_vec();
    indices.sort_unstable();
    Ok(indices.into_iter().map(|i| cloud.points[i]).collect())
}

/// Pair-angle histogram around one keypoint, or `None` when the
/// neighborhood is degenerate (too few points or effectively collinear).
pub fn compute_descriptor(
    cloud: &PointCloud,
    keypoint: &Point3<f64>,
    radius: f64,
) -> Option<Descriptor> {
    assert!(radius > 0.0, "descriptor radius must be positive");
    let grid = SpatialGrid::build(&cloud.points, radius);
    descriptor_with_grid(&grid, keypoint, radius)
}

fn descriptor_with_grid(
    grid: &SpatialGrid<'_>,
    keypoint: &Point3<f64>,
    radius: f64,
) -> Option<Descriptor> {
    let points = grid.points;
    let mut neighbors = grid.within(keypoint, radius);
    if neighbors.len() < MIN_NEIGHBORS {
        return None;
    }
    let (_, cond) = neighborhood_normal(points, &neighbors)?;
    if cond > MAX_CONDITION {
        return None;
    }

    // Distance-sorted neighborhood with coordinate tie-breaks keeps the
    // pair enumeration independent of input point order.
    neighbors.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a as usize], &points[b as usize]);
        let (da, db) = (
            (pa - keypoint).norm_squared(),
            (pb - keypoint).norm_squared(),
        );
        da.partial_cmp(&db)
            .unwrap()
            .then(pa.x.partial_cmp(&pb.x).unwrap())
            .then(pa.y.partial_cmp(&pb.y).unwrap())
            .then(pa.z.partial_cmp(&pb.z).unwrap())
    });
    let selected: Vec<u32> = if neighbors.len() > MAX_PAIR_NEIGHBORS {
        (0..MAX_PAIR_NEIGHBORS)
            .map(|i| neighbors[i * neighbors.len() / MAX_PAIR_NEIGHBORS])
            .collect()
    } else {
        neighbors
    };

    let normals: Vec<Option<Vector3<f64>>> = selected
        .iter()
        .map(|&i| {
            let local = grid.within(&points[i as usize], radius);
            neighborhood_normal(points, &local).map(|(n, _)| orient_normal(n))
        })
        .collect();

    let mut hist = vec![0.0f64; DESCRIPTOR_DIM];
    let mut pairs = 0usize;
    for i in 0..selected.len() {
        let Some(n_s) = normals[i] else { continue };
        for j in (i + 1)..selected.len() {
            let Some(n_t) = normals[j] else { continue };
            let d = points[selected[j] as usize] - points[selected[i] as usize];
            let dist = d.norm();
            if dist < 1e-9 {
                continue;
            }
            let dir = d / dist;
            let v = dir.cross(&n_s);
            let v_norm = v.norm();
            if v_norm < 1e-9 {
                continue; // normal parallel to the connecting line
            }
            let v = v / v_norm;
            let w = n_s.cross(&v);
            let alpha = v.dot(&n_t).clamp(-1.0, 1.0);
            let phi = n_s.dot(&dir).clamp(-1.0, 1.0);
            let theta = w.dot(&n_t).atan2(n_s.dot(&n_t));
            hist[bin_unit(alpha)] += 1.0;
            hist[ANGLE_BINS + bin_unit(phi)] += 1.0;
            hist[2 * ANGLE_BINS + bin_angle(theta)] += 1.0;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return None;
    }
    let total = 3.0 * pairs as f64;
    for h in &mut hist {
        *h /= total;
    }
    Some(Descriptor { values: hist })
}

/// Bin a value in [-1, 1] into one of `ANGLE_BINS` equal cells.
fn bin_unit(v: f64) -> usize {
    (((v + 1.0) / 2.0 * ANGLE_BINS as f64) as usize).min(ANGLE_BINS - 1)
}

/// Bin an angle in [-pi, pi].
fn bin_angle(theta: f64) -> usize {
    let t = (theta + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
    ((t * ANGLE_BINS as f64) as usize).min(ANGLE_BINS - 1)
}

/// Sample keypoints, compute descriptors, and drop degenerate ones. The
/// resulting set is degenerate when fewer than 3 descriptors survive.
pub fn extract_features(
    cloud: &PointCloud,
    config: &FeatureConfig,
    seed: u64,
    source: impl Into<String>,
) -> Result<FeatureSet, FeatureError> {
    let keypoints = sample_keypoints(cloud, config.keypoints, seed)?;
    let grid = SpatialGrid::build(&cloud.points, config.radius);
    let descriptors = keypoints
        .iter()
        .filter_map(|kp| descriptor_with_grid(&grid, kp, config.radius))
        .collect();
    Ok(FeatureSet {
        descriptors,
        source: source.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Viewpoint;
    use crate::sensing::{models, render_depth, ObjectModel};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn planar_patch(step: f64, half: f64) -> PointCloud {
        let mut points = Vec::new();
        let n = (half / step) as i64;
        for ix in -n..=n {
            for iy in -n..=n {
                points.push(Point3::new(ix as f64 * step, iy as f64 * step, 0.9));
            }
        }
        PointCloud { points }
    }

    #[test]
    fn planar_patch_concentrates_in_middle_bins() {
        let cloud = planar_patch(0.005, 0.1);
        let kp = Point3::new(0.0, 0.0, 0.9);
        let d = compute_descriptor(&cloud, &kp, 0.04).expect("plane is well-conditioned");
        assert_relative_eq!(d.l1(), 1.0, epsilon = 1e-9);
        // All three angles are zero on a plane: middle bin of each section.
        let mass = d.values[5] + d.values[16] + d.values[27];
        assert!(mass > 0.999, "planar mass {mass}; hist {:?}", d.values);
        assert_relative_eq!(d.values[5], 1.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(d.values[16], 1.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(d.values[27], 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn descriptor_is_deterministic_and_normalized() {
        let model = models::mug();
        let view = Viewpoint::looking_at_origin(0, Point3::new(0.9, 0.3, 0.3));
        let cloud = render_depth(&model, &view, (96, 72), 1.0);
        let kp = cloud.points[cloud.len() / 2];
        let a = compute_descriptor(&cloud, &kp, 0.04).unwrap();
        let b = compute_descriptor(&cloud, &kp, 0.04).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), DESCRIPTOR_DIM);
        assert!(a.values.iter().all(|&v| v >= 0.0));
        assert_relative_eq!(a.l1(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn descriptor_invariant_to_translation_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let points: Vec<Point3<f64>> = (0..300)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-0.06..0.06),
                        rng.gen_range(-0.06..0.06),
                        0.8 + rng.gen_range(-0.02..0.02),
                    )
                })
                .collect();
            let cloud = PointCloud { points };
            let kp = cloud.points[0];
            let base = compute_descriptor(&cloud, &kp, 0.04).unwrap();

            let t = Vector3::new(0.13, -0.27, 0.31);
            let moved = PointCloud {
                points: cloud.points.iter().map(|p| p + t).collect(),
            };
            let shifted = compute_descriptor(&moved, &(kp + t), 0.04).unwrap();
            for (a, b) in base.values.iter().zip(&shifted.values) {
                assert!((a - b).abs() < 1e-9, "translation changed the histogram");
            }

            let mut reversed = cloud.clone();
            reversed.points.reverse();
            let reordered = compute_descriptor(&reversed, &kp, 0.04).unwrap();
            assert_eq!(base, reordered, "point order changed the histogram");
        }
    }

    #[test]
    fn degenerate_neighborhoods_are_rejected() {
        // Too few points.
        let tiny = PointCloud {
            points: vec![Point3::new(0.0, 0.0, 1.0); 3],
        };
        assert!(compute_descriptor(&tiny, &Point3::new(0.0, 0.0, 1.0), 0.04).is_none());
        // Collinear points: condition number blows up.
        let line = PointCloud {
            points: (0..40)
                .map(|i| Point3::new(i as f64 * 0.001, 0.0, 1.0))
                .collect(),
        };
        assert!(compute_descriptor(&line, &Point3::new(0.02, 0.0, 1.0), 0.04).is_none());
    }

    #[test]
    fn keypoint_sampling_contract() {
        let cloud = planar_patch(0.02, 0.08);
        let all = sample_keypoints(&cloud, cloud.len(), 1).unwrap();
        assert_eq!(all, cloud.points);
        let more = sample_keypoints(&cloud, cloud.len() * 2, 1).unwrap();
        assert_eq!(more, cloud.points);
        let one = sample_keypoints(&cloud, 1, 2).unwrap();
        assert_eq!(one.len(), 1);
        assert!(cloud.points.contains(&one[0]));
        let a = sample_keypoints(&cloud, 10, 3).unwrap();
        let b = sample_keypoints(&cloud, 10, 3).unwrap();
        assert_eq!(a, b);
        assert!(sample_keypoints(&PointCloud::default(), 5, 0).is_err());
        assert!(sample_keypoints(&cloud, 0, 0).is_err());
    }

    #[test]
    fn dense_sphere_survives_extraction() {
        let sphere = ObjectModel::new(0, "sphere", models::uv_sphere(0.12, 48, 24));
        let view = Viewpoint::looking_at_origin(0, Point3::new(1.0, 0.0, 0.0));
        let cloud = render_depth(&sphere, &view, (160, 120), 1.0);
        let config = FeatureConfig {
            keypoints: 50,
            radius: 0.04,
        };
        let fs = extract_features(&cloud, &config, 5, "sphere").unwrap();
        assert!(
            fs.descriptors.len() >= 45,
            "only {} descriptors survived",
            fs.descriptors.len()
        );
        assert!(!fs.is_degenerate());
        for d in &fs.descriptors {
            assert!(d.values.iter().all(|&v| v >= 0.0));
            assert_relative_eq!(d.l1(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn extraction_is_deterministic_end_to_end() {
        let model = models::handlebottle();
        let view = Viewpoint::looking_at_origin(0, Point3::new(0.7, 0.5, 0.5));
        let config = FeatureConfig::default();
        let a = extract_features(&render_depth(&model, &view, (96, 72), 1.0), &config, 9, "t")
            .unwrap();
        let b = extract_features(&render_depth(&model, &view, (96, 72), 1.0), &config, 9, "t")
            .unwrap();
        assert_eq!(a, b);
        assert!(extract_features(&PointCloud::default(), &config, 9, "t").is_err());
    }

    #[test]
    fn curved_surface_spreads_histogram() {
        // A sphere patch must not look like a plane: some mass leaves the
        // middle bins.
        let sphere = ObjectModel::new(0, "sphere", models::uv_sphere(0.05, 48, 24));
        let view = Viewpoint::looking_at_origin(0, Point3::new(0.5, 0.0, 0.0));
        let cloud = render_depth(&sphere, &view, (160, 120), 1.0);
        let kp = cloud.points[cloud.len() / 2];
        let d = compute_descriptor(&cloud, &kp, 0.04).unwrap();
        let middle = d.values[5] + d.values[16] + d.values[27];
        assert!(middle < 0.999, "sphere patch indistinguishable from plane");
    }
}
