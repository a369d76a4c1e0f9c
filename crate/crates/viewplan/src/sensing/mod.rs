//! Simulated depth sensing: object models, ray-cast rendering, depth noise,
//! and occlusion masking/classification.
//!
//! Occlusions live in the image plane, which for this sensor means the raw
//! sensor-frame (x, y) coordinates of rendered points, in meters. A *mask*
//! is a set of half-planes `a·x + b·y > c`; points inside any half-plane
//! are removed. An *occlusion state* records which of the four image sides
//! (left/right/top/bottom) have effectively no data left.

mod mesh;
pub mod models;
mod raycast;

pub use mesh::{triangle_area, ObjectModel, Triangle};
pub use raycast::{render_depth, Bvh, LabeledCloud, Scene, SceneBuilder, SensorIntrinsics};

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SensingError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Depth observation: points in the sensor frame (z = depth).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dump as `x y z` lines for external viewers.
    pub fn save_xyz(&self, path: &Path) -> Result<(), SensingError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for p in &self.points {
            writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
        }
        Ok(())
    }
}

/// Perturb each point along its own ray direction by `N(0, sigma^2)`.
/// Deterministic given `seed`; `sigma = 0` returns the cloud unchanged.
pub fn add_depth_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> PointCloud {
    assert!(sigma >= 0.0, "noise level must be nonnegative");
    if sigma == 0.0 {
        return cloud.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| {
                let range = p.coords.norm();
                let shift = normal.sample(&mut rng);
                if range < 1e-12 {
                    *p
                } else {
                    Point3::from(p.coords * (1.0 + shift / range))
                }
            })
            .collect(),
    }
}

/// Occlusion test parameters: half-band width `epsilon` (meters in the
/// image plane) and the minimum point count `min_points` a side needs to
/// count as visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionSpec {
    pub epsilon: f64,
    pub min_points: usize,
}

impl Default for OcclusionSpec {
    fn default() -> Self {
        OcclusionSpec {
            epsilon: 0.05,
            min_points: 25,
        }
    }
}

impl OcclusionSpec {
    pub fn new(epsilon: f64, min_points: usize) -> Result<Self, SensingError> {
        if epsilon <= 0.0 {
            return Err(SensingError::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if min_points == 0 {
            return Err(SensingError::InvalidArgument(
                "min_points must be at least 1".into(),
            ));
        }
        Ok(OcclusionSpec { epsilon, min_points })
    }
}

/// One image side, in the sensor frame: left = −x, right = +x, top = +y,
/// bottom = −y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Top, Side::Bottom];

    pub fn bit(self) -> u8 {
        match self {
            Side::Left => 1,
            Side::Right => 2,
            Side::Top => 4,
            Side::Bottom => 8,
        }
    }

    /// Canonical half-plane occluding (removing) this side's band beyond
    /// `epsilon`.
    pub fn occluding_half_plane(self, epsilon: f64) -> HalfPlane {
        match self {
            Side::Left => HalfPlane::new(-1.0, 0.0, epsilon),
            Side::Right => HalfPlane::new(1.0, 0.0, epsilon),
            Side::Top => HalfPlane::new(0.0, 1.0, epsilon),
            Side::Bottom => HalfPlane::new(0.0, -1.0, epsilon),
        }
    }
}

/// Which subset of the four image sides is occluded. The full subset
/// doubles as the fully-occluded state (too few points overall).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OcclusionState(u8);

impl OcclusionState {
    pub const CLEAR: OcclusionState = OcclusionState(0);
    pub const FULL: OcclusionState = OcclusionState(0b1111);
    pub const COUNT: usize = 16;

    pub fn from_bits(bits: u8) -> OcclusionState {
        assert!(bits < 16, "occlusion state bits out of range: {bits}");
        OcclusionState(bits)
    }

    pub fn from_sides(sides: &[Side]) -> OcclusionState {
        OcclusionState(sides.iter().fold(0, |acc, s| acc | s.bit()))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Dense index in 0..16, usable as an array offset.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = OcclusionState> {
        (0..16).map(OcclusionState)
    }

    pub fn contains(self, side: Side) -> bool {
        self.0 & side.bit() != 0
    }

    pub fn is_full(self) -> bool {
        self == Self::FULL
    }

    /// The canonical removal mask producing this state: one half-plane per
    /// occluded side.
    pub fn occluding_mask(self, epsilon: f64) -> Vec<HalfPlane> {
        Side::ALL
            .into_iter()
            .filter(|s| self.contains(*s))
            .map(|s| s.occluding_half_plane(epsilon))
            .collect()
    }
}

impl std::fmt::Display for OcclusionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if *self == Self::CLEAR {
            return write!(f, "none");
        }
        if *self == Self::FULL {
            return write!(f, "full");
        }
        let names: Vec<&str> = Side::ALL
            .into_iter()
            .filter(|s| self.contains(*s))
            .map(|s| match s {
                Side::Left => "left",
                Side::Right => "right",
                Side::Top => "top",
                Side::Bottom => "bottom",
            })
            .collect();
        write!(f, "{}", names.join("+"))
    }
}

/// Image-plane half-plane `a·x + b·y > c`; points satisfying it are inside
/// the occluded region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HalfPlane {
    pub fn new(a: f64, b: f64, c: f64) -> HalfPlane {
        HalfPlane { a, b, c }
    }

    pub fn removes(&self, x: f64, y: f64) -> bool {
        self.a * x + self.b * y > self.c
    }
}

/// Remove every point whose image-plane (x, y) lies inside any mask
/// half-plane.
pub fn apply_occlusion(cloud: &PointCloud, mask: &[HalfPlane]) -> PointCloud {
    PointCloud {
        points: cloud
            .points
            .iter()
            .filter(|p| !mask.iter().any(|h| h.removes(p.x, p.y)))
            .copied()
            .collect(),
    }
}

/// Classify the occlusion state of a cloud: a side is occluded when fewer
/// than `min_points` points remain beyond `epsilon` on that side; a cloud
/// with fewer than `min_points` points overall is fully occluded.
pub fn classify_occlusion(cloud: &PointCloud, spec: &OcclusionSpec) -> OcclusionState {
    if cloud.len() < spec.min_points {
        return OcclusionState::FULL;
    }
    let eps = spec.epsilon;
    let count = |pred: &dyn Fn(&Point3<f64>) -> bool| cloud.points.iter().filter(|p| pred(p)).count();
    let mut bits = 0u8;
    if count(&|p| p.x < -eps) < spec.min_points {
        bits |= Side::Left.bit();
    }
    if count(&|p| p.x > eps) < spec.min_points {
        bits |= Side::Right.bit();
    }
    if count(&|p| p.y > eps) < spec.min_points {
        bits |= Side::Top.bit();
    }
    if count(&|p| p.y < -eps) < spec.min_points {
        bits |= Side::Bottom.bit();
    }
    OcclusionState(bits)
}
