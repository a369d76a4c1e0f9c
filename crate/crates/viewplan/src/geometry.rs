//! Viewsphere discretization, pose arithmetic, movement costs, and
//! orientation metrics.
//!
//! A *viewsphere* is a sphere of candidate sensor positions centered at the
//! object under inspection; the sensor always faces the centroid. The sphere
//! is discretized into a graph of viewpoints whose all-pairs movement costs
//! `g(x, x') = g_M(x, x') + g_0` are precomputed, where `g_M` is the
//! shortest-path closure of great-circle edge lengths and `g_0 > 0` is a
//! fixed per-measurement cost.

use nalgebra::{Point3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// File format version for serialized view graphs.
pub const VIEWGRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("unsupported view graph format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
}

/// A discretized sensor pose on the viewsphere.
///
/// The orientation maps the sensor's depth axis (+z) onto the unit vector
/// from `position` toward the sphere center, so the sensor always looks at
/// the object. The remaining roll degree of freedom is fixed so that the
/// image-plane +y axis points as close to global +z as possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub id: usize,
    pub position: Point3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Viewpoint {
    /// Build a viewpoint at `position` looking at the origin.
    pub fn looking_at_origin(id: usize, position: Point3<f64>) -> Self {
        let orientation = look_at_origin(&position);
        Viewpoint {
            id,
            position,
            orientation,
        }
    }

    pub fn radius(&self) -> f64 {
        self.position.coords.norm()
    }

    /// Unit direction from the sphere center to this viewpoint.
    pub fn direction(&self) -> Vector3<f64> {
        self.position.coords / self.radius()
    }
}

/// Rotation mapping sensor axes to world axes for a sensor at `position`
/// looking at the origin: column z is the viewing direction, column y is
/// chosen close to global +z (image "up"), column x completes the frame.
pub fn look_at_origin(position: &Point3<f64>) -> UnitQuaternion<f64> {
    let z_cam = -position.coords.normalize();
    let mut up = Vector3::z();
    if z_cam.dot(&up).abs() > 0.999 {
        up = Vector3::x();
    }
    let x_cam = up.cross(&z_cam).normalize();
    let y_cam = z_cam.cross(&x_cam);
    let rot = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[
        x_cam, y_cam, z_cam,
    ]));
    UnitQuaternion::from_rotation_matrix(&rot)
}

/// A rigid sensor pose (used for poses expressed in an object frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

/// Discretized viewsphere with precomputed movement costs.
///
/// `move_cost[i][j] = g_M(i, j) + g0` where `g_M` is the shortest-path
/// closure over the k-nearest-neighbor edge set with great-circle edge
/// lengths. The diagonal equals `g0` (no movement, one measurement).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewGraph {
    format_version: u32,
    pub viewpoints: Vec<Viewpoint>,
    pub radius: f64,
    /// Per-measurement cost added to every movement.
    pub g0: f64,
    /// Neighbor lists (indices into `viewpoints`).
    pub edges: Vec<Vec<usize>>,
    /// Flattened `|X| x |X|` matrix, row-major.
    move_cost: Vec<f64>,
}

impl ViewGraph {
    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    /// Total cost `g(a, b) = g_M(a, b) + g0` of moving from `a` to `b` and
    /// taking one measurement.
    pub fn move_cost(&self, a: usize, b: usize) -> f64 {
        self.move_cost[a * self.viewpoints.len() + b]
    }

    /// Movement-only part `g_M(a, b)`.
    pub fn movement_cost(&self, a: usize, b: usize) -> f64 {
        self.move_cost(a, b) - self.g0
    }

    pub fn viewpoint(&self, id: usize) -> &Viewpoint {
        &self.viewpoints[id]
    }

    pub fn save(&self, path: &Path) -> Result<(), GeometryError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GeometryError> {
        let file = std::fs::File::open(path)?;
        let graph: ViewGraph = serde_json::from_reader(std::io::BufReader::new(file))?;
        if graph.format_version != VIEWGRAPH_FORMAT_VERSION {
            return Err(GeometryError::FormatVersion {
                found: graph.format_version,
                expected: VIEWGRAPH_FORMAT_VERSION,
            });
        }
        Ok(graph)
    }
}

/// Build a near-uniform viewsphere discretization with precomputed costs.
///
/// Viewpoints are placed on a Fibonacci spiral lattice of `count` points on
/// the sphere of radius `radius`, each oriented at the center. With
/// `hemisphere_only`, only the lattice points with `z >= 0` are kept
/// (`count` still refers to the full-sphere lattice size, so e.g. a lattice
/// of 84 yields 42 upper-hemisphere viewpoints). Each viewpoint connects to
/// its `k_neighbors` nearest angular neighbors; movement costs are the
/// all-pairs shortest paths over great-circle edge lengths, plus `g0`.
pub fn build_viewsphere(
    count: usize,
    radius: f64,
    hemisphere_only: bool,
    k_neighbors: usize,
    g0: f64,
) -> Result<ViewGraph, GeometryError> {
    if count < 2 {
        return Err(GeometryError::InvalidArgument(format!(
            "viewsphere needs at least 2 lattice points, got {count}"
        )));
    }
    if radius <= 0.0 {
        return Err(GeometryError::InvalidArgument(format!(
            "viewsphere radius must be positive, got {radius}"
        )));
    }

    let directions = fibonacci_lattice(count)
        .into_iter()
        .filter(|d| !hemisphere_only || d.z >= 0.0)
        .collect::<Vec<_>>();
    if directions.len() < 2 {
        return Err(GeometryError::InvalidArgument(format!(
            "hemisphere filter left {} viewpoint(s); increase the lattice size",
            directions.len()
        )));
    }

    let viewpoints: Vec<Viewpoint> = directions
        .iter()
        .enumerate()
        .map(|(id, d)| Viewpoint::looking_at_origin(id, Point3::from(d * radius)))
        .collect();

    let n = viewpoints.len();
    let k = k_neighbors.min(n - 1).max(1);

    // k nearest angular neighbors, symmetrized.
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut by_angle: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (angular_distance(&directions[i], &directions[j]), j))
            .collect();
        by_angle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &(_, j) in by_angle.iter().take(k) {
            if !edges[i].contains(&j) {
                edges[i].push(j);
            }
            if !edges[j].contains(&i) {
                edges[j].push(i);
            }
        }
    }
    for list in &mut edges {
        list.sort_unstable();
    }

    // Floyd-Warshall over great-circle edge lengths.
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
        for &j in &edges[i] {
            let d = radius * angular_distance(&directions[i], &directions[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let through = dik + dist[k * n + j];
                if through < dist[i * n + j] {
                    dist[i * n + j] = through;
                }
            }
        }
    }
    if dist.iter().any(|d| !d.is_finite()) {
        return Err(GeometryError::InvalidArgument(
            "viewsphere graph is disconnected; increase k_neighbors".into(),
        ));
    }

    let move_cost = dist.iter().map(|d| d + g0).collect();
    Ok(ViewGraph {
        format_version: VIEWGRAPH_FORMAT_VERSION,
        viewpoints,
        radius,
        g0,
        edges,
        move_cost,
    })
}

/// Unit directions of a Fibonacci spiral lattice with `count` points.
///
/// Endpoint-inclusive in z (the first and last points are the poles), so
/// `count = 2` degenerates to an antipodal pair and an even lattice splits
/// evenly across the equator: a lattice of 84 has exactly 42 points with
/// `z >= 0`.
pub fn fibonacci_lattice(count: usize) -> Vec<Vector3<f64>> {
    assert!(count >= 2, "lattice needs at least 2 points");
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * i as f64 / (count as f64 - 1.0);
            let r = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden_angle * i as f64;
            Vector3::new(r * theta.cos(), r * theta.sin(), z)
        })
        .collect()
}

fn angular_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Great-circle distance between two viewpoints on the same sphere.
pub fn great_circle_distance(a: &Viewpoint, b: &Viewpoint) -> Result<f64, GeometryError> {
    let ra = a.radius();
    let rb = b.radius();
    if (ra - rb).abs() > 1e-9 * ra.max(rb) {
        return Err(GeometryError::InvalidArgument(format!(
            "viewpoints lie on different spheres (radii {ra} vs {rb})"
        )));
    }
    Ok(ra * angular_distance(&a.direction(), &b.direction()))
}

/// Rotation distance `d(q1, q2) = arccos(2 <q1, q2>^2 - 1)` in radians.
///
/// Invariant under sign flips of either argument, so it measures the
/// geodesic angle between the underlying rotations.
pub fn quaternion_distance(q1: &Quaternion<f64>, q2: &Quaternion<f64>) -> Result<f64, GeometryError> {
    for (name, q) in [("q1", q1), ("q2", q2)] {
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(GeometryError::InvalidArgument(format!(
                "{name} is not a unit quaternion (norm {})",
                q.norm()
            )));
        }
    }
    let dot = q1.coords.dot(&q2.coords);
    Ok((2.0 * dot * dot - 1.0).clamp(-1.0, 1.0).acos())
}

/// Sensor pose `w(x, r)` in the canonical frame of an object with
/// orientation `r`: the inverse object rotation applied to the sensor pose.
pub fn sensor_pose_in_object_frame(x: &Viewpoint, r: &UnitQuaternion<f64>) -> Pose {
    let inv = r.inverse();
    Pose {
        position: Point3::from(inv * x.position.coords),
        rotation: inv * x.orientation,
    }
}

/// Viewpoint of `graph` closest in angle to the position direction of `p`.
/// Ties break toward the lowest id.
pub fn nearest_viewpoint<'g>(p: &Pose, graph: &'g ViewGraph) -> &'g Viewpoint {
    assert!(!graph.is_empty(), "view graph has no viewpoints");
    let dir = p.position.coords.normalize();
    let mut best = 0usize;
    let mut best_angle = f64::INFINITY;
    for vp in &graph.viewpoints {
        let angle = angular_distance(&dir, &vp.direction());
        if angle < best_angle - 1e-12 {
            best_angle = angle;
            best = vp.id;
        }
    }
    &graph.viewpoints[best]
}
