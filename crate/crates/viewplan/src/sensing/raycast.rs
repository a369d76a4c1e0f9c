//! Pinhole depth rendering of triangle scenes via BVH-accelerated ray
//! casting.
//!
//! Rays are cast through pixel centers with unnormalized direction
//! `(x, y, 1)` in the sensor frame, so the ray parameter at the nearest hit
//! *is* the depth coordinate. Rendered points are returned in the sensor
//! frame (z = depth, x/y = image plane in meters at the point's depth).

use super::mesh::{ObjectModel, Triangle};
use super::PointCloud;
use crate::geometry::Viewpoint;
use nalgebra::{Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Pinhole sensor geometry. `vfov` is the vertical field of view in
/// radians; pixels are square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorIntrinsics {
    pub width: u32,
    pub height: u32,
    pub vfov: f64,
}

impl Default for SensorIntrinsics {
    fn default() -> Self {
        SensorIntrinsics {
            width: 160,
            height: 120,
            vfov: 60f64.to_radians(),
        }
    }
}

impl SensorIntrinsics {
    pub fn new(width: u32, height: u32, vfov: f64) -> Self {
        assert!(width > 0 && height > 0, "resolution must be positive");
        assert!(
            vfov > 0.0 && vfov < std::f64::consts::PI,
            "vertical fov must lie in (0, pi)"
        );
        SensorIntrinsics { width, height, vfov }
    }

    /// Normalized image-plane coordinates of the center of pixel (u, v).
    fn pixel_dir(&self, u: u32, v: u32) -> Vector3<f64> {
        let scale = 2.0 * (self.vfov / 2.0).tan() / self.height as f64;
        Vector3::new(
            (u as f64 + 0.5 - self.width as f64 / 2.0) * scale,
            (v as f64 + 0.5 - self.height as f64 / 2.0) * scale,
            1.0,
        )
    }
}

/// Depth cloud with one object label per point.
#[derive(Debug, Clone, Default)]
pub struct LabeledCloud {
    pub points: Vec<Point3<f64>>,
    pub labels: Vec<u32>,
}

impl LabeledCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points carrying the given label.
    pub fn filter_label(&self, label: u32) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .zip(&self.labels)
                .filter(|&(_, &l)| l == label)
                .map(|(p, _)| *p)
                .collect(),
        }
    }

    pub fn into_cloud(self) -> PointCloud {
        PointCloud { points: self.points }
    }
}

const T_MIN: f64 = 1e-9;

fn ray_triangle(origin: &Point3<f64>, dir: &Vector3<f64>, tri: &Triangle) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - tri[0];
    let u = tvec.dot(&pvec) * inv_det;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > T_MIN).then_some(t)
}

#[derive(Debug, Clone)]
struct BvhNode {
    min: Vector3<f64>,
    max: Vector3<f64>,
    /// Leaf: range into `order`. Internal: `left == u32::MAX` marker unused;
    /// children stored as (left, right) node indices.
    left: u32,
    right: u32,
    start: u32,
    count: u32,
}

/// Bounding-volume hierarchy over a fixed triangle array.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(tris: &[Triangle]) -> Bvh {
        assert!(!tris.is_empty(), "cannot build a BVH over zero triangles");
        let centroids: Vec<Vector3<f64>> = tris
            .iter()
            .map(|t| (t[0].coords + t[1].coords + t[2].coords) / 3.0)
            .collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::new();
        Self::split(tris, &centroids, &mut order, 0, tris.len(), &mut nodes);
        Bvh { nodes, order }
    }

    fn split(
        tris: &[Triangle],
        centroids: &[Vector3<f64>],
        order: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<BvhNode>,
    ) -> u32 {
        let mut min = Vector3::repeat(f64::INFINITY);
        let mut max = Vector3::repeat(f64::NEG_INFINITY);
        for &i in &order[start..end] {
            for v in &tris[i as usize] {
                min = min.inf(&v.coords);
                max = max.sup(&v.coords);
            }
        }
        let index = nodes.len() as u32;
        nodes.push(BvhNode {
            min,
            max,
            left: 0,
            right: 0,
            start: start as u32,
            count: 0,
        });
        if end - start <= LEAF_SIZE {
            nodes[index as usize].count = (end - start) as u32;
            return index;
        }
        let mut cmin = Vector3::repeat(f64::INFINITY);
        let mut cmax = Vector3::repeat(f64::NEG_INFINITY);
        for &i in &order[start..end] {
            cmin = cmin.inf(&centroids[i as usize]);
            cmax = cmax.sup(&centroids[i as usize]);
        }
        let extent = cmax - cmin;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis]
                .partial_cmp(&centroids[b as usize][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let left = Self::split(tris, centroids, order, start, mid, nodes);
        let right = Self::split(tris, centroids, order, mid, end, nodes);
        nodes[index as usize].left = left;
        nodes[index as usize].right = right;
        index
    }

    fn aabb_hit(node: &BvhNode, origin: &Point3<f64>, inv_dir: &Vector3<f64>, t_best: f64) -> bool {
        let mut t_lo = T_MIN;
        let mut t_hi = t_best;
        for axis in 0..3 {
            let t1 = (node.min[axis] - origin[axis]) * inv_dir[axis];
            let t2 = (node.max[axis] - origin[axis]) * inv_dir[axis];
            t_lo = t_lo.max(t1.min(t2));
            t_hi = t_hi.min(t1.max(t2));
        }
        t_lo <= t_hi
    }

    /// Nearest intersection of the ray with any triangle, as (ray parameter,
    /// triangle index). The direction need not be normalized; the returned
    /// parameter is in units of `dir`.
    pub fn intersect(
        &self,
        tris: &[Triangle],
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
    ) -> Option<(f64, usize)> {
        let inv_dir = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0u32];
        while let Some(node_idx) = stack.pop() {
            let node = &self.nodes[node_idx as usize];
            let t_best = best.map_or(f64::INFINITY, |(t, _)| t);
            if !Self::aabb_hit(node, origin, &inv_dir, t_best) {
                continue;
            }
            if node.count > 0 {
                for &tri_idx in &self.order[node.start as usize..(node.start + node.count) as usize]
                {
                    if let Some(t) = ray_triangle(origin, dir, &tris[tri_idx as usize]) {
                        if best.is_none_or(|(bt, _)| t < bt) {
                            best = Some((t, tri_idx as usize));
                        }
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        best
    }
}

/// A static world-frame triangle scene with per-triangle object labels and
/// a prebuilt BVH. Build once per trial; render from many viewpoints.
#[derive(Debug, Clone)]
pub struct Scene {
    triangles: Vec<Triangle>,
    labels: Vec<u32>,
    bvh: Bvh,
}

#[derive(Debug, Clone, Default)]
pub struct SceneBuilder {
    triangles: Vec<Triangle>,
    labels: Vec<u32>,
}

impl SceneBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_triangles(&mut self, tris: &[Triangle], label: u32) -> &mut Self {
        self.triangles.extend_from_slice(tris);
        self.labels.extend(std::iter::repeat_n(label, tris.len()));
        self
    }

    /// Add a model posed in the world: `p_world = rotation * p_model + translation`.
    pub fn add_model(
        &mut self,
        model: &ObjectModel,
        rotation: &UnitQuaternion<f64>,
        translation: &Vector3<f64>,
        label: u32,
    ) -> &mut Self {
        for tri in &model.triangles {
            self.triangles.push([
                Point3::from(rotation * tri[0].coords + translation),
                Point3::from(rotation * tri[1].coords + translation),
                Point3::from(rotation * tri[2].coords + translation),
            ]);
            self.labels.push(label);
        }
        self
    }

    pub fn build(self) -> Scene {
        let bvh = Bvh::build(&self.triangles);
        Scene {
            triangles: self.triangles,
            labels: self.labels,
            bvh,
        }
    }
}

impl Scene {
    /// Render a labeled depth cloud from a world-frame sensor pose. Points
    /// come out in the sensor frame in pixel scan order; deterministic.
    pub fn render(
        &self,
        position: &Point3<f64>,
        rotation: &UnitQuaternion<f64>,
        intrinsics: &SensorIntrinsics,
    ) -> LabeledCloud {
        let mut cloud = LabeledCloud::default();
        for v in 0..intrinsics.height {
            for u in 0..intrinsics.width {
                let dir_sensor = intrinsics.pixel_dir(u, v);
                let dir_world = rotation * dir_sensor;
                if let Some((t, tri_idx)) = self.bvh.intersect(&self.triangles, position, &dir_world)
                {
                    cloud.points.push(Point3::from(dir_sensor * t));
                    cloud.labels.push(self.labels[tri_idx]);
                }
            }
        }
        cloud
    }

    pub fn render_from(&self, view: &Viewpoint, intrinsics: &SensorIntrinsics) -> LabeledCloud {
        self.render(&view.position, &view.orientation, intrinsics)
    }
}

/// Render a single model in its canonical pose from a viewpoint. Pixels
/// whose rays miss contribute nothing; a model fully outside the frustum
/// yields an empty cloud.
pub fn render_depth(
    model: &ObjectModel,
    view: &Viewpoint,
    resolution: (u32, u32),
    vfov: f64,
) -> PointCloud {
    let mut builder = SceneBuilder::new();
    builder.add_model(model, &UnitQuaternion::identity(), &Vector3::zeros(), 0);
    let scene = builder.build();
    let intrinsics = SensorIntrinsics::new(resolution.0, resolution.1, vfov);
    scene.render_from(view, &intrinsics).into_cloud()
}
