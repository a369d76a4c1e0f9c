//! Procedurally generated low-poly object models.
//!
//! Every model in [`standard_database`] carries deliberate asymmetries
//! (handles, spouts, fins, bumps) so that its orientation about any axis is
//! identifiable from surface geometry alone — no model coincides with a
//! rotated copy of itself. All dimensions are desk-scale meters; the
//! canonical frame has the surface centroid at the origin with +z as the
//! model's "up" before recentering.

use super::mesh::{ObjectModel, Triangle};
use nalgebra::{Point3, UnitQuaternion, Vector3};

pub fn push_quad(tris: &mut Vec<Triangle>, [a, b, c, d]: [Point3<f64>; 4]) {
    tris.push([a, b, c]);
    tris.push([a, c, d]);
}

pub fn push_box(tris: &mut Vec<Triangle>, center: Point3<f64>, half: Vector3<f64>) {
    let corner = |sx: f64, sy: f64, sz: f64| {
        center + Vector3::new(sx * half.x, sy * half.y, sz * half.z)
    };
    // -x, +x, -y, +y, -z, +z faces.
    push_quad(tris, [corner(-1.0, -1.0, -1.0), corner(-1.0, -1.0, 1.0), corner(-1.0, 1.0, 1.0), corner(-1.0, 1.0, -1.0)]);
    push_quad(tris, [corner(1.0, -1.0, -1.0), corner(1.0, 1.0, -1.0), corner(1.0, 1.0, 1.0), corner(1.0, -1.0, 1.0)]);
    push_quad(tris, [corner(-1.0, -1.0, -1.0), corner(1.0, -1.0, -1.0), corner(1.0, -1.0, 1.0), corner(-1.0, -1.0, 1.0)]);
    push_quad(tris, [corner(-1.0, 1.0, -1.0), corner(-1.0, 1.0, 1.0), corner(1.0, 1.0, 1.0), corner(1.0, 1.0, -1.0)]);
    push_quad(tris, [corner(-1.0, -1.0, -1.0), corner(-1.0, 1.0, -1.0), corner(1.0, 1.0, -1.0), corner(1.0, -1.0, -1.0)]);
    push_quad(tris, [corner(-1.0, -1.0, 1.0), corner(1.0, -1.0, 1.0), corner(1.0, 1.0, 1.0), corner(-1.0, 1.0, 1.0)]);
}

pub fn push_cylinder(
    tris: &mut Vec<Triangle>,
    base_center: Point3<f64>,
    radius: f64,
    height: f64,
    segments: usize,
) {
    let top_center = base_center + Vector3::new(0.0, 0.0, height);
    let ring = |center: Point3<f64>, i: usize| {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
        center + Vector3::new(radius * theta.cos(), radius * theta.sin(), 0.0)
    };
    for i in 0..segments {
        let j = (i + 1) % segments;
        push_quad(
            tris,
            [ring(base_center, i), ring(base_center, j), ring(top_center, j), ring(top_center, i)],
        );
        tris.push([base_center, ring(base_center, j), ring(base_center, i)]);
        tris.push([top_center, ring(top_center, i), ring(top_center, j)]);
    }
}

pub fn push_cone(
    tris: &mut Vec<Triangle>,
    base_center: Point3<f64>,
    radius: f64,
    height: f64,
    segments: usize,
) {
    let apex = base_center + Vector3::new(0.0, 0.0, height);
    let ring = |i: usize| {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
        base_center + Vector3::new(radius * theta.cos(), radius * theta.sin(), 0.0)
    };
    for i in 0..segments {
        let j = (i + 1) % segments;
        tris.push([apex, ring(i), ring(j)]);
        tris.push([base_center, ring(j), ring(i)]);
    }
}

/// Rigidly transform triangles in place.
pub fn transform(tris: &mut [Triangle], rotation: &UnitQuaternion<f64>, translation: &Vector3<f64>) {
    for tri in tris.iter_mut() {
        for v in tri.iter_mut() {
            *v = Point3::from(rotation * v.coords + translation);
        }
    }
}

/// Tessellated sphere (slices around z, stacks pole to pole). Useful as a
/// render-oracle target; deliberately not part of the model database since a
/// sphere has no identifiable orientation.
pub fn uv_sphere(radius: f64, slices: usize, stacks: usize) -> Vec<Triangle> {
    let vertex = |s: usize, t: usize| {
        let phi = std::f64::consts::PI * t as f64 / stacks as f64;
        let theta = 2.0 * std::f64::consts::PI * s as f64 / slices as f64;
        Point3::new(
            radius * phi.sin() * theta.cos(),
            radius * phi.sin() * theta.sin(),
            radius * phi.cos(),
        )
    };
    let mut tris = Vec::new();
    for t in 0..stacks {
        for s in 0..slices {
            let s1 = (s + 1) % slices;
            let (a, b, c, d) = (vertex(s, t), vertex(s, t + 1), vertex(s1, t + 1), vertex(s1, t));
            if t > 0 {
                tris.push([a, b, d]);
            }
            if t + 1 < stacks {
                tris.push([b, c, d]);
            }
        }
    }
    tris
}

/// Cylindrical bottle with a narrow neck and a D-shaped side handle.
pub fn handlebottle() -> ObjectModel {
    let mut tris = Vec::new();
    push_cylinder(&mut tris, Point3::origin(), 0.05, 0.20, 10);
    push_cylinder(&mut tris, Point3::new(0.0, 0.0, 0.20), 0.018, 0.06, 8);
    push_box(&mut tris, Point3::new(0.085, 0.0, 0.125), Vector3::new(0.012, 0.010, 0.045));
    push_box(&mut tris, Point3::new(0.0675, 0.0, 0.180), Vector3::new(0.030, 0.010, 0.010));
    push_box(&mut tris, Point3::new(0.0675, 0.0, 0.070), Vector3::new(0.030, 0.010, 0.010));
    let mut m = ObjectModel::new(0, "handlebottle", tris);
    m.recenter();
    m
}

/// Boxy can with an angled spout on one side and a top handle on the other.
pub fn watercan() -> ObjectModel {
    let mut tris = Vec::new();
    push_box(&mut tris, Point3::new(0.0, 0.0, 0.085), Vector3::new(0.070, 0.045, 0.085));
    let mut spout = Vec::new();
    push_cylinder(&mut spout, Point3::origin(), 0.015, 0.10, 8);
    transform(
        &mut spout,
        &UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 50f64.to_radians()),
        &Vector3::new(0.065, 0.0, 0.130),
    );
    tris.extend(spout);
    push_box(&mut tris, Point3::new(-0.020, 0.0, 0.190), Vector3::new(0.050, 0.008, 0.008));
    push_box(&mut tris, Point3::new(-0.065, 0.0, 0.180), Vector3::new(0.008, 0.008, 0.014));
    push_box(&mut tris, Point3::new(0.025, 0.0, 0.180), Vector3::new(0.008, 0.008, 0.014));
    let mut m = ObjectModel::new(1, "watercan", tris);
    m.recenter();
    m
}

/// Rectangular box with a corner bump that breaks its 180-degree symmetries.
pub fn notchbox() -> ObjectModel {
    let mut tris = Vec::new();
    push_box(&mut tris, Point3::origin(), Vector3::new(0.060, 0.040, 0.025));
    push_box(&mut tris, Point3::new(0.066, 0.025, 0.012), Vector3::new(0.008, 0.010, 0.009));
    let mut m = ObjectModel::new(2, "box", tris);
    m.recenter();
    m
}

/// Cylinder with a side fin and an off-axis top bump.
pub fn fincylinder() -> ObjectModel {
    let mut tris = Vec::new();
    push_cylinder(&mut tris, Point3::origin(), 0.045, 0.18, 10);
    push_box(&mut tris, Point3::new(0.055, 0.0, 0.070), Vector3::new(0.014, 0.006, 0.050));
    push_cylinder(&mut tris, Point3::new(0.020, 0.0, 0.18), 0.012, 0.02, 8);
    let mut m = ObjectModel::new(3, "cylinder", tris);
    m.recenter();
    m
}

/// Squat cylinder with a side handle mounted off-center in height.
pub fn mug() -> ObjectModel {
    let mut tris = Vec::new();
    push_cylinder(&mut tris, Point3::origin(), 0.05, 0.10, 12);
    push_box(&mut tris, Point3::new(0.075, 0.0, 0.060), Vector3::new(0.010, 0.008, 0.028));
    push_box(&mut tris, Point3::new(0.0625, 0.0, 0.085), Vector3::new(0.0225, 0.008, 0.008));
    push_box(&mut tris, Point3::new(0.0625, 0.0, 0.035), Vector3::new(0.0225, 0.008, 0.012));
    let mut m = ObjectModel::new(4, "mug", tris);
    m.recenter();
    m
}

/// Cone with a tab near the base rim.
pub fn tabcone() -> ObjectModel {
    let mut tris = Vec::new();
    push_cone(&mut tris, Point3::origin(), 0.06, 0.16, 12);
    push_box(&mut tris, Point3::new(0.055, 0.020, 0.010), Vector3::new(0.012, 0.008, 0.010));
    let mut m = ObjectModel::new(5, "cone", tris);
    m.recenter();
    m
}

/// The six shipped models, indexed by `class_id`.
pub fn standard_database() -> Vec<ObjectModel> {
    vec![
        handlebottle(),
        watercan(),
        notchbox(),
        fincylinder(),
        mug(),
        tabcone(),
    ]
}
