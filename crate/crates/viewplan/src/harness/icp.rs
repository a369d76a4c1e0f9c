//! Rotation-only point-to-mesh ICP against a database model, used to
//! refine a discrete orientation decision into a continuous estimate.

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::sensing::{ObjectModel, Triangle};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iters: usize,
    /// Stop when the mean squared correspondence distance changes less.
    pub tol: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        // Generous cap: near-symmetric shapes (the 12-segment cone) creep
        // slowly along facet sliding directions before snapping in.
        IcpParams {
            max_iters: 300,
            tol: 1e-12,
        }
    }
}

/// Closest point to `p` on a triangle (Voronoi-region case analysis).
fn closest_on_triangle(p: &Point3<f64>, tri: &Triangle) -> Point3<f64> {
    let (a, b, c) = (tri[0], tri[1], tri[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Exact closest-point queries over a small mesh, pruned per triangle by a
/// bounding sphere around its vertices.
struct MeshIndex<'a> {
    tris: &'a [Triangle],
    centers: Vec<Point3<f64>>,
    radii: Vec<f64>,
}

impl<'a> MeshIndex<'a> {
    fn build(tris: &'a [Triangle]) -> MeshIndex<'a> {
        let centers: Vec<Point3<f64>> = tris
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let radii = tris
            .iter()
            .zip(&centers)
            .map(|(t, c)| t.iter().map(|v| (v - c).norm()).fold(0.0, f64::max))
            .collect();
        MeshIndex {
            tris,
            centers,
            radii,
        }
    }

    fn closest(&self, p: &Point3<f64>) -> Point3<f64> {
        let mut best = self.tris[0][0];
        let mut best_d2 = f64::INFINITY;
        for ((tri, center), radius) in self.tris.iter().zip(&self.centers).zip(&self.radii) {
            let lower = ((p - center).norm() - radius).max(0.0);
            if lower * lower >= best_d2 {
                continue;
            }
            let q = closest_on_triangle(p, tri);
            let d2 = (p - q).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best = q;
            }
        }
        best
    }
}

/// Refine an orientation estimate by aligning `cloud` (object-centered
/// world frame) to the model surface. Positions are known in this setting,
/// so only the rotation is solved, via SVD on the cross-covariance of
/// point-to-mesh correspondences.
pub fn icp_refine(
    cloud: &[Point3<f64>],
    model: &ObjectModel,
    init: &UnitQuaternion<f64>,
    params: &IcpParams,
) -> Result<UnitQuaternion<f64>, HarnessError> {
    if cloud.is_empty() || model.triangles.is_empty() {
        return Err(HarnessError::DegenerateInput(
            "icp needs a nonempty cloud and model".into(),
        ));
    }
    if params.max_iters == 0 || !(params.tol > 0.0) {
        return Err(HarnessError::InvalidArgument(
            "icp needs at least 1 iteration and a positive tolerance".into(),
        ));
    }
    let index = MeshIndex::build(&model.triangles);

    let mut rot = *init;
    let mut prev_mse = f64::INFINITY;
    for _ in 0..params.max_iters {
        let inv = rot.inverse();
        let mut h = Matrix3::zeros();
        let mut mse = 0.0;
        for c in cloud {
            let local = inv * c;
            let m = index.closest(&local);
            h += m.coords * c.coords.transpose();
            mse += (local - m).norm_squared();
        }
        mse /= cloud.len() as f64;
        let svd = h.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let v = v_t.transpose();
        let det = (v * u.transpose()).determinant();
        let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
        rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            v * d * u.transpose(),
        ));
        if (prev_mse - mse).abs() < params.tol {
            break;
        }
        prev_mse = mse;
    }
    Ok(rot)
}
