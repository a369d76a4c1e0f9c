//! Triangle-soup object models and the `.tri` ASCII interchange format.

use super::SensingError;
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

pub type Triangle = [Point3<f64>; 3];

/// A rigid object model: a triangle mesh in its canonical frame, with the
/// surface centroid at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub class_id: u32,
    pub name: String,
    pub triangles: Vec<Triangle>,
}

impl ObjectModel {
    pub fn new(class_id: u32, name: impl Into<String>, triangles: Vec<Triangle>) -> Self {
        ObjectModel {
            class_id,
            name: name.into(),
            triangles,
        }
    }

    /// Largest vertex distance from the origin.
    pub fn bounding_radius(&self) -> f64 {
        self.triangles
            .iter()
            .flatten()
            .map(|p| p.coords.norm())
            .fold(0.0, f64::max)
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles.iter().map(triangle_area).sum()
    }

    /// Area-weighted centroid of the surface.
    pub fn surface_centroid(&self) -> Point3<f64> {
        let mut accum = Vector3::zeros();
        let mut total = 0.0;
        for tri in &self.triangles {
            let area = triangle_area(tri);
            let center = (tri[0].coords + tri[1].coords + tri[2].coords) / 3.0;
            accum += center * area;
            total += area;
        }
        Point3::from(accum / total)
    }

    /// Translate so the surface centroid sits at the origin.
    pub fn recenter(&mut self) {
        let c = self.surface_centroid().coords;
        for tri in &mut self.triangles {
            for v in tri.iter_mut() {
                *v -= c;
            }
        }
    }

    /// Draw `n` points from the surface, area-weighted, uniform within each
    /// triangle. Deterministic given `seed`.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for tri in &self.triangles {
            total += triangle_area(tri);
            cumulative.push(total);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u = rng.gen_range(0.0..total);
                let idx = cumulative.partition_point(|&c| c <= u);
                let tri = &self.triangles[idx.min(self.triangles.len() - 1)];
                let (mut r1, mut r2) = (rng.gen::<f64>(), rng.gen::<f64>());
                if r1 + r2 > 1.0 {
                    r1 = 1.0 - r1;
                    r2 = 1.0 - r2;
                }
                tri[0] + (tri[1] - tri[0]) * r1 + (tri[2] - tri[0]) * r2
            })
            .collect()
    }

    /// Write the model in the `.tri` ASCII format: a header line
    /// `class_id name triangle_count`, then one line of 9 floats per
    /// triangle.
    pub fn save_tri(&self, path: &Path) -> Result<(), SensingError> {
        if self.name.split_whitespace().count() != 1 {
            return Err(SensingError::Format(format!(
                "model name {:?} must be a single token",
                self.name
            )));
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{} {} {}", self.class_id, self.name, self.triangles.len())?;
        for tri in &self.triangles {
            let mut parts = Vec::with_capacity(9);
            for v in tri {
                for c in [v.x, v.y, v.z] {
                    parts.push(format!("{c:?}"));
                }
            }
            writeln!(out, "{}", parts.join(" "))?;
        }
        Ok(())
    }

    pub fn load_tri(path: &Path) -> Result<Self, SensingError> {
        let file = std::fs::File::open(path)?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| SensingError::Format("empty .tri file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(SensingError::Format(format!(
                "bad .tri header {header:?}: expected `class_id name count`"
            )));
        }
        let class_id: u32 = fields[0]
            .parse()
            .map_err(|_| SensingError::Format(format!("bad class id {:?}", fields[0])))?;
        let name = fields[1].to_string();
        let count: usize = fields[2]
            .parse()
            .map_err(|_| SensingError::Format(format!("bad triangle count {:?}", fields[2])))?;
        let mut triangles = Vec::with_capacity(count);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|_| {
                SensingError::Format(format!("bad float on line {}", lineno + 2))
            })?;
            if vals.len() != 9 {
                return Err(SensingError::Format(format!(
                    "line {}: expected 9 floats, got {}",
                    lineno + 2,
                    vals.len()
                )));
            }
            triangles.push([
                Point3::new(vals[0], vals[1], vals[2]),
                Point3::new(vals[3], vals[4], vals[5]),
                Point3::new(vals[6], vals[7], vals[8]),
            ]);
        }
        if triangles.len() != count {
            return Err(SensingError::Format(format!(
                "header promised {count} triangles, found {}",
                triangles.len()
            )));
        }
        if triangles.is_empty() {
            return Err(SensingError::Format("model has no triangles".into()));
        }
        Ok(ObjectModel::new(class_id, name, triangles))
    }
}

pub fn triangle_area(tri: &Triangle) -> f64 {
    0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm()
}
