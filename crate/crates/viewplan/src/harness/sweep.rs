//! Orientation-accuracy sweep: ground-truth yaw/roll varied on a grid, a
//! short measurement protocol run per cell, and the decided hypothesis
//! refined by ICP against the true pose.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::belief::{bayes_update, Belief};
use crate::geometry::quaternion_distance;
use crate::policies::{gmi_policy, Action};
use crate::seed::derive_seed;

use super::icp::{icp_refine, IcpParams};
use super::scene::{stage_with_table, Placement};
use super::trial::{observe, TrialContext};
use super::{HarnessError, SEED_START, SEED_TRIAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub yaw_steps: usize,
    pub roll_steps: usize,
    pub repetitions: usize,
    /// Measurements taken before deciding; the sensor moves greedily.
    pub measurements: usize,
    pub icp: IcpParams,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            yaw_steps: 48,
            roll_steps: 48,
            repetitions: 1,
            measurements: 3,
            icp: IcpParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub yaw_deg: f64,
    pub roll_deg: f64,
    pub mean_error_rad: f64,
    /// Fraction of repetitions whose belief favored the null hypothesis.
    pub null_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    /// Mean error per yaw step, averaged over rolls and repetitions.
    pub yaw_curve: Vec<(f64, f64)>,
    pub mean_error_rad: f64,
}

/// Sweep ground truth `R_z(yaw) * R_x(roll)` over the grid. Each cell
/// renders an unoccluded object of the first interest class, takes a few
/// greedy measurements, picks the most probable interest hypothesis, and
/// refines its orientation with ICP on the accumulated world-frame cloud.
/// With `out`, writes sweep.csv, yaw_curve.csv, and yaw_curve.svg.
pub fn orientation_accuracy_sweep(
    ctx: &TrialContext,
    cfg: &SweepConfig,
    out: Option<&Path>,
) -> Result<SweepReport, HarnessError> {
    if cfg.yaw_steps == 0 || cfg.roll_steps == 0 || cfg.repetitions == 0 || cfg.measurements == 0 {
        return Err(HarnessError::InvalidArgument(
            "sweep needs at least one step, repetition, and measurement".into(),
        ));
    }
    let hyps = &ctx.h.hypotheses;
    let interest: Vec<usize> = (0..hyps.len())
        .filter(|&i| hyps.get(i).l == Some(1))
        .collect();
    if interest.is_empty() {
        return Err(HarnessError::InvalidArgument(
            "hypothesis set has no interest class".into(),
        ));
    }
    let model = 0usize;
    let graph = ctx.graph();
    let m = ctx.h.hypothesis_count();

    let mut cells = Vec::with_capacity(cfg.yaw_steps * cfg.roll_steps);
    let mut yaw_acc = vec![0.0f64; cfg.yaw_steps];
    for iy in 0..cfg.yaw_steps {
        let yaw = iy as f64 / cfg.yaw_steps as f64 * std::f64::consts::TAU;
        for ir in 0..cfg.roll_steps {
            let roll = ir as f64 / cfg.roll_steps as f64 * std::f64::consts::TAU;
            let truth = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
                * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), roll);
            let stage = stage_with_table(
                &[Placement {
                    model,
                    orientation: truth,
                    translation: Vector3::zeros(),
                }],
                ctx.models,
                None,
            );
            let mut err_sum = 0.0;
            let mut nulls = 0usize;
            for rep in 0..cfg.repetitions {
                let tags = [iy as u64, ir as u64, rep as u64];
                let mut x = (derive_seed(cfg.seed, &[SEED_START, tags[0], tags[1], tags[2]])
                    % graph.len() as u64) as usize;
                let trial_seed = derive_seed(cfg.seed, &[SEED_TRIAL, tags[0], tags[1], tags[2]]);
                let mut p = Belief::uniform(m);
                let mut visited = vec![false; graph.len()];
                visited[x] = true;
                let mut cloud: Vec<Point3<f64>> = Vec::new();
                for step in 0..cfg.measurements {
                    let view = graph.viewpoint(x);
                    let meas = observe(
                        ctx,
                        &stage,
                        0,
                        &view.position,
                        &view.orientation,
                        derive_seed(trial_seed, &[step as u64]),
                    )?;
                    p = bayes_update(&p, x, meas.z, meas.psi, ctx.h)?;
                    cloud.extend(meas.world_points);
                    if step + 1 < cfg.measurements {
                        // Threshold 1.0 keeps GMI exploring (information
                        // only); it can still stop by exhaustion.
                        match gmi_policy(x, &p, &visited, ctx.h, 1.0) {
                            Action::MoveTo(next) => {
                                x = next;
                                visited[x] = true;
                            }
                            Action::Decide(_) => break,
                        }
                    }
                }
                if p.argmax() == hyps.null_index() {
                    nulls += 1;
                }
                // The protocol's object is always the interest model, so
                // take the most probable interest hypothesis as the
                // discrete estimate even when the null leads.
                let best = *interest
                    .iter()
                    .max_by(|&&a, &&b| p.prob(a).partial_cmp(&p.prob(b)).unwrap().then(b.cmp(&a)))
                    .unwrap();
                let refined = icp_refine(&cloud, &ctx.models[model], &hyps.get(best).orientation, &cfg.icp)?;
                err_sum += quaternion_distance(refined.quaternion(), truth.quaternion())?;
            }
            let mean_err = err_sum / cfg.repetitions as f64;
            yaw_acc[iy] += mean_err;
            cells.push(SweepCell {
                yaw_deg: yaw.to_degrees(),
                roll_deg: roll.to_degrees(),
                mean_error_rad: mean_err,
                null_rate: nulls as f64 / cfg.repetitions as f64,
            });
        }
    }
    let yaw_curve: Vec<(f64, f64)> = yaw_acc
        .iter()
        .enumerate()
        .map(|(iy, &sum)| {
            (
                iy as f64 / cfg.yaw_steps as f64 * 360.0,
                sum / cfg.roll_steps as f64,
            )
        })
        .collect();
    let mean_error_rad =
        cells.iter().map(|c| c.mean_error_rad).sum::<f64>() / cells.len() as f64;
    let report = SweepReport {
        cells,
        yaw_curve,
        mean_error_rad,
    };
    if let Some(dir) = out {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

fn write_outputs(report: &SweepReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut csv = String::from("yaw_deg,roll_deg,mean_error_rad,null_rate\n");
    for c in &report.cells {
        writeln!(
            csv,
            "{},{},{},{}",
            c.yaw_deg, c.roll_deg, c.mean_error_rad, c.null_rate
        )
        .expect("string write");
    }
    std::fs::write(dir.join("sweep.csv"), csv)?;

    let mut curve = String::from("yaw_deg,mean_error_rad\n");
    for (yaw, err) in &report.yaw_curve {
        writeln!(curve, "{yaw},{err}").expect("string write");
    }
    std::fs::write(dir.join("yaw_curve.csv"), curve)?;
    std::fs::write(dir.join("yaw_curve.svg"), curve_svg(report))?;
    Ok(())
}


/// Polyline of the yaw-averaged error curve.
fn curve_svg(report: &SweepReport) -> String {
    let (width, height, ml, mb) = (640.0, 320.0, 50.0, 30.0);
    let max = report
        .yaw_curve
        .iter()
        .map(|&(_, e)| e)
        .fold(1e-12, f64::max);
    let pts: Vec<String> = report
        .yaw_curve
        .iter()
        .map(|&(yaw, err)| {
            let px = ml + (width - ml - 10.0) * yaw / 360.0;
            let py = (height - mb) * (1.0 - err / max) + 8.0;
            format!("{px:.2},{py:.2}")
        })
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"monospace\" font-size=\"12\">\n\
         <text x=\"{ml}\" y=\"16\">yaw-averaged orientation error (max {max:.3} rad)</text>\n\
         <line x1=\"{ml}\" y1=\"{ybase}\" x2=\"{xend}\" y2=\"{ybase}\" stroke=\"#999\"/>\n\
         <text x=\"{ml}\" y=\"{ytext}\">0</text>\n\
         <text x=\"{xend2}\" y=\"{ytext}\">360</text>\n\
         <polyline fill=\"none\" stroke=\"#a84848\" stroke-width=\"1.5\" points=\"{points}\"/>\n\
         </svg>\n",
        ybase = height - mb + 8.0,
        xend = width - 10.0,
        xend2 = width - 40.0,
        ytext = height - 8.0,
        points = pts.join(" "),
    )
}
