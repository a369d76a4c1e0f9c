//! Policy x scene x repetition benchmark with deterministic seeding and
//! CSV / JSON / SVG outputs.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::derive_seed;

use super::scene::{generate_scene, Scene};
use super::trial::{run_trial, Policy, TrialContext};
use super::{HarnessError, SEED_SCENE, SEED_START, SEED_TRIAL};

/// One trial's outcome, flattened for tabular output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub policy: String,
    pub scene: usize,
    pub repetition: usize,
    pub start: usize,
    pub true_hypothesis: usize,
    pub decided: usize,
    pub correct: bool,
    pub forced: bool,
    pub tau: usize,
    pub measurement_cost: f64,
    pub movement_cost: f64,
    pub decision_cost: f64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub trials: usize,
    /// Percent of trials whose decision matched the true hypothesis.
    pub accuracy: f64,
    pub forced: usize,
    pub mean_tau: f64,
    pub mean_measurement_cost: f64,
    pub mean_movement_cost: f64,
    pub mean_decision_cost: f64,
    pub mean_total_cost: f64,
    /// Row per true hypothesis, column per decision, percentages.
    pub confusion: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub hypothesis_names: Vec<String>,
    pub policies: Vec<PolicySummary>,
    pub records: Vec<TrialRecord>,
}

impl BenchmarkReport {
    pub fn policy(&self, name: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == name)
    }
}

/// Run the full cross product. Scenes, start viewpoints, and trial seeds
/// depend only on (spec.seed, scene, repetition), so every policy faces
/// identical conditions. Aggregation order is fixed; thread count does not
/// affect the results. With `out`, writes trials.csv, summary.csv,
/// per-policy confusion CSVs, summary.json, and totals.svg.
pub fn run_benchmark(
    ctx: &TrialContext,
    policies: &[Policy],
    out: Option<&Path>,
) -> Result<BenchmarkReport, HarnessError> {
    if policies.is_empty() {
        return Err(HarnessError::InvalidArgument("no policies given".into()));
    }
    let spec = ctx.spec;
    let m = ctx.h.hypothesis_count();
    let x_count = ctx.graph().len();

    let scenes: Vec<Scene> = (0..spec.scenes)
        .map(|s| {
            generate_scene(
                spec,
                ctx.models,
                ctx.tree.interest_count,
                &ctx.h.hypotheses,
                s % m,
                derive_seed(spec.seed, &[SEED_SCENE, s as u64]),
            )
        })
        .collect::<Result<_, _>>()?;
    let stages: Vec<_> = scenes.par_iter().map(|sc| sc.stage(ctx.models)).collect();

    let mut records = Vec::with_capacity(policies.len() * spec.scenes * spec.repetitions);
    for policy in policies {
        for (s, (scene, stage)) in scenes.iter().zip(&stages).enumerate() {
            let reps: Vec<TrialRecord> = (0..spec.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let start = (derive_seed(spec.seed, &[SEED_START, s as u64, rep as u64])
                        % x_count as u64) as usize;
                    let trial_seed = derive_seed(spec.seed, &[SEED_TRIAL, s as u64, rep as u64]);
                    let r = run_trial(ctx, policy, scene, stage, start, trial_seed)?;
                    Ok(TrialRecord {
                        policy: policy.name().into(),
                        scene: s,
                        repetition: rep,
                        start,
                        true_hypothesis: r.true_hypothesis,
                        decided: r.decided,
                        correct: r.correct(),
                        forced: r.forced,
                        tau: r.tau(),
                        measurement_cost: r.measurement_cost,
                        movement_cost: r.movement_cost,
                        decision_cost: r.decision_cost,
                        total_cost: r.total_cost(),
                    })
                })
                .collect::<Result<_, HarnessError>>()?;
            records.extend(reps);
        }
    }

    let hypothesis_names: Vec<String> =
        ctx.h.hypotheses.iter().map(|h| h.name.clone()).collect();
    let summaries = policies
        .iter()
        .map(|p| summarize(p.name(), &records, m))
        .collect();
    let report = BenchmarkReport {
        hypothesis_names,
        policies: summaries,
        records,
    };
    if let Some(dir) = out {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

fn summarize(name: &str, records: &[TrialRecord], m: usize) -> PolicySummary {
    let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.policy == name).collect();
    let n = rows.len().max(1) as f64;
    let mut confusion = vec![vec![0.0f64; m]; m];
    for r in &rows {
        confusion[r.true_hypothesis][r.decided] += 1.0;
    }
    for row in &mut confusion {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for v in row.iter_mut() {
                *v *= 100.0 / total;
            }
        }
    }
    let mean = |f: &dyn Fn(&TrialRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    PolicySummary {
        policy: name.into(),
        trials: rows.len(),
        accuracy: 100.0 * rows.iter().filter(|r| r.correct).count() as f64 / n,
        forced: rows.iter().filter(|r| r.forced).count(),
        mean_tau: mean(&|r| r.tau as f64),
        mean_measurement_cost: mean(&|r| r.measurement_cost),
        mean_movement_cost: mean(&|r| r.movement_cost),
        mean_decision_cost: mean(&|r| r.decision_cost),
        mean_total_cost: mean(&|r| r.total_cost),
        confusion,
    }
}

fn write_outputs(report: &BenchmarkReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;

    let mut trials = String::from(
        "policy,scene,repetition,start,true_hypothesis,decided,correct,forced,tau,\
         measurement_cost,movement_cost,decision_cost,total_cost\n",
    );
    for r in &report.records {
        writeln!(
            trials,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.scene,
            r.repetition,
            r.start,
            r.true_hypothesis,
            r.decided,
            r.correct,
            r.forced,
            r.tau,
            r.measurement_cost,
            r.movement_cost,
            r.decision_cost,
            r.total_cost
        )
        .expect("string write");
    }
    std::fs::write(dir.join("trials.csv"), trials)?;

    let mut summary = String::from(
        "policy,trials,accuracy,forced,mean_tau,mean_measurement_cost,mean_movement_cost,\
         mean_decision_cost,mean_total_cost\n",
    );
    for p in &report.policies {
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{}",
            p.policy,
            p.trials,
            p.accuracy,
            p.forced,
            p.mean_tau,
            p.mean_measurement_cost,
            p.mean_movement_cost,
            p.mean_decision_cost,
            p.mean_total_cost
        )
        .expect("string write");
    }
    std::fs::write(dir.join("summary.csv"), summary)?;

    for p in &report.policies {
        let mut csv = String::from("true_hypothesis");
        for name in &report.hypothesis_names {
            write!(csv, ",{name}").expect("string write");
        }
        csv.push('\n');
        for (t, row) in p.confusion.iter().enumerate() {
            write!(csv, "{}", report.hypothesis_names[t]).expect("string write");
            for v in row {
                write!(csv, ",{v}").expect("string write");
            }
            csv.push('\n');
        }
        std::fs::write(dir.join(format!("confusion_{}.csv", p.policy)), csv)?;
    }

    let json = serde_json::to_vec_pretty(report)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), json)?;
    std::fs::write(dir.join("totals.svg"), totals_svg(report))?;
    Ok(())
}


/// Minimal bar chart of mean total cost per policy.
fn totals_svg(report: &BenchmarkReport) -> String {
    let n = report.policies.len();
    let (width, bar_h, gap, left) = (440.0, 28.0, 14.0, 90.0);
    let height = 40.0 + n as f64 * (bar_h + gap);
    let max = report
        .policies
        .iter()
        .map(|p| p.mean_total_cost)
        .fold(1e-12, f64::max);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"monospace\" font-size=\"12\">\n\
         <text x=\"{left}\" y=\"18\">mean total cost</text>\n"
    );
    for (i, p) in report.policies.iter().enumerate() {
        let y = 30.0 + i as f64 * (bar_h + gap);
        let w = (width - left - 80.0) * p.mean_total_cost / max;
        write!(
            svg,
            "<text x=\"4\" y=\"{ty}\">{name}</text>\n\
             <rect x=\"{left}\" y=\"{y}\" width=\"{w:.2}\" height=\"{bar_h}\" fill=\"#4878a8\"/>\n\
             <text x=\"{vx:.2}\" y=\"{ty}\">{v:.2}</text>\n",
            ty = y + bar_h - 9.0,
            name = p.policy,
            vx = left + w + 6.0,
            v = p.mean_total_cost,
        )
        .expect("string write");
    }
    svg.push_str("</svg>\n");
    svg
}
