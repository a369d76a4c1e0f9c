//! Command-line driver: staged artifact builds and experiment runs.
//!
//! Artifacts form a hash chain (vptree → nominal model → planning model →
//! policy); every stage that loads an upstream artifact verifies the chain
//! and the process exits nonzero on any mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use viewplan::belief::CostSpec;
use viewplan::harness::{
    build_nominal, derive_planning, orientation_accuracy_sweep, run_benchmark, train_detector,
    Policy, ScenarioSpec, SweepConfig, TrialContext,
};
use viewplan::obsmodel::{NominalObsModel, PlanningObsModel};
use viewplan::policies::{nvp_solve, PbviSolution};
use viewplan::sensing::ObjectModel;
use viewplan::vptree::VpTree;

const TREE_FILE: &str = "vptree.json";
const NOMINAL_FILE: &str = "nominal_model.json";
const PLANNING_FILE: &str = "planning_model.json";
const POLICY_FILE: &str = "policy.json";

#[derive(Parser)]
#[command(
    name = "viewplan",
    version,
    about = "Nonmyopic view planning for active object detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config, TOML.
    #[arg(long)]
    config: PathBuf,
    /// Directory for artifacts and outputs.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Render training templates and train the VP-Tree detector.
    TrainVptree(Common),
    /// Build the nominal observation model (needs vptree.json).
    BuildObsmodel(Common),
    /// Derive the planning observation model (needs nominal_model.json).
    DeriveObsmodel(Common),
    /// Solve for the nonmyopic policy (needs planning_model.json).
    Solve(Common),
    /// Run the policy-comparison benchmark.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of: static, random, gmi, nvp.
        #[arg(long, default_value = "static,random,gmi,nvp", value_delimiter = ',')]
        policies: Vec<String>,
    },
    /// Sweep ground-truth orientation and report ICP-refined error.
    OrientSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 48)]
        yaw_steps: usize,
        #[arg(long, default_value_t = 1)]
        roll_steps: usize,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        /// Measurements taken before the orientation decision.
        #[arg(long, default_value_t = 3)]
        measurements: usize,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::TrainVptree(c) => train_vptree(&c),
        Command::BuildObsmodel(c) => build_obsmodel(&c),
        Command::DeriveObsmodel(c) => derive_obsmodel(&c),
        Command::Solve(c) => solve(&c),
        Command::Bench { common, policies } => bench(&common, &policies),
        Command::OrientSweep {
            common,
            yaw_steps,
            roll_steps,
            repetitions,
            measurements,
        } => orient_sweep(&common, yaw_steps, roll_steps, repetitions, measurements),
    }
}

/// Load the config, apply flag overrides, and prepare the output dir.
fn setup(common: &Common) -> Result<ScenarioSpec> {
    if common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
            .context("initializing the thread pool")?;
    }
    let mut spec = ScenarioSpec::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    Ok(spec)
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

fn load_tree(out: &Path) -> Result<VpTree> {
    VpTree::load(&out.join(TREE_FILE))
        .with_context(|| format!("loading {TREE_FILE}; (re)build it with train-vptree"))
}

fn load_nominal(out: &Path, tree: &VpTree) -> Result<NominalObsModel> {
    NominalObsModel::load(&out.join(NOMINAL_FILE), Some(tree))
        .with_context(|| format!("loading {NOMINAL_FILE}; (re)build it with build-obsmodel"))
}

fn load_planning(out: &Path, nominal: &NominalObsModel) -> Result<PlanningObsModel> {
    PlanningObsModel::load(&out.join(PLANNING_FILE), Some(nominal))
        .with_context(|| format!("loading {PLANNING_FILE}; (re)build it with derive-obsmodel"))
}

/// The verified artifact chain plus everything a `TrialContext` borrows.
struct Chain {
    spec: ScenarioSpec,
    models: Vec<ObjectModel>,
    tree: VpTree,
    planning: PlanningObsModel,
    costs: CostSpec,
}

impl Chain {
    fn load(spec: ScenarioSpec, out: &Path) -> Result<Chain> {
        let (models, _) = spec.ordered_models()?;
        let tree = load_tree(out)?;
        let nominal = load_nominal(out, &tree)?;
        let planning = load_planning(out, &nominal)?;
        let costs = spec.costs(&spec.hypotheses()?)?;
        Ok(Chain {
            spec,
            models,
            tree,
            planning,
            costs,
        })
    }

    fn context(&self) -> Result<TrialContext<'_>> {
        Ok(TrialContext::new(
            &self.models,
            &self.tree,
            &self.planning,
            &self.costs,
            &self.spec,
        )?)
    }
}

fn train_vptree(c: &Common) -> Result<()> {
    let spec = setup(c)?;
    let t0 = Instant::now();
    let tree = train_detector(&spec)?;
    let path = c.out.join(TREE_FILE);
    tree.save(&path)?;
    println!(
        "vp-tree: {} viewpoints x {} models, hash {} ({:.1}s) -> {}",
        tree.g_count,
        tree.model_names.len(),
        short(&tree.content_hash()),
        t0.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn build_obsmodel(c: &Common) -> Result<()> {
    let spec = setup(c)?;
    let tree = load_tree(&c.out)?;
    let t0 = Instant::now();
    let nominal = build_nominal(&spec, &tree)?;
    let path = c.out.join(NOMINAL_FILE);
    nominal.save(&path)?;
    println!(
        "nominal model: {} rows x {} observations, hash {} ({:.1}s) -> {}",
        nominal.row_count(),
        nominal.obs_count,
        short(&nominal.content_hash()),
        t0.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn derive_obsmodel(c: &Common) -> Result<()> {
    let spec = setup(c)?;
    let tree = load_tree(&c.out)?;
    let nominal = load_nominal(&c.out, &tree)?;
    let t0 = Instant::now();
    let planning = derive_planning(&spec, &nominal)?;
    let path = c.out.join(PLANNING_FILE);
    planning.save(&path)?;
    println!(
        "planning model: {} viewpoints x {} hypotheses, hash {} ({:.1}s) -> {}",
        planning.viewsphere.len(),
        planning.hypothesis_count(),
        short(&planning.content_hash()),
        t0.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn solve(c: &Common) -> Result<()> {
    let spec = setup(c)?;
    let chain = Chain::load(spec, &c.out)?;
    let t0 = Instant::now();
    let solution = nvp_solve(&chain.planning, &chain.costs, &chain.spec.solver)?;
    let path = c.out.join(POLICY_FILE);
    solution.save(&path)?;
    let alphas: usize = solution.alphas.iter().map(Vec::len).sum();
    println!(
        "policy: {} alpha vectors, converged={} after {} iterations, residual {:.2e} ({:.1}s) -> {}",
        alphas,
        solution.converged,
        solution.iterations,
        solution.residual,
        t0.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn bench(c: &Common, names: &[String]) -> Result<()> {
    let spec = setup(c)?;
    let chain = Chain::load(spec, &c.out)?;

    let mut seen = Vec::new();
    for name in names {
        if seen.contains(name) {
            bail!("policy {name} listed twice");
        }
        if !matches!(name.as_str(), "static" | "random" | "gmi" | "nvp") {
            bail!("unknown policy {name}; expected static, random, gmi, or nvp");
        }
        seen.push(name.clone());
    }
    let solution = if names.iter().any(|n| n == "nvp") {
        Some(
            PbviSolution::load(&c.out.join(POLICY_FILE), Some(&chain.planning))
                .with_context(|| format!("loading {POLICY_FILE}; (re)build it with solve"))?,
        )
    } else {
        None
    };
    let policies: Vec<Policy> = names
        .iter()
        .map(|n| match n.as_str() {
            "static" => Policy::Static,
            "random" => Policy::RandomWalk,
            "gmi" => Policy::Gmi,
            _ => Policy::Nonmyopic(solution.as_ref().expect("loaded above")),
        })
        .collect();

    let ctx = chain.context()?;
    let t0 = Instant::now();
    let report = run_benchmark(&ctx, &policies, Some(&c.out))?;
    println!(
        "benchmark: {} scenes x {} repetitions ({:.1}s) -> {}",
        chain.spec.scenes,
        chain.spec.repetitions,
        t0.elapsed().as_secs_f64(),
        c.out.display()
    );
    for s in &report.policies {
        println!(
            "  {:>6}: accuracy {:5.1}%  mean total {:7.2}  mean tau {:5.2}  forced {}",
            s.policy, s.accuracy, s.mean_total_cost, s.mean_tau, s.forced
        );
    }
    Ok(())
}

fn orient_sweep(
    c: &Common,
    yaw_steps: usize,
    roll_steps: usize,
    repetitions: usize,
    measurements: usize,
) -> Result<()> {
    let spec = setup(c)?;
    let chain = Chain::load(spec, &c.out)?;
    let cfg = SweepConfig {
        yaw_steps,
        roll_steps,
        repetitions,
        measurements,
        seed: chain.spec.seed,
        ..SweepConfig::default()
    };
    let ctx = chain.context()?;
    let t0 = Instant::now();
    let report = orientation_accuracy_sweep(&ctx, &cfg, Some(&c.out))?;
    println!(
        "sweep: {} x {} cells, mean error {:.1} deg ({:.1}s) -> {}",
        yaw_steps,
        roll_steps,
        report.mean_error_rad.to_degrees(),
        t0.elapsed().as_secs_f64(),
        c.out.display()
    );
    Ok(())
}
