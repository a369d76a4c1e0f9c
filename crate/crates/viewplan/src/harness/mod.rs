//! Experiment harness: scenario configuration, scene generation, trial
//! execution, ICP refinement, benchmarking, and orientation sweeps.

pub mod bench;
pub mod icp;
pub mod scenario;
pub mod scene;
pub mod sweep;
pub mod trial;

pub use bench::{run_benchmark, BenchmarkReport, PolicySummary, TrialRecord};
pub use icp::{icp_refine, IcpParams};
pub use scenario::{
    build_artifacts, build_nominal, build_training_set, derive_planning, train_detector,
    Artifacts, OccluderSpec, ScenarioSpec,
};
pub use scene::{generate_scene, Placement, Scene, TABLE_LABEL};
pub use sweep::{orientation_accuracy_sweep, SweepCell, SweepConfig, SweepReport};
pub use trial::{run_multi_object, run_trial, MultiScene, Policy, TrialContext, TrialResult};

// Seed-derivation tags, one namespace per randomness consumer.
pub(crate) const SEED_SCENE: u64 = 1;
pub(crate) const SEED_START: u64 = 2;
pub(crate) const SEED_TRIAL: u64 = 3;
pub(crate) const SEED_TEMPLATE: u64 = 10;
pub(crate) const SEED_NOMINAL: u64 = 11;
pub(crate) const SEED_TREE: u64 = 12;

use crate::belief::BeliefError;
use crate::features::FeatureError;
use crate::geometry::GeometryError;
use crate::obsmodel::ObsModelError;
use crate::policies::PolicyError;
use crate::vptree::VpTreeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("policy violated the action protocol: {0}")]
    ProtocolViolation(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    VpTree(#[from] VpTreeError),
    #[error(transparent)]
    ObsModel(#[from] ObsModelError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
}
