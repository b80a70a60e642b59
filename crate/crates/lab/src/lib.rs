//! Simulation scenarios, ground-truth oracles, the LSEM baseline and the
//! replication harness.

pub mod lsem;
pub mod replicate;
pub mod scenario;
pub mod truth;

pub use lsem::{lsem_fit, lsem_paths, LsemPaths};
pub use replicate::{fit_bnp, replicate, BnpSettings, Method, ReplicationTable};
pub use scenario::{generate, Overrides, Scenario, ScenarioSpec, StructuralModel};
pub use truth::{
    flag_disagreements, paper_truths, parametric_g_formula, simulate_truth, truth_oracle, Disagreement, TruthRecord,
    TruthSource, TruthValue,
};
