//! Simulation of retroactive public-goods funding rounds under quadratic,
//! mean and median aggregation, with coordinated voter and project attacks
//! scored by the Pairwise Manipulation Score.
//!
//! The pipeline for one round is
//! [`prefgen`] → [`mechanisms::effective_allocations`] →
//! [`mechanisms::aggregate`] → [`metrics::pms`], with [`attacks`] rewriting
//! the preference matrix in between. [`engine`] repeats this over many
//! seeded iterations and [`report`] summarizes the score distributions.

pub mod attacks;
pub mod config;
pub mod engine;
pub mod error;
pub mod mechanisms;
pub mod metrics;
pub mod model;
pub mod prefgen;
pub mod report;

pub use config::{
    validate_config, BudgetMode, ProjectAttackConfig, ProjectSelection, SimulationConfig,
    VoterAttackConfig,
};
pub use engine::{run_iteration, run_simulation, Engine, Execution, IterationRecord};
pub use error::{Error, Result};
pub use model::{
    AllocationMatrix, AttackKind, AttackSpec, FundingAllocation, MechanismKind, MechanismScores,
    PreferenceMatrix, Scenario, WeightVector,
};
pub use prefgen::{DistributionSpec, ParetoSupport};
pub use report::SimulationReport;
