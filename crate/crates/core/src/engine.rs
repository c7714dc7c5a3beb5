//! Monte Carlo driver.
//!
//! Each iteration draws its own preference matrix from a random stream keyed
//! by `(seed, iteration)`, scores the honest round under every mechanism,
//! replays it under a voter attack and a project attack, and records the
//! Pairwise Manipulation Score of each. Iterations share no state, so they
//! can run on any number of workers; results are merged by iteration index.

use std::sync::Arc;
use std::time::Instant;

use crate::attacks::{apply_project_attack, apply_voter_attack, select_attack};
use crate::config::{validate_config, SimulationConfig};
use crate::error::{Error, Result};
use crate::mechanisms::{aggregate, effective_allocations};
use crate::metrics::pms;
use crate::model::{AttackKind, MechanismKind, PreferenceMatrix, Scenario, WeightVector};
use crate::prefgen::{build_weight_vector, iteration_rng, sample_preference_matrix};
use crate::report::{
    CellReport, FailedIteration, PreferenceSource, ReportMetadata, SimulationReport,
};

/// How iterations are scheduled. Without the `parallel` feature every mode
/// runs on the calling thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `threads: None` uses the global rayon pool.
    Parallel {
        threads: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { threads: None }
    }
}

/// PMS values of one iteration for every (mechanism, scenario) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    scores: [[f64; 3]; 3],
}

fn mechanism_slot(mechanism: MechanismKind) -> Option<usize> {
    MechanismKind::SCORED.iter().position(|&m| m == mechanism)
}

fn scenario_slot(scenario: Scenario) -> usize {
    match scenario {
        Scenario::Baseline => 0,
        Scenario::VoterAttack => 1,
        Scenario::ProjectAttack => 2,
    }
}

impl IterationRecord {
    pub fn get(&self, mechanism: MechanismKind, scenario: Scenario) -> Option<f64> {
        mechanism_slot(mechanism).map(|m| self.scores[m][scenario_slot(scenario)])
    }

    /// All nine entries, mechanism-major.
    pub fn entries(&self) -> impl Iterator<Item = (MechanismKind, Scenario, f64)> + '_ {
        MechanismKind::SCORED.into_iter().flat_map(move |m| {
            Scenario::ALL
                .into_iter()
                .map(move |s| (m, s, self.get(m, s).unwrap_or(f64::NAN)))
        })
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: SimulationConfig,
    weights: WeightVector,
    preferences: Option<Arc<PreferenceMatrix>>,
    execution: Execution,
}

impl Engine {
    /// Validates `config` and prepares the equal-weight vector.
    pub fn new(config: SimulationConfig) -> Result<Self> {
        Self::unchecked(validate_config(config)?)
    }

    fn unchecked(config: SimulationConfig) -> Result<Self> {
        let weights = build_weight_vector(config.n_voters, config.normalization_constant)?;
        Ok(Self {
            config,
            weights,
            preferences: None,
            execution: Execution::default(),
        })
    }

    /// Replaces per-iteration sampling with a fixed, imported matrix. Its
    /// shape must match the configured voter and project counts.
    pub fn with_preferences(mut self, preferences: PreferenceMatrix) -> Result<Self> {
        let dims = (preferences.n_voters(), preferences.n_projects());
        if dims != (self.config.n_voters, self.config.n_projects) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.config.n_voters, self.config.n_projects),
                found: format!("{}x{}", dims.0, dims.1),
            });
        }
        self.preferences = Some(Arc::new(preferences));
        Ok(self)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn run_iteration(&self, iteration: u64) -> Result<IterationRecord> {
        self.iteration_inner(iteration)
            .map_err(|e| Error::IterationFailed {
                index: iteration,
                source: Box::new(e),
            })
    }

    fn iteration_inner(&self, iteration: u64) -> Result<IterationRecord> {
        let config = &self.config;
        let mut rng = iteration_rng(config.seed, iteration);
        let sampled;
        let preferences = match &self.preferences {
            Some(fixed) => fixed.as_ref(),
            None => {
                sampled = sample_preference_matrix(
                    config.n_voters,
                    config.n_projects,
                    &config.distribution,
                    &mut rng,
                )?;
                &sampled
            }
        };
        let weights = &self.weights;
        let honest = effective_allocations(preferences, weights)?;
        let control = aggregate(MechanismKind::ControlSum, &honest)?;

        // Colluding projects do not depend on the mechanism under attack.
        let project_spec = select_attack(
            config,
            preferences,
            MechanismKind::Mean,
            AttackKind::ProjectAttack,
            &mut rng,
        )?;

        let mut scores = [[0.0; 3]; 3];
        for (slot, mechanism) in MechanismKind::SCORED.into_iter().enumerate() {
            let reference = aggregate(mechanism, &honest)?;
            let reference = reference.scores();

            let voter_spec = select_attack(
                config,
                preferences,
                mechanism,
                AttackKind::VoterAttack,
                &mut rng,
            )?;
            let voter_attacked =
                apply_voter_attack(mechanism, preferences, weights, &voter_spec, config.epsilon)?;
            let voter_scores =
                aggregate(mechanism, &effective_allocations(&voter_attacked, weights)?)?;

            let project_attacked = apply_project_attack(
                mechanism,
                preferences,
                weights,
                &project_spec,
                config.epsilon,
                config.project_attack.budget_mode,
            )?;
            let project_scores = aggregate(
                mechanism,
                &effective_allocations(&project_attacked, weights)?,
            )?;

            scores[slot] = [
                pms(control.scores(), reference)?,
                pms(reference, voter_scores.scores())?,
                pms(reference, project_scores.scores())?,
            ];
        }
        Ok(IterationRecord { iteration, scores })
    }

    /// Runs every iteration; results are in iteration order regardless of
    /// scheduling.
    pub fn run_records(&self) -> Result<Vec<Result<IterationRecord>>> {
        let n = self.config.iterations;
        match self.execution {
            Execution::Sequential => Ok((0..n).map(|i| self.run_iteration(i)).collect()),
            Execution::Parallel { threads } => self.run_parallel(threads),
        }
    }

    #[cfg(feature = "parallel")]
    fn run_parallel(&self, threads: Option<usize>) -> Result<Vec<Result<IterationRecord>>> {
        use rayon::prelude::*;
        let n = self.config.iterations;
        let run = || {
            (0..n)
                .into_par_iter()
                .map(|i| self.run_iteration(i))
                .collect::<Vec<_>>()
        };
        match threads {
            None => Ok(run()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::ThreadPool(e.to_string()))?;
                Ok(pool.install(run))
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn run_parallel(&self, _threads: Option<usize>) -> Result<Vec<Result<IterationRecord>>> {
        let n = self.config.iterations;
        Ok((0..n).map(|i| self.run_iteration(i)).collect())
    }

    /// Runs the campaign and summarizes it. Fails when more than 1% of the
    /// iterations fail.
    pub fn run(&self) -> Result<SimulationReport> {
        let started = Instant::now();
        let records = self.run_records()?;
        let total = records.len();

        let mut failed = Vec::new();
        let mut completed = Vec::with_capacity(total);
        for record in records {
            match record {
                Ok(r) => completed.push(r),
                Err(Error::IterationFailed { index, source }) => failed.push(FailedIteration {
                    iteration: index,
                    error: source.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
        if failed.len() * 100 > total {
            return Err(Error::RunFailed {
                failed: failed.len(),
                total,
            });
        }

        let cells = MechanismKind::SCORED
            .into_iter()
            .flat_map(|m| Scenario::ALL.into_iter().map(move |s| (m, s)))
            .map(|(m, s)| {
                let scores = completed
                    .iter()
                    .map(|r| r.get(m, s).unwrap_or(f64::NAN))
                    .collect();
                CellReport::from_scores(m, s, scores)
            })
            .collect();

        let source = if self.preferences.is_some() {
            PreferenceSource::Imported
        } else {
            PreferenceSource::Sampled
        };
        Ok(SimulationReport {
            schema_version: crate::report::SCHEMA_VERSION.to_string(),
            metadata: ReportMetadata::new(&self.config, source),
            config: self.config.clone(),
            completed_iterations: completed.len() as u64,
            failed_iterations: failed,
            cells,
            runtime_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// One iteration of `config`. The config is used as given, without
/// validation.
pub fn run_iteration(config: &SimulationConfig, iteration: u64) -> Result<IterationRecord> {
    Engine::unchecked(config.clone())?.run_iteration(iteration)
}

/// Validates `config` and runs the full campaign on the default execution.
pub fn run_simulation(config: SimulationConfig) -> Result<SimulationReport> {
    Engine::new(config)?.run()
}
