use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MechanismKind;
use crate::prefgen::DistributionSpec;

/// Parameters of a Monte Carlo campaign. Missing fields in a document take
/// the defaults below; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_voters: usize,
    pub n_projects: usize,
    /// Output scale `T` of the funding allocation.
    pub total_tokens: f64,
    pub iterations: u64,
    pub seed: u64,
    pub distribution: DistributionSpec,
    /// Minimum allocation `ε` used by phantom-style attacks, in token units.
    pub epsilon: f64,
    /// Sum `c` of all voter weights.
    pub normalization_constant: f64,
    pub voter_attack: VoterAttackConfig,
    pub project_attack: ProjectAttackConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_voters: 133,
            n_projects: 374,
            total_tokens: 1.0,
            iterations: 10_000,
            seed: 0,
            distribution: DistributionSpec::default(),
            epsilon: 0.01,
            normalization_constant: 1000.0,
            voter_attack: VoterAttackConfig::default(),
            project_attack: ProjectAttackConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoterAttackConfig {
    /// Number of coordinating voters. When absent each mechanism uses its
    /// minimum viable attack: one voter for mean and median, one colluding
    /// pair for quadratic.
    pub attacker_count: Option<usize>,
}

impl VoterAttackConfig {
    pub fn attackers_for(&self, mechanism: MechanismKind) -> usize {
        self.attacker_count.unwrap_or(match mechanism {
            MechanismKind::Quadratic => 2,
            _ => 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectAttackConfig {
    pub colluding_count: usize,
    pub selection: ProjectSelection,
    pub budget_mode: BudgetMode,
}

impl Default for ProjectAttackConfig {
    fn default() -> Self {
        Self {
            colluding_count: 2,
            selection: ProjectSelection::TopBySupporters,
            budget_mode: BudgetMode::BudgetPreserving,
        }
    }
}

/// How colluding projects are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectSelection {
    /// Projects with the most first-choice supporters, ties to lower index.
    #[default]
    TopBySupporters,
    /// Uniform draw from the iteration's random stream.
    RandomPair,
}

/// How supporters of colluding projects spend their budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// The attack budget `w − (P − |Pc|)ε` is split evenly across the
    /// colluding projects, so each supporter still spends exactly `w`.
    #[default]
    BudgetPreserving,
    /// Every colluding project receives `w − (P − 1)ε` from each supporter,
    /// overspending the budget.
    Literal,
}

/// Returns the config unchanged if every invariant holds.
pub fn validate_config(config: SimulationConfig) -> Result<SimulationConfig> {
    let c = &config;
    if c.n_voters == 0 {
        return Err(Error::invalid(
            "n_voters_positive",
            "n_voters must be at least 1",
        ));
    }
    if c.n_projects == 0 {
        return Err(Error::invalid(
            "n_projects_positive",
            "n_projects must be at least 1",
        ));
    }
    if c.iterations == 0 {
        return Err(Error::invalid(
            "iterations_positive",
            "iterations must be at least 1",
        ));
    }
    if !(c.total_tokens.is_finite() && c.total_tokens > 0.0) {
        return Err(Error::invalid(
            "total_tokens_positive",
            format!("total_tokens must be positive, got {}", c.total_tokens),
        ));
    }
    if !(c.normalization_constant.is_finite() && c.normalization_constant > 0.0) {
        return Err(Error::invalid(
            "normalization_constant_positive",
            format!(
                "normalization_constant must be positive, got {}",
                c.normalization_constant
            ),
        ));
    }
    if !(c.epsilon.is_finite() && c.epsilon > 0.0) {
        return Err(Error::invalid(
            "epsilon_positive",
            format!("epsilon must be positive, got {}", c.epsilon),
        ));
    }
    c.distribution.validate()?;

    let min_weight = c.normalization_constant / c.n_voters as f64;
    let phantom_spend = c.epsilon * (c.n_projects - 1) as f64;
    if phantom_spend >= min_weight {
        return Err(Error::invalid(
            "epsilon_feasible",
            format!(
                "epsilon * (n_projects - 1) = {phantom_spend} must be below the voter weight {min_weight}"
            ),
        ));
    }

    if let Some(count) = c.voter_attack.attacker_count {
        if count == 0 {
            return Err(Error::invalid(
                "attacker_count_positive",
                "attacker_count must be at least 1",
            ));
        }
        if count > c.n_voters {
            return Err(Error::invalid(
                "attacker_count_within_voters",
                format!("attacker_count {count} exceeds n_voters {}", c.n_voters),
            ));
        }
    }
    if c.project_attack.colluding_count < 2 {
        return Err(Error::invalid(
            "colluding_count_at_least_two",
            format!(
                "colluding_count must be at least 2, got {}",
                c.project_attack.colluding_count
            ),
        ));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invariant_of(config: SimulationConfig) -> &'static str {
        match validate_config(config) {
            Err(Error::InvalidConfig { invariant, .. }) => invariant,
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn defaults_are_valid() {
        let config = SimulationConfig::default();
        assert_eq!(config.n_voters, 133);
        assert_eq!(config.n_projects, 374);
        assert_eq!(config.iterations, 10_000);
        assert_eq!(validate_config(config.clone()).unwrap(), config);
    }

    #[test]
    fn single_voter_single_project_is_valid() {
        let config = SimulationConfig {
            n_voters: 1,
            n_projects: 1,
            ..Default::default()
        };
        assert!(validate_config(config).is_ok());
    }

    #[test]
    fn epsilon_too_large_for_budget() {
        // 199 * 0.01 = 1.99 > w = 10 / 10 = 1
        let config = SimulationConfig {
            n_voters: 10,
            n_projects: 200,
            normalization_constant: 10.0,
            ..Default::default()
        };
        assert_eq!(invariant_of(config), "epsilon_feasible");
    }

    #[test]
    fn attack_sizes_checked() {
        let config = SimulationConfig {
            n_voters: 3,
            voter_attack: VoterAttackConfig {
                attacker_count: Some(4),
            },
            ..Default::default()
        };
        assert_eq!(invariant_of(config), "attacker_count_within_voters");

        let mut config = SimulationConfig::default();
        config.project_attack.colluding_count = 1;
        assert_eq!(invariant_of(config), "colluding_count_at_least_two");
    }

    #[test]
    fn rejects_non_positive_scalars() {
        assert_eq!(
            invariant_of(SimulationConfig {
                epsilon: 0.0,
                ..Default::default()
            }),
            "epsilon_positive"
        );
        assert_eq!(
            invariant_of(SimulationConfig {
                iterations: 0,
                ..Default::default()
            }),
            "iterations_positive"
        );
        assert_eq!(
            invariant_of(SimulationConfig {
                total_tokens: f64::NAN,
                ..Default::default()
            }),
            "total_tokens_positive"
        );
    }

    #[test]
    fn default_attacker_counts() {
        let v = VoterAttackConfig::default();
        assert_eq!(v.attackers_for(MechanismKind::Quadratic), 2);
        assert_eq!(v.attackers_for(MechanismKind::Mean), 1);
        assert_eq!(v.attackers_for(MechanismKind::Median), 1);
    }

    #[test]
    fn document_defaults_and_unknown_fields() {
        let parsed: SimulationConfig = serde_json::from_str(r#"{"iterations": 50}"#).unwrap();
        assert_eq!(parsed.iterations, 50);
        assert_eq!(parsed.n_projects, 374);
        assert!(serde_json::from_str::<SimulationConfig>(r#"{"voters": 5}"#).is_err());
        assert!(serde_json::from_str::<SimulationConfig>(
            r#"{"project_attack": {"colluders": 3}}"#
        )
        .is_err());
    }
}
