//! Campaign report: per (mechanism, scenario) score distributions with
//! equal-width histograms and summary statistics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{BudgetMode, SimulationConfig};
use crate::error::Result;
use crate::model::{MechanismKind, Scenario};
use crate::prefgen::{DistributionSpec, ParetoSupport};

pub const SCHEMA_VERSION: &str = "1";
pub const HISTOGRAM_BINS: usize = 50;

/// `bin_edges` has one more entry than `counts`. A cell whose scores are all
/// equal gets a single bin with both edges at that value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn equal_width(values: &[f64], bins: usize) -> Self {
        let Some((min, max)) = min_max(values) else {
            return Self {
                bin_edges: Vec::new(),
                counts: Vec::new(),
            };
        };
        if min == max || bins <= 1 {
            return Self {
                bin_edges: vec![min, max],
                counts: vec![values.len() as u64],
            };
        }
        let width = (max - min) / bins as f64;
        let mut bin_edges: Vec<f64> = (0..bins).map(|i| min + width * i as f64).collect();
        bin_edges.push(max);
        let mut counts = vec![0u64; bins];
        for &x in values {
            let bin = (((x - min) / width) as usize).min(bins - 1);
            counts[bin] += 1;
        }
        Self { bin_edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    values.iter().fold(None, |acc, &x| match acc {
        None => Some((x, x)),
        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

impl SummaryStats {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                std: 0.0,
                min: 0.0,
                max: 0.0,
                p5: 0.0,
                p50: 0.0,
                p95: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            p5: percentile_sorted(&sorted, 5.0),
            p50: percentile_sorted(&sorted, 50.0),
            p95: percentile_sorted(&sorted, 95.0),
        }
    }
}

/// Linear interpolation between closest ranks.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub mechanism: MechanismKind,
    pub scenario: Scenario,
    pub histogram: Histogram,
    pub stats: SummaryStats,
    /// Scores of the completed iterations, in iteration order.
    pub scores: Vec<f64>,
}

impl CellReport {
    pub fn from_scores(mechanism: MechanismKind, scenario: Scenario, scores: Vec<f64>) -> Self {
        Self {
            mechanism,
            scenario,
            histogram: Histogram::equal_width(&scores, HISTOGRAM_BINS),
            stats: SummaryStats::from_values(&scores),
            scores,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceSource {
    /// A fresh matrix is drawn for every iteration.
    Sampled,
    /// Every iteration reuses one imported matrix.
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub preference_source: PreferenceSource,
    /// Support of the Pareto draws, when Pareto preferences were sampled.
    pub pareto_support: Option<ParetoSupport>,
    pub budget_mode: BudgetMode,
    /// Reference used by the baseline scenario.
    pub baseline_reference: MechanismKind,
    pub histogram_bins: usize,
}

impl ReportMetadata {
    pub fn new(config: &SimulationConfig, source: PreferenceSource) -> Self {
        let pareto_support = match (source, config.distribution) {
            (PreferenceSource::Sampled, DistributionSpec::Pareto { support, .. }) => Some(support),
            _ => None,
        };
        Self {
            preference_source: source,
            pareto_support,
            budget_mode: config.project_attack.budget_mode,
            baseline_reference: MechanismKind::ControlSum,
            histogram_bins: HISTOGRAM_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedIteration {
    pub iteration: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: String,
    pub config: SimulationConfig,
    pub metadata: ReportMetadata,
    pub completed_iterations: u64,
    pub failed_iterations: Vec<FailedIteration>,
    /// Mechanism-major: quadratic, mean, median; each with baseline, voter
    /// attack, project attack.
    pub cells: Vec<CellReport>,
    pub runtime_seconds: f64,
}

impl SimulationReport {
    pub fn cell(&self, mechanism: MechanismKind, scenario: Scenario) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.mechanism == mechanism && c.scenario == scenario)
    }

    pub fn mean_score(&self, mechanism: MechanismKind, scenario: Scenario) -> Option<f64> {
        self.cell(mechanism, scenario).map(|c| c.stats.mean)
    }

    /// Plain-text table of mean PMS, mechanisms as rows.
    pub fn mean_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>16} {:>16} {:>16}\n",
            "mechanism", "baseline", "voter_attack", "project_attack"
        );
        for mech in MechanismKind::SCORED {
            out.push_str(&format!("{:<10}", mech.name()));
            for scenario in Scenario::ALL {
                match self.mean_score(mech, scenario) {
                    Some(v) => out.push_str(&format!(" {v:>16.6}")),
                    None => out.push_str(&format!(" {:>16}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
