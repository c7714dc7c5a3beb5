//! Domain types shared by every stage of a funding round: normalized
//! preferences, voting power, effective allocations, raw mechanism scores
//! and the final token allocation.
//!
//! All types are validated on construction and immutable afterwards.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for row sums and budget checks.
pub const TOLERANCE: f64 = 1e-9;

/// Aggregation rule applied to an allocation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    /// Plain weighted sum of preferences; the linear reference.
    ControlSum,
    Quadratic,
    Mean,
    Median,
}

impl MechanismKind {
    /// The mechanisms that are attacked and scored by the engine.
    pub const SCORED: [MechanismKind; 3] = [
        MechanismKind::Quadratic,
        MechanismKind::Mean,
        MechanismKind::Median,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::ControlSum => "control_sum",
            MechanismKind::Quadratic => "quadratic",
            MechanismKind::Mean => "mean",
            MechanismKind::Median => "median",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Baseline,
    VoterAttack,
    ProjectAttack,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::Baseline,
        Scenario::VoterAttack,
        Scenario::ProjectAttack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::VoterAttack => "voter_attack",
            Scenario::ProjectAttack => "project_attack",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-stochastic voter × project preference matrix, stored row-major.
///
/// A matrix produced by a literal project attack may carry rows that sum to
/// more than one; such matrices are flagged with [`is_budget_exempt`] and can
/// only be built inside this crate.
///
/// [`is_budget_exempt`]: PreferenceMatrix::is_budget_exempt
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceMatrix {
    n_voters: usize,
    n_projects: usize,
    entries: Vec<f64>,
    budget_exempt: bool,
}

impl PreferenceMatrix {
    pub fn new(n_voters: usize, n_projects: usize, entries: Vec<f64>) -> Result<Self> {
        if n_voters == 0 || n_projects == 0 {
            return Err(Error::InvalidMatrix(
                "preference matrix needs at least one voter and one project".into(),
            ));
        }
        if entries.len() != n_voters * n_projects {
            return Err(Error::DimensionMismatch {
                expected: format!(
                    "{n_voters}x{n_projects} = {} entries",
                    n_voters * n_projects
                ),
                found: format!("{} entries", entries.len()),
            });
        }
        for (v, row) in entries.chunks_exact(n_projects).enumerate() {
            for (p, &x) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({v}, {p}) = {x} is outside [0, 1]"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > TOLERANCE {
                return Err(Error::InvalidMatrix(format!(
                    "row {v} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self {
            n_voters,
            n_projects,
            entries,
            budget_exempt: false,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_voters = rows.len();
        let n_projects = rows.first().map_or(0, Vec::len);
        if let Some((v, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_projects) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n_projects} columns"),
                found: format!("{} columns in row {v}", row.len()),
            });
        }
        Self::new(n_voters, n_projects, rows.into_iter().flatten().collect())
    }

    /// Builds a matrix without validation. Callers guarantee the shape.
    pub(crate) fn from_raw(
        n_voters: usize,
        n_projects: usize,
        entries: Vec<f64>,
        budget_exempt: bool,
    ) -> Self {
        debug_assert_eq!(entries.len(), n_voters * n_projects);
        Self {
            n_voters,
            n_projects,
            entries,
            budget_exempt,
        }
    }

    pub fn n_voters(&self) -> usize {
        self.n_voters
    }

    pub fn n_projects(&self) -> usize {
        self.n_projects
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, voter: usize, project: usize) -> f64 {
        self.entries[voter * self.n_projects + project]
    }

    pub fn row(&self, voter: usize) -> &[f64] {
        let start = voter * self.n_projects;
        &self.entries[start..start + self.n_projects]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n_projects)
    }

    /// True when rows may exceed the voter budget (literal project attack).
    pub fn is_budget_exempt(&self) -> bool {
        self.budget_exempt
    }

    /// Highest-preference project of `voter`, ties broken by lower index.
    pub fn top_choice(&self, voter: usize) -> usize {
        argmax(self.row(voter))
    }

    /// Highest-preference project of `voter` other than `excluded`.
    pub fn top_choice_excluding(&self, voter: usize, excluded: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (p, &x) in self.row(voter).iter().enumerate() {
            if p == excluded {
                continue;
            }
            if best.is_none_or(|(_, b)| x > b) {
                best = Some((p, x));
            }
        }
        best.map(|(p, _)| p)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

/// Per-voter voting power summing to the normalization constant `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    normalization_constant: f64,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, normalization_constant: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMatrix("weight vector is empty".into()));
        }
        if !(normalization_constant.is_finite() && normalization_constant > 0.0) {
            return Err(Error::invalid(
                "normalization_constant_positive",
                format!("normalization constant must be positive, got {normalization_constant}"),
            ));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidMatrix(format!(
                "weight {i} must be positive, got {w}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - normalization_constant).abs() > TOLERANCE * normalization_constant {
            return Err(Error::InvalidMatrix(format!(
                "weights sum to {sum}, expected {normalization_constant}"
            )));
        }
        Ok(Self {
            weights,
            normalization_constant,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, voter: usize) -> f64 {
        self.weights[voter]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn normalization_constant(&self) -> f64 {
        self.normalization_constant
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Effective token allocations, voter × project. Stored column-major since
/// every mechanism aggregates per project.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    n_voters: usize,
    n_projects: usize,
    columns: Vec<f64>,
    budget_exempt: bool,
}

impl AllocationMatrix {
    /// Builds a matrix from voter rows. Entries must be finite and
    /// non-negative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_voters = rows.len();
        let n_projects = rows.first().map_or(0, Vec::len);
        if n_voters == 0 || n_projects == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut columns = vec![0.0; n_voters * n_projects];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_projects {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n_projects} columns"),
                    found: format!("{} columns in row {i}", row.len()),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                check_allocation(i, j, x)?;
                columns[j * n_voters + i] = x;
            }
        }
        Ok(Self {
            n_voters,
            n_projects,
            columns,
            budget_exempt: false,
        })
    }

    /// Builds a matrix from per-project columns of voter allocations.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n_projects = columns.len();
        let n_voters = columns.first().map_or(0, Vec::len);
        if n_voters == 0 || n_projects == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut flat = Vec::with_capacity(n_voters * n_projects);
        for (j, column) in columns.iter().enumerate() {
            if column.len() != n_voters {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n_voters} voters"),
                    found: format!("{} voters in column {j}", column.len()),
                });
            }
            for (i, &x) in column.iter().enumerate() {
                check_allocation(i, j, x)?;
            }
            flat.extend_from_slice(column);
        }
        Ok(Self {
            n_voters,
            n_projects,
            columns: flat,
            budget_exempt: false,
        })
    }

    pub(crate) fn from_raw_columns(
        n_voters: usize,
        n_projects: usize,
        columns: Vec<f64>,
        budget_exempt: bool,
    ) -> Self {
        debug_assert_eq!(columns.len(), n_voters * n_projects);
        Self {
            n_voters,
            n_projects,
            columns,
            budget_exempt,
        }
    }

    pub fn n_voters(&self) -> usize {
        self.n_voters
    }

    pub fn n_projects(&self) -> usize {
        self.n_projects
    }

    pub fn get(&self, voter: usize, project: usize) -> f64 {
        self.columns[project * self.n_voters + voter]
    }

    pub fn column(&self, project: usize) -> &[f64] {
        let start = project * self.n_voters;
        &self.columns[start..start + self.n_voters]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.columns.chunks_exact(self.n_voters)
    }

    pub fn row_sum(&self, voter: usize) -> f64 {
        (0..self.n_projects).map(|p| self.get(voter, p)).sum()
    }

    pub fn is_budget_exempt(&self) -> bool {
        self.budget_exempt
    }

    /// Multiplies every entry by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            columns: self.columns.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    /// Checks the per-voter budget `row_sum(i) <= w_i + 1e-9`.
    pub fn check_budget(&self, weights: &WeightVector) -> Result<()> {
        if weights.len() != self.n_voters {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", self.n_voters),
                found: format!("{} weights", weights.len()),
            });
        }
        for i in 0..self.n_voters {
            let sum = self.row_sum(i);
            if sum > weights.get(i) + TOLERANCE {
                return Err(Error::InvalidMatrix(format!(
                    "voter {i} allocates {sum}, budget is {}",
                    weights.get(i)
                )));
            }
        }
        Ok(())
    }
}

fn check_allocation(voter: usize, project: usize, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidMatrix(format!(
            "allocation ({voter}, {project}) is not finite"
        )));
    }
    if x < 0.0 {
        return Err(Error::NegativeEntry {
            row: voter,
            column: project,
            value: x,
        });
    }
    Ok(())
}

/// Raw per-project aggregate produced by one mechanism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismScores {
    mechanism: MechanismKind,
    scores: Vec<f64>,
}

impl MechanismScores {
    pub fn new(mechanism: MechanismKind, scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if let Some((p, s)) = scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.is_finite() && **s >= 0.0))
        {
            return Err(Error::InvalidMatrix(format!(
                "score {p} must be finite and non-negative, got {s}"
            )));
        }
        Ok(Self { mechanism, scores })
    }

    pub fn mechanism(&self) -> MechanismKind {
        self.mechanism
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Tokens paid to each project; sums to `total`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundingAllocation {
    tokens: Vec<f64>,
    total: f64,
}

impl FundingAllocation {
    pub(crate) fn from_raw(tokens: Vec<f64>, total: f64) -> Self {
        Self { tokens, total }
    }

    pub fn tokens(&self) -> &[f64] {
        &self.tokens
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    VoterAttack,
    ProjectAttack,
}

/// Who takes part in an attack.
///
/// `attacker_voters` are the coordinating voters of a voter attack;
/// `colluding_projects` and their argmax `supporters` describe a project
/// attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub attacker_voters: BTreeSet<usize>,
    pub colluding_projects: BTreeSet<usize>,
    pub supporters: BTreeSet<usize>,
}

impl AttackSpec {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            attacker_voters: BTreeSet::new(),
            colluding_projects: BTreeSet::new(),
            supporters: BTreeSet::new(),
        }
    }

    pub fn voters(attackers: impl IntoIterator<Item = usize>) -> Self {
        Self {
            kind: AttackKind::VoterAttack,
            attacker_voters: attackers.into_iter().collect(),
            ..Self::none()
        }
    }

    pub fn projects(
        colluding: impl IntoIterator<Item = usize>,
        supporters: impl IntoIterator<Item = usize>,
    ) -> Self {
        Self {
            kind: AttackKind::ProjectAttack,
            colluding_projects: colluding.into_iter().collect(),
            supporters: supporters.into_iter().collect(),
            ..Self::none()
        }
    }

    /// Checks that every index is within an `n_voters × n_projects` round.
    pub fn check_bounds(&self, n_voters: usize, n_projects: usize) -> Result<()> {
        let bad_voter = self
            .attacker_voters
            .iter()
            .chain(&self.supporters)
            .find(|&&v| v >= n_voters);
        if let Some(v) = bad_voter {
            return Err(Error::InvalidMatrix(format!(
                "attack references voter {v}, round has {n_voters}"
            )));
        }
        if let Some(p) = self.colluding_projects.iter().find(|&&p| p >= n_projects) {
            return Err(Error::InvalidMatrix(format!(
                "attack references project {p}, round has {n_projects}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preference_rows_must_sum_to_one() {
        assert!(PreferenceMatrix::from_rows(vec![vec![0.25, 0.75], vec![0.5, 0.5]]).is_ok());
        assert!(PreferenceMatrix::from_rows(vec![vec![0.25, 0.7]]).is_err());
        assert!(PreferenceMatrix::from_rows(vec![vec![1.5, -0.5]]).is_err());
        assert!(matches!(
            PreferenceMatrix::from_rows(vec![vec![1.0], vec![0.5, 0.5]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn top_choice_breaks_ties_low() {
        let m = PreferenceMatrix::from_rows(vec![vec![0.1, 0.45, 0.45]]).unwrap();
        assert_eq!(m.top_choice(0), 1);
        assert_eq!(m.top_choice_excluding(0, 1), Some(2));
        assert_eq!(m.top_choice_excluding(0, 2), Some(1));
    }

    #[test]
    fn weights_must_sum_to_constant() {
        assert!(WeightVector::new(vec![250.0; 4], 1000.0).is_ok());
        assert!(WeightVector::new(vec![250.0; 3], 1000.0).is_err());
        assert!(WeightVector::new(vec![0.0, 1000.0], 1000.0).is_err());
    }

    #[test]
    fn allocation_budget_check() {
        let a = AllocationMatrix::from_rows(&[vec![1.0, 3.0], vec![2.0, 2.0]]).unwrap();
        let ok = WeightVector::new(vec![4.0, 4.0], 8.0).unwrap();
        let tight = WeightVector::new(vec![3.0, 5.0], 8.0).unwrap();
        assert!(a.check_budget(&ok).is_ok());
        assert!(a.check_budget(&tight).is_err());
        assert_eq!(a.column(1), &[3.0, 2.0]);
        assert!(matches!(
            AllocationMatrix::from_rows(&[vec![-1.0]]),
            Err(Error::NegativeEntry { .. })
        ));
    }

    #[test]
    fn attack_spec_bounds() {
        let spec = AttackSpec::projects([1, 4], [0, 2]);
        assert!(spec.check_bounds(3, 5).is_ok());
        assert!(spec.check_bounds(2, 5).is_err());
        assert!(spec.check_bounds(3, 4).is_err());
    }
}
