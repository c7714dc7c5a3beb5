//! Aggregation rules over an allocation matrix and the proportional funding
//! rule `tokens_j = T · R_j / Σ R`.

use crate::error::{Error, Result};
use crate::model::{
    AllocationMatrix, FundingAllocation, MechanismScores, PreferenceMatrix, WeightVector,
};

pub use crate::model::MechanismKind;

/// Effective allocations `A_ij = M_ij · w_i`.
pub fn effective_allocations(
    preferences: &PreferenceMatrix,
    weights: &WeightVector,
) -> Result<AllocationMatrix> {
    let (n_voters, n_projects) = (preferences.n_voters(), preferences.n_projects());
    if weights.len() != n_voters {
        return Err(Error::DimensionMismatch {
            expected: format!("{n_voters} weights"),
            found: format!("{} weights", weights.len()),
        });
    }
    let mut columns = vec![0.0; n_voters * n_projects];
    for (i, row) in preferences.rows().enumerate() {
        let w = weights.get(i);
        for (j, &m) in row.iter().enumerate() {
            columns[j * n_voters + i] = m * w;
        }
    }
    Ok(AllocationMatrix::from_raw_columns(
        n_voters,
        n_projects,
        columns,
        preferences.is_budget_exempt(),
    ))
}

/// Raw per-project score `R_p` under `kind`.
///
/// The median counts every voter, zero allocations included; for an even
/// number of voters it is the mean of the two central order statistics.
pub fn aggregate(kind: MechanismKind, allocations: &AllocationMatrix) -> Result<MechanismScores> {
    let n_voters = allocations.n_voters();
    if n_voters == 0 || allocations.n_projects() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let scores = match kind {
        MechanismKind::ControlSum => allocations.columns().map(|c| c.iter().sum()).collect(),
        MechanismKind::Quadratic => allocations
            .columns()
            .map(|c| c.iter().map(|x| x.sqrt()).sum())
            .collect(),
        MechanismKind::Mean => allocations
            .columns()
            .map(|c| c.iter().sum::<f64>() / n_voters as f64)
            .collect(),
        MechanismKind::Median => {
            let mut scratch = vec![0.0; n_voters];
            allocations
                .columns()
                .map(|c| {
                    scratch.copy_from_slice(c);
                    median_in_place(&mut scratch)
                })
                .collect()
        }
    };
    MechanismScores::new(kind, scores)
}

/// Median of `values`, reordering the slice. Even lengths average the two
/// central order statistics. Returns NaN for an empty slice.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

pub fn median(values: &[f64]) -> f64 {
    median_in_place(&mut values.to_vec())
}

/// Splits `total_tokens` proportionally to the scores.
pub fn to_funding(scores: &MechanismScores, total_tokens: f64) -> Result<FundingAllocation> {
    if !(total_tokens.is_finite() && total_tokens > 0.0) {
        return Err(Error::invalid(
            "total_tokens_positive",
            format!("total_tokens must be positive, got {total_tokens}"),
        ));
    }
    let sum: f64 = scores.scores().iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateScores);
    }
    let tokens = scores
        .scores()
        .iter()
        .map(|r| total_tokens * r / sum)
        .collect();
    Ok(FundingAllocation::from_raw(tokens, total_tokens))
}
