//! Closed-form results for collusion and phantom-vote attacks, each paired
//! with a brute-force counterpart that recomputes the same quantity from
//! first principles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::median;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticCollusion {
    /// `√T`: one voter putting the whole budget on their own project.
    pub honest_utility: f64,
    /// `2·√(T/2)`: the budget split evenly with a colluding partner.
    pub collusion_utility: f64,
    pub gain_ratio: f64,
}

/// Utility of a voter with budget `tokens` in the two-voter, two-project
/// quadratic game, honest versus colluding.
pub fn quadratic_collusion_oracle(tokens: f64) -> Result<QuadraticCollusion> {
    if !(tokens.is_finite() && tokens > 0.0) {
        return Err(Error::invalid(
            "tokens_positive",
            format!("token budget must be positive, got {tokens}"),
        ));
    }
    let honest_utility = tokens.sqrt();
    let collusion_utility = 2.0 * (tokens / 2.0).sqrt();
    Ok(QuadraticCollusion {
        honest_utility,
        collusion_utility,
        gain_ratio: collusion_utility / honest_utility,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitOptimum {
    pub split: f64,
    pub utility: f64,
}

/// Maximizes `√p + √(T − p)` over the grid `p = i·T/steps`.
pub fn quadratic_split_grid_search(tokens: f64, steps: usize) -> SplitOptimum {
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| {
            let split = tokens * i as f64 / steps as f64;
            SplitOptimum {
                split,
                utility: split.sqrt() + (tokens - split).max(0.0).sqrt(),
            }
        })
        .fold(
            SplitOptimum {
                split: f64::NAN,
                utility: f64::NEG_INFINITY,
            },
            |best, s| if s.utility > best.utility { s } else { best },
        )
}

/// Factor `n / (n + k)` by which `k` near-zero ballots shrink a mean taken
/// over non-zero ballots only.
pub fn mean_phantom_ratio(n: usize, k: usize) -> f64 {
    n as f64 / (n + k) as f64
}

/// Mean of `allocations` after appending `k` ballots of `epsilon`.
pub fn mean_phantom_empirical(allocations: &[f64], k: usize, epsilon: f64) -> f64 {
    let total: f64 = allocations.iter().sum::<f64>() + k as f64 * epsilon;
    total / (allocations.len() + k) as f64
}

/// Sorted, strictly positive allocations of one project plus the number of
/// adversaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhantomOracleInput {
    nonzero_allocations: Vec<f64>,
    k: usize,
}

impl PhantomOracleInput {
    /// Sorts `allocations`; every entry must be finite and positive.
    pub fn new(mut allocations: Vec<f64>, k: usize) -> Result<Self> {
        if allocations.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if let Some(x) = allocations.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidMatrix(format!(
                "phantom oracle needs positive allocations, got {x}"
            )));
        }
        allocations.sort_by(f64::total_cmp);
        Ok(Self {
            nonzero_allocations: allocations,
            k,
        })
    }

    pub fn allocations(&self) -> &[f64] {
        &self.nonzero_allocations
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianBound {
    /// Upper bound on the post-attack median.
    pub value: f64,
    /// 1-based order-statistic index of `value`.
    pub index: usize,
    /// Largest 1-based index `m` with `a^(m) <= median`.
    pub median_index: usize,
    /// Set when `m − ⌈k/2⌉ + 1 < 1`; the bound is then the smallest
    /// allocation.
    pub saturated: bool,
}

/// Bound `a^(m − ⌈k/2⌉ + 1)` on the median of the allocations after `k`
/// adversaries each add a ballot below the smallest allocation.
pub fn median_phantom_bound(input: &PhantomOracleInput) -> MedianBound {
    let a = &input.nonzero_allocations;
    let n = a.len();
    let med = median(a);
    let median_index = a.iter().rposition(|&x| x <= med).map_or(1, |i| i + 1);
    let shifted = median_index as i64 - input.k.div_ceil(2) as i64 + 1;
    let (index, saturated) = if shifted < 1 {
        (1, true)
    } else {
        // Only reachable with k = 0 when m = n; the largest value still bounds.
        ((shifted as usize).min(n), false)
    };
    MedianBound {
        value: a[index - 1],
        index,
        median_index,
        saturated,
    }
}

/// Median of `allocations` after appending `k` ballots of `epsilon`.
pub fn median_phantom_empirical(allocations: &[f64], k: usize, epsilon: f64) -> f64 {
    let mut extended = Vec::with_capacity(allocations.len() + k);
    extended.extend_from_slice(allocations);
    extended.extend(std::iter::repeat_n(epsilon, k));
    median(&extended)
}
