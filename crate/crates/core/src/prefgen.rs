//! Voter preference construction.
//!
//! Each voter's row is drawn i.i.d. from a [`DistributionSpec`] and divided
//! by its sum so that every row is a probability vector over projects.
//! Rows can also be imported from a comma-separated table whose first line
//! holds project identifiers.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PreferenceMatrix, WeightVector};

/// Attempts per row before a clamped Gaussian draw is declared degenerate.
const MAX_ROW_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Pareto with shape `alpha` and unit scale.
    Pareto {
        alpha: f64,
        #[serde(default)]
        support: ParetoSupport,
    },
    /// Uniform on `[0, 1)`.
    Uniform {},
    /// Normal draws clamped at zero.
    Gaussian {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
}

fn default_mu() -> f64 {
    1.0
}

fn default_sigma() -> f64 {
    0.25
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec::Pareto {
            alpha: 2.5,
            support: ParetoSupport::default(),
        }
    }
}

/// Support of the Pareto draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParetoSupport {
    /// Lomax form `X − 1` on `[0, ∞)`; the shape of NumPy's `pareto`.
    #[default]
    Lomax,
    /// Classical Pareto on `[1, ∞)`.
    Standard,
}

impl DistributionSpec {
    pub fn gaussian() -> Self {
        DistributionSpec::Gaussian {
            mu: default_mu(),
            sigma: default_sigma(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistributionSpec::Pareto { alpha, .. } => {
                if !(alpha.is_finite() && alpha > 1.0) {
                    return Err(Error::invalid(
                        "pareto_alpha_above_one",
                        format!("Pareto alpha must exceed 1, got {alpha}"),
                    ));
                }
            }
            DistributionSpec::Uniform {} => {}
            DistributionSpec::Gaussian { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::invalid(
                        "gaussian_parameters",
                        format!("Gaussian needs finite mu and positive sigma, got ({mu}, {sigma})"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Expected value of one raw (unnormalized) draw.
    pub fn raw_mean(&self) -> Option<f64> {
        match *self {
            DistributionSpec::Pareto { alpha, support } => {
                let standard = alpha / (alpha - 1.0);
                Some(match support {
                    ParetoSupport::Standard => standard,
                    ParetoSupport::Lomax => standard - 1.0,
                })
            }
            DistributionSpec::Uniform {} => Some(0.5),
            // Clamping shifts the mean; no closed form worth carrying here.
            DistributionSpec::Gaussian { .. } => None,
        }
    }

    fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match *self {
            DistributionSpec::Pareto { alpha, support } => Sampler::Pareto {
                dist: Pareto::new(1.0, alpha)
                    .map_err(|e| Error::invalid("pareto_alpha_above_one", e.to_string()))?,
                shift: match support {
                    ParetoSupport::Standard => 0.0,
                    ParetoSupport::Lomax => 1.0,
                },
            },
            DistributionSpec::Uniform {} => Sampler::Uniform,
            DistributionSpec::Gaussian { mu, sigma } => Sampler::Gaussian(
                Normal::new(mu, sigma)
                    .map_err(|e| Error::invalid("gaussian_parameters", e.to_string()))?,
            ),
        })
    }
}

enum Sampler {
    Pareto { dist: Pareto<f64>, shift: f64 },
    Uniform,
    Gaussian(Normal<f64>),
}

impl Sampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Pareto { dist, shift } => dist.sample(rng) - shift,
            Sampler::Uniform => rng.random::<f64>(),
            Sampler::Gaussian(normal) => normal.sample(rng).max(0.0),
        }
    }
}

/// Random stream for one Monte Carlo iteration. Streams for distinct
/// indices are independent, so iterations can run in any order.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}

/// Draws one raw value per cell and normalizes each row to sum to one.
pub fn sample_preference_matrix<R: Rng + ?Sized>(
    n_voters: usize,
    n_projects: usize,
    distribution: &DistributionSpec,
    rng: &mut R,
) -> Result<PreferenceMatrix> {
    if n_voters == 0 || n_projects == 0 {
        return Err(Error::InvalidMatrix(
            "preference matrix needs at least one voter and one project".into(),
        ));
    }
    let sampler = distribution.sampler()?;
    let mut entries = Vec::with_capacity(n_voters * n_projects);
    let mut row = vec![0.0; n_projects];
    for v in 0..n_voters {
        let mut attempts = 0;
        let sum = loop {
            row.iter_mut().for_each(|x| *x = sampler.draw(rng));
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                break sum;
            }
            attempts += 1;
            if attempts >= MAX_ROW_RESAMPLES {
                return Err(Error::DegenerateRow { row: v });
            }
        };
        entries.extend(row.iter().map(|x| x / sum));
    }
    Ok(PreferenceMatrix::from_raw(
        n_voters, n_projects, entries, false,
    ))
}

/// Parses the comma-separated preference table: a header of project ids,
/// then one row of non-negative decimals per voter. Rows are normalized.
pub fn parse_preference_table(
    text: &str,
    expected_dims: Option<(usize, usize)>,
) -> Result<PreferenceMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "missing header row of project ids".into(),
    })?;
    let n_projects = header.split(',').count();

    let mut entries = Vec::new();
    let mut n_voters = 0;
    for (line_no, line) in lines {
        let voter = n_voters;
        let start = entries.len();
        for (col, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                column: col + 1,
                message: format!("`{cell}` is not a decimal number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    column: col + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            if value < 0.0 {
                return Err(Error::NegativeEntry {
                    row: voter,
                    column: col,
                    value,
                });
            }
            entries.push(value);
        }
        let width = entries.len() - start;
        if width != n_projects {
            return Err(Error::DimensionMismatch {
                expected: format!("{n_projects} columns (from header)"),
                found: format!("{width} columns on line {line_no}"),
            });
        }
        let row = &mut entries[start..];
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(Error::DegenerateRow { row: voter });
        }
        row.iter_mut().for_each(|x| *x /= sum);
        n_voters += 1;
    }

    if n_voters == 0 {
        return Err(Error::InvalidMatrix(
            "preference table has no voter rows".into(),
        ));
    }
    if let Some((ev, ep)) = expected_dims {
        if (ev, ep) != (n_voters, n_projects) {
            return Err(Error::DimensionMismatch {
                expected: format!("{ev}x{ep}"),
                found: format!("{n_voters}x{n_projects}"),
            });
        }
    }
    Ok(PreferenceMatrix::from_raw(
        n_voters, n_projects, entries, false,
    ))
}

pub fn load_preference_matrix(
    path: impl AsRef<Path>,
    expected_dims: Option<(usize, usize)>,
) -> Result<PreferenceMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_preference_table(&text, expected_dims)
}

/// Equal voting power: every voter gets `c / N`.
pub fn build_weight_vector(n_voters: usize, normalization_constant: f64) -> Result<WeightVector> {
    if n_voters == 0 {
        return Err(Error::invalid(
            "n_voters_positive",
            "n_voters must be at least 1",
        ));
    }
    let w = normalization_constant / n_voters as f64;
    WeightVector::new(vec![w; n_voters], normalization_constant)
}
