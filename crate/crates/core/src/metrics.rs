//! Pairwise Manipulation Score.
//!
//! Both vectors are first converted to percentages of their own total, then
//! `PMS = 100 · Σ (p¹ − p²)² / Σ (p¹)²`. The first argument is the
//! reference distribution, so the score is not symmetric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MechanismKind, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmsScore {
    pub value: f64,
    pub mechanism: MechanismKind,
    pub scenario: Scenario,
}

pub fn to_percentages(values: &[f64]) -> Result<Vec<f64>> {
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::DegenerateDistribution);
    }
    Ok(values.iter().map(|v| 100.0 * v / sum).collect())
}

pub fn pms(baseline: &[f64], attacked: &[f64]) -> Result<f64> {
    if baseline.len() != attacked.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} entries", baseline.len()),
            found: format!("{} entries", attacked.len()),
        });
    }
    let p1 = to_percentages(baseline)?;
    let p2 = to_percentages(attacked)?;
    let (num, den) = p1.iter().zip(&p2).fold((0.0, 0.0), |(num, den), (a, b)| {
        (num + (a - b) * (a - b), den + a * a)
    });
    Ok(100.0 * num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn percentages() {
        assert_eq!(to_percentages(&[50.0, 50.0]).unwrap(), vec![50.0, 50.0]);
        assert_eq!(to_percentages(&[1.0, 3.0]).unwrap(), vec![25.0, 75.0]);
        assert!(matches!(
            to_percentages(&[0.0, 0.0]),
            Err(Error::DegenerateDistribution)
        ));
    }

    #[test]
    fn hand_cases() {
        assert_eq!(pms(&[3.0, 1.0, 2.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
        // 100 · (50² + 50²) / (50² + 50²)
        assert_eq!(pms(&[50.0, 50.0], &[100.0, 0.0]).unwrap(), 100.0);
        assert_eq!(pms(&[1.0, 1.0], &[2.0, 0.0]).unwrap(), 100.0);
        // Reversed order: 100 · 5000 / 10000.
        assert_eq!(pms(&[100.0, 0.0], &[50.0, 50.0]).unwrap(), 50.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            pms(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::DegenerateDistribution)
        ));
        assert!(matches!(
            pms(&[1.0, 0.0], &[0.0, 0.0]),
            Err(Error::DegenerateDistribution)
        ));
        assert!(matches!(
            pms(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn positive_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..100.0, 1..40).prop_map(|mut v| {
            v[0] += 0.5;
            v
        })
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        positive_vec().prop_flat_map(|a| {
            let n = a.len();
            (
                Just(a),
                prop::collection::vec(0.0f64..100.0, n).prop_map(|mut v| {
                    v[0] += 0.5;
                    v
                }),
            )
        })
    }

    proptest! {
        #[test]
        fn self_distance_is_zero(v in positive_vec()) {
            prop_assert_eq!(pms(&v, &v).unwrap(), 0.0);
        }

        #[test]
        fn scale_invariant((v1, v2) in pair(), a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
            let base = pms(&v1, &v2).unwrap();
            let s1: Vec<f64> = v1.iter().map(|x| a * x).collect();
            let s2: Vec<f64> = v2.iter().map(|x| b * x).collect();
            let scaled = pms(&s1, &s2).unwrap();
            prop_assert!((scaled - base).abs() <= 1e-9 * base.max(1e-9), "{base} vs {scaled}");
        }

        #[test]
        fn zero_iff_same_percentages((v1, v2) in pair(), k in 1e-3f64..1e3) {
            let score = pms(&v1, &v2).unwrap();
            prop_assert!(score >= 0.0);
            let p1 = to_percentages(&v1).unwrap();
            let p2 = to_percentages(&v2).unwrap();
            let same = p1.iter().zip(&p2).all(|(a, b)| (a - b).abs() <= 1e-9);
            if same {
                prop_assert!(score <= 1e-12);
            } else {
                prop_assert!(score > 0.0);
            }

            let proportional: Vec<f64> = v1.iter().map(|x| k * x).collect();
            prop_assert!(pms(&v1, &proportional).unwrap() <= 1e-20);
        }

        #[test]
        fn permutation_equivariant((v1, v2) in pair(), shift in 0usize..40) {
            let n = v1.len();
            let rot = |v: &[f64]| (0..n).map(|i| v[(i + shift) % n]).collect::<Vec<_>>();
            let a = pms(&v1, &v2).unwrap();
            let b = pms(&rot(&v1), &rot(&v2)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
