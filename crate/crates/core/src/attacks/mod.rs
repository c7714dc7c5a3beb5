//! Minimum viable attacks, expressed as transforms of the honest preference
//! matrix. The attacked matrix is then scored by the ordinary mechanisms.
//!
//! * Voter attack, quadratic: consecutive attacker pairs put half their
//!   budget on each other's favourite project.
//! * Voter attack, mean/median: each attacker spends `ε` on every project
//!   except their favourite, which receives the rest of the budget.
//! * Project attack: supporters (voters whose favourite is one of the
//!   colluding projects) move their budget onto the colluding group.

mod oracles;

pub use oracles::{
    mean_phantom_empirical, mean_phantom_ratio, median_phantom_bound, median_phantom_empirical,
    quadratic_collusion_oracle, quadratic_split_grid_search, MedianBound, PhantomOracleInput,
    QuadraticCollusion, SplitOptimum,
};

use rand::Rng;

use crate::config::{BudgetMode, ProjectSelection, SimulationConfig};
use crate::error::{Error, Result};
use crate::model::{AttackKind, AttackSpec, MechanismKind, PreferenceMatrix, WeightVector};

/// Chooses the participants of a `kind` attack against `mechanism`.
///
/// `rng` is only consumed by [`ProjectSelection::RandomPair`].
pub fn select_attack<R: Rng + ?Sized>(
    config: &SimulationConfig,
    preferences: &PreferenceMatrix,
    mechanism: MechanismKind,
    kind: AttackKind,
    rng: &mut R,
) -> Result<AttackSpec> {
    let n_voters = preferences.n_voters();
    let n_projects = preferences.n_projects();
    match kind {
        AttackKind::None => Ok(AttackSpec::none()),
        AttackKind::VoterAttack => {
            let mut count = config.voter_attack.attackers_for(mechanism);
            if mechanism == MechanismKind::Quadratic {
                // Quadratic collusion works in pairs.
                count -= count % 2;
            }
            if count > n_voters {
                return Err(Error::NotEnoughVoters {
                    needed: count,
                    available: n_voters,
                });
            }
            if mechanism == MechanismKind::Quadratic && count > 0 && n_projects < 2 {
                return Err(Error::NotEnoughProjects {
                    needed: 2,
                    available: n_projects,
                });
            }
            Ok(AttackSpec::voters(0..count))
        }
        AttackKind::ProjectAttack => {
            let count = config.project_attack.colluding_count;
            if count < 2 {
                return Err(Error::TooFewColluders(count));
            }
            if count > n_projects {
                return Err(Error::NotEnoughProjects {
                    needed: count,
                    available: n_projects,
                });
            }
            let favourites: Vec<usize> = (0..n_voters).map(|v| preferences.top_choice(v)).collect();
            let colluding: Vec<usize> = match config.project_attack.selection {
                ProjectSelection::TopBySupporters => {
                    let mut supporters = vec![0usize; n_projects];
                    for &p in &favourites {
                        supporters[p] += 1;
                    }
                    let mut order: Vec<usize> = (0..n_projects).collect();
                    // Stable sort keeps lower indices first among ties.
                    order.sort_by_key(|&p| std::cmp::Reverse(supporters[p]));
                    order.truncate(count);
                    order
                }
                ProjectSelection::RandomPair => {
                    rand::seq::index::sample(rng, n_projects, count).into_vec()
                }
            };
            let supporters = favourites
                .iter()
                .enumerate()
                .filter(|(_, p)| colluding.contains(p))
                .map(|(v, _)| v);
            Ok(AttackSpec::projects(colluding.iter().copied(), supporters))
        }
    }
}

fn check_dims(preferences: &PreferenceMatrix, weights: &WeightVector) -> Result<()> {
    if weights.len() != preferences.n_voters() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} weights", preferences.n_voters()),
            found: format!("{} weights", weights.len()),
        });
    }
    Ok(())
}

fn check_epsilon(voter: usize, weight: f64, spent: f64, epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon <= 0.0 || spent >= weight {
        return Err(Error::InfeasibleEpsilon {
            voter,
            weight,
            epsilon,
        });
    }
    Ok(())
}

/// Rewrites the attackers' rows of `preferences`; every other row is kept.
pub fn apply_voter_attack(
    mechanism: MechanismKind,
    preferences: &PreferenceMatrix,
    weights: &WeightVector,
    spec: &AttackSpec,
    epsilon: f64,
) -> Result<PreferenceMatrix> {
    check_dims(preferences, weights)?;
    match spec.kind {
        AttackKind::VoterAttack => {}
        AttackKind::None if spec.attacker_voters.is_empty() => return Ok(preferences.clone()),
        _ => return Err(Error::AttackKindMismatch("expected a voter attack")),
    }
    let n_projects = preferences.n_projects();
    spec.check_bounds(preferences.n_voters(), n_projects)?;
    if spec.attacker_voters.is_empty() {
        return Ok(preferences.clone());
    }

    let mut entries = preferences.entries().to_vec();
    let attackers: Vec<usize> = spec.attacker_voters.iter().copied().collect();

    if mechanism == MechanismKind::Quadratic {
        if attackers.len() % 2 == 1 {
            return Err(Error::NotEnoughVoters {
                needed: attackers.len() + 1,
                available: attackers.len(),
            });
        }
        for pair in attackers.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            let first = preferences.top_choice(a);
            let mut second = preferences.top_choice(b);
            if second == first {
                second =
                    preferences
                        .top_choice_excluding(b, first)
                        .ok_or(Error::NotEnoughProjects {
                            needed: 2,
                            available: n_projects,
                        })?;
            }
            for v in [a, b] {
                let row = &mut entries[v * n_projects..(v + 1) * n_projects];
                row.fill(0.0);
                row[first] = 0.5;
                row[second] = 0.5;
            }
        }
    } else {
        for &v in &attackers {
            let w = weights.get(v);
            let spent = (n_projects - 1) as f64 * epsilon;
            check_epsilon(v, w, spent, epsilon)?;
            let target = preferences.top_choice(v);
            let row = &mut entries[v * n_projects..(v + 1) * n_projects];
            row.fill(epsilon / w);
            row[target] = (w - spent) / w;
        }
    }

    Ok(PreferenceMatrix::from_raw(
        preferences.n_voters(),
        n_projects,
        entries,
        preferences.is_budget_exempt(),
    ))
}

/// Rewrites the supporters' rows of `preferences` so that their budget flows
/// to the colluding projects.
///
/// In [`BudgetMode::Literal`] mean/median supporters give every colluding
/// project `w − (P − 1)ε`, so their rows sum to more than one; the result
/// is flagged [`PreferenceMatrix::is_budget_exempt`].
pub fn apply_project_attack(
    mechanism: MechanismKind,
    preferences: &PreferenceMatrix,
    weights: &WeightVector,
    spec: &AttackSpec,
    epsilon: f64,
    budget_mode: BudgetMode,
) -> Result<PreferenceMatrix> {
    check_dims(preferences, weights)?;
    match spec.kind {
        AttackKind::ProjectAttack => {}
        AttackKind::None if spec.supporters.is_empty() => return Ok(preferences.clone()),
        _ => return Err(Error::AttackKindMismatch("expected a project attack")),
    }
    let n_projects = preferences.n_projects();
    spec.check_bounds(preferences.n_voters(), n_projects)?;
    let colluding: Vec<usize> = spec.colluding_projects.iter().copied().collect();
    if colluding.len() < 2 {
        return Err(Error::TooFewColluders(colluding.len()));
    }
    if spec.supporters.is_empty() {
        return Ok(preferences.clone());
    }

    let share = colluding.len() as f64;
    let mut entries = preferences.entries().to_vec();
    let mut exempt = preferences.is_budget_exempt();
    for &v in &spec.supporters {
        let row = &mut entries[v * n_projects..(v + 1) * n_projects];
        if mechanism == MechanismKind::Quadratic {
            row.fill(0.0);
            for &p in &colluding {
                row[p] = 1.0 / share;
            }
            continue;
        }
        let w = weights.get(v);
        let colluding_pref = match budget_mode {
            BudgetMode::BudgetPreserving => {
                let spent = (n_projects - colluding.len()) as f64 * epsilon;
                check_epsilon(v, w, spent, epsilon)?;
                (w - spent) / (share * w)
            }
            BudgetMode::Literal => {
                let spent = (n_projects - 1) as f64 * epsilon;
                check_epsilon(v, w, spent, epsilon)?;
                exempt = true;
                (w - spent) / w
            }
        };
        row.fill(epsilon / w);
        for &p in &colluding {
            row[p] = colluding_pref;
        }
    }

    Ok(PreferenceMatrix::from_raw(
        preferences.n_voters(),
        n_projects,
        entries,
        exempt,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProjectAttackConfig;
    use crate::prefgen::{build_weight_vector, iteration_rng, sample_preference_matrix};
    use proptest::prelude::*;

    fn uniform_weights(n: usize, w: f64) -> WeightVector {
        build_weight_vector(n, w * n as f64).unwrap()
    }

    fn rows_sum_to_one(m: &PreferenceMatrix) -> bool {
        m.rows()
            .all(|r| (r.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && r.iter().all(|&x| x >= 0.0))
    }

    #[test]
    fn quadratic_voter_attack_uses_first_pair() {
        let config = SimulationConfig::default();
        let m =
            sample_preference_matrix(5, 6, &Default::default(), &mut iteration_rng(0, 0)).unwrap();
        let spec = select_attack(
            &config,
            &m,
            MechanismKind::Quadratic,
            AttackKind::VoterAttack,
            &mut iteration_rng(0, 1),
        )
        .unwrap();
        assert_eq!(
            spec.attacker_voters.iter().copied().collect::<Vec<_>>(),
            vec![0, 1]
        );

        let spec = select_attack(
            &config,
            &m,
            MechanismKind::Median,
            AttackKind::VoterAttack,
            &mut iteration_rng(0, 1),
        )
        .unwrap();
        assert_eq!(
            spec.attacker_voters.iter().copied().collect::<Vec<_>>(),
            vec![0]
        );
    }

    #[test]
    fn single_voter_cannot_collude() {
        let config = SimulationConfig::default();
        let m = PreferenceMatrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            select_attack(
                &config,
                &m,
                MechanismKind::Quadratic,
                AttackKind::VoterAttack,
                &mut iteration_rng(0, 0)
            ),
            Err(Error::NotEnoughVoters {
                needed: 2,
                available: 1
            })
        ));
    }

    #[test]
    fn project_selection_by_supporters() {
        // Voters 0-4 favour project 7, voters 5-9 favour project 2.
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|v| {
                let mut row = vec![0.05; 10];
                row[if v < 5 { 7 } else { 2 }] = 0.55;
                row
            })
            .collect();
        let m = PreferenceMatrix::from_rows(rows).unwrap();
        let spec = select_attack(
            &SimulationConfig::default(),
            &m,
            MechanismKind::Mean,
            AttackKind::ProjectAttack,
            &mut iteration_rng(0, 0),
        )
        .unwrap();
        assert_eq!(
            spec.colluding_projects.iter().copied().collect::<Vec<_>>(),
            vec![2, 7]
        );
        assert_eq!(
            spec.supporters.iter().copied().collect::<Vec<_>>(),
            (0..10).collect::<Vec<_>>()
        );
    }

    #[test]
    fn supporter_ties_go_to_lower_index() {
        // Every project has one supporter, so the first two indices win.
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|v| {
                let mut row = vec![0.1; 4];
                row[3 - v] = 0.7;
                row
            })
            .collect();
        let m = PreferenceMatrix::from_rows(rows).unwrap();
        let spec = select_attack(
            &SimulationConfig::default(),
            &m,
            MechanismKind::Median,
            AttackKind::ProjectAttack,
            &mut iteration_rng(0, 0),
        )
        .unwrap();
        assert_eq!(
            spec.colluding_projects.iter().copied().collect::<Vec<_>>(),
            vec![0, 1]
        );
        assert_eq!(
            spec.supporters.iter().copied().collect::<Vec<_>>(),
            vec![2, 3]
        );
    }

    #[test]
    fn random_pair_is_seeded() {
        let config = SimulationConfig {
            project_attack: ProjectAttackConfig {
                selection: ProjectSelection::RandomPair,
                ..Default::default()
            },
            ..Default::default()
        };
        let m = sample_preference_matrix(30, 40, &Default::default(), &mut iteration_rng(4, 0))
            .unwrap();
        let pick = |seed| {
            select_attack(
                &config,
                &m,
                MechanismKind::Mean,
                AttackKind::ProjectAttack,
                &mut iteration_rng(seed, 9),
            )
            .unwrap()
        };
        let a = pick(1);
        assert_eq!(a, pick(1));
        assert_eq!(a.colluding_projects.len(), 2);
        for &v in &a.supporters {
            assert!(a.colluding_projects.contains(&m.top_choice(v)));
        }
    }

    #[test]
    fn not_enough_projects_to_collude() {
        let m = PreferenceMatrix::from_rows(vec![vec![1.0]]).unwrap();
        assert!(matches!(
            select_attack(
                &SimulationConfig::default(),
                &m,
                MechanismKind::Mean,
                AttackKind::ProjectAttack,
                &mut iteration_rng(0, 0)
            ),
            Err(Error::NotEnoughProjects {
                needed: 2,
                available: 1
            })
        ));
    }

    #[test]
    fn mean_voter_attack_row() {
        let m =
            PreferenceMatrix::from_rows(vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5]]).unwrap();
        let w = uniform_weights(2, 1.0);
        let attacked =
            apply_voter_attack(MechanismKind::Mean, &m, &w, &AttackSpec::voters([0]), 0.01)
                .unwrap();
        let row = attacked.row(0);
        assert!((row[0] - 0.98).abs() < 1e-12);
        assert!((row[1] - 0.01).abs() < 1e-12);
        assert!((row[2] - 0.01).abs() < 1e-12);
        assert_eq!(attacked.row(1), m.row(1));
    }

    #[test]
    fn quadratic_voter_attack_splits_between_favourites() {
        let m = PreferenceMatrix::from_rows(vec![
            vec![0.6, 0.1, 0.2, 0.1],
            vec![0.1, 0.1, 0.1, 0.7],
            vec![0.25; 4],
        ])
        .unwrap();
        let w = uniform_weights(3, 2.0);
        let attacked = apply_voter_attack(
            MechanismKind::Quadratic,
            &m,
            &w,
            &AttackSpec::voters([0, 1]),
            0.01,
        )
        .unwrap();
        assert_eq!(attacked.row(0), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(attacked.row(1), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(attacked.row(2), m.row(2));
    }

    #[test]
    fn quadratic_collision_falls_back_to_second_choice() {
        let m =
            PreferenceMatrix::from_rows(vec![vec![0.7, 0.1, 0.2], vec![0.5, 0.4, 0.1]]).unwrap();
        let w = uniform_weights(2, 1.0);
        let attacked = apply_voter_attack(
            MechanismKind::Quadratic,
            &m,
            &w,
            &AttackSpec::voters([0, 1]),
            0.01,
        )
        .unwrap();
        assert_eq!(attacked.row(0), &[0.5, 0.5, 0.0]);
        assert_eq!(attacked.row(1), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn empty_attack_is_a_no_op() {
        let m = PreferenceMatrix::from_rows(vec![vec![0.4, 0.6]]).unwrap();
        let w = uniform_weights(1, 1.0);
        for mech in MechanismKind::SCORED {
            assert_eq!(
                apply_voter_attack(mech, &m, &w, &AttackSpec::voters([]), 0.01).unwrap(),
                m
            );
            assert_eq!(
                apply_voter_attack(mech, &m, &w, &AttackSpec::none(), 0.01).unwrap(),
                m
            );
        }
    }

    #[test]
    fn infeasible_epsilon() {
        let m = PreferenceMatrix::from_rows(vec![vec![0.25; 4]]).unwrap();
        let w = uniform_weights(1, 0.03);
        assert!(matches!(
            apply_voter_attack(
                MechanismKind::Median,
                &m,
                &w,
                &AttackSpec::voters([0]),
                0.01
            ),
            Err(Error::InfeasibleEpsilon { voter: 0, .. })
        ));
        let spec = AttackSpec::projects([0, 1], [0]);
        assert!(matches!(
            apply_project_attack(
                MechanismKind::Mean,
                &m,
                &w,
                &spec,
                0.01,
                BudgetMode::Literal
            ),
            Err(Error::InfeasibleEpsilon { .. })
        ));
        // (4 - 2) * 0.01 = 0.02 < 0.03 fits when the budget is preserved.
        assert!(apply_project_attack(
            MechanismKind::Mean,
            &m,
            &w,
            &spec,
            0.01,
            BudgetMode::BudgetPreserving
        )
        .is_ok());
    }

    #[test]
    fn mismatched_spec_kind() {
        let m = PreferenceMatrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        let w = uniform_weights(1, 1.0);
        assert!(matches!(
            apply_voter_attack(
                MechanismKind::Mean,
                &m,
                &w,
                &AttackSpec::projects([0, 1], [0]),
                0.01
            ),
            Err(Error::AttackKindMismatch(_))
        ));
        assert!(matches!(
            apply_project_attack(
                MechanismKind::Mean,
                &m,
                &w,
                &AttackSpec::voters([0]),
                0.01,
                BudgetMode::Literal
            ),
            Err(Error::AttackKindMismatch(_))
        ));
    }

    #[test]
    fn project_attack_rows() {
        let m =
            PreferenceMatrix::from_rows(vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.3, 0.2, 0.1]])
                .unwrap();
        let w = uniform_weights(2, 1.0);
        let spec = AttackSpec::projects([0, 1], [1]);

        let q = apply_project_attack(
            MechanismKind::Quadratic,
            &m,
            &w,
            &spec,
            0.01,
            BudgetMode::Literal,
        )
        .unwrap();
        assert_eq!(q.row(1), &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(q.row(0), m.row(0));
        assert!(!q.is_budget_exempt());

        let bp = apply_project_attack(
            MechanismKind::Mean,
            &m,
            &w,
            &spec,
            0.01,
            BudgetMode::BudgetPreserving,
        )
        .unwrap();
        let expected = [0.49, 0.49, 0.01, 0.01];
        for (x, e) in bp.row(1).iter().zip(expected) {
            assert!((x - e).abs() < 1e-12);
        }
        assert_eq!(bp.row(0), m.row(0));
        assert!(!bp.is_budget_exempt());
        assert!(rows_sum_to_one(&bp));

        let lit = apply_project_attack(
            MechanismKind::Median,
            &m,
            &w,
            &spec,
            0.01,
            BudgetMode::Literal,
        )
        .unwrap();
        let expected = [0.97, 0.97, 0.01, 0.01];
        for (x, e) in lit.row(1).iter().zip(expected) {
            assert!((x - e).abs() < 1e-12);
        }
        assert_eq!(lit.row(0), m.row(0));
        assert!(lit.is_budget_exempt());
    }

    #[test]
    fn project_attack_needs_two_colluders() {
        let m = PreferenceMatrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        let w = uniform_weights(1, 1.0);
        assert!(matches!(
            apply_project_attack(
                MechanismKind::Mean,
                &m,
                &w,
                &AttackSpec::projects([1], [0]),
                0.01,
                BudgetMode::BudgetPreserving
            ),
            Err(Error::TooFewColluders(1))
        ));
    }

    fn attack_case() -> impl Strategy<Value = (u64, usize, usize, usize)> {
        (any::<u64>(), 2usize..12, 2usize..15, 0usize..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transforms_keep_rows_stochastic_and_are_idempotent((seed, n, p, which) in attack_case()) {
            let m = sample_preference_matrix(n, p, &Default::default(), &mut iteration_rng(seed, 0)).unwrap();
            let w = build_weight_vector(n, 1000.0).unwrap();
            let eps = 0.9 * (1000.0 / n as f64) / p as f64;
            let mut config = SimulationConfig { n_voters: n, n_projects: p, epsilon: eps, ..Default::default() };
            if which == 3 {
                config.project_attack.budget_mode = BudgetMode::Literal;
            }
            let mech = [MechanismKind::Quadratic, MechanismKind::Mean, MechanismKind::Median, MechanismKind::Mean][which];
            let mut rng = iteration_rng(seed, 1);

            let spec = select_attack(&config, &m, mech, AttackKind::VoterAttack, &mut rng).unwrap();
            let once = apply_voter_attack(mech, &m, &w, &spec, eps).unwrap();
            prop_assert!(rows_sum_to_one(&once));
            prop_assert_eq!(&apply_voter_attack(mech, &once, &w, &spec, eps).unwrap(), &once);
            for v in 0..n {
                if !spec.attacker_voters.contains(&v) {
                    prop_assert_eq!(once.row(v), m.row(v));
                }
            }

            let spec = select_attack(&config, &m, mech, AttackKind::ProjectAttack, &mut rng).unwrap();
            let mode = config.project_attack.budget_mode;
            let once = apply_project_attack(mech, &m, &w, &spec, eps, mode).unwrap();
            let literal = mode == BudgetMode::Literal && mech != MechanismKind::Quadratic;
            prop_assert_eq!(once.is_budget_exempt(), literal && !spec.supporters.is_empty());
            if !once.is_budget_exempt() {
                prop_assert!(rows_sum_to_one(&once));
            }
            prop_assert_eq!(&apply_project_attack(mech, &once, &w, &spec, eps, mode).unwrap(), &once);
            for v in 0..n {
                if !spec.supporters.contains(&v) {
                    prop_assert_eq!(once.row(v), m.row(v));
                }
            }
        }
    }
}
