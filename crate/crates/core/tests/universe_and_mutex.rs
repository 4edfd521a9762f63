mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use samplns::interactions::{enumerate_universe, parse_interaction, write_interactions};
use samplns::mutex::{mutex_blocking, mutex_exact, mutex_level0, MutexOracle};
use samplns::{FeatureModel, Interaction, MutexLevel, Sample};

fn universe_set(u: &samplns::InteractionUniverse) -> BTreeSet<Vec<i32>> {
    u.valid_interactions().map(|i| interaction_values(&i)).collect()
}

#[test]
fn universe_matches_enumeration() {
    for (n, clauses) in random_models(21, 60, (3, 10), (0.5, 3.0)) {
        let m = model("m", n, &clauses);
        let configs = valid_assignments(n, &clauses);
        let features: Vec<usize> = (1..=n).collect();
        for t in [1, 2] {
            let u = enumerate_universe(&m, t, None).unwrap();
            let expected = valid_interactions(&configs, &features, t);
            assert_eq!(universe_set(&u), expected, "t={t} clauses {clauses:?}");
            assert_eq!(u.len() + u.invalid_count(), candidate_interactions(&features, t).len());
            for i in u.invalid_interactions() {
                assert!(!expected.contains(&interaction_values(&i)));
            }
        }
        if n <= 7 {
            let u = enumerate_universe(&m, 3, None).unwrap();
            assert_eq!(universe_set(&u), valid_interactions(&configs, &features, 3));
        }
    }
}

#[test]
fn universe_respects_concrete_subset() {
    for (k, (n, clauses)) in random_models(22, 30, (4, 9), (0.5, 2.0)).into_iter().enumerate() {
        let concrete: Vec<usize> = (1..=n).filter(|f| (f + k) % 3 != 0).collect();
        let m = FeatureModel::new("c", n, clauses.clone(), Some(concrete.iter().map(|&f| f as i64).collect())).unwrap();
        let configs = valid_assignments(n, &clauses);
        let u = enumerate_universe(&m, 2, None).unwrap();
        assert_eq!(universe_set(&u), valid_interactions(&configs, &concrete, 2));
    }
}

#[test]
fn coverage_matches_enumeration() {
    for (n, clauses) in random_models(23, 30, (3, 9), (0.5, 2.5)) {
        let m = model("m", n, &clauses);
        let configs = valid_assignments(n, &clauses);
        let u = enumerate_universe(&m, 2, None).unwrap();
        let sample: Sample = configs.iter().step_by(3).map(|&a| to_configuration(n, a)).collect();
        let covered: BTreeSet<Vec<i32>> = u
            .covered_interactions(&sample)
            .iter()
            .map(interaction_values)
            .collect();
        let expected: BTreeSet<Vec<i32>> = universe_set(&u)
            .into_iter()
            .filter(|i| configs.iter().step_by(3).any(|&a| contains_all(a, i)))
            .collect();
        assert_eq!(covered, expected);
        let all: Sample = configs.iter().map(|&a| to_configuration(n, a)).collect();
        assert!(u.is_fully_covered_by(&all));
    }
}

#[test]
fn mutex_predicates_are_sound_and_exact() {
    for (n, clauses) in random_models(24, 25, (3, 9), (0.5, 2.5)) {
        let m = model("m", n, &clauses);
        let configs = valid_assignments(n, &clauses);
        let u = enumerate_universe(&m, 2, None).unwrap();
        let mut oracles: Vec<MutexOracle> = [MutexLevel::L0, MutexLevel::P1, MutexLevel::P2, MutexLevel::Exact]
            .into_iter()
            .map(|l| MutexOracle::new(&m, &u, l))
            .collect();
        for a in 0..u.len() {
            for b in a + 1..u.len() {
                let (la, lb) = (u.literals(a), u.literals(b));
                let truth = exclusive(&configs, &interaction_values(&u.interaction(a)), &interaction_values(&u.interaction(b)));
                let ladder = [
                    mutex_level0(la, lb, &u),
                    mutex_blocking(la, lb, &u, 1),
                    mutex_blocking(la, lb, &u, 2),
                    mutex_exact(la, lb, &m),
                ];
                assert_eq!(ladder[3], truth);
                for w in ladder.windows(2) {
                    assert!(!w[0] || w[1], "ladder broken for {a} {b}: {ladder:?}");
                }
                for (o, &want) in oracles.iter_mut().zip(&ladder) {
                    assert_eq!(o.exclusive(a, b), want);
                    assert_eq!(o.exclusive(b, a), want);
                }
            }
        }
    }
}

#[test]
fn blocking_example_is_caught_by_an_invalid_cross_pair() {
    // 1 -> -5 and 3 -> 5, so {1 3} is already an invalid pair
    let m = FeatureModel::new("b", 5, vec![vec![-1, -5], vec![-3, 5]], None).unwrap();
    let u = enumerate_universe(&m, 2, None).unwrap();
    let a = literals(&[1, 2]);
    let b = literals(&[3, 4]);
    assert!(!u.pair_is_valid(samplns::Literal::new(1), samplns::Literal::new(3)));
    assert!(mutex_level0(&a, &b, &u));
    assert!(mutex_blocking(&a, &b, &u, 1));
    assert!(mutex_exact(&a, &b, &m));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interaction_canonical_form(values in prop::collection::btree_map(1i32..20, any::<bool>(), 1..5), seed in any::<u64>()) {
        let lits: Vec<i32> = values.iter().map(|(&f, &p)| if p { f } else { -f }).collect();
        let mut shuffled = lits.clone();
        let k = shuffled.len();
        shuffled.rotate_left((seed as usize) % k);
        if seed % 2 == 0 {
            shuffled.reverse();
        }
        let a = Interaction::of(&lits);
        let b = Interaction::of(&shuffled);
        prop_assert_eq!(&a, &b);
        let features: Vec<usize> = a.literals().iter().map(|l| l.feature()).collect();
        prop_assert!(features.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(parse_interaction(&a.to_string()), Some(a.clone()));
        let text = write_interactions([&a, &b]);
        prop_assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn coverage_is_monotone(model_seed in 0u64..1000, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8)) {
        let (n, clauses) = random_models(model_seed, 1, (3, 8), (0.5, 2.5)).pop().unwrap();
        let m = model("m", n, &clauses);
        let configs = valid_assignments(n, &clauses);
        let u = enumerate_universe(&m, 2, None).unwrap();
        let mut sample = Sample::default();
        let mut prev = 0;
        for p in picks {
            sample.push(to_configuration(n, configs[p.index(configs.len())]));
            let now = u.coverage(&sample).count_ones(..);
            prop_assert!(now >= prev);
            prev = now;
        }
    }
}
