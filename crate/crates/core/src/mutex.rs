//! Mutual exclusiveness of interaction pairs.
//!
//! Two valid interactions are mutually exclusive when no valid configuration
//! contains both. The predicates here form a ladder of increasing strength;
//! every level is sound, so a `true` answer is always a proof.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clock::Deadline;
use crate::interactions::InteractionUniverse;
use crate::model::{FeatureModel, Literal};
use crate::sat::{Budget, ModelSolver, SolveOutcome, DEFAULT_CONFLICT_BUDGET};

/// Strength of the mutual exclusiveness test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutexLevel {
    /// Complementary literals or an invalid cross pair.
    #[default]
    L0,
    /// A single blocking feature.
    P1,
    /// Up to two blocking features.
    P2,
    /// Joint satisfiability.
    Exact,
}

impl fmt::Display for MutexLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MutexLevel::L0 => "l0",
            MutexLevel::P1 => "p1",
            MutexLevel::P2 => "p2",
            MutexLevel::Exact => "exact",
        })
    }
}

impl std::str::FromStr for MutexLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l0" | "0" => Ok(MutexLevel::L0),
            "p1" | "1" => Ok(MutexLevel::P1),
            "p2" | "2" => Ok(MutexLevel::P2),
            "exact" => Ok(MutexLevel::Exact),
            other => Err(format!("unknown mutex level `{other}`")),
        }
    }
}

fn complementary(a: &[Literal], b: &[Literal]) -> bool {
    a.iter().any(|&p| b.contains(&-p))
}

/// True when `a` and `b` contain complementary literals or some cross pair on
/// distinct features is invalid.
pub fn mutex_level0(a: &[Literal], b: &[Literal], universe: &InteractionUniverse) -> bool {
    if complementary(a, b) {
        return true;
    }
    a.iter().any(|&p| {
        b.iter()
            .any(|&q| p.feature() != q.feature() && !universe.pair_is_valid(p, q))
    })
}

/// Searches for a set of at most `max_block` unassigned concrete features
/// such that every assignment to them creates an invalid pair together with
/// `a` and `b`. The empty set is the level-0 case.
pub fn mutex_blocking(
    a: &[Literal],
    b: &[Literal],
    universe: &InteractionUniverse,
    max_block: usize,
) -> bool {
    if mutex_level0(a, b, universe) {
        return true;
    }
    if max_block == 0 {
        return false;
    }
    let assigned: Vec<usize> = a.iter().chain(b).map(|l| l.feature()).collect();
    let both: Vec<Literal> = a.iter().chain(b).copied().collect();
    let free: Vec<usize> = universe
        .concrete_features()
        .iter()
        .copied()
        .filter(|f| !assigned.contains(f))
        .collect();
    // hit[2i + polarity]: that literal alone forms an invalid pair with a or b
    let hit: Vec<bool> = free
        .iter()
        .flat_map(|&f| [false, true].map(|pos| Literal::with_polarity(f, pos)))
        .map(|l| both.iter().any(|&x| !universe.pair_is_valid(l, x)))
        .collect();
    for i in 0..free.len() {
        if hit[2 * i] && hit[2 * i + 1] {
            return true;
        }
    }
    if max_block < 2 {
        return false;
    }
    for i in 0..free.len() {
        for j in i + 1..free.len() {
            let blocked = (0..4).all(|code| {
                let (pi, pj) = (code & 1 == 1, code & 2 == 2);
                hit[2 * i + pi as usize]
                    || hit[2 * j + pj as usize]
                    || !universe.pair_is_valid(
                        Literal::with_polarity(free[i], pi),
                        Literal::with_polarity(free[j], pj),
                    )
            });
            if blocked {
                return true;
            }
        }
    }
    false
}

/// Exact test: no valid configuration contains `a ∪ b`.
pub fn mutex_exact(a: &[Literal], b: &[Literal], model: &FeatureModel) -> bool {
    if complementary(a, b) {
        return true;
    }
    let joint: Vec<Literal> = a.iter().chain(b).copied().collect();
    match ModelSolver::new(model, 0).solve(&joint, &Budget::unlimited()) {
        SolveOutcome::Unsat => true,
        SolveOutcome::Sat(_) => false,
        SolveOutcome::Unknown => unreachable!("unlimited budget"),
    }
}

/// Memoizing evaluator of one predicate over the vids of a universe.
///
/// For [`MutexLevel::Exact`] the queries share one incremental solver and run
/// under a conflict budget; a budget-out counts as "not exclusive", which is
/// safe for bound construction.
pub struct MutexOracle<'a> {
    universe: &'a InteractionUniverse,
    level: MutexLevel,
    solver: Option<ModelSolver<'a>>,
    budget: Budget,
    memo: HashMap<(u32, u32), bool>,
}

impl<'a> MutexOracle<'a> {
    pub fn new(model: &'a FeatureModel, universe: &'a InteractionUniverse, level: MutexLevel) -> Self {
        MutexOracle {
            universe,
            level,
            solver: (level == MutexLevel::Exact).then(|| ModelSolver::new(model, 0)),
            budget: Budget::conflicts(DEFAULT_CONFLICT_BUDGET),
            memo: HashMap::new(),
        }
    }

    /// Reports solver work to `deadline`'s clock.
    pub fn with_deadline(mut self, deadline: Deadline) -> Self {
        self.budget = self.budget.with_deadline(deadline);
        self
    }

    pub fn with_conflict_budget(mut self, conflicts: u64) -> Self {
        let deadline = self.budget.deadline().cloned();
        self.budget = Budget::conflicts(conflicts);
        if let Some(d) = deadline {
            self.budget = self.budget.with_deadline(d);
        }
        self
    }

    pub fn level(&self) -> MutexLevel {
        self.level
    }

    pub fn universe(&self) -> &'a InteractionUniverse {
        self.universe
    }

    /// Whether valid interactions `a` and `b` (vids) are exclusive.
    pub fn exclusive(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        if let Some(d) = self.budget.deadline() {
            d.tick(1);
        }
        let u = self.universe;
        let (la, lb) = (u.literals(a), u.literals(b));
        if mutex_level0(la, lb, u) {
            return true;
        }
        if self.level == MutexLevel::L0 {
            return false;
        }
        let key = (a.min(b) as u32, a.max(b) as u32);
        if let Some(&hit) = self.memo.get(&key) {
            return hit;
        }
        let result = match self.level {
            MutexLevel::L0 => false,
            MutexLevel::P1 => mutex_blocking(la, lb, u, 1),
            MutexLevel::P2 => mutex_blocking(la, lb, u, 2),
            MutexLevel::Exact => {
                let joint: Vec<Literal> = la.iter().chain(lb).copied().collect();
                let solver = self.solver.as_mut().expect("exact oracle has a solver");
                solver.solve(&joint, &self.budget).is_unsat()
            }
        };
        self.memo.insert(key, result);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::{enumerate_universe, Interaction};

    fn setup(n: usize, clauses: Vec<Vec<i32>>) -> (FeatureModel, InteractionUniverse) {
        let m = FeatureModel::new("m", n, clauses, None).unwrap();
        let u = enumerate_universe(&m, 2, None).unwrap();
        (m, u)
    }

    fn lits(v: &[i32]) -> Vec<Literal> {
        Interaction::of(v).literals().to_vec()
    }

    #[test]
    fn level0_examples() {
        let (_, u) = setup(3, vec![vec![-1, -3]]);
        assert!(mutex_level0(&lits(&[1, 2]), &lits(&[-1, 3]), &u));
        assert!(mutex_level0(&lits(&[1, 2]), &lits(&[2, 3]), &u));
        let (_, free) = setup(4, vec![]);
        assert!(!mutex_level0(&lits(&[1, 2]), &lits(&[3, 4]), &free));
    }

    #[test]
    fn blocking_examples() {
        let (m, u) = setup(5, vec![vec![-1, -5], vec![-3, 5]]);
        let (i, j) = (lits(&[1, 2]), lits(&[3, 4]));
        assert!(mutex_blocking(&i, &j, &u, 1));
        assert!(mutex_blocking(&i, &j, &u, 2));
        assert!(mutex_exact(&i, &j, &m));
        let (_, free) = setup(4, vec![]);
        for k in 0..=2 {
            assert!(!mutex_blocking(&i, &j, &free, k));
        }
    }

    #[test]
    fn exact_examples() {
        let (m, _) = setup(3, vec![vec![-1, -3]]);
        assert!(mutex_exact(&lits(&[1, 2]), &lits(&[2, 3]), &m));
        assert!(mutex_exact(&lits(&[1, 2]), &lits(&[-2, 3]), &m));
        let free = FeatureModel::new("f", 4, vec![], None).unwrap();
        assert!(!mutex_exact(&lits(&[1, 2]), &lits(&[3, 4]), &free));
        assert!(!mutex_exact(&lits(&[1, 2]), &lits(&[2, 3]), &free));
    }

    #[test]
    fn oracle_levels_agree_on_example() {
        let (m, u) = setup(3, vec![vec![-1, -3]]);
        for level in [MutexLevel::L0, MutexLevel::P1, MutexLevel::P2, MutexLevel::Exact] {
            let mut o = MutexOracle::new(&m, &u, level);
            for a in 0..u.len() {
                for b in 0..u.len() {
                    let want = a != b && mutex_exact(u.literals(a), u.literals(b), &m);
                    assert_eq!(o.exclusive(a, b), want, "{level} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn level_parse_display() {
        for level in [MutexLevel::L0, MutexLevel::P1, MutexLevel::P2, MutexLevel::Exact] {
            assert_eq!(level.to_string().parse::<MutexLevel>(), Ok(level));
        }
        assert!("p3".parse::<MutexLevel>().is_err());
    }
}
