//! Embedded SAT oracle.
//!
//! [`Solver`] is a plain incremental CDCL solver over its own variable space.
//! [`ModelSolver`] wraps one for a [`FeatureModel`] and speaks in feature
//! literals, translating through the model's simplification map.

mod solver;

pub use solver::{Lit, Solver, Stats, Status, Var};

use crate::clock::Deadline;
use crate::model::{Configuration, FeatureModel, Literal, MappedLiteral, PartialAssignment};

/// Default conflict budget for queries that tolerate an unknown answer.
pub const DEFAULT_CONFLICT_BUDGET: u64 = 100_000;

/// Limits for a single solve call.
#[derive(Clone, Debug, Default)]
pub struct Budget {
    conflicts: Option<u64>,
    deadline: Option<Deadline>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }

    pub fn conflicts(limit: u64) -> Self {
        Budget {
            conflicts: Some(limit),
            deadline: None,
        }
    }

    pub fn until(deadline: Deadline) -> Self {
        Budget {
            conflicts: None,
            deadline: Some(deadline),
        }
    }

    pub fn with_deadline(mut self, deadline: Deadline) -> Self {
        self.deadline = Some(deadline);
        self
    }

    /// Keeps the deadline (for work accounting) but lifts the conflict limit.
    pub fn without_conflict_limit(&self) -> Self {
        Budget {
            conflicts: None,
            deadline: self.deadline.clone(),
        }
    }

    pub fn conflict_limit(&self) -> Option<u64> {
        self.conflicts
    }

    pub(crate) fn deadline(&self) -> Option<&Deadline> {
        self.deadline.as_ref()
    }
}

/// A standalone CNF instance over variables `1..=n_vars`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SatInstance {
    pub n_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl SatInstance {
    pub fn new(n_vars: usize, clauses: Vec<Vec<i32>>) -> Self {
        debug_assert!(clauses
            .iter()
            .flatten()
            .all(|&v| v != 0 && v.unsigned_abs() as usize <= n_vars));
        debug_assert!(clauses.iter().all(|c| !c.is_empty()));
        SatInstance { n_vars, clauses }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    /// Values of variables `1..=n_vars` (index 0 is variable 1).
    Satisfiable(Vec<bool>),
    Unsatisfiable,
    Timeout,
}

/// One-shot solve of `instance` under `assumptions` (DIMACS literals).
pub fn solve(instance: &SatInstance, assumptions: &[i32], budget: &Budget) -> SatResult {
    let mut s = Solver::with_vars(instance.n_vars, 0);
    for c in &instance.clauses {
        let lits: Vec<Lit> = c.iter().map(|&v| Lit::from_dimacs(v)).collect();
        if !s.add_clause(&lits) {
            return SatResult::Unsatisfiable;
        }
    }
    let assumptions: Vec<Lit> = assumptions.iter().map(|&v| Lit::from_dimacs(v)).collect();
    match s.solve(&assumptions, budget) {
        Status::Sat => SatResult::Satisfiable(s.model()[..instance.n_vars].to_vec()),
        Status::Unsat => SatResult::Unsatisfiable,
        Status::Unknown => SatResult::Timeout,
    }
}

/// Outcome of a query against a feature model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Configuration),
    Unsat,
    Unknown,
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveOutcome::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveOutcome::Unsat)
    }
}

/// Maps feature literals to solver literals; `None` when some literal is
/// false by simplification or the set contains a complementary pair.
pub(crate) fn map_assumptions(model: &FeatureModel, lits: &[Literal]) -> Option<Vec<Lit>> {
    let mut out = Vec::with_capacity(lits.len());
    for &l in lits {
        match model.map_literal(l) {
            MappedLiteral::True => {}
            MappedLiteral::False => return None,
            MappedLiteral::Lit(m) => {
                let lit = Lit::from_dimacs(m.value());
                if out.contains(&!lit) {
                    return None;
                }
                if !out.contains(&lit) {
                    out.push(lit);
                }
            }
        }
    }
    Some(out)
}

/// Incremental solver loaded with a model's clauses. Single-threaded; create
/// one per worker.
#[derive(Debug)]
pub struct ModelSolver<'m> {
    model: &'m FeatureModel,
    solver: Solver,
}

impl<'m> ModelSolver<'m> {
    pub fn new(model: &'m FeatureModel, seed: u64) -> Self {
        let mut solver = Solver::with_vars(model.n_features(), seed);
        for c in model.clauses() {
            let lits: Vec<Lit> = c.literals().iter().map(|l| Lit::from_dimacs(l.value())).collect();
            solver.add_clause(&lits);
        }
        ModelSolver { model, solver }
    }

    pub fn model(&self) -> &'m FeatureModel {
        self.model
    }

    pub fn stats(&self) -> Stats {
        self.solver.stats()
    }

    /// Biases branching toward `literals` without constraining the result.
    pub fn prefer(&mut self, literals: &[Literal]) {
        for &l in literals {
            if let MappedLiteral::Lit(m) = self.model.map_literal(l) {
                let lit = Lit::from_dimacs(m.value());
                self.solver.set_phase(lit.var(), lit.is_positive());
            }
        }
    }

    /// Looks for a valid configuration containing every literal in
    /// `assumptions`.
    pub fn solve(&mut self, assumptions: &[Literal], budget: &Budget) -> SolveOutcome {
        let Some(mapped) = map_assumptions(self.model, assumptions) else {
            return SolveOutcome::Unsat;
        };
        match self.solver.solve(&mapped, budget) {
            Status::Sat => {
                let values = self.solver.model()[..self.model.n_features()].to_vec();
                let config = self.model.reconstruct(values);
                debug_assert!(self.model.is_valid_configuration(&config).unwrap());
                debug_assert!(config.contains_all(assumptions));
                SolveOutcome::Sat(config)
            }
            Status::Unsat => SolveOutcome::Unsat,
            Status::Unknown => SolveOutcome::Unknown,
        }
    }

    pub fn extend(&mut self, partial: &PartialAssignment, budget: &Budget) -> SolveOutcome {
        self.solve(&partial.literals(), budget)
    }
}

/// A valid configuration agreeing with `partial`, or `None` if there is none.
pub fn extend(model: &FeatureModel, partial: &PartialAssignment) -> Option<Configuration> {
    match ModelSolver::new(model, 0).extend(partial, &Budget::unlimited()) {
        SolveOutcome::Sat(c) => Some(c),
        _ => None,
    }
}
