//! Exact minimum cover of a set of interactions by `k` configuration copies.
//!
//! Each copy `i` has its own feature variables constrained by the model, a
//! usage flag `u_i`, and one indicator per required interaction that may only
//! be true when the copy is used and contains the interaction. Every
//! interaction needs some indicator. Usage flags form a prefix
//! (`u_{i+1} -> u_i`), so minimizing the number of used copies is a
//! descending sequence of solves assuming `!u_j`.

use thiserror::Error;

use crate::clock::Deadline;
use crate::interactions::Interaction;
use crate::model::{Configuration, FeatureModel, MappedLiteral};
use crate::sample::Sample;
use crate::sat::{Budget, Lit, Solver, Status, Var};

/// Outcome of one subsolver call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OptSampleResult {
    /// A minimum cover.
    Optimal(Sample),
    /// The best cover found before the budget ran out.
    Feasible(Sample),
    /// No cover uses at most `k` configurations.
    Infeasible,
    /// Budget exhausted without any cover and without a warm start.
    Unknown,
}

impl OptSampleResult {
    pub fn sample(&self) -> Option<&Sample> {
        match self {
            OptSampleResult::Optimal(s) | OptSampleResult::Feasible(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, OptSampleResult::Optimal(_))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OptSampleError {
    #[error("symmetry interaction {0} is pinned twice")]
    DuplicatePin(Interaction),
    #[error("symmetry interaction {0} is not among the required interactions")]
    PinNotRequired(Interaction),
    #[error("warm start has {got} configurations but k is {k}")]
    WarmTooLarge { got: usize, k: usize },
}

/// Subproblem description.
#[derive(Clone, Copy, Debug)]
pub struct OptSampleRequest<'a> {
    pub required: &'a [Interaction],
    pub k: usize,
    /// A cover of `required` with at most `k` configurations.
    pub warm: Option<&'a Sample>,
    /// Pairwise exclusive members of `required`; member `j` goes to copy `j`.
    pub symmetry: &'a [Interaction],
}

struct Encoding {
    solver: Solver,
    n: usize,
    k: usize,
    x: Vec<Var>,
    u: Vec<Var>,
}

impl Encoding {
    fn x(&self, copy: usize, feature: usize) -> Var {
        self.x[copy * self.n + feature - 1]
    }

    fn lit(&self, copy: usize, l: crate::model::Literal) -> Lit {
        self.x(copy, l.feature()).lit(l.is_positive())
    }

    fn extract(&self, model: &FeatureModel) -> Vec<Configuration> {
        let m = self.solver.model();
        let used: Vec<bool> = self.u.iter().map(|v| m[v.index()]).collect();
        debug_assert!(
            used.windows(2).all(|w| w[0] || !w[1]),
            "used copies must form a prefix"
        );
        (0..self.k)
            .filter(|&i| used[i])
            .map(|i| {
                let values = (1..=self.n).map(|f| m[self.x(i, f).index()]).collect();
                model.reconstruct(values)
            })
            .collect()
    }
}

fn covers(configs: &[Configuration], required: &[Interaction]) -> bool {
    required.iter().all(|r| configs.iter().any(|c| r.is_covered_by(c)))
}

/// Minimum number of valid configurations covering `required`, using at most
/// `k` of them. With a warm start the result is never larger than the warm
/// start.
pub fn opt_sample(
    model: &FeatureModel,
    request: OptSampleRequest<'_>,
    deadline: &Deadline,
    seed: u64,
) -> Result<OptSampleResult, OptSampleError> {
    let OptSampleRequest {
        required,
        k,
        warm,
        symmetry,
    } = request;
    for (j, e) in symmetry.iter().enumerate() {
        if symmetry[..j].contains(e) {
            return Err(OptSampleError::DuplicatePin(e.clone()));
        }
        if !required.contains(e) {
            return Err(OptSampleError::PinNotRequired(e.clone()));
        }
    }
    if let Some(w) = warm {
        if w.len() > k {
            return Err(OptSampleError::WarmTooLarge { got: w.len(), k });
        }
        debug_assert!(covers(w.configurations(), required));
    }
    if required.is_empty() {
        return Ok(OptSampleResult::Optimal(Sample::default()));
    }
    if symmetry.len() > k {
        return Ok(OptSampleResult::Infeasible);
    }
    if let Some(w) = warm {
        if w.len() == symmetry.len() {
            return Ok(OptSampleResult::Optimal(w.clone()));
        }
    }

    let n = model.n_features();
    let mut enc = Encoding {
        solver: Solver::new(seed),
        n,
        k,
        x: Vec::with_capacity(n * k),
        u: Vec::with_capacity(k),
    };
    enc.solver.reserve_vars(n * k + k + k * required.len());
    for _ in 0..n * k {
        let v = enc.solver.new_var();
        enc.x.push(v);
    }
    for _ in 0..k {
        let v = enc.solver.new_var();
        enc.u.push(v);
    }
    for i in 0..k {
        for c in model.clauses() {
            let lits: Vec<Lit> = c.literals().iter().map(|&l| enc.lit(i, l)).collect();
            enc.solver.add_clause(&lits);
        }
        if i + 1 < k {
            let (a, b) = (enc.u[i + 1], enc.u[i]);
            enc.solver.add_clause(&[a.lit(false), b.lit(true)]);
        }
    }

    let mapped: Vec<Option<Vec<crate::model::Literal>>> = required
        .iter()
        .map(|r| {
            let mut out = Vec::new();
            for &l in r.literals() {
                match model.map_literal(l) {
                    MappedLiteral::True => {}
                    MappedLiteral::False => return None,
                    MappedLiteral::Lit(m) => out.push(m),
                }
            }
            Some(out)
        })
        .collect();
    if mapped.iter().any(|m| m.is_none()) {
        return Ok(OptSampleResult::Infeasible);
    }

    let mut y: Vec<Vec<Var>> = Vec::with_capacity(required.len());
    for lits in mapped.iter().flatten() {
        let mut row = Vec::with_capacity(k);
        for i in 0..k {
            let yi = enc.solver.new_var();
            enc.solver.add_clause(&[yi.lit(false), enc.u[i].lit(true)]);
            for &l in lits {
                let x = enc.lit(i, l);
                enc.solver.add_clause(&[yi.lit(false), x]);
            }
            row.push(yi);
        }
        let any: Vec<Lit> = row.iter().map(|v| v.lit(true)).collect();
        enc.solver.add_clause(&any);
        y.push(row);
    }
    for (j, e) in symmetry.iter().enumerate() {
        let r = required.iter().position(|q| q == e).expect("checked above");
        enc.solver.add_clause(&[y[r][j].lit(true)]);
    }

    let mut best: Option<Vec<Configuration>> = None;
    if let Some(w) = warm {
        // Put the configuration containing pin j into copy j.
        let mut slots: Vec<Option<&Configuration>> = vec![None; k];
        let mut free: Vec<&Configuration> = w.iter().collect();
        for (j, e) in symmetry.iter().enumerate() {
            if let Some(pos) = free.iter().position(|c| e.is_covered_by(c)) {
                slots[j] = Some(free.remove(pos));
            }
        }
        let mut rest = free.into_iter();
        for slot in slots.iter_mut().take(w.len()) {
            if slot.is_none() {
                *slot = rest.next();
            }
        }
        for (i, slot) in slots.iter().enumerate() {
            enc.solver.set_phase(enc.u[i], slot.is_some());
            if let Some(c) = slot {
                for f in 1..=n {
                    enc.solver.set_phase(enc.x(i, f), c.value(f));
                }
                for (r, lits) in required.iter().zip(&y) {
                    enc.solver.set_phase(lits[i], r.is_covered_by(c));
                }
            }
        }
        best = Some(w.configurations().to_vec());
    }

    let budget = Budget::until(deadline.clone());
    let lower = symmetry.len().max(1);
    loop {
        let assumptions: Vec<Lit> = match &best {
            Some(b) if b.len() <= lower => {
                return Ok(OptSampleResult::Optimal(Sample::new(b.clone())));
            }
            Some(b) => vec![enc.u[b.len() - 1].lit(false)],
            None => Vec::new(),
        };
        match enc.solver.solve(&assumptions, &budget) {
            Status::Sat => {
                let found = enc.extract(model);
                debug_assert!(covers(&found, required));
                debug_assert!(found.iter().all(|c| model.is_valid_configuration(c).unwrap()));
                best = Some(found);
            }
            Status::Unsat => {
                return Ok(match best {
                    Some(b) => OptSampleResult::Optimal(Sample::new(b)),
                    None => OptSampleResult::Infeasible,
                });
            }
            Status::Unknown => {
                return Ok(match best {
                    Some(b) => OptSampleResult::Feasible(Sample::new(b)),
                    None => OptSampleResult::Unknown,
                });
            }
        }
    }
}

/// Solves with `k` copies and no warm start, doubling `k` on infeasibility
/// up to `max_k`.
pub fn opt_sample_growing(
    model: &FeatureModel,
    required: &[Interaction],
    k: usize,
    max_k: usize,
    symmetry: &[Interaction],
    deadline: &Deadline,
    seed: u64,
) -> Result<OptSampleResult, OptSampleError> {
    let mut k = k.max(1);
    loop {
        let request = OptSampleRequest {
            required,
            k,
            warm: None,
            symmetry,
        };
        let result = opt_sample(model, request, deadline, seed)?;
        if result != OptSampleResult::Infeasible || k >= max_k {
            return Ok(result);
        }
        k = (2 * k).min(max_k);
    }
}
