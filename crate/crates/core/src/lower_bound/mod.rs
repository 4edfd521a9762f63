//! Lower bounds from sets of mutually exclusive interactions.
//!
//! No configuration contains two mutually exclusive interactions, so any
//! sample needs at least one configuration per member of such a set.

mod clique;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Deadline;
use crate::interactions::{parse_interaction, Interaction, InteractionUniverse};
use crate::model::{FeatureModel, Literal};
use crate::mutex::{MutexLevel, MutexOracle};
use crate::sat::{Budget, ModelSolver, SolveOutcome};

/// A set of pairwise mutually exclusive valid interactions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MutexSet {
    members: Vec<Interaction>,
    level: MutexLevel,
}

impl MutexSet {
    pub fn new(mut members: Vec<Interaction>, level: MutexLevel) -> Self {
        members.sort();
        members.dedup();
        MutexSet { members, level }
    }

    pub fn from_vids(universe: &InteractionUniverse, vids: &[usize], level: MutexLevel) -> Self {
        MutexSet::new(vids.iter().map(|&v| universe.interaction(v)).collect(), level)
    }

    pub fn members(&self) -> &[Interaction] {
        &self.members
    }

    /// The predicate under which the members were found exclusive.
    pub fn level(&self) -> MutexLevel {
        self.level
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: &Interaction) -> bool {
        self.members.binary_search(i).is_ok()
    }

    /// Vids of the members; `None` if some member is not a valid interaction
    /// of `universe`.
    pub fn vids(&self, universe: &InteractionUniverse) -> Option<Vec<usize>> {
        self.members.iter().map(|i| universe.vid_of_interaction(i)).collect()
    }
}

/// Result of a bounded exact search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LbSolution {
    pub vids: Vec<usize>,
    pub optimal: bool,
}

/// Node limit for a single exact subproblem.
pub const DEFAULT_NODE_LIMIT: u64 = 2_000_000;

/// Maximum subset of `candidates` (vids) that is pairwise exclusive under
/// the oracle's predicate. Anytime: on budget-out returns the best found with
/// `optimal = false`. `warm` must be a pairwise exclusive subset of
/// `candidates`; the result is at least as large.
pub fn opt_lb(
    oracle: &mut MutexOracle<'_>,
    candidates: &[usize],
    warm: &[usize],
    deadline: &Deadline,
) -> LbSolution {
    let warm_idx: Vec<usize> = warm
        .iter()
        .filter_map(|w| candidates.iter().position(|c| c == w))
        .collect();
    let r = clique::max_clique(
        candidates.len(),
        |i, j| oracle.exclusive(candidates[i], candidates[j]),
        &warm_idx,
        deadline,
        DEFAULT_NODE_LIMIT,
    );
    let mut vids: Vec<usize> = r.vertices.into_iter().map(|i| candidates[i]).collect();
    vids.sort_unstable();
    LbSolution {
        vids,
        optimal: r.optimal,
    }
}

/// Vids of valid interactions containing `literal`.
pub fn containing(universe: &InteractionUniverse, literal: Literal) -> Vec<usize> {
    (0..universe.len())
        .filter(|&v| universe.literals(v).contains(&literal))
        .collect()
}

/// Largest exclusive set whose members all contain `literal`.
pub fn feature_fixed_set(oracle: &mut MutexOracle<'_>, literal: Literal, deadline: &Deadline) -> LbSolution {
    let candidates = containing(oracle.universe(), literal);
    opt_lb(oracle, &candidates, &[], deadline)
}

/// Constants of the constructive heuristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbSearchParams {
    /// Merge attempts between eviction decisions.
    pub merge_attempts: usize,
    /// Probability of emptying the set instead of evicting conflicting members.
    pub restart_probability: f64,
    /// Node limit for each feature-fixed subproblem.
    pub fixed_set_node_limit: u64,
}

impl Default for LbSearchParams {
    fn default() -> Self {
        LbSearchParams {
            merge_attempts: 16,
            restart_probability: 0.25,
            fixed_set_node_limit: 20_000,
        }
    }
}

struct FixedSets {
    index: Vec<Vec<usize>>,
    cache: Vec<Option<Vec<usize>>>,
}

impl FixedSets {
    fn new(universe: &InteractionUniverse) -> Self {
        let n = universe.n_features();
        let mut index = vec![Vec::new(); 2 * (n + 1)];
        for v in 0..universe.len() {
            for &l in universe.literals(v) {
                index[code(l)].push(v);
            }
        }
        FixedSets {
            cache: vec![None; index.len()],
            index,
        }
    }

    fn get(
        &mut self,
        oracle: &mut MutexOracle<'_>,
        l: Literal,
        deadline: &Deadline,
        node_limit: u64,
    ) -> &[usize] {
        let c = code(l);
        if self.cache[c].is_none() {
            let cands = &self.index[c];
            let r = clique::max_clique(
                cands.len(),
                |i, j| oracle.exclusive(cands[i], cands[j]),
                &[],
                deadline,
                node_limit,
            );
            self.cache[c] = Some(r.vertices.into_iter().map(|i| cands[i]).collect());
        }
        self.cache[c].as_deref().unwrap()
    }
}

fn code(l: Literal) -> usize {
    2 * l.feature() + l.is_positive() as usize
}

/// Constructive heuristic: merges feature-fixed exclusive sets guided by
/// invalid pairs, with periodic eviction or restart. Returns the best set
/// seen, as vids.
pub fn lb_search(
    oracle: &mut MutexOracle<'_>,
    params: &LbSearchParams,
    deadline: &Deadline,
    seed: u64,
) -> Vec<usize> {
    let universe = oracle.universe();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fixed = FixedSets::new(universe);
    let literals: Vec<Literal> = universe
        .concrete_features()
        .iter()
        .flat_map(|&f| [Literal::with_polarity(f, true), Literal::with_polarity(f, false)])
        .filter(|&l| universe.literal_is_valid(l))
        .collect();

    let mut set: Vec<usize> = Vec::new();
    let mut conflicts: Vec<u32> = vec![0; universe.len()];
    let mut best: Vec<usize> = Vec::new();
    let mut attempts = 0usize;

    let merge = |set: &mut Vec<usize>, conflicts: &mut [u32], add: &[usize], oracle: &mut MutexOracle<'_>| {
        for &i in add {
            if set.contains(&i) {
                continue;
            }
            let mut clash = false;
            for &j in set.iter() {
                if !oracle.exclusive(i, j) {
                    conflicts[j] += 1;
                    clash = true;
                }
            }
            if !clash {
                set.push(i);
            }
        }
    };

    for &p in &literals {
        if deadline.expired() {
            break;
        }
        let mut partners = vec![p];
        partners.extend(
            literals
                .iter()
                .copied()
                .filter(|&q| q == -p || (q.feature() != p.feature() && !universe.pair_is_valid(p, q))),
        );
        for q in partners {
            if deadline.expired() {
                break;
            }
            let add = fixed.get(oracle, q, deadline, params.fixed_set_node_limit).to_vec();
            merge(&mut set, &mut conflicts, &add, oracle);
            if set.len() > best.len() {
                best = set.clone();
            }
            attempts += 1;
            if attempts.is_multiple_of(params.merge_attempts.max(1)) {
                if rng.gen_bool(params.restart_probability.clamp(0.0, 1.0)) {
                    set.clear();
                } else {
                    let mut ranked: Vec<usize> = set.iter().copied().filter(|&v| conflicts[v] > 0).collect();
                    ranked.sort_by_key(|&v| (std::cmp::Reverse(conflicts[v]), v));
                    ranked.truncate(set.len().div_ceil(4));
                    set.retain(|v| !ranked.contains(v));
                }
                conflicts.iter_mut().for_each(|c| *c = 0);
            }
        }
    }
    best.sort_unstable();
    best
}

/// Neighborhood-size adaptation for the bound search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbTuning {
    /// Upper limit on the number of candidates handed to the exact solver.
    pub gamma: f64,
    pub grow_factor: f64,
    pub shrink_factor: f64,
    /// Grow when an iteration uses less than this fraction of its limit.
    pub fast_fraction: f64,
    /// Shrink when an iteration uses more than this fraction of its limit.
    pub slow_fraction: f64,
    /// Seconds per exact subproblem.
    pub iteration_time_limit: f64,
}

impl Default for LbTuning {
    fn default() -> Self {
        LbTuning {
            gamma: 1000.0,
            grow_factor: 1.10,
            shrink_factor: 0.90,
            fast_fraction: 0.50,
            slow_fraction: 0.95,
            iteration_time_limit: 6.0,
        }
    }
}

impl LbTuning {
    /// Adjusts `gamma` given the fraction of the time limit an iteration used.
    pub fn adapt(&mut self, used_fraction: f64) {
        if used_fraction < self.fast_fraction {
            self.gamma *= self.grow_factor;
        } else if used_fraction > self.slow_fraction {
            self.gamma = (self.gamma * self.shrink_factor).max(1.0);
        }
    }
}

/// Outcome of one neighborhood step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LnsStep {
    pub removed: Vec<usize>,
    pub candidates: usize,
    pub found: usize,
    pub optimal: bool,
    pub size_before: usize,
    pub size_after: usize,
}

/// Destroy-and-repair search over exclusive sets.
pub struct LbLns<'a, 'o> {
    oracle: &'o mut MutexOracle<'a>,
    pool: Vec<usize>,
    current: Vec<usize>,
    tuning: LbTuning,
    rng: ChaCha8Rng,
}

impl<'a, 'o> LbLns<'a, 'o> {
    /// `initial` must be pairwise exclusive under the oracle.
    pub fn new(oracle: &'o mut MutexOracle<'a>, initial: Vec<usize>, tuning: LbTuning, seed: u64) -> Self {
        let pool = (0..oracle.universe().len()).collect();
        LbLns::restricted(oracle, pool, initial, tuning, seed)
    }

    /// As [`LbLns::new`], drawing candidates only from `pool` (vids), which
    /// must contain `initial`.
    pub fn restricted(
        oracle: &'o mut MutexOracle<'a>,
        pool: Vec<usize>,
        initial: Vec<usize>,
        tuning: LbTuning,
        seed: u64,
    ) -> Self {
        let mut current = initial;
        current.sort_unstable();
        LbLns {
            oracle,
            pool,
            current,
            tuning,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn best(&self) -> &[usize] {
        &self.current
    }

    pub fn tuning(&self) -> &LbTuning {
        &self.tuning
    }

    /// Valid interactions exclusive to every member of `kept`.
    fn candidates_for(&mut self, kept: &[usize]) -> Vec<usize> {
        let mut cands = self.pool.clone();
        for &k in kept {
            cands.retain(|&v| self.oracle.exclusive(v, k));
        }
        cands
    }

    /// Picks the removed part: starting from everything removed, random
    /// members are kept while the candidate set exceeds `gamma`; members
    /// whose keeping would leave no candidates are skipped.
    fn select(&mut self) -> (Vec<usize>, Vec<usize>) {
        let mut order = self.current.clone();
        order.shuffle(&mut self.rng);
        let mut cands = self.pool.clone();
        let mut kept = Vec::new();
        for m in order {
            if (cands.len() as f64) <= self.tuning.gamma {
                break;
            }
            let next: Vec<usize> = cands
                .iter()
                .copied()
                .filter(|&v| self.oracle.exclusive(v, m))
                .collect();
            if next.is_empty() {
                continue;
            }
            kept.push(m);
            cands = next;
        }
        (kept, cands)
    }

    /// One iteration with a random neighborhood.
    pub fn step(&mut self, deadline: &Deadline) -> LnsStep {
        let (kept, cands) = self.select();
        self.repair(kept, cands, deadline)
    }

    /// One iteration removing exactly `removed` from the current set.
    pub fn step_with_removal(&mut self, removed: &[usize], deadline: &Deadline) -> LnsStep {
        let kept: Vec<usize> = self.current.iter().copied().filter(|v| !removed.contains(v)).collect();
        let cands = self.candidates_for(&kept);
        self.repair(kept, cands, deadline)
    }

    fn repair(&mut self, kept: Vec<usize>, cands: Vec<usize>, deadline: &Deadline) -> LnsStep {
        let start = deadline.clock().elapsed();
        let sub = deadline.within(self.tuning.iteration_time_limit);
        let removed: Vec<usize> = self.current.iter().copied().filter(|v| !kept.contains(v)).collect();
        let sol = opt_lb(self.oracle, &cands, &removed, &sub);
        let size_before = self.current.len();
        if kept.len() + sol.vids.len() >= size_before {
            let mut next = kept;
            next.extend_from_slice(&sol.vids);
            next.sort_unstable();
            next.dedup();
            self.current = next;
        }
        let used = deadline.clock().elapsed() - start;
        self.tuning.adapt(used / self.tuning.iteration_time_limit);
        LnsStep {
            removed,
            candidates: cands.len(),
            found: sol.vids.len(),
            optimal: sol.optimal,
            size_before,
            size_after: self.current.len(),
        }
    }

    /// True when `step` solved the whole pool to optimality, so further
    /// steps cannot improve.
    pub fn is_exhausted(&self, step: &LnsStep) -> bool {
        step.optimal && step.candidates == self.pool.len()
    }

    /// Iterates until `deadline`, or until `stop` returns true for the
    /// current size.
    pub fn run(&mut self, deadline: &Deadline, mut stop: impl FnMut(usize) -> bool) {
        while !deadline.expired() && !stop(self.current.len()) {
            let step = self.step(deadline);
            if self.is_exhausted(&step) {
                break;
            }
        }
    }
}

/// Runs the heuristic and then the neighborhood search until `deadline`.
pub fn lb_lns(
    oracle: &mut MutexOracle<'_>,
    initial: Vec<usize>,
    tuning: LbTuning,
    deadline: &Deadline,
    seed: u64,
) -> Vec<usize> {
    let mut lns = LbLns::new(oracle, initial, tuning, seed);
    lns.run(deadline, |_| false);
    lns.best().to_vec()
}

/// Why a certificate was rejected.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertificateViolation {
    #[error("{0} does not have the required strength {1}")]
    WrongStrength(Interaction, usize),
    #[error("{0} uses a feature that is not concrete")]
    NotConcrete(Interaction),
    #[error("{0} is not a valid interaction")]
    InvalidMember(Interaction),
    #[error("{0} and {1} occur together in a valid configuration")]
    Compatible(Interaction, Interaction),
}

/// Checks from the model alone that every member is valid and every pair is
/// jointly unsatisfiable. Exact: no conflict limit.
pub fn verify_mutex_certificate(
    members: &[Interaction],
    model: &FeatureModel,
    t: usize,
) -> Result<(), CertificateViolation> {
    let mut solver = ModelSolver::new(model, 0);
    let budget = Budget::unlimited();
    for m in members {
        if m.len() != t {
            return Err(CertificateViolation::WrongStrength(m.clone(), t));
        }
        if m
            .literals()
            .iter()
            .any(|l| model.concrete_features().binary_search(&l.feature()).is_err())
        {
            return Err(CertificateViolation::NotConcrete(m.clone()));
        }
        if !solver.solve(m.literals(), &budget).is_sat() {
            return Err(CertificateViolation::InvalidMember(m.clone()));
        }
    }
    for (k, a) in members.iter().enumerate() {
        for b in &members[..k] {
            if a.literals().iter().any(|&l| b.literals().contains(&-l)) {
                continue;
            }
            let joint: Vec<Literal> = a.literals().iter().chain(b.literals()).copied().collect();
            match solver.solve(&joint, &budget) {
                SolveOutcome::Unsat => {}
                _ => return Err(CertificateViolation::Compatible(b.clone(), a.clone())),
            }
        }
    }
    Ok(())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CertificateFileError {
    #[error("missing or malformed `lb-cert <name> <t> <count>` header")]
    Header,
    #[error("line {0}: not an interaction")]
    Line(usize),
    #[error("header declares {declared} interactions, found {found}")]
    Count { declared: usize, found: usize },
}

/// Parsed contents of a certificate file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateFile {
    pub model_name: String,
    pub t: usize,
    pub model_hash: Option<String>,
    pub members: Vec<Interaction>,
}

pub fn write_certificate_file(model_name: &str, model_hash: &str, t: usize, set: &MutexSet) -> String {
    let mut out = format!("lb-cert {} {} {}\nhash {}\n", model_name, t, set.len(), model_hash);
    let _ = write!(out, "{}", crate::interactions::write_interactions(set.members()));
    out
}

pub fn parse_certificate_file(text: &str) -> Result<CertificateFile, CertificateFileError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(CertificateFileError::Header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "lb-cert" {
        return Err(CertificateFileError::Header);
    }
    let t: usize = parts[2].parse().map_err(|_| CertificateFileError::Header)?;
    let declared: usize = parts[3].parse().map_err(|_| CertificateFileError::Header)?;
    let mut model_hash = None;
    let mut members = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if let Some(h) = line.strip_prefix("hash ") {
            model_hash = Some(h.trim().to_string());
            continue;
        }
        members.push(parse_interaction(line).ok_or(CertificateFileError::Line(idx + 1))?);
    }
    if members.len() != declared {
        return Err(CertificateFileError::Count {
            declared,
            found: members.len(),
        });
    }
    Ok(CertificateFile {
        model_name: parts[1].to_string(),
        t,
        model_hash,
        members,
    })
}
