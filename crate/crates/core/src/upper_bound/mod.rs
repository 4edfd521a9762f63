//! Full-coverage samples: a greedy seeder, the exact cover subsolver, and
//! the neighborhood search that alternates between them.

mod opt_sample;

pub use opt_sample::{opt_sample, opt_sample_growing, OptSampleError, OptSampleRequest, OptSampleResult};

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{Clock, Deadline};
use crate::interactions::{Interaction, InteractionUniverse};
use crate::lower_bound::{
    lb_search, verify_mutex_certificate, CertificateViolation, LbLns, LbSearchParams, LbTuning, MutexSet,
};
use crate::model::{Configuration, FeatureModel, Literal};
use crate::mutex::{MutexLevel, MutexOracle};
use crate::sample::Sample;
use crate::sat::{Budget, ModelSolver, SolveOutcome, DEFAULT_CONFLICT_BUDGET};

/// SAT calls allowed while packing a single configuration.
const PACKING_CALLS: usize = 2_000;

/// Greedy full-coverage sample: each configuration packs as many uncovered
/// interactions as stay jointly satisfiable, then is completed by the solver.
pub fn initial_sample(model: &FeatureModel, universe: &InteractionUniverse, seed: u64, clock: &Clock) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solver = ModelSolver::new(model, seed);
    let budget = Budget::conflicts(DEFAULT_CONFLICT_BUDGET).with_deadline(Deadline::never(clock));
    let mut uncovered = FixedBitSet::with_capacity(universe.len());
    uncovered.insert_range(..);
    let mut sample = Sample::default();
    while let Some(first) = uncovered.ones().next() {
        let start = if uncovered.count_ones(..) > 1 {
            rng.gen_range(0..universe.len())
        } else {
            first
        };
        let order: Vec<usize> = uncovered
            .ones()
            .filter(|&v| v >= start)
            .chain(uncovered.ones().filter(|&v| v < start))
            .collect();
        let mut chosen: Vec<Literal> = Vec::new();
        let mut assigned = vec![None; model.n_features() + 1];
        let mut witness: Option<Configuration> = None;
        let mut calls = 0;
        for v in order {
            let lits = universe.literals(v);
            if lits.iter().any(|l| assigned[l.feature()] == Some(!l.is_positive())) {
                continue;
            }
            let accepted = match &witness {
                Some(w) if w.contains_all(lits) => true,
                _ if calls >= PACKING_CALLS => false,
                _ => {
                    calls += 1;
                    let mut query = chosen.clone();
                    query.extend(lits.iter().filter(|l| assigned[l.feature()].is_none()));
                    match solver.solve(&query, &budget) {
                        SolveOutcome::Sat(c) => {
                            witness = Some(c);
                            true
                        }
                        _ => false,
                    }
                }
            };
            if accepted {
                for &l in lits {
                    if assigned[l.feature()].is_none() {
                        assigned[l.feature()] = Some(l.is_positive());
                        chosen.push(l);
                    }
                }
            }
        }
        let config = match witness {
            Some(w) => w,
            None => match solver.solve(universe.literals(first), &Budget::unlimited()) {
                SolveOutcome::Sat(c) => c,
                _ => unreachable!("valid interactions extend to a configuration"),
            },
        };
        universe.for_each_covered(&config, |v| uncovered.set(v, false));
        clock.tick(universe.len() as u64 / 8);
        sample.push(config);
    }
    sample
}

/// Why a sample is not a full-coverage sample.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SampleViolation {
    #[error("configuration {index} assigns {got} features, expected {expected}")]
    Incomplete { index: usize, expected: usize, got: usize },
    #[error("configuration {index} ({config}) violates the model")]
    InvalidConfiguration { index: usize, config: Configuration },
    #[error("interaction {0} is not covered")]
    Missing(Interaction),
}

/// Checks validity of every configuration and coverage of every valid
/// interaction; reports the first problem.
pub fn verify_sample(
    sample: &Sample,
    model: &FeatureModel,
    universe: &InteractionUniverse,
) -> Result<(), SampleViolation> {
    for (index, c) in sample.iter().enumerate() {
        match model.is_valid_configuration(c) {
            Ok(true) => {}
            Ok(false) => {
                return Err(SampleViolation::InvalidConfiguration {
                    index,
                    config: c.clone(),
                })
            }
            Err(_) => {
                return Err(SampleViolation::Incomplete {
                    index,
                    expected: model.n_features(),
                    got: c.len(),
                })
            }
        }
    }
    let covered = universe.coverage(sample);
    match (0..universe.len()).find(|&v| !covered.contains(v)) {
        Some(v) => Err(SampleViolation::Missing(universe.interaction(v))),
        None => Ok(()),
    }
}

/// Random subset of `sample` (indices) whose removal uncovers at most `phi`
/// interactions. Falls back to a single configuration so progress is
/// possible.
pub fn select_removal(
    sample: &Sample,
    universe: &InteractionUniverse,
    phi: f64,
    rng: &mut impl Rng,
) -> Vec<usize> {
    if sample.is_empty() {
        return Vec::new();
    }
    let mut counts = universe.cover_counts(sample);
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.shuffle(rng);
    let mut chosen = Vec::new();
    let mut missing = 0usize;
    for &i in &order {
        let mut lost = 0;
        universe.for_each_covered(&sample.configurations()[i], |v| {
            if counts[v] == 1 {
                lost += 1;
            }
        });
        if (missing + lost) as f64 > phi {
            break;
        }
        universe.for_each_covered(&sample.configurations()[i], |v| counts[v] -= 1);
        missing += lost;
        chosen.push(i);
    }
    if chosen.is_empty() {
        chosen.push(order[0]);
    }
    chosen
}

/// Neighborhood-size adaptation for the sample search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UbTuning {
    /// Largest number of uncovered interactions handed to the subsolver.
    pub phi: f64,
    pub grow_factor: f64,
    pub shrink_factor: f64,
    /// Seconds per subsolver call.
    pub iteration_time_limit: f64,
}

impl Default for UbTuning {
    fn default() -> Self {
        UbTuning {
            phi: 250.0,
            grow_factor: 1.25,
            shrink_factor: 0.75,
            iteration_time_limit: 60.0,
        }
    }
}

impl UbTuning {
    pub fn adapt(&mut self, optimal: bool, improved: bool) {
        if optimal {
            self.phi *= self.grow_factor;
        } else if !improved {
            self.phi = (self.phi * self.shrink_factor).max(1.0);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One thread, work-unit clock, reproducible.
    #[default]
    Deterministic,
    /// Bound search on its own thread, wall clock.
    Parallel,
}

/// Settings of a full run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplnsConfig {
    /// Total seconds.
    pub time_limit: f64,
    pub tuning: UbTuning,
    pub lb_tuning: LbTuning,
    pub lb_search: LbSearchParams,
    pub mutex_level: MutexLevel,
    pub mode: Mode,
    pub seed: u64,
    pub max_iterations: Option<usize>,
}

impl Default for SamplnsConfig {
    fn default() -> Self {
        let tuning = UbTuning::default();
        let lb_tuning = LbTuning {
            iteration_time_limit: tuning.iteration_time_limit * 0.1,
            ..LbTuning::default()
        };
        SamplnsConfig {
            time_limit: 900.0,
            tuning,
            lb_tuning,
            lb_search: LbSearchParams::default(),
            mutex_level: MutexLevel::L0,
            mode: Mode::Deterministic,
            seed: 0,
            max_iterations: None,
        }
    }
}

/// Bounds after one iteration of the sample search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub ub: usize,
    pub lb: usize,
    pub time_s: f64,
    pub removed: usize,
    pub uncovered: usize,
    pub optimal: bool,
}

#[derive(Clone, Debug)]
pub struct SamplnsResult {
    pub sample: Sample,
    pub lower_bound: MutexSet,
    pub initial_size: usize,
    pub history: Vec<IterationRecord>,
    /// Clock time of the last sample improvement (or of the initial sample).
    pub t_last_ub: f64,
    /// Clock time of the last bound improvement.
    pub t_last_lb: f64,
    pub elapsed: f64,
    /// The whole sample was re-solved to optimality.
    pub proven_by_subsolver: bool,
}

impl SamplnsResult {
    pub fn ub(&self) -> usize {
        self.sample.len()
    }

    pub fn lb(&self) -> usize {
        self.lower_bound.len()
    }

    pub fn is_optimal(&self) -> bool {
        self.ub() == self.lb()
    }
}

#[derive(Debug, Error)]
pub enum SamplnsError {
    #[error("internal error: bound certificate rejected: {0}")]
    Certificate(#[from] CertificateViolation),
    #[error("internal error: sample lost coverage: {0}")]
    Sample(#[from] SampleViolation),
    #[error("internal error: {0}")]
    Subsolver(#[from] OptSampleError),
}

/// Best-known bound shared between the two searches.
struct BoundCell {
    best: Mutex<(Vec<usize>, f64)>,
}

impl BoundCell {
    fn new() -> Self {
        BoundCell {
            best: Mutex::new((Vec::new(), 0.0)),
        }
    }

    fn size(&self) -> usize {
        self.best.lock().unwrap().0.len()
    }

    fn offer(&self, vids: &[usize], time: f64) -> bool {
        let mut g = self.best.lock().unwrap();
        if vids.len() > g.0.len() {
            g.0 = vids.to_vec();
            g.1 = time;
            true
        } else {
            false
        }
    }

    fn take(&self) -> (Vec<usize>, f64) {
        self.best.lock().unwrap().clone()
    }
}

/// Greedy exclusive subset of `cands`, rarest-covered first, refined by a
/// short neighborhood search restricted to `cands`.
fn symmetry_set(
    oracle: &mut MutexOracle<'_>,
    cands: &[usize],
    counts: &[u32],
    tuning: &LbTuning,
    deadline: &Deadline,
    seed: u64,
) -> Vec<usize> {
    let mut order = cands.to_vec();
    order.sort_by_key(|&v| (counts[v], v));
    let mut set: Vec<usize> = Vec::new();
    for v in order {
        if set.iter().all(|&w| oracle.exclusive(v, w)) {
            set.push(v);
        }
    }
    let sub = deadline.within(tuning.iteration_time_limit);
    let mut lns = LbLns::restricted(oracle, cands.to_vec(), set, tuning.clone(), seed);
    lns.run(&sub, |_| false);
    lns.best().to_vec()
}

struct UbLoop<'a> {
    model: &'a FeatureModel,
    universe: &'a InteractionUniverse,
    config: &'a SamplnsConfig,
    deadline: Deadline,
    sample: Sample,
    tuning: UbTuning,
    rng: ChaCha8Rng,
    iteration: usize,
    t_last_ub: f64,
    proven: bool,
}

impl UbLoop<'_> {
    fn done(&self, lb: usize) -> bool {
        self.proven
            || self.sample.len() <= lb
            || self.deadline.expired()
            || self.config.max_iterations.is_some_and(|m| self.iteration >= m)
    }

    /// One destroy-and-repair step. Returns the symmetry set it computed.
    fn step(&mut self, oracle: &mut MutexOracle<'_>) -> Result<(IterationRecord, Vec<usize>), SamplnsError> {
        let clock = self.deadline.clock().clone();
        let iter_deadline = self.deadline.within(self.tuning.iteration_time_limit);
        let removed = select_removal(&self.sample, self.universe, self.tuning.phi, &mut self.rng);
        let missing = self.universe.missing_after_removal(&self.sample, &removed);
        clock.tick((self.universe.len() * self.sample.len()) as u64 / 64 + 1);
        let counts = self.universe.cover_counts(&self.sample);
        let sym_seed = self.rng.gen();
        let symmetry = symmetry_set(
            oracle,
            &missing,
            &counts,
            &self.config.lb_tuning,
            &iter_deadline,
            sym_seed,
        );
        let required: Vec<Interaction> = missing.iter().map(|&v| self.universe.interaction(v)).collect();
        let sym: Vec<Interaction> = symmetry.iter().map(|&v| self.universe.interaction(v)).collect();
        let warm = self.sample.subset(&removed);
        let solve_seed = self.rng.gen();
        let result = opt_sample(
            self.model,
            OptSampleRequest {
                required: &required,
                k: removed.len(),
                warm: Some(&warm),
                symmetry: &sym,
            },
            &iter_deadline,
            solve_seed,
        )?;
        let optimal = result.is_optimal();
        let before = self.sample.len();
        if let Some(replacement) = result.sample() {
            if replacement.len() < removed.len() {
                let mut next = self.sample.without(&removed);
                for c in replacement {
                    next.push(c.clone());
                }
                debug_assert_eq!(verify_sample(&next, self.model, self.universe), Ok(()));
                self.sample = next;
            }
        }
        let improved = self.sample.len() < before;
        if improved {
            self.t_last_ub = clock.elapsed();
        }
        if optimal && removed.len() == before {
            self.proven = true;
        }
        self.tuning.adapt(optimal, improved);
        self.iteration += 1;
        let record = IterationRecord {
            iteration: self.iteration,
            ub: self.sample.len(),
            lb: 0,
            time_s: clock.elapsed(),
            removed: removed.len(),
            uncovered: missing.len(),
            optimal,
        };
        Ok((record, symmetry))
    }
}

/// Minimizes a full-coverage sample while searching for a matching bound.
///
/// Time is measured on `clock`; in deterministic mode pass a work clock to
/// make every number in the result reproducible.
pub fn samplns(
    model: &FeatureModel,
    universe: &InteractionUniverse,
    config: &SamplnsConfig,
    clock: &Clock,
) -> Result<SamplnsResult, SamplnsError> {
    let deadline = Deadline::after(clock, config.time_limit);
    let sample = initial_sample(model, universe, config.seed, clock);
    let initial_size = sample.len();
    let mut ub = UbLoop {
        model,
        universe,
        config,
        deadline: deadline.clone(),
        sample,
        tuning: config.tuning.clone(),
        rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0001),
        iteration: 0,
        t_last_ub: clock.elapsed(),
        proven: false,
    };
    let cell = BoundCell::new();
    let mut history = Vec::new();
    let lb_seed = config.seed ^ 0x5eed_0002;
    let lb_start = deadline.within(config.tuning.iteration_time_limit);

    match config.mode {
        Mode::Deterministic => {
            let mut oracle = MutexOracle::new(model, universe, config.mutex_level).with_deadline(deadline.clone());
            let initial = lb_search(&mut oracle, &config.lb_search, &lb_start, lb_seed);
            cell.offer(&initial, clock.elapsed());
            let mut lb_oracle = MutexOracle::new(model, universe, config.mutex_level).with_deadline(deadline.clone());
            let mut lns = LbLns::new(&mut lb_oracle, initial, config.lb_tuning.clone(), lb_seed);
            let mut lb_finished = false;
            while !ub.done(cell.size()) {
                if !lb_finished {
                    let step = lns.step(&deadline);
                    cell.offer(lns.best(), clock.elapsed());
                    lb_finished = lns.is_exhausted(&step);
                }
                if ub.done(cell.size()) {
                    break;
                }
                let (mut record, sym) = ub.step(&mut oracle)?;
                cell.offer(&sym, clock.elapsed());
                record.lb = cell.size();
                history.push(record);
            }
        }
        Mode::Parallel => {
            let stop = AtomicBool::new(false);
            std::thread::scope(|scope| -> Result<(), SamplnsError> {
                let cell = &cell;
                let stop = &stop;
                let lb_deadline = deadline.clone();
                let lb_start = lb_start.clone();
                scope.spawn(move || {
                    let mut oracle =
                        MutexOracle::new(model, universe, config.mutex_level).with_deadline(lb_deadline.clone());
                    let initial = lb_search(&mut oracle, &config.lb_search, &lb_start, lb_seed);
                    cell.offer(&initial, lb_deadline.clock().elapsed());
                    let mut lns = LbLns::new(&mut oracle, initial, config.lb_tuning.clone(), lb_seed);
                    while !stop.load(Ordering::Relaxed) && !lb_deadline.expired() {
                        let step = lns.step(&lb_deadline);
                        cell.offer(lns.best(), lb_deadline.clock().elapsed());
                        if lns.is_exhausted(&step) {
                            break;
                        }
                    }
                });
                let mut oracle = MutexOracle::new(model, universe, config.mutex_level).with_deadline(deadline.clone());
                let result = (|| {
                    while !ub.done(cell.size()) {
                        let (mut record, sym) = ub.step(&mut oracle)?;
                        cell.offer(&sym, clock.elapsed());
                        record.lb = cell.size();
                        history.push(record);
                    }
                    Ok(())
                })();
                stop.store(true, Ordering::Relaxed);
                result
            })?;
        }
    }

    let (vids, t_last_lb) = cell.take();
    let lower_bound = MutexSet::from_vids(universe, &vids, config.mutex_level);
    verify_mutex_certificate(lower_bound.members(), model, universe.t())?;
    verify_sample(&ub.sample, model, universe)?;
    Ok(SamplnsResult {
        initial_size,
        history,
        t_last_ub: ub.t_last_ub,
        t_last_lb,
        elapsed: clock.elapsed(),
        proven_by_subsolver: ub.proven,
        sample: ub.sample,
        lower_bound,
    })
}
