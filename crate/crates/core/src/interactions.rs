//! The universe of t-wise interactions over concrete features.
//!
//! Candidates are numbered densely: the colexicographic rank of the feature
//! combination (over concrete positions) times `2^t`, plus a polarity code
//! whose bit `k` is set when the `k`-th literal is positive. Valid
//! interactions get a second, compact index (`vid`) used by the search
//! algorithms.

use std::fmt;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::clock::{Clock, Deadline};
use crate::model::{Configuration, FeatureModel, Literal};
use crate::sample::Sample;
use crate::sat::{Budget, ModelSolver, SolveOutcome};

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InteractionError {
    #[error("interaction is empty")]
    Empty,
    #[error("feature {0} appears twice")]
    DuplicateFeature(usize),
}

/// A set of literals on distinct features, kept sorted by feature.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    literals: Vec<Literal>,
}

impl Interaction {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Result<Self, InteractionError> {
        let mut literals: Vec<Literal> = literals.into_iter().collect();
        if literals.is_empty() {
            return Err(InteractionError::Empty);
        }
        literals.sort();
        for w in literals.windows(2) {
            if w[0].feature() == w[1].feature() {
                return Err(InteractionError::DuplicateFeature(w[0].feature()));
            }
        }
        Ok(Interaction { literals })
    }

    /// # Panics
    /// On zero values or repeated features.
    pub fn of(values: &[i32]) -> Self {
        Interaction::new(values.iter().map(|&v| Literal::new(v))).expect("well-formed interaction")
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_covered_by(&self, config: &Configuration) -> bool {
        config.contains_all(&self.literals)
    }
}

impl fmt::Debug for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.literals).finish()
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// One interaction per line, sorted.
pub fn write_interactions<'a>(items: impl IntoIterator<Item = &'a Interaction>) -> String {
    let mut sorted: Vec<&Interaction> = items.into_iter().collect();
    sorted.sort();
    let mut out = String::new();
    for i in sorted {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_interaction(line: &str) -> Option<Interaction> {
    let lits = line
        .split_whitespace()
        .map(|t| t.parse::<i32>().ok().and_then(Literal::try_new))
        .collect::<Option<Vec<Literal>>>()?;
    Interaction::new(lits).ok()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UniverseError {
    #[error("interaction strength {0} is not supported")]
    UnsupportedStrength(usize),
    #[error("seed configuration {0} is not a valid configuration of the model")]
    InvalidSeed(usize),
    #[error("the SAT oracle could not classify {0}")]
    Undecided(Interaction),
}

/// Exact partition of all t-wise candidates into valid and invalid ones.
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct InteractionUniverse {
    t: usize,
    n_features: usize,
    concrete: Vec<usize>,
    position: Vec<u32>,
    binom: Vec<Vec<u64>>,
    candidates: usize,
    valid: FixedBitSet,
    valid_ids: Vec<usize>,
    vid_of: Vec<u32>,
    valid_lits: Vec<Literal>,
    literal_valid: Vec<bool>,
    pairs: Option<Box<InteractionUniverse>>,
}

fn binomials(n: usize, k: usize) -> Vec<Vec<u64>> {
    let mut b = vec![vec![0u64; k + 1]; n + 1];
    for i in 0..=n {
        b[i][0] = 1;
        for j in 1..=k.min(i) {
            b[i][j] = b[i - 1][j - 1] + if j < i { b[i - 1][j] } else { 0 };
        }
    }
    b
}

impl InteractionUniverse {
    fn empty_for(model: &FeatureModel, t: usize) -> Self {
        let concrete = model.concrete_features().to_vec();
        let mut position = vec![NONE; model.n_features() + 1];
        for (p, &f) in concrete.iter().enumerate() {
            position[f] = p as u32;
        }
        let binom = binomials(concrete.len(), t);
        let candidates = (binom[concrete.len()][t] as usize) << t;
        InteractionUniverse {
            t,
            n_features: model.n_features(),
            concrete,
            position,
            binom,
            candidates,
            valid: FixedBitSet::with_capacity(candidates),
            valid_ids: Vec::new(),
            vid_of: Vec::new(),
            valid_lits: Vec::new(),
            literal_valid: Vec::new(),
            pairs: None,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn concrete_features(&self) -> &[usize] {
        &self.concrete
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates
    }

    /// Number of valid interactions.
    pub fn len(&self) -> usize {
        self.valid_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_ids.is_empty()
    }

    pub fn invalid_count(&self) -> usize {
        self.candidates - self.valid_ids.len()
    }

    /// Candidate index of a t-set of literals on concrete features.
    pub fn candidate_index(&self, literals: &[Literal]) -> Option<usize> {
        if literals.len() != self.t {
            return None;
        }
        let mut pos: Vec<(u32, bool)> = Vec::with_capacity(self.t);
        for &l in literals {
            let p = *self.position.get(l.feature())?;
            if p == NONE {
                return None;
            }
            pos.push((p, l.is_positive()));
        }
        pos.sort_unstable();
        let mut rank = 0u64;
        let mut code = 0usize;
        for (k, &(p, positive)) in pos.iter().enumerate() {
            if k > 0 && pos[k - 1].0 == p {
                return None;
            }
            rank += self.binom[p as usize][k + 1];
            code |= (positive as usize) << k;
        }
        Some(((rank as usize) << self.t) | code)
    }

    /// Literals of candidate `cid`, sorted by feature.
    pub fn decode(&self, cid: usize) -> Vec<Literal> {
        let t = self.t;
        let code = cid & ((1 << t) - 1);
        let mut rank = (cid >> t) as u64;
        let mut out = vec![Literal::new(1); t];
        let mut upper = self.concrete.len();
        for k in (0..t).rev() {
            let mut p = upper - 1;
            while self.binom[p][k + 1] > rank {
                p -= 1;
            }
            rank -= self.binom[p][k + 1];
            out[k] = Literal::with_polarity(self.concrete[p], code >> k & 1 == 1);
            upper = p;
        }
        out
    }

    pub fn is_valid_candidate(&self, cid: usize) -> bool {
        self.valid.contains(cid)
    }

    /// Compact index of a valid interaction.
    pub fn vid(&self, literals: &[Literal]) -> Option<usize> {
        let cid = self.candidate_index(literals)?;
        let v = self.vid_of[cid];
        (v != NONE).then_some(v as usize)
    }

    pub fn vid_of_interaction(&self, i: &Interaction) -> Option<usize> {
        self.vid(i.literals())
    }

    pub fn contains(&self, i: &Interaction) -> bool {
        self.vid_of_interaction(i).is_some()
    }

    /// Sorted literals of valid interaction `vid`.
    #[inline]
    pub fn literals(&self, vid: usize) -> &[Literal] {
        &self.valid_lits[vid * self.t..(vid + 1) * self.t]
    }

    pub fn interaction(&self, vid: usize) -> Interaction {
        Interaction {
            literals: self.literals(vid).to_vec(),
        }
    }

    pub fn valid_interactions(&self) -> impl Iterator<Item = Interaction> + '_ {
        (0..self.len()).map(|v| self.interaction(v))
    }

    pub fn invalid_interactions(&self) -> impl Iterator<Item = Interaction> + '_ {
        (0..self.candidates)
            .filter(|&c| !self.valid.contains(c))
            .map(|c| Interaction {
                literals: self.decode(c),
            })
    }

    /// Whether some valid configuration sets literal `l` (concrete only).
    pub fn literal_is_valid(&self, l: Literal) -> bool {
        let p = self.position[l.feature()];
        p != NONE && self.literal_valid[2 * p as usize + l.is_positive() as usize]
    }

    /// Whether two literals on distinct concrete features occur together in
    /// some valid configuration.
    #[inline]
    pub fn pair_is_valid(&self, a: Literal, b: Literal) -> bool {
        let table = match &self.pairs {
            Some(p) => p,
            None => self,
        };
        debug_assert_eq!(table.t, 2);
        match table.candidate_index(&[a, b]) {
            Some(cid) => table.valid.contains(cid),
            None => false,
        }
    }

    fn for_each_covered_candidate(&self, config: &Configuration, mut f: impl FnMut(usize)) {
        let values: Vec<bool> = self.concrete.iter().map(|&feat| config.value(feat)).collect();
        let t = self.t;
        if t == 2 {
            for j in 1..values.len() {
                let base = self.binom[j][2];
                let bj = (values[j] as usize) << 1;
                for (i, &vi) in values[..j].iter().enumerate() {
                    let rank = base + i as u64;
                    f(((rank as usize) << 2) | bj | vi as usize);
                }
            }
            return;
        }
        fn rec(
            u: &InteractionUniverse,
            values: &[bool],
            k: usize,
            start: usize,
            rank: u64,
            code: usize,
            f: &mut dyn FnMut(usize),
        ) {
            if k == u.t {
                f(((rank as usize) << u.t) | code);
                return;
            }
            for p in start..values.len() {
                rec(
                    u,
                    values,
                    k + 1,
                    p + 1,
                    rank + u.binom[p][k + 1],
                    code | (values[p] as usize) << k,
                    f,
                );
            }
        }
        rec(self, &values, 0, 0, 0, 0, &mut f);
    }

    /// Calls `f` with the vid of every valid interaction `config` covers.
    pub fn for_each_covered(&self, config: &Configuration, mut f: impl FnMut(usize)) {
        self.for_each_covered_candidate(config, |cid| {
            let v = self.vid_of[cid];
            if v != NONE {
                f(v as usize);
            }
        });
    }

    pub fn covered_by(&self, config: &Configuration) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_covered(config, |v| out.push(v));
        out
    }

    /// Bitset over vids of interactions covered by any member of `sample`.
    pub fn coverage(&self, sample: &Sample) -> FixedBitSet {
        let mut set = FixedBitSet::with_capacity(self.len());
        for c in sample {
            self.for_each_covered(c, |v| set.insert(v));
        }
        set
    }

    pub fn covered_interactions(&self, sample: &Sample) -> Vec<Interaction> {
        self.coverage(sample).ones().map(|v| self.interaction(v)).collect()
    }

    /// For each vid, how many configurations of `sample` cover it.
    pub fn cover_counts(&self, sample: &Sample) -> Vec<u32> {
        let mut counts = vec![0u32; self.len()];
        for c in sample {
            self.for_each_covered(c, |v| counts[v] += 1);
        }
        counts
    }

    /// Interactions covered by `sample` but not by `sample` without the
    /// configurations at `removed`.
    pub fn missing_after_removal(&self, sample: &Sample, removed: &[usize]) -> Vec<usize> {
        let before = self.coverage(sample);
        let after = self.coverage(&sample.without(removed));
        before.difference(&after).collect()
    }

    pub fn is_fully_covered_by(&self, sample: &Sample) -> bool {
        self.coverage(sample).count_ones(..) == self.len()
    }
}

/// Classifies every t-wise candidate over the model's concrete features.
///
/// Configurations in `seed` and every SAT witness found along the way mark
/// the interactions they cover as valid without further oracle calls.
pub fn enumerate_universe(
    model: &FeatureModel,
    t: usize,
    seed: Option<&Sample>,
) -> Result<InteractionUniverse, UniverseError> {
    enumerate_universe_with(model, t, seed, &Clock::wall())
}

/// As [`enumerate_universe`], reporting solver work to `clock`.
pub fn enumerate_universe_with(
    model: &FeatureModel,
    t: usize,
    seed: Option<&Sample>,
    clock: &Clock,
) -> Result<InteractionUniverse, UniverseError> {
    if t == 0 {
        return Err(UniverseError::UnsupportedStrength(t));
    }
    if let Some(s) = seed {
        for (i, c) in s.iter().enumerate() {
            if !model.is_valid_configuration(c).unwrap_or(false) {
                return Err(UniverseError::InvalidSeed(i));
            }
        }
    }
    let budget = Budget::until(Deadline::never(clock));
    let mut solver = ModelSolver::new(model, 0);
    let mut u = InteractionUniverse::empty_for(model, t);
    let c = u.concrete.len();

    let mut witnesses: Vec<Configuration> = seed.map(|s| s.configurations().to_vec()).unwrap_or_default();

    let mut literal_valid = vec![false; 2 * c];
    let mark_literals = |lv: &mut Vec<bool>, cfg: &Configuration, concrete: &[usize]| {
        for (p, &f) in concrete.iter().enumerate() {
            lv[2 * p + cfg.value(f) as usize] = true;
        }
    };
    for w in &witnesses {
        mark_literals(&mut literal_valid, w, &u.concrete);
    }
    for p in 0..2 * c {
        if literal_valid[p] {
            continue;
        }
        let lit = Literal::with_polarity(u.concrete[p / 2], p % 2 == 1);
        match solver.solve(&[lit], &budget) {
            SolveOutcome::Sat(cfg) => {
                mark_literals(&mut literal_valid, &cfg, &u.concrete);
                witnesses.push(cfg);
            }
            SolveOutcome::Unsat => {}
            SolveOutcome::Unknown => {
                return Err(UniverseError::Undecided(Interaction { literals: vec![lit] }))
            }
        }
    }

    let mut decided = FixedBitSet::with_capacity(u.candidates);
    for w in &witnesses {
        u.for_each_covered_candidate(w, |cid| decided.insert(cid));
    }
    let mut valid = FixedBitSet::with_capacity(u.candidates);
    valid.union_with(&decided);

    for cid in 0..u.candidates {
        if decided.contains(cid) {
            continue;
        }
        let lits = u.decode(cid);
        let dead = lits.iter().any(|l| {
            let p = u.position[l.feature()] as usize;
            !literal_valid[2 * p + l.is_positive() as usize]
        });
        decided.insert(cid);
        if dead {
            continue;
        }
        match solver.solve(&lits, &budget) {
            SolveOutcome::Sat(cfg) => {
                u.for_each_covered_candidate(&cfg, |other| {
                    decided.insert(other);
                    valid.insert(other);
                });
            }
            SolveOutcome::Unsat => {}
            SolveOutcome::Unknown => {
                return Err(UniverseError::Undecided(Interaction { literals: lits }))
            }
        }
    }

    u.valid = valid;
    u.vid_of = vec![NONE; u.candidates];
    for cid in u.valid.ones() {
        u.vid_of[cid] = u.valid_ids.len() as u32;
        u.valid_ids.push(cid);
    }
    u.valid_lits = u.valid_ids.iter().flat_map(|&cid| u.decode(cid)).collect();
    u.literal_valid = literal_valid;
    if t != 2 {
        u.pairs = Some(Box::new(enumerate_universe_with(model, 2, seed, clock)?));
    }
    Ok(u)
}
