//! Feature models, configurations and validity.
//!
//! Features are numbered from 1 as in DIMACS. A literal `f` activates feature
//! `f`, the literal `-f` deactivates it.

mod io;
mod simplify;

pub use io::{parse_dimacs, parse_model_file, write_dimacs, write_model_file, ModelDocument};
pub use simplify::{simplify, Origin, Reduction};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Neg;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sat::{Budget, ModelSolver, SolveOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("literal {literal} out of range for {n_features} features")]
    LiteralOutOfRange { literal: i64, n_features: usize },
    #[error("clause {index} is empty")]
    EmptyClause { index: usize },
    #[error("model must have at least one feature")]
    NoFeatures,
    #[error("no concrete features declared")]
    NoConcreteFeatures,
    #[error("concrete feature {feature} out of range for {n_features} features")]
    ConcreteOutOfRange { feature: i64, n_features: usize },
    #[error("model is unsatisfiable")]
    Unsatisfiable,
    #[error("invalid model document: {0}")]
    Document(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigurationError {
    #[error("configuration assigns {got} features, model has {expected}")]
    Incomplete { expected: usize, got: usize },
}

/// A feature together with a polarity, stored as a nonzero DIMACS integer.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Literal(i32);

impl Literal {
    /// # Panics
    /// If `value` is zero.
    pub fn new(value: i32) -> Self {
        assert!(value != 0, "literal must be nonzero");
        Literal(value)
    }

    pub fn try_new(value: i32) -> Option<Self> {
        (value != 0).then_some(Literal(value))
    }

    pub fn with_polarity(feature: usize, positive: bool) -> Self {
        let f = feature as i32;
        Literal(if positive { f } else { -f })
    }

    /// 1-based feature index.
    #[inline]
    pub fn feature(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    #[inline]
    pub fn value(self) -> i32 {
        self.0
    }
}

impl Neg for Literal {
    type Output = Literal;
    fn neg(self) -> Literal {
        Literal(-self.0)
    }
}

/// Orders by feature first, negative before positive.
impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.feature()
            .cmp(&other.feature())
            .then(self.0.cmp(&other.0))
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<i32> for Literal {
    type Error = &'static str;
    fn try_from(value: i32) -> Result<Self, Self::Error> {
        Literal::try_new(value).ok_or("literal must be nonzero")
    }
}

impl From<Literal> for i32 {
    fn from(l: Literal) -> i32 {
        l.0
    }
}

/// A disjunction of literals without duplicates or complementary pairs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Deduplicates literals, keeping first occurrences. Returns `None` for
    /// tautologies.
    pub fn normalized(literals: impl IntoIterator<Item = Literal>) -> Option<Clause> {
        let mut out: Vec<Literal> = Vec::new();
        for l in literals {
            if out.contains(&-l) {
                return None;
            }
            if !out.contains(&l) {
                out.push(l);
            }
        }
        Some(Clause { literals: out })
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

    pub fn is_satisfied_by(&self, config: &Configuration) -> bool {
        self.literals.iter().any(|&l| config.satisfies(l))
    }
}

/// The image of a literal under a [`Reduction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MappedLiteral {
    True,
    False,
    Lit(Literal),
}

/// A Boolean feature model in conjunctive normal form.
///
/// Immutable once built; every constructor checks satisfiability.
#[derive(Clone, Debug)]
pub struct FeatureModel {
    name: String,
    n_features: usize,
    clauses: Vec<Clause>,
    concrete: Vec<usize>,
    reduction: Option<Reduction>,
}

impl FeatureModel {
    /// Builds a model from raw clauses. `concrete = None` marks every feature
    /// concrete. Tautological clauses are dropped and duplicate literals
    /// removed.
    pub fn new(
        name: impl Into<String>,
        n_features: usize,
        clauses: Vec<Vec<i32>>,
        concrete: Option<Vec<i64>>,
    ) -> Result<Self, ModelError> {
        if n_features == 0 {
            return Err(ModelError::NoFeatures);
        }
        let mut normalized = Vec::with_capacity(clauses.len());
        for (index, raw) in clauses.into_iter().enumerate() {
            if raw.is_empty() {
                return Err(ModelError::EmptyClause { index });
            }
            let mut lits = Vec::with_capacity(raw.len());
            for v in raw {
                if v == 0 || v.unsigned_abs() as usize > n_features {
                    return Err(ModelError::LiteralOutOfRange {
                        literal: v as i64,
                        n_features,
                    });
                }
                lits.push(Literal(v));
            }
            if let Some(c) = Clause::normalized(lits) {
                normalized.push(c);
            }
        }
        let concrete = match concrete {
            None => (1..=n_features).collect(),
            Some(list) => {
                let mut out = Vec::with_capacity(list.len());
                for f in list {
                    if f < 1 || f as u64 > n_features as u64 {
                        return Err(ModelError::ConcreteOutOfRange {
                            feature: f,
                            n_features,
                        });
                    }
                    out.push(f as usize);
                }
                out.sort_unstable();
                out.dedup();
                out
            }
        };
        let model = Self::from_parts(name.into(), n_features, normalized, concrete, None)?;
        Ok(model)
    }

    pub(crate) fn from_parts(
        name: String,
        n_features: usize,
        clauses: Vec<Clause>,
        concrete: Vec<usize>,
        reduction: Option<Reduction>,
    ) -> Result<Self, ModelError> {
        if concrete.is_empty() {
            return Err(ModelError::NoConcreteFeatures);
        }
        let model = FeatureModel {
            name,
            n_features,
            clauses,
            concrete,
            reduction,
        };
        let mut solver = ModelSolver::new(&model, 0);
        match solver.solve(&[], &Budget::unlimited()) {
            SolveOutcome::Sat(_) => Ok(model),
            _ => Err(ModelError::Unsatisfiable),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Sorted 1-based indices of the concrete features.
    pub fn concrete_features(&self) -> &[usize] {
        &self.concrete
    }

    pub fn reduction(&self) -> Option<&Reduction> {
        self.reduction.as_ref()
    }

    /// Maps a literal over the original features into the clause space.
    /// Identity for models that were never simplified.
    #[inline]
    pub fn map_literal(&self, l: Literal) -> MappedLiteral {
        match &self.reduction {
            None => MappedLiteral::Lit(l),
            Some(r) => r.map_literal(l),
        }
    }

    /// Completes a raw assignment of the clause space into a configuration
    /// over the original features.
    pub fn reconstruct(&self, mut values: Vec<bool>) -> Configuration {
        if let Some(r) = &self.reduction {
            r.reconstruct(&mut values);
        }
        Configuration { values }
    }

    pub fn is_valid_configuration(&self, config: &Configuration) -> Result<bool, ConfigurationError> {
        if config.len() != self.n_features {
            return Err(ConfigurationError::Incomplete {
                expected: self.n_features,
                got: config.len(),
            });
        }
        if let Some(r) = &self.reduction {
            if !r.is_consistent(config) {
                return Ok(false);
            }
        }
        Ok(self.clauses.iter().all(|c| c.is_satisfied_by(config)))
    }

    /// SHA-256 over the canonical text form of the model.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(io::dimacs_body(self).as_bytes());
        hasher.update(b"concrete");
        for f in &self.concrete {
            hasher.update(format!(" {f}").as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// A complete assignment of all features.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    values: Vec<bool>,
}

impl Configuration {
    pub fn from_values(values: Vec<bool>) -> Self {
        Configuration { values }
    }

    /// Builds from one literal per feature 1..=n in any order.
    pub fn from_literals(n_features: usize, literals: &[Literal]) -> Option<Self> {
        let mut values = vec![None; n_features];
        for &l in literals {
            let slot = values.get_mut(l.feature().checked_sub(1)?)?;
            match slot {
                Some(v) if *v != l.is_positive() => return None,
                _ => *slot = Some(l.is_positive()),
            }
        }
        let values = values.into_iter().collect::<Option<Vec<bool>>>()?;
        Some(Configuration { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of 1-based `feature`.
    #[inline]
    pub fn value(&self, feature: usize) -> bool {
        self.values[feature - 1]
    }

    #[inline]
    pub fn satisfies(&self, l: Literal) -> bool {
        self.values[l.feature() - 1] == l.is_positive()
    }

    pub fn contains_all(&self, literals: &[Literal]) -> bool {
        literals.iter().all(|&l| self.satisfies(l))
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn set(&mut self, feature: usize, value: bool) {
        self.values[feature - 1] = value;
    }

    pub fn literals(&self) -> impl Iterator<Item = Literal> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| Literal::with_polarity(i + 1, v))
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.literals()).finish()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for l in self.literals() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("feature {feature} assigned both values")]
pub struct AssignmentConflict {
    pub feature: usize,
}

/// Values for a subset of the features.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialAssignment {
    assigned: BTreeMap<usize, bool>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_literals(literals: &[Literal]) -> Result<Self, AssignmentConflict> {
        let mut p = Self::new();
        for &l in literals {
            p.assign(l)?;
        }
        Ok(p)
    }

    pub fn assign(&mut self, l: Literal) -> Result<(), AssignmentConflict> {
        match self.assigned.insert(l.feature(), l.is_positive()) {
            Some(old) if old != l.is_positive() => {
                self.assigned.insert(l.feature(), old);
                Err(AssignmentConflict { feature: l.feature() })
            }
            _ => Ok(()),
        }
    }

    pub fn get(&self, feature: usize) -> Option<bool> {
        self.assigned.get(&feature).copied()
    }

    pub fn len(&self) -> usize {
        self.assigned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assigned.is_empty()
    }

    pub fn literals(&self) -> Vec<Literal> {
        self.assigned
            .iter()
            .map(|(&f, &v)| Literal::with_polarity(f, v))
            .collect()
    }

    pub fn agrees_with(&self, config: &Configuration) -> bool {
        self.assigned.iter().all(|(&f, &v)| config.value(f) == v)
    }
}
