//! Clause-level preprocessing: unit propagation and merging of features
//! linked by a bidirectional implication.

use std::collections::BTreeSet;

use super::{Clause, Configuration, FeatureModel, Literal, MappedLiteral, ModelError};

/// Where the value of an original feature comes from after simplification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    /// Still a variable of the simplified clause set.
    Free,
    /// Forced by unit propagation.
    Fixed(bool),
    /// Equal to the value of a literal on a free representative feature.
    Alias(Literal),
}

/// Reconstruction map from a simplified clause space to the original features.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduction {
    origins: Vec<Origin>,
}

impl Reduction {
    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn origin(&self, feature: usize) -> Origin {
        self.origins[feature - 1]
    }

    pub fn map_literal(&self, l: Literal) -> MappedLiteral {
        match self.origins[l.feature() - 1] {
            Origin::Free => MappedLiteral::Lit(l),
            Origin::Fixed(v) => {
                if v == l.is_positive() {
                    MappedLiteral::True
                } else {
                    MappedLiteral::False
                }
            }
            Origin::Alias(r) => MappedLiteral::Lit(if l.is_positive() { r } else { -r }),
        }
    }

    /// Overwrites eliminated features from their origin.
    pub fn reconstruct(&self, values: &mut [bool]) {
        for (i, origin) in self.origins.iter().enumerate() {
            match *origin {
                Origin::Free => {}
                Origin::Fixed(v) => values[i] = v,
                Origin::Alias(r) => values[i] = values[r.feature() - 1] == r.is_positive(),
            }
        }
    }

    pub fn is_consistent(&self, config: &Configuration) -> bool {
        self.origins.iter().enumerate().all(|(i, origin)| match *origin {
            Origin::Free => true,
            Origin::Fixed(v) => config.value(i + 1) == v,
            Origin::Alias(r) => config.value(i + 1) == config.satisfies(r),
        })
    }

    pub fn eliminated(&self) -> usize {
        self.origins.iter().filter(|o| **o != Origin::Free).count()
    }
}

/// Union-find over features where every node stores its parity relative to
/// its parent: `value(f) = value(parent) xor parity`.
struct Equivalences {
    parent: Vec<usize>,
    parity: Vec<bool>,
    fixed: Vec<Option<bool>>,
}

impl Equivalences {
    fn new(n: usize) -> Self {
        Equivalences {
            parent: (0..n).collect(),
            parity: vec![false; n],
            fixed: vec![None; n],
        }
    }

    fn find(&mut self, v: usize) -> (usize, bool) {
        let p = self.parent[v];
        if p == v {
            return (v, false);
        }
        let (root, par) = self.find(p);
        self.parent[v] = root;
        self.parity[v] ^= par;
        (root, self.parity[v])
    }

    fn map(&mut self, l: Literal) -> MappedLiteral {
        let (root, par) = self.find(l.feature() - 1);
        let positive = l.is_positive() ^ par;
        match self.fixed[root] {
            Some(v) if v == positive => MappedLiteral::True,
            Some(_) => MappedLiteral::False,
            None => MappedLiteral::Lit(Literal::with_polarity(root + 1, positive)),
        }
    }

    /// Makes literal `l` true. Returns false on conflict.
    fn fix(&mut self, l: Literal) -> bool {
        let (root, par) = self.find(l.feature() - 1);
        let value = l.is_positive() ^ par;
        match self.fixed[root] {
            Some(v) => v == value,
            None => {
                self.fixed[root] = Some(value);
                true
            }
        }
    }

    /// Records `a <-> b` for literals on free roots. Returns false on conflict.
    fn unite(&mut self, a: Literal, b: Literal) -> bool {
        let (ra, pa) = self.find(a.feature() - 1);
        let (rb, pb) = self.find(b.feature() - 1);
        // value(ra) ^ pa ^ !a.pos == value(rb) ^ pb ^ !b.pos
        let rel = pa ^ pb ^ !a.is_positive() ^ !b.is_positive();
        if ra == rb {
            return !rel;
        }
        let (root, child) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[child] = root;
        self.parity[child] = rel;
        match self.fixed[child].take() {
            None => true,
            Some(v) => {
                let implied = v ^ rel;
                match self.fixed[root] {
                    Some(w) => w == implied,
                    None => {
                        self.fixed[root] = Some(implied);
                        true
                    }
                }
            }
        }
    }
}

/// Returns an equivalent model: same features, same concrete set, same valid
/// configurations, with unit clauses and bidirectional implications folded
/// into a [`Reduction`].
pub fn simplify(model: &FeatureModel) -> Result<FeatureModel, ModelError> {
    let n = model.n_features();
    let mut eq = Equivalences::new(n);
    let mut clauses: Vec<Vec<Literal>> = model
        .clauses()
        .iter()
        .map(|c| c.literals().to_vec())
        .collect();
    if let Some(r) = model.reduction() {
        for (i, origin) in r.origins().iter().enumerate() {
            let f = Literal::with_polarity(i + 1, true);
            match *origin {
                Origin::Free => {}
                Origin::Fixed(v) => clauses.push(vec![if v { f } else { -f }]),
                Origin::Alias(l) => {
                    clauses.push(vec![-f, l]);
                    clauses.push(vec![f, -l]);
                }
            }
        }
    }

    loop {
        let mut changed = false;
        let mut next: BTreeSet<Vec<Literal>> = BTreeSet::new();
        'clauses: for clause in &clauses {
            let mut lits: Vec<Literal> = Vec::with_capacity(clause.len());
            for &l in clause {
                match eq.map(l) {
                    MappedLiteral::True => continue 'clauses,
                    MappedLiteral::False => {}
                    MappedLiteral::Lit(m) => {
                        if lits.contains(&-m) {
                            continue 'clauses;
                        }
                        if !lits.contains(&m) {
                            lits.push(m);
                        }
                    }
                }
            }
            match lits.len() {
                0 => return Err(ModelError::Unsatisfiable),
                1 => {
                    if !eq.fix(lits[0]) {
                        return Err(ModelError::Unsatisfiable);
                    }
                    changed = true;
                }
                _ => {
                    lits.sort();
                    next.insert(lits);
                }
            }
        }
        if !changed {
            for c in next.iter().filter(|c| c.len() == 2) {
                let (a, b) = (c[0], c[1]);
                // (a | b) & (-a | -b) means a <-> -b
                if next.contains(&vec![-a, -b]) {
                    if !eq.unite(a, -b) {
                        return Err(ModelError::Unsatisfiable);
                    }
                    changed = true;
                    break;
                }
            }
        }
        clauses = next.into_iter().collect();
        if !changed {
            break;
        }
    }

    let origins = (0..n)
        .map(|v| {
            let (root, par) = eq.find(v);
            match eq.fixed[root] {
                Some(value) => Origin::Fixed(value ^ par),
                None if root != v => Origin::Alias(Literal::with_polarity(root + 1, !par)),
                None => Origin::Free,
            }
        })
        .collect();
    let clauses = clauses
        .into_iter()
        .map(|lits| Clause { literals: lits })
        .collect();
    FeatureModel::from_parts(
        model.name().to_string(),
        n,
        clauses,
        model.concrete_features().to_vec(),
        Some(Reduction { origins }),
    )
}
