//! Brute-force reference implementations shared by the integration tests.
//! Everything here works on raw clause lists and explicit enumeration, and
//! uses nothing from the library except for conversions.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samplns::{Configuration, FeatureModel, Literal};

pub type Clauses = Vec<Vec<i32>>;

/// Random k-CNF with `m` clauses over distinct variables.
pub fn random_cnf(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> Clauses {
    (0..m)
        .map(|_| {
            let mut vars: Vec<i32> = Vec::with_capacity(k);
            while vars.len() < k.min(n) {
                let v = rng.gen_range(1..=n as i32);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            vars.into_iter().map(|v| if rng.gen_bool(0.5) { v } else { -v }).collect()
        })
        .collect()
}

pub fn satisfies(assignment: u32, clauses: &Clauses) -> bool {
    clauses.iter().all(|c| {
        c.iter().any(|&l| {
            let bit = assignment >> (l.unsigned_abs() - 1) & 1 == 1;
            bit == (l > 0)
        })
    })
}

/// Valid assignments as bitmasks (bit f-1 is feature f).
pub fn valid_assignments(n: usize, clauses: &Clauses) -> Vec<u32> {
    (0..1u32 << n).filter(|&a| satisfies(a, clauses)).collect()
}

pub fn to_configuration(n: usize, a: u32) -> Configuration {
    Configuration::from_values((0..n).map(|f| a >> f & 1 == 1).collect())
}

pub fn to_mask(c: &Configuration) -> u32 {
    c.values().iter().enumerate().fold(0, |m, (f, &v)| m | (v as u32) << f)
}

pub fn holds(a: u32, lit: i32) -> bool {
    (a >> (lit.unsigned_abs() - 1) & 1 == 1) == (lit > 0)
}

pub fn contains_all(a: u32, lits: &[i32]) -> bool {
    lits.iter().all(|&l| holds(a, l))
}

/// All t-subsets of `features` with all polarities, each sorted by feature.
pub fn candidate_interactions(features: &[usize], t: usize) -> Vec<Vec<i32>> {
    fn rec(features: &[usize], t: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for i in start..features.len() {
            cur.push(features[i]);
            rec(features, t, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut combos = Vec::new();
    rec(features, t, 0, &mut Vec::new(), &mut combos);
    let mut out = Vec::new();
    for c in combos {
        for code in 0..1u32 << t {
            out.push(
                c.iter()
                    .enumerate()
                    .map(|(k, &f)| if code >> k & 1 == 1 { f as i32 } else { -(f as i32) })
                    .collect(),
            );
        }
    }
    out
}

/// Interactions over `features` contained in some valid assignment.
pub fn valid_interactions(configs: &[u32], features: &[usize], t: usize) -> BTreeSet<Vec<i32>> {
    candidate_interactions(features, t)
        .into_iter()
        .filter(|i| configs.iter().any(|&a| contains_all(a, i)))
        .collect()
}

pub fn exclusive(configs: &[u32], a: &[i32], b: &[i32]) -> bool {
    !configs.iter().any(|&c| contains_all(c, a) && contains_all(c, b))
}

pub fn interaction_values(i: &samplns::Interaction) -> Vec<i32> {
    i.literals().iter().map(|l| l.value()).collect()
}

pub fn literals(v: &[i32]) -> Vec<Literal> {
    v.iter().map(|&x| Literal::new(x)).collect()
}

pub fn model(name: &str, n: usize, clauses: &Clauses) -> FeatureModel {
    FeatureModel::new(name, n, clauses.clone(), None).expect("satisfiable model")
}

/// Random satisfiable 3-CNF models; unsatisfiable draws are discarded.
pub fn random_models(seed: u64, count: usize, n_range: (usize, usize), ratio: (f64, f64)) -> Vec<(usize, Clauses)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.gen_range(n_range.0..=n_range.1);
        let r = rng.gen_range(ratio.0..=ratio.1);
        let m = (r * n as f64).round() as usize;
        let clauses = random_cnf(&mut rng, n, m, 3);
        if (0..1u32 << n).any(|a| satisfies(a, &clauses)) {
            out.push((n, clauses));
        }
    }
    out
}

/// Size of a minimum cover of `required` by `configs`, by depth-first search
/// over the least-covered interaction. Pruning uses a greedily built set of
/// pairwise exclusive uncovered interactions, each of which needs its own
/// configuration. `None` if no cover exists.
pub fn min_cover(configs: &[u32], required: &[Vec<i32>]) -> Option<usize> {
    let options: Vec<Vec<usize>> = required
        .iter()
        .map(|i| (0..configs.len()).filter(|&c| contains_all(configs[c], i)).collect())
        .collect();
    if options.iter().any(|o| o.is_empty()) {
        return None;
    }
    let covers: Vec<Vec<usize>> = (0..configs.len())
        .map(|c| (0..required.len()).filter(|&r| options[r].contains(&c)).collect())
        .collect();
    let mut excl: HashMap<(usize, usize), bool> = HashMap::new();
    let mut is_excl = |a: usize, b: usize| {
        *excl
            .entry((a.min(b), a.max(b)))
            .or_insert_with(|| !options[a].iter().any(|c| options[b].contains(c)))
    };
    let mut best = configs.len().min(required.len());
    let mut count = vec![0u32; required.len()];
    fn dfs(
        depth: usize,
        best: &mut usize,
        count: &mut [u32],
        options: &[Vec<usize>],
        covers: &[Vec<usize>],
        is_excl: &mut dyn FnMut(usize, usize) -> bool,
    ) {
        let uncovered: Vec<usize> = (0..count.len()).filter(|&r| count[r] == 0).collect();
        if uncovered.is_empty() {
            *best = (*best).min(depth);
            return;
        }
        let mut indep: Vec<usize> = Vec::new();
        let mut order = uncovered.clone();
        order.sort_by_key(|&r| options[r].len());
        for &r in &order {
            if indep.iter().all(|&s| is_excl(r, s)) {
                indep.push(r);
            }
        }
        if depth + indep.len() >= *best {
            return;
        }
        let pick = order[0];
        for &c in &options[pick] {
            for &r in &covers[c] {
                count[r] += 1;
            }
            dfs(depth + 1, best, count, options, covers, is_excl);
            for &r in &covers[c] {
                count[r] -= 1;
            }
        }
    }
    best += 1;
    dfs(0, &mut best, &mut count, &options, &covers, &mut is_excl);
    Some(best)
}

/// Maximum independent set size of the graph on `n` vertices with the given
/// adjacency, by exhaustive subset enumeration (`n <= 24`).
pub fn max_independent_set(n: usize, adjacent: impl Fn(usize, usize) -> bool) -> usize {
    assert!(n <= 24);
    let mut adj = vec![0u32; n];
    for (i, row) in adj.iter_mut().enumerate() {
        for j in 0..n {
            if i != j && adjacent(i, j) {
                *row |= 1 << j;
            }
        }
    }
    let mut best = 0;
    for s in 0u32..1 << n {
        let size = s.count_ones() as usize;
        if size <= best {
            continue;
        }
        if (0..n).all(|i| s >> i & 1 == 0 || adj[i] & s == 0) {
            best = size;
        }
    }
    best
}

/// Whether some `k` of `configs` cover every interaction in `required`.
pub fn cover_of_size_exists(configs: &[u32], required: &[Vec<i32>], k: usize) -> bool {
    assert!(required.len() <= 128);
    let masks: Vec<u128> = configs
        .iter()
        .map(|&c| {
            required
                .iter()
                .enumerate()
                .filter(|(_, i)| contains_all(c, i))
                .fold(0u128, |m, (r, _)| m | 1 << r)
        })
        .collect();
    let full: u128 = if required.len() == 128 { u128::MAX } else { (1u128 << required.len()) - 1 };
    fn rec(masks: &[u128], start: usize, left: usize, acc: u128, full: u128) -> bool {
        if acc == full {
            return true;
        }
        if left == 0 {
            return false;
        }
        (start..masks.len()).any(|i| rec(masks, i + 1, left - 1, acc | masks[i], full))
    }
    rec(&masks, 0, k, 0, full)
}
