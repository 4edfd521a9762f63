//! Anytime maximum clique by branch and bound with greedy coloring bounds.
//!
//! Mutually exclusive interaction sets are cliques of the exclusiveness graph
//! (independent sets of the compatibility graph).

use fixedbitset::FixedBitSet;

use crate::clock::Deadline;

pub(crate) struct CliqueResult {
    pub vertices: Vec<usize>,
    pub optimal: bool,
}

struct Search<'a> {
    adj: Vec<FixedBitSet>,
    best: Vec<usize>,
    current: Vec<usize>,
    deadline: &'a Deadline,
    nodes: u64,
    node_limit: u64,
    aborted: bool,
}

impl Search<'_> {
    fn color_sort(&self, p: &FixedBitSet) -> (Vec<usize>, Vec<usize>) {
        let mut order = Vec::with_capacity(p.count_ones(..));
        let mut bounds = Vec::with_capacity(order.capacity());
        let mut uncolored = p.clone();
        let mut color = 0;
        while !uncolored.is_clear() {
            color += 1;
            let mut q = uncolored.clone();
            while let Some(v) = q.ones().next() {
                uncolored.set(v, false);
                q.set(v, false);
                q.difference_with(&self.adj[v]);
                order.push(v);
                bounds.push(color);
            }
        }
        (order, bounds)
    }

    fn expand(&mut self, mut p: FixedBitSet) {
        self.nodes += 1;
        let size = p.count_ones(..) as u64;
        self.deadline.tick(size / 16 + 4);
        if self.nodes >= self.node_limit || (self.nodes.is_multiple_of(64) && self.deadline.expired()) {
            self.aborted = true;
        }
        if self.aborted {
            return;
        }
        let (order, bounds) = self.color_sort(&p);
        for i in (0..order.len()).rev() {
            if self.current.len() + bounds[i] <= self.best.len() {
                return;
            }
            let v = order[i];
            self.current.push(v);
            let mut next = p.clone();
            next.intersect_with(&self.adj[v]);
            if next.is_clear() {
                if self.current.len() > self.best.len() {
                    self.best = self.current.clone();
                }
            } else {
                self.expand(next);
            }
            self.current.pop();
            if self.aborted {
                return;
            }
            p.set(v, false);
        }
    }
}

/// Maximum clique of the graph on `n` vertices with adjacency `edge`.
/// `warm` must be a clique; the result is never smaller.
pub(crate) fn max_clique(
    n: usize,
    mut edge: impl FnMut(usize, usize) -> bool,
    warm: &[usize],
    deadline: &Deadline,
    node_limit: u64,
) -> CliqueResult {
    if n == 0 {
        return CliqueResult {
            vertices: Vec::new(),
            optimal: true,
        };
    }
    let mut raw = vec![FixedBitSet::with_capacity(n); n];
    for j in 0..n {
        for i in 0..j {
            if edge(i, j) {
                raw[i].insert(j);
                raw[j].insert(i);
            }
        }
    }
    // Relabel by decreasing degree so the coloring visits hubs first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(raw[v].count_ones(..)), v));
    let mut label = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        label[old] = new;
    }
    let adj: Vec<FixedBitSet> = order
        .iter()
        .map(|&old| {
            let mut b = FixedBitSet::with_capacity(n);
            for w in raw[old].ones() {
                b.insert(label[w]);
            }
            b
        })
        .collect();
    debug_assert!(warm
        .iter()
        .enumerate()
        .all(|(k, &a)| warm[..k].iter().all(|&b| raw[a].contains(b))));
    let mut search = Search {
        adj,
        best: warm.iter().map(|&v| label[v]).collect(),
        current: Vec::new(),
        deadline,
        nodes: 0,
        node_limit,
        aborted: false,
    };
    let mut all = FixedBitSet::with_capacity(n);
    all.insert_range(..);
    search.expand(all);
    let mut vertices: Vec<usize> = search.best.iter().map(|&v| order[v]).collect();
    vertices.sort_unstable();
    CliqueResult {
        vertices,
        optimal: !search.aborted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Clock;

    fn brute(n: usize, edge: &dyn Fn(usize, usize) -> bool) -> usize {
        let mut best = 0;
        for mask in 0u32..1 << n {
            let vs: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            let ok = vs
                .iter()
                .enumerate()
                .all(|(k, &a)| vs[..k].iter().all(|&b| edge(a, b)));
            if ok {
                best = best.max(vs.len());
            }
        }
        best
    }

    #[test]
    fn matches_brute_force_on_pseudo_random_graphs() {
        let clock = Clock::work();
        let never = Deadline::never(&clock);
        for seed in 0u64..40 {
            let n = 4 + (seed as usize % 12);
            let edge = |a: usize, b: usize| {
                let (a, b) = (a.min(b) as u64, a.max(b) as u64);
                let h = (a * 31 + b * 17 + seed * 7919).wrapping_mul(0x9E3779B97F4A7C15);
                (h >> 40) % 100 < 30 + seed % 50
            };
            let r = max_clique(n, edge, &[], &never, u64::MAX);
            assert!(r.optimal);
            assert_eq!(r.vertices.len(), brute(n, &edge), "seed {seed}");
            for (k, &a) in r.vertices.iter().enumerate() {
                for &b in &r.vertices[..k] {
                    assert!(edge(a, b));
                }
            }
        }
    }

    #[test]
    fn node_limit_keeps_warm_start() {
        let clock = Clock::work();
        let r = max_clique(6, |_, _| true, &[0, 1], &Deadline::never(&clock), 1);
        assert!(!r.optimal);
        assert!(r.vertices.len() >= 2);
        let r = max_clique(0, |_, _| true, &[], &Deadline::never(&clock), 1);
        assert!(r.optimal && r.vertices.is_empty());
    }
}
