//! Bootstrap percolation: the r-neighbour closure and the staged process
//! `Boot(r, k, m)` whose threshold is `r − (k − j)·m` for the first `k`
//! steps and `r` afterwards.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Geometry, Ratio, Result, Vertex, VertexSet};

/// Least superset of `a` in which no outside vertex has `r` or more
/// neighbours inside.
pub fn closure(g: &Geometry, a: &VertexSet, r: usize) -> VertexSet {
    let mut infected = a.clone();
    let mut count = vec![0u32; g.len()];
    let mut queue: Vec<Vertex> = Vec::new();
    for v in a.iter() {
        g.for_each_neighbor(v, |w| count[w] += 1);
    }
    for v in g.vertices() {
        if !infected.contains(v) && count[v] as usize >= r {
            infected.insert(v);
            queue.push(v);
        }
    }
    while let Some(v) = queue.pop() {
        g.for_each_neighbor(v, |w| {
            count[w] += 1;
            if count[w] as usize >= r && infected.insert(w) {
                queue.push(w);
            }
        });
    }
    infected
}

/// No vertex outside `a` has `r` or more neighbours in `a`.
pub fn is_closed(g: &Geometry, a: &VertexSet, r: usize) -> bool {
    g.vertices().filter(|&v| !a.contains(v)).all(|v| {
        let mut k = 0;
        g.for_each_neighbor(v, |w| k += a.contains(w) as usize);
        k < r
    })
}

pub fn percolates(g: &Geometry, a: &VertexSet, r: usize) -> bool {
    closure(g, a, r).len() == g.len()
}

/// The rule `Boot(r, k, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootRule {
    pub r: Ratio,
    pub k: u32,
    pub m: Ratio,
}

impl BootRule {
    pub fn new(r: Ratio, k: u32, m: Ratio) -> Result<Self> {
        if r <= Ratio::ZERO {
            return Err(Error::InvalidParameter(alloc::format!("threshold r = {r} must be positive")));
        }
        if m.is_negative() {
            return Err(Error::InvalidParameter(alloc::format!("slack m = {m} must be nonnegative")));
        }
        Ok(BootRule { r, k, m })
    }

    /// The unstaged r-neighbour process, `Boot(r, 0, 0)`.
    pub fn plain(r: usize) -> Self {
        BootRule { r: Ratio::integer(r as i64), k: 0, m: Ratio::ZERO }
    }

    /// Threshold applied when going from stage `j` to stage `j + 1`.
    pub fn threshold(&self, j: usize) -> Ratio {
        if (j as u64) < self.k as u64 {
            self.r - Ratio::integer(self.k as i64 - j as i64) * self.m
        } else {
            self.r
        }
    }

    /// Smallest neighbour count meeting [`Self::threshold`].
    pub fn required(&self, j: usize) -> usize {
        self.threshold(j).ceil().max(0) as usize
    }

    /// `r − k·m ≤ 0`: the first step infects every vertex.
    pub fn is_degenerate(&self) -> bool {
        self.threshold(0) <= Ratio::ZERO
    }
}

/// The stages `S^(0) ⊆ S^(1) ⊆ …` of one staged run.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapStages {
    rule: BootRule,
    joined: Vec<u32>,
    sizes: Vec<usize>,
    converged: bool,
}

const NEVER: u32 = u32::MAX;

impl BootstrapStages {
    pub fn rule(&self) -> BootRule {
        self.rule
    }

    /// Index of the last stored stage.
    pub fn last_index(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Whether the last two stored stages coincide.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn stage_size(&self, j: usize) -> usize {
        self.sizes[j.min(self.last_index())]
    }

    /// Stage `j`. Past the last stored stage this is only defined once the
    /// run has converged.
    pub fn stage(&self, j: usize) -> VertexSet {
        assert!(
            j <= self.last_index() || self.converged,
            "stage {j} was not computed (last stage {})",
            self.last_index()
        );
        let j = j.min(self.last_index()) as u32;
        VertexSet::from_predicate(self.joined.len(), |v| self.joined[v] <= j)
    }

    pub fn final_stage(&self) -> VertexSet {
        self.stage(self.last_index())
    }

    /// Stage at which `v` was infected, if it was.
    pub fn joined_at(&self, v: Vertex) -> Option<usize> {
        (self.joined[v] != NEVER).then_some(self.joined[v] as usize)
    }

    /// `S^(b) \ S^(a)` for `a ≤ b`.
    pub fn growth(&self, a: usize, b: usize) -> VertexSet {
        VertexSet::from_predicate(self.joined.len(), |v| {
            let t = self.joined[v];
            t != NEVER && (t as usize) > a && (t as usize) <= b
        })
    }

    /// Recomputes every stage from its predecessor by the definition and
    /// compares.
    pub fn verify(&self, g: &Geometry) -> bool {
        let mut prev = self.stage(0);
        for j in 0..self.last_index() {
            let need = self.rule.required(j);
            let mut next = prev.clone();
            for v in g.vertices() {
                if prev.contains(v) {
                    continue;
                }
                let mut k = 0;
                g.for_each_neighbor(v, |w| k += prev.contains(w) as usize);
                if k >= need {
                    next.insert(v);
                }
            }
            let stored = self.stage(j + 1);
            if next != stored {
                return false;
            }
            prev = stored;
        }
        true
    }
}

/// Runs `Boot(r, k, m)` from `s0` for `steps` steps, or until two
/// consecutive stages agree when `steps` is `None`. Stops early on
/// convergence either way.
pub fn staged_closure(g: &Geometry, s0: &VertexSet, rule: BootRule, steps: Option<usize>) -> BootstrapStages {
    let n = g.len();
    let cap = steps.unwrap_or(n + rule.k as usize + 1);
    let mut joined = vec![NEVER; n];
    let mut count = vec![0u32; n];
    let mut fresh: Vec<Vertex> = s0.iter().collect();
    for &v in &fresh {
        joined[v] = 0;
    }
    for &v in &fresh {
        g.for_each_neighbor(v, |w| count[w] += 1);
    }
    let mut sizes = vec![fresh.len()];
    let mut converged = false;
    let mut candidates: Vec<Vertex> = Vec::new();
    let mut seen = VertexSet::empty(n);

    for j in 0..cap {
        let need = rule.required(j) as u32;
        let full_scan = j == 0 || need < rule.required(j - 1) as u32;
        candidates.clear();
        if full_scan {
            candidates.extend(g.vertices().filter(|&v| joined[v] == NEVER));
        } else {
            for &v in &fresh {
                g.for_each_neighbor(v, |w| {
                    if joined[w] == NEVER && seen.insert(w) {
                        candidates.push(w);
                    }
                });
            }
            for &w in &candidates {
                seen.remove(w);
            }
        }
        fresh.clear();
        fresh.extend(candidates.iter().copied().filter(|&v| count[v] >= need));
        for &v in &fresh {
            joined[v] = j as u32 + 1;
        }
        for &v in &fresh {
            g.for_each_neighbor(v, |w| count[w] += 1);
        }
        sizes.push(sizes[j] + fresh.len());
        if fresh.is_empty() {
            converged = true;
            break;
        }
    }
    BootstrapStages { rule, joined, sizes, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Synchronous repeat-until-no-change.
    fn naive_closure(g: &Geometry, a: &VertexSet, r: usize) -> VertexSet {
        let mut cur = a.clone();
        loop {
            let mut next = cur.clone();
            for v in g.vertices() {
                let k = g.neighbors(v).unwrap().iter().filter(|&&w| cur.contains(w)).count();
                if k >= r {
                    next.insert(v);
                }
            }
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    fn set(g: &Geometry, pts: &[[usize; 2]]) -> VertexSet {
        VertexSet::from_vertices(g.len(), pts.iter().map(|c| g.index(c).unwrap()))
    }

    #[test]
    fn trivial_closures() {
        let g = Geometry::torus(2, 4).unwrap();
        let none = VertexSet::empty(g.len());
        let all = VertexSet::full(g.len());
        assert_eq!(closure(&g, &none, 2), none);
        assert_eq!(closure(&g, &all, 2), all);
        assert!(is_closed(&g, &none, 2));
        assert!(is_closed(&g, &all, 2));
        assert!(percolates(&g, &all, 2));
        assert!(!percolates(&g, &none, 2));
    }

    #[test]
    fn diagonal_pair_fills_square() {
        let g = Geometry::torus(2, 4).unwrap();
        let a = set(&g, &[[0, 0], [1, 1]]);
        let expect = set(&g, &[[0, 0], [0, 1], [1, 0], [1, 1]]);
        assert_eq!(naive_closure(&g, &a, 2), expect);
        assert_eq!(closure(&g, &a, 2), expect);
        assert!(is_closed(&g, &expect, 2));
    }

    #[test]
    fn rows_on_four_torus() {
        let g = Geometry::torus(2, 4).unwrap();
        // Off the row every vertex sees exactly one infected neighbour.
        let row = set(&g, &[[0, 0], [1, 0], [2, 0], [3, 0]]);
        assert_eq!(naive_closure(&g, &row, 2), row);
        assert!(!percolates(&g, &row, 2));
        assert!(is_closed(&g, &row, 2));
        let two = set(&g, &[[0, 0], [1, 0], [2, 0], [3, 0], [0, 2], [1, 2], [2, 2], [3, 2]]);
        assert_eq!(naive_closure(&g, &two, 2).len(), 16);
        assert!(percolates(&g, &two, 2));
    }

    #[test]
    fn exhaustive_three_by_three_monotone() {
        let g = Geometry::torus(2, 3).unwrap();
        let closures: Vec<VertexSet> = (0u32..512)
            .map(|mask| closure(&g, &VertexSet::from_predicate(9, |v| mask >> v & 1 == 1), 2))
            .collect();
        for a in 0u32..512 {
            for b in 0u32..512 {
                if a & b == a {
                    assert!(closures[a as usize].is_subset(&closures[b as usize]));
                }
            }
        }
    }

    #[test]
    fn plain_staging_matches_rounds() {
        let g = Geometry::torus(2, 6).unwrap();
        let a = set(&g, &[[0, 0], [1, 1], [3, 3], [4, 2]]);
        let st = staged_closure(&g, &a, BootRule::plain(2), None);
        assert!(st.converged());
        assert!(st.verify(&g));
        assert_eq!(st.final_stage(), closure(&g, &a, 2));
        let mut cur = a.clone();
        for j in 0..=st.last_index() {
            assert_eq!(st.stage(j), cur);
            let mut next = cur.clone();
            for v in g.vertices() {
                let k = g.neighbors(v).unwrap().iter().filter(|&&w| cur.contains(w)).count();
                if k >= 2 {
                    next.insert(v);
                }
            }
            cur = next;
        }
    }

    #[test]
    fn threshold_one_step_is_dilation() {
        let g = Geometry::torus(2, 6).unwrap();
        let a = set(&g, &[[0, 0], [3, 4]]);
        let rule = BootRule::new(Ratio::integer(2), 1, Ratio::ONE).unwrap();
        assert_eq!(rule.required(0), 1);
        assert_eq!(rule.required(1), 2);
        let st = staged_closure(&g, &a, rule, Some(1));
        assert_eq!(st.stage(1), g.neighbourhood(&a, 1));
    }

    #[test]
    fn rational_thresholds() {
        // d = 4, ε = 3/10: m = 1/20, thresholds 4 − (8 − j)/20 all round up to 4.
        let m = Ratio::new(3, 10) * Ratio::integer(4) / Ratio::integer(24);
        let rule = BootRule::new(Ratio::integer(4), 8, m).unwrap();
        assert!((0..12).all(|j| rule.required(j) == 4));
        // m = d/80 = 1/20 with k = 40: 4 − (40 − j)/20.
        let rule = BootRule::new(Ratio::integer(4), 40, Ratio::new(1, 20)).unwrap();
        assert_eq!(rule.required(0), 2);
        assert_eq!(rule.required(1), 3);
        assert_eq!(rule.required(20), 3);
        assert_eq!(rule.required(21), 4);
        assert_eq!(rule.required(40), 4);
        assert!(BootRule::new(Ratio::ZERO, 1, Ratio::ONE).is_err());
        assert!(BootRule::new(Ratio::ONE, 1, Ratio::new(-1, 2)).is_err());
    }

    #[test]
    fn capped_steps_and_growth() {
        let g = Geometry::torus(1, 20).unwrap();
        let a = VertexSet::from_vertices(20, [0]);
        let st = staged_closure(&g, &a, BootRule::plain(1), Some(3));
        assert!(!st.converged());
        assert_eq!(st.last_index(), 3);
        assert_eq!(st.stage(3).len(), 7);
        assert_eq!(st.growth(0, 3).len(), 6);
        assert_eq!(st.growth(2, 3).len(), 2);
        assert_eq!(st.joined_at(3), Some(3));
        assert_eq!(st.joined_at(10), None);
    }

    #[test]
    fn empty_start_converges_immediately() {
        let g = Geometry::torus(2, 5).unwrap();
        let st = staged_closure(&g, &VertexSet::empty(25), BootRule::plain(2), None);
        assert!(st.converged());
        assert_eq!(st.last_index(), 1);
        assert!(st.stage(40).is_empty());
    }
}
