//! The coupled processes around one block.
//!
//! `P` is Glauber dynamics on the free block `B'` with `'+'` phantom
//! neighbours. `Q` is built from the initial `'−'` set `A⁻` on the torus on
//! `B'`: `X` is what eight staged bootstrap steps add to `A⁻`, and `Z` (the
//! `'−'` set of `Q`) collects vertices whose clock is silent up to time
//! `d`, vertices with at least `d` neighbours in `A⁻`, and neighbours of
//! `X`. `[Z]_40` grows `Z` by forty more staged steps.
//!
//! Both geometries index `B'` identically, so vertex sets pass freely
//! between them.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::bootstrap::{staged_closure, BootRule, BootstrapStages};
use crate::geometry::BlockLayout;
use crate::glauber::{Boundary, Dynamics, DynamicsRun};
use crate::{ClockStream, Error, Geometry, Ratio, Result, Spin, SpinField, VertexSet};

/// Constants of the two couplings. Defaults: `k = 8`, `m = εd/24`, then
/// forty steps with `m = d/80`, the first coupling at time `d` and the
/// horizon `200d⁵ + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub eps: Ratio,
    pub k: u32,
    pub slack_divisor: i64,
    pub late_k: u32,
    pub late_divisor: i64,
    /// Time of the first coupling; `None` means `d`.
    pub time_d: Option<f64>,
    /// End of the run; `None` means `200d⁵ + d`.
    pub horizon: Option<f64>,
    pub alpha: f64,
}

impl CouplingParams {
    pub fn new(eps: Ratio) -> Result<Self> {
        if eps <= Ratio::ZERO || eps >= Ratio::new(1, 2) {
            return Err(Error::InvalidParameter(alloc::format!("eps = {eps} must lie in (0, 1/2)")));
        }
        Ok(CouplingParams {
            eps,
            k: 8,
            slack_divisor: 24,
            late_k: 40,
            late_divisor: 80,
            time_d: None,
            horizon: None,
            alpha: 0.5,
        })
    }

    /// Initial `'+'` density `1/2 + ε`.
    pub fn p(&self) -> f64 {
        (Ratio::new(1, 2) + self.eps).to_f64()
    }

    /// `Boot(d, k, εd/24)`.
    pub fn early_rule(&self, d: usize) -> BootRule {
        let m = self.eps * Ratio::integer(d as i64) / Ratio::integer(self.slack_divisor);
        BootRule { r: Ratio::integer(d as i64), k: self.k, m }
    }

    /// `Boot(d, 40, d/80)`.
    pub fn late_rule(&self, d: usize) -> BootRule {
        BootRule { r: Ratio::integer(d as i64), k: self.late_k, m: Ratio::new(d as i128, self.late_divisor as i128) }
    }

    pub fn time_d(&self, d: usize) -> f64 {
        self.time_d.unwrap_or(d as f64)
    }

    pub fn horizon(&self, d: usize) -> f64 {
        self.horizon.unwrap_or_else(|| {
            let d = d as f64;
            200.0 * d * d * d * d * d + d
        })
    }

    fn validate(&self, d: usize) -> Result<()> {
        crate::error::check_probability(self.alpha)?;
        let (t, h) = (self.time_d(d), self.horizon(d));
        if !(t >= 0.0 && t.is_finite() && h.is_finite() && h >= t) {
            return Err(Error::InvalidParameter(alloc::format!("need 0 <= time_d = {t} <= horizon = {h}")));
        }
        if self.slack_divisor <= 0 || self.late_divisor <= 0 {
            return Err(Error::InvalidParameter("slack divisors must be positive".into()));
        }
        Ok(())
    }
}

fn require_torus(g: &Geometry) -> Result<()> {
    if g.is_wrapped() {
        Ok(())
    } else {
        Err(Error::GeometryMismatch("Q runs on the torus on B'"))
    }
}

/// Stages `S^(0..=k+1)` of `Boot(d, k, εd/24)` from `A⁻`.
pub fn early_stages(g: &Geometry, a_minus: &VertexSet, params: &CouplingParams) -> BootstrapStages {
    let rule = params.early_rule(g.dim());
    staged_closure(g, a_minus, rule, Some(rule.k as usize + 1))
}

/// `X = S^(k) \ A⁻`.
pub fn compute_x(g: &Geometry, a_minus: &VertexSet, params: &CouplingParams) -> Result<VertexSet> {
    require_torus(g)?;
    let stages = early_stages(g, a_minus, params);
    Ok(stages.stage(params.k as usize).difference(a_minus))
}

/// `Z`: silent clock on `[0, time_d]`, at least `d` neighbours in `A⁻`, or
/// a neighbour in `X`.
pub fn compute_z(g: &Geometry, a_minus: &VertexSet, x: &VertexSet, clocks: &ClockStream, time_d: f64) -> Result<VertexSet> {
    require_torus(g)?;
    if a_minus.universe() != g.len() || x.universe() != g.len() {
        return Err(Error::GeometryMismatch("set universe differs from the torus"));
    }
    let d = g.dim();
    Ok(VertexSet::from_predicate(g.len(), |v| {
        if clocks.first_ring(g.site_key(v)) > time_d {
            return true;
        }
        let mut minus = 0;
        let mut near_x = false;
        g.for_each_neighbor(v, |w| {
            minus += a_minus.contains(w) as usize;
            near_x |= x.contains(w);
        });
        minus >= d || near_x
    }))
}

/// `F`: some vertex is `'−'` at time `d` in `P` but outside `Z`.
pub fn event_f(y: &VertexSet, z: &VertexSet) -> Result<bool> {
    if y.universe() != z.universe() {
        return Err(Error::GeometryMismatch("Y and Z live on different blocks"));
    }
    Ok(!y.is_subset(z))
}

/// Stages `S^(0..=41)` of `Boot(d, 40, d/80)` from `Z`.
pub fn late_stages(g: &Geometry, z: &VertexSet, params: &CouplingParams) -> BootstrapStages {
    let rule = params.late_rule(g.dim());
    staged_closure(g, z, rule, Some(rule.k as usize + 1))
}

/// `[Z]_40`.
pub fn closure40(g: &Geometry, z: &VertexSet, params: &CouplingParams) -> Result<VertexSet> {
    require_torus(g)?;
    Ok(late_stages(g, z, params).stage(params.late_k as usize))
}

/// Whether some path of clock-rings inside `g` starts with a ring at a
/// `source` vertex and ends with a ring at a `target` vertex, all within
/// `[0, t_end]`.
///
/// Earliest arrival times are settled in time order: a ring of `v` at
/// time `t` extends a path when some neighbour was reached strictly
/// before `t`, and the first such ring is the only one that matters.
pub fn clock_ring_path_exists(
    g: &Geometry,
    clocks: &ClockStream,
    source: &VertexSet,
    target: &VertexSet,
    t_end: f64,
) -> Result<bool> {
    path_search(g, clocks, source, target, None, t_end)
}

fn path_search(
    g: &Geometry,
    clocks: &ClockStream,
    source: &VertexSet,
    target: &VertexSet,
    allowed: Option<&VertexSet>,
    t_end: f64,
) -> Result<bool> {
    if source.universe() != g.len() || target.universe() != g.len() || allowed.is_some_and(|a| a.universe() != g.len()) {
        return Err(Error::GeometryMismatch("set universe differs from the geometry"));
    }
    let mut reach = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    for v in source.iter() {
        let t = clocks.first_ring(g.site_key(v));
        if t <= t_end {
            reach[v] = t;
            heap.push(Reverse(Arrival { time: t, vertex: v }));
        }
    }
    let mut done = VertexSet::empty(g.len());
    while let Some(Reverse(Arrival { time, vertex })) = heap.pop() {
        if !done.insert(vertex) {
            continue;
        }
        if target.contains(vertex) {
            return Ok(true);
        }
        g.for_each_neighbor(vertex, |w| {
            if done.contains(w) || reach[w] <= time || allowed.is_some_and(|a| !a.contains(w)) {
                return;
            }
            let next = clocks.rings(g.site_key(w)).map(|(_, s)| s).find(|&s| s > time || s > t_end);
            if let Some(s) = next {
                if s <= t_end && s < reach[w] {
                    reach[w] = s;
                    heap.push(Reverse(Arrival { time: s, vertex: w }));
                }
            }
        });
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Arrival {
    time: f64,
    vertex: usize,
}

impl Eq for Arrival {}

impl Ord for Arrival {
    fn cmp(&self, o: &Self) -> core::cmp::Ordering {
        self.time.total_cmp(&o.time).then(self.vertex.cmp(&o.vertex))
    }
}

impl PartialOrd for Arrival {
    fn partial_cmp(&self, o: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

/// `F''`: a clock-ring path from outside `B'` into `B` within `[0, t_end]`.
/// Any such path last leaves the outside through a site adjacent to `B'`
/// and stays in `B'` afterwards, so searching from that layer through `B'`
/// is exact and reads no clock beyond it.
pub fn event_f_doubleprime(layout: &BlockLayout, clocks: &ClockStream, t_end: f64) -> Result<bool> {
    let frame = layout.frame();
    let inside = layout.outer_in_frame();
    path_search(&frame, clocks, &layout.collar(), &layout.inner_in_frame(), Some(&inside), t_end)
}

/// Everything computed for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub d: usize,
    pub inner_side: usize,
    pub outer_side: usize,
    pub eps: Ratio,
    pub p: f64,
    pub time_d: f64,
    pub horizon: f64,
    pub a_minus: VertexSet,
    pub x: VertexSet,
    pub z: VertexSet,
    pub z40: VertexSet,
    /// `'−'` vertices of `P` at time `d`.
    pub y: VertexSet,
    pub f: bool,
    /// `S^(9) = S^(8)` in the early staged process.
    pub early_settled: bool,
    /// `S^(41) = S^(40)` in the late staged process.
    pub late_settled: bool,
    pub f_prime: bool,
    pub f_doubleprime: bool,
    pub inner_all_plus: bool,
    pub good: bool,
    /// Time `P` was seen to be stable, if it was before the horizon.
    pub stable_at: Option<f64>,
    pub minus_at_horizon: usize,
}

impl CouplingReport {
    /// `S^(9) = S^(8)` yet `F`: impossible for a correct engine.
    pub fn early_implication_violated(&self) -> bool {
        self.early_settled && self.f
    }

    /// `¬F`, `S^(41) = S^(40)` yet `F'`: impossible for a correct engine.
    pub fn late_implication_violated(&self) -> bool {
        !self.f && self.late_settled && self.f_prime
    }

    /// The definitional and structural invariants of a report.
    pub fn consistent(&self) -> bool {
        self.f == !self.y.is_subset(&self.z)
            && !self.x.intersects(&self.a_minus)
            && self.z.is_subset(&self.z40)
            && self.good == (!self.f_doubleprime && self.inner_all_plus)
    }
}

/// Runs both couplings and `P` on one block. `field` lives on
/// [`BlockLayout::outer_block`].
pub fn classify_block(
    layout: &BlockLayout,
    field: &SpinField,
    clocks: &ClockStream,
    params: &CouplingParams,
) -> Result<CouplingReport> {
    let d = layout.dim();
    params.validate(d)?;
    let block = layout.outer_block();
    let torus = layout.outer_torus();
    if field.len() != block.len() {
        return Err(Error::GeometryMismatch("spin field does not cover B'"));
    }
    let time_d = params.time_d(d);
    let horizon = params.horizon(d);

    let a_minus = field.minus_set();
    let early = early_stages(&torus, &a_minus, params);
    let k = params.k as usize;
    let x = early.stage(k).difference(&a_minus);
    let early_settled = early.stage_size(k + 1) == early.stage_size(k);
    let z = compute_z(&torus, &a_minus, &x, clocks, time_d)?;
    let late = late_stages(&torus, &z, params);
    let lk = params.late_k as usize;
    let z40 = late.stage(lk);
    let late_settled = late.stage_size(lk + 1) == late.stage_size(lk);

    let run = DynamicsRun::new(block.clone(), Boundary::Plus, field.clone(), clocks.clone(), horizon).with_alpha(params.alpha);
    let mut p = Dynamics::new(&run)?;
    let mut stable_at = p.advance_until_stable(time_d, |_, _| {});
    let y = VertexSet::from_predicate(block.len(), |v| p.spin(v) == Spin::Minus);
    let f = !y.is_subset(&z);
    let mut f_prime = y.iter().any(|v| !z40.contains(v));
    if stable_at.is_none() {
        stable_at = p.advance_until_stable(horizon, |ring, _| {
            if ring.after == Spin::Minus && !z40.contains(ring.vertex) {
                f_prime = true;
            }
        });
    }
    let inner = layout.inner_set();
    let inner_all_plus = inner.iter().all(|v| p.spin(v) == Spin::Plus);
    let minus_at_horizon = p.spins().iter().filter(|s| **s == Spin::Minus).count();
    let f_doubleprime = event_f_doubleprime(layout, clocks, horizon)?;

    Ok(CouplingReport {
        d,
        inner_side: layout.inner_side(),
        outer_side: layout.outer_side(),
        eps: params.eps,
        p: params.p(),
        time_d,
        horizon,
        a_minus,
        x,
        z,
        z40,
        y,
        f,
        early_settled,
        late_settled,
        f_prime,
        f_doubleprime,
        inner_all_plus,
        good: !f_doubleprime && inner_all_plus,
        stable_at,
        minus_at_horizon,
    })
}

/// The three `Q`-side sets whose dependence radius is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalQuantity {
    X,
    Z,
    Z40,
}

impl LocalQuantity {
    pub fn name(self) -> &'static str {
        match self {
            LocalQuantity::X => "X",
            LocalQuantity::Z => "Z",
            LocalQuantity::Z40 => "Z40",
        }
    }

    /// Radius beyond which resampling should never change membership.
    pub fn claimed_radius(self) -> usize {
        match self {
            LocalQuantity::X => 8,
            LocalQuantity::Z => 9,
            LocalQuantity::Z40 => 58,
        }
    }
}

/// The set `q` on the torus `g` for the given randomness.
pub fn local_set(q: LocalQuantity, g: &Geometry, field: &SpinField, clocks: &ClockStream, params: &CouplingParams) -> Result<VertexSet> {
    let a_minus = field.minus_set();
    let x = compute_x(g, &a_minus, params)?;
    if q == LocalQuantity::X {
        return Ok(x);
    }
    let z = compute_z(g, &a_minus, &x, clocks, params.time_d(g.dim()))?;
    if q == LocalQuantity::Z {
        return Ok(z);
    }
    closure40(g, &z, params)
}

/// Resamples spins and clocks outside `ball(v, radius)` and reports
/// whether `v`'s membership in `q` changed.
pub fn resampling_changes(
    q: LocalQuantity,
    g: &Geometry,
    field: &SpinField,
    clocks: &ClockStream,
    params: &CouplingParams,
    v: usize,
    radius: usize,
    fresh_seed: u64,
) -> Result<bool> {
    let before = local_set(q, g, field, clocks, params)?.contains(v);
    let outside = VertexSet::full(g.len()).difference(&g.ball(v, radius)?);
    let field2 = field.resample_region(g, &outside, fresh_seed)?;
    let clocks2 = clocks.resample_region(g, &outside, fresh_seed ^ 0x9E37_79B9_7F4A_7C15);
    let after = local_set(q, g, &field2, &clocks2, params)?.contains(v);
    Ok(before != after)
}

/// The sets of `B'` (free block) and its collar whose randomness a block's
/// classification reads, as site keys.
pub fn classification_sites(layout: &BlockLayout) -> Vec<u64> {
    let frame = layout.frame();
    let mut keep = layout.outer_in_frame();
    keep.union_with(&layout.collar());
    keep.iter().map(|v| frame.site_key(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    fn params(eps: (i128, i128)) -> CouplingParams {
        CouplingParams::new(Ratio::new(eps.0, eps.1)).unwrap()
    }

    #[test]
    fn x_trivial_cases() {
        let g = Geometry::torus(2, 8).unwrap();
        let p = params((3, 10));
        assert!(compute_x(&g, &VertexSet::empty(g.len()), &p).unwrap().is_empty());
        assert!(compute_x(&g, &VertexSet::full(g.len()), &p).unwrap().is_empty());
        assert!(compute_x(&Geometry::block(2, 8).unwrap(), &VertexSet::empty(64), &p).is_err());
    }

    #[test]
    fn z_trivial_cases() {
        let g = Geometry::torus(2, 8).unwrap();
        let none = VertexSet::empty(g.len());
        let clocks = ClockStream::new(5);
        // With time_d = 0 every clock counts as silent.
        assert_eq!(compute_z(&g, &none, &none, &clocks, 0.0).unwrap().len(), g.len());
        // With a huge time_d nothing is silent.
        assert!(compute_z(&g, &none, &none, &clocks, 1e6).unwrap().is_empty());
        let silent = g.vertices().filter(|&v| clocks.first_ring(g.site_key(v)) > 2.0).count();
        assert_eq!(compute_z(&g, &none, &none, &clocks, 2.0).unwrap().len(), silent);
    }

    #[test]
    fn closure40_trivial_cases() {
        let g = Geometry::torus(2, 6).unwrap();
        let p = params((1, 4));
        assert!(closure40(&g, &VertexSet::empty(36), &p).unwrap().is_empty());
        assert_eq!(closure40(&g, &VertexSet::full(36), &p).unwrap().len(), 36);
    }

    #[test]
    fn f_is_set_inclusion() {
        let mut y = VertexSet::empty(10);
        let mut z = VertexSet::empty(10);
        assert!(!event_f(&y, &z).unwrap());
        y.insert(3);
        assert!(event_f(&y, &z).unwrap());
        z.insert(3);
        assert!(!event_f(&y, &z).unwrap());
        assert!(event_f(&y, &VertexSet::empty(9)).is_err());
    }

    /// Exhaustive search over all sequences of distinct-time rings forming
    /// a lattice path on a short line.
    fn brute_paths(n: usize, rings: &[Vec<f64>], source: &[usize], target: &[usize]) -> bool {
        fn extend(v: usize, t: f64, n: usize, rings: &[Vec<f64>], target: &[usize]) -> bool {
            if target.contains(&v) {
                return true;
            }
            let mut next = Vec::new();
            if v > 0 {
                next.push(v - 1);
            }
            if v + 1 < n {
                next.push(v + 1);
            }
            next.into_iter().any(|w| rings[w].iter().any(|&s| s > t && extend(w, s, n, rings, target)))
        }
        source.iter().any(|&s| rings[s].iter().any(|&t| extend(s, t, n, rings, target)))
    }

    #[test]
    fn ring_paths_match_brute_force() {
        let g = Geometry::block(1, 5).unwrap();
        let mut agree = 0;
        let mut yes = 0;
        for seed in 0..400u64 {
            let clocks = ClockStream::new(seed);
            let t_end = 0.5 + (seed % 7) as f64 * 0.5;
            let rings: Vec<Vec<f64>> = g.vertices().map(|v| clocks.rings_in(g.site_key(v), 0.0, t_end)).collect();
            for (src, tgt) in [(vec![0], vec![2]), (vec![0], vec![4]), (vec![2], vec![0, 4]), (vec![1, 3], vec![3])] {
                let s = VertexSet::from_vertices(5, src.iter().copied());
                let t = VertexSet::from_vertices(5, tgt.iter().copied());
                let fast = clock_ring_path_exists(&g, &clocks, &s, &t, t_end).unwrap();
                let slow = brute_paths(5, &rings, &src, &tgt);
                assert_eq!(fast, slow, "seed {seed} src {src:?} tgt {tgt:?}");
                agree += 1;
                yes += fast as usize;
            }
        }
        assert_eq!(agree, 1600);
        assert!(yes > 100 && yes < 1500);
    }

    #[test]
    fn ring_path_edge_cases() {
        let g = Geometry::block(1, 5).unwrap();
        let clocks = ClockStream::new(1);
        let all = VertexSet::full(5);
        assert!(!clock_ring_path_exists(&g, &clocks, &all, &all, 0.0).unwrap());
        assert!(!clock_ring_path_exists(&g, &clocks, &VertexSet::empty(5), &all, 100.0).unwrap());
        // A source inside the target still needs a ring.
        let v = VertexSet::from_vertices(5, [2]);
        let first = clocks.first_ring(g.site_key(2));
        assert!(!clock_ring_path_exists(&g, &clocks, &v, &v, first * 0.99).unwrap());
        assert!(clock_ring_path_exists(&g, &clocks, &v, &v, first).unwrap());
    }

    #[test]
    fn doubleprime_needs_time() {
        let layout = BlockLayout::new(2, 9, 15, vec![0, 0]).unwrap();
        assert!(!event_f_doubleprime(&layout, &ClockStream::new(3), 0.0).unwrap());
        assert!(event_f_doubleprime(&layout, &ClockStream::new(3), 1000.0).unwrap());
        let flat = BlockLayout::new(2, 5, 5, vec![0, 0]).unwrap();
        assert!(flat.is_degenerate());
        // With B = B' a single collar ring followed by one inner ring suffices.
        assert!(event_f_doubleprime(&flat, &ClockStream::new(3), 50.0).unwrap());
    }

    #[test]
    fn all_plus_block_is_good_without_paths() {
        let layout = BlockLayout::new(2, 9, 15, vec![0, 0]).unwrap();
        let field = SpinField::constant(&layout.outer_block(), Spin::Plus);
        let mut p = params((3, 10));
        p.time_d = Some(0.05);
        p.horizon = Some(0.05);
        for seed in 0..20 {
            let clocks = ClockStream::new(seed);
            let r = classify_block(&layout, &field, &clocks, &p).unwrap();
            assert!(r.consistent());
            assert!(r.y.is_empty() && !r.f && !r.f_prime && r.inner_all_plus);
            assert_eq!(r.good, !r.f_doubleprime);
        }
    }

    #[test]
    fn tiny_block_flushes_to_plus() {
        let layout = BlockLayout::new(2, 3, 3, vec![0, 0]).unwrap();
        let field = SpinField::constant(&layout.outer_block(), Spin::Minus);
        let mut p = params((3, 10));
        p.horizon = Some(1000.0);
        let flushed = (0..200u64)
            .filter(|&s| classify_block(&layout, &field, &ClockStream::new(s), &p).unwrap().inner_all_plus)
            .count();
        assert!(flushed >= 198, "{flushed}");
    }

    #[test]
    fn implications_hold_on_random_blocks() {
        let layout = BlockLayout::new(2, 6, 10, vec![0, 0]).unwrap();
        let mut p = params((3, 10));
        p.horizon = Some(60.0);
        let mut outcomes = BTreeSet::new();
        for seed in 0..150u64 {
            let field = SpinField::sample(&layout.outer_block(), p.p(), seed).unwrap();
            let r = classify_block(&layout, &field, &ClockStream::new(seed + 7), &p).unwrap();
            assert!(r.consistent(), "seed {seed}");
            assert!(!r.early_implication_violated(), "seed {seed}");
            assert!(!r.late_implication_violated(), "seed {seed}");
            outcomes.insert((r.f, r.early_settled));
        }
        assert!(outcomes.len() >= 2);
    }
}
