//! Continuous-time zero-temperature Glauber dynamics.
//!
//! Every vertex carries a rate-one clock from a [`ClockStream`]. When the
//! clock of `x` rings, `x` takes the strict majority spin of its
//! neighbours; on an exact tie it becomes `'+'` iff the tie coin of that
//! ring is below `alpha`. Rings are processed in global time order, equal
//! times broken by vertex index.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::geometry::Adjacency;
use crate::{ClockStream, Error, Geometry, Result, Spin, SpinField, Vertex};

/// How the majority is counted at the edge of a free block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Wrapped geometry, no edge.
    Periodic,
    /// Missing lattice neighbours count as fixed `'+'` sites.
    Plus,
    /// Missing lattice neighbours count as fixed `'−'` sites.
    Minus,
    /// Only existing neighbours count.
    Free,
}

impl Boundary {
    pub fn mirrored(self) -> Boundary {
        match self {
            Boundary::Plus => Boundary::Minus,
            Boundary::Minus => Boundary::Plus,
            b => b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Periodic => "torus",
            Boundary::Plus => "plus",
            Boundary::Minus => "minus",
            Boundary::Free => "free",
        }
    }

    pub fn parse(s: &str) -> Option<Boundary> {
        match s {
            "torus" | "periodic" => Some(Boundary::Periodic),
            "plus" => Some(Boundary::Plus),
            "minus" => Some(Boundary::Minus),
            "free" => Some(Boundary::Free),
            _ => None,
        }
    }

    fn phantom_spin(self) -> Option<Spin> {
        match self {
            Boundary::Plus => Some(Spin::Plus),
            Boundary::Minus => Some(Spin::Minus),
            _ => None,
        }
    }
}

/// Everything needed to run the dynamics once.
#[derive(Debug, Clone)]
pub struct DynamicsRun {
    pub geometry: Geometry,
    pub boundary: Boundary,
    pub alpha: f64,
    pub horizon: f64,
    pub initial: SpinField,
    pub clocks: ClockStream,
}

impl DynamicsRun {
    pub fn new(geometry: Geometry, boundary: Boundary, initial: SpinField, clocks: ClockStream, horizon: f64) -> Self {
        DynamicsRun { geometry, boundary, alpha: 0.5, horizon, initial, clocks }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::check_probability(self.alpha)?;
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("horizon {} must be finite and >= 0", self.horizon)));
        }
        if self.initial.len() != self.geometry.len() {
            return Err(Error::GeometryMismatch("initial field size"));
        }
        match (self.geometry.is_wrapped(), self.boundary) {
            (true, Boundary::Periodic) | (false, Boundary::Plus | Boundary::Minus | Boundary::Free) => Ok(()),
            (true, _) => Err(Error::Boundary("a wrapped geometry takes the periodic boundary")),
            (false, Boundary::Periodic) => Err(Error::Boundary("the periodic boundary needs a wrapped geometry")),
        }
    }

    /// The sign-reversed run: spins flipped, `'+'`/`'−'` boundaries swapped,
    /// tie coins reflected and `alpha ↦ 1 − alpha`.
    pub fn mirrored(&self) -> Self {
        DynamicsRun {
            geometry: self.geometry.clone(),
            boundary: self.boundary.mirrored(),
            alpha: 1.0 - self.alpha,
            horizon: self.horizon,
            initial: self.initial.flipped(),
            clocks: self.clocks.mirrored(),
        }
    }
}

/// One processed ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub vertex: Vertex,
    pub time: f64,
    /// 1-based index of this ring among the rings of `vertex`.
    pub ordinal: u64,
    pub before: Spin,
    pub after: Spin,
}

impl Ring {
    pub fn flipped(&self) -> bool {
        self.before != self.after
    }
}

/// A spin change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flip {
    pub vertex: Vertex,
    pub time: f64,
    pub spin: Spin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// All flips, in processing order.
    pub flips: Vec<Flip>,
    pub initial: SpinField,
    pub final_state: SpinField,
    pub last_flip: Vec<Option<f64>>,
    pub ring_counts: Vec<u32>,
    /// Time up to which rings were processed.
    pub end_time: f64,
    /// Time at which the configuration was found stable, if it was.
    pub stable_at: Option<f64>,
}

impl Trajectory {
    /// Flips of `x` in time order.
    pub fn flips_of(&self, x: Vertex) -> impl Iterator<Item = &Flip> + '_ {
        self.flips.iter().filter(move |f| f.vertex == x)
    }

    pub fn flip_count(&self) -> usize {
        self.flips.len()
    }

    /// Configuration at time `t` (after every flip at time `<= t`).
    pub fn state_at(&self, t: f64) -> SpinField {
        let mut s = self.initial.clone();
        for f in self.flips.iter().take_while(|f| f.time <= t) {
            s.set(f.vertex, f.spin);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    vertex: u32,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.vertex.cmp(&other.vertex))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The dynamics as a stepper; [`run`] and friends drive it to a horizon.
pub struct Dynamics<'a> {
    clocks: &'a ClockStream,
    adjacency: Adjacency,
    sites: Vec<u64>,
    alpha: f64,
    /// Number of phantom boundary neighbours, and their spin.
    phantom: Vec<u8>,
    phantom_spin: Option<Spin>,
    spins: Vec<Spin>,
    plus_neighbours: Vec<u16>,
    rings: Vec<u32>,
    unstable: Vec<bool>,
    unstable_count: usize,
    queue: BinaryHeap<Reverse<Pending>>,
    now: f64,
}

impl<'a> Dynamics<'a> {
    pub fn new(run: &'a DynamicsRun) -> Result<Self> {
        run.validate()?;
        let g = &run.geometry;
        let adjacency = g.adjacency();
        let sites: Vec<u64> = g.vertices().map(|x| g.site_key(x)).collect();
        let phantom_spin = run.boundary.phantom_spin();
        let full = 2 * g.dim();
        let phantom: Vec<u8> = g
            .vertices()
            .map(|x| if phantom_spin.is_some() { (full - adjacency.degree(x)) as u8 } else { 0 })
            .collect();
        let spins = run.initial.spins().to_vec();
        let plus_neighbours = g
            .vertices()
            .map(|x| adjacency.neighbors(x).iter().filter(|&&y| spins[y as usize].is_plus()).count() as u16)
            .collect();
        let mut queue = BinaryHeap::with_capacity(g.len());
        for x in g.vertices() {
            let t = run.clocks.gap(sites[x], 1);
            queue.push(Reverse(Pending { time: t, vertex: x as u32 }));
        }
        let mut dynamics = Dynamics {
            clocks: &run.clocks,
            adjacency,
            sites,
            alpha: run.alpha,
            phantom,
            phantom_spin,
            spins,
            plus_neighbours,
            rings: vec![0; g.len()],
            unstable: vec![false; g.len()],
            unstable_count: 0,
            queue,
            now: 0.0,
        };
        for x in 0..dynamics.spins.len() {
            dynamics.refresh_stability(x);
        }
        Ok(dynamics)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn spin(&self, x: Vertex) -> Spin {
        self.spins[x]
    }

    pub fn ring_counts(&self) -> &[u32] {
        &self.rings
    }

    /// No vertex can change state: each strictly agrees with the majority
    /// around it.
    pub fn is_stable(&self) -> bool {
        self.unstable_count == 0
    }

    /// Time of the next pending ring.
    pub fn peek_time(&self) -> f64 {
        self.queue.peek().map_or(f64::INFINITY, |p| p.0.time)
    }

    /// `(like, unlike)` neighbour counts for `x` in its current state.
    #[inline]
    fn tally(&self, x: Vertex) -> (usize, usize) {
        let real_plus = self.plus_neighbours[x] as usize;
        let real_minus = self.adjacency.degree(x) - real_plus;
        let ph = self.phantom[x] as usize;
        let (plus, minus) = match self.phantom_spin {
            Some(Spin::Plus) => (real_plus + ph, real_minus),
            Some(Spin::Minus) => (real_plus, real_minus + ph),
            None => (real_plus, real_minus),
        };
        match self.spins[x] {
            Spin::Plus => (plus, minus),
            Spin::Minus => (minus, plus),
        }
    }

    #[inline]
    fn refresh_stability(&mut self, x: Vertex) {
        let (like, unlike) = self.tally(x);
        let now_unstable = like <= unlike;
        if now_unstable != self.unstable[x] {
            self.unstable[x] = now_unstable;
            if now_unstable {
                self.unstable_count += 1;
            } else {
                self.unstable_count -= 1;
            }
        }
    }

    /// Processes the next ring if it happens no later than `limit`.
    pub fn step(&mut self, limit: f64) -> Option<Ring> {
        let Reverse(Pending { time, vertex }) = *self.queue.peek()?;
        if time > limit {
            return None;
        }
        self.queue.pop();
        let x = vertex as usize;
        self.now = time;
        self.rings[x] += 1;
        let ordinal = self.rings[x] as u64;
        let next = time + self.clocks.gap(self.sites[x], ordinal + 1);
        self.queue.push(Reverse(Pending { time: next, vertex }));

        let before = self.spins[x];
        let (like, unlike) = self.tally(x);
        let after = if like > unlike {
            before
        } else if unlike > like {
            before.flip()
        } else if self.clocks.tie_coin(self.sites[x], ordinal) < self.alpha {
            Spin::Plus
        } else {
            Spin::Minus
        };
        if after != before {
            self.spins[x] = after;
            for i in 0..self.adjacency.degree(x) {
                let y = self.adjacency.neighbors(x)[i] as usize;
                if after.is_plus() {
                    self.plus_neighbours[y] += 1;
                } else {
                    self.plus_neighbours[y] -= 1;
                }
                self.refresh_stability(y);
            }
            self.refresh_stability(x);
        }
        Some(Ring { vertex: x, time, ordinal, before, after })
    }

    /// Processes every ring up to `limit`, calling `observe` after each.
    pub fn advance(&mut self, limit: f64, mut observe: impl FnMut(&Ring, &Self)) {
        while let Some(ring) = self.step(limit) {
            observe(&ring, self);
        }
        if self.now < limit {
            self.now = limit;
        }
    }

    /// Like [`Self::advance`] but stops as soon as the state is stable.
    /// Returns the time stability was detected.
    pub fn advance_until_stable(&mut self, limit: f64, mut observe: impl FnMut(&Ring, &Self)) -> Option<f64> {
        if self.is_stable() {
            return Some(self.now);
        }
        while let Some(ring) = self.step(limit) {
            observe(&ring, self);
            if self.is_stable() {
                return Some(ring.time);
            }
        }
        if self.now < limit {
            self.now = limit;
        }
        None
    }

    pub fn state(&self) -> SpinField {
        SpinField::from_spins(self.spins.clone())
    }
}

struct Recorder {
    flips: Vec<Flip>,
    last_flip: Vec<Option<f64>>,
}

impl Recorder {
    fn new(n: usize) -> Self {
        Recorder { flips: Vec::new(), last_flip: vec![None; n] }
    }

    fn record(&mut self, ring: &Ring) {
        if ring.flipped() {
            self.flips.push(Flip { vertex: ring.vertex, time: ring.time, spin: ring.after });
            self.last_flip[ring.vertex] = Some(ring.time);
        }
    }

    fn finish(self, run: &DynamicsRun, dynamics: &Dynamics<'_>, stable_at: Option<f64>) -> Trajectory {
        Trajectory {
            flips: self.flips,
            initial: run.initial.clone(),
            final_state: dynamics.state(),
            last_flip: self.last_flip,
            ring_counts: dynamics.rings.clone(),
            end_time: dynamics.now,
            stable_at,
        }
    }
}

/// Runs every ring in `[0, horizon]`.
pub fn run(run: &DynamicsRun) -> Result<Trajectory> {
    let mut dynamics = Dynamics::new(run)?;
    let mut rec = Recorder::new(run.geometry.len());
    dynamics.advance(run.horizon, |r, _| rec.record(r));
    let stable_at = dynamics.is_stable().then_some(dynamics.now);
    Ok(rec.finish(run, &dynamics, stable_at))
}

/// Runs until the configuration is stable or `max_time` passes; the flag
/// reports which. The run's own horizon is ignored.
pub fn run_until_stable(run: &DynamicsRun, max_time: f64) -> Result<(Trajectory, bool)> {
    if !max_time.is_finite() {
        return Err(Error::InvalidParameter("max_T must be finite".into()));
    }
    let mut dynamics = Dynamics::new(run)?;
    let mut rec = Recorder::new(run.geometry.len());
    let stable_at = dynamics.advance_until_stable(max_time, |r, _| rec.record(r));
    Ok((rec.finish(run, &dynamics, stable_at), stable_at.is_some()))
}

/// Direct check that every vertex strictly agrees with the majority of
/// its neighbours.
pub fn is_stable(g: &Geometry, field: &SpinField, boundary: Boundary) -> bool {
    let full = 2 * g.dim();
    g.vertices().all(|x| {
        let me = field.get(x);
        let mut like = 0;
        let mut unlike = 0;
        let mut deg = 0;
        g.for_each_neighbor(x, |y| {
            deg += 1;
            if field.get(y) == me {
                like += 1;
            } else {
                unlike += 1;
            }
        });
        if let Some(s) = boundary.phantom_spin() {
            if s == me {
                like += full - deg;
            } else {
                unlike += full - deg;
            }
        }
        like > unlike
    })
}

/// Output of [`coupled_run`].
#[derive(Debug, Clone)]
pub struct CoupledTrajectories {
    pub lower: Trajectory,
    pub upper: Trajectory,
    /// Events after which some vertex had `lower > upper`.
    pub order_violations: usize,
    pub events: usize,
}

/// Runs two initial conditions with the same clocks and coins, checking the
/// pointwise order after every ring.
pub fn coupled_run(lower: &DynamicsRun, upper: &DynamicsRun) -> Result<CoupledTrajectories> {
    if lower.geometry != upper.geometry {
        return Err(Error::GeometryMismatch("coupled runs need the same geometry"));
    }
    if lower.boundary != upper.boundary || lower.alpha != upper.alpha || lower.clocks != upper.clocks {
        return Err(Error::GeometryMismatch("coupled runs need the same boundary, alpha and clocks"));
    }
    if lower.horizon != upper.horizon {
        return Err(Error::InvalidParameter("coupled runs need the same horizon".into()));
    }
    if !lower.initial.le(&upper.initial) {
        return Err(Error::InvalidParameter("lower initial field is not below the upper one".into()));
    }
    let mut lo = Dynamics::new(lower)?;
    let mut hi = Dynamics::new(upper)?;
    let mut rec_lo = Recorder::new(lower.geometry.len());
    let mut rec_hi = Recorder::new(lower.geometry.len());
    let mut above = 0usize;
    let mut violations = 0;
    let mut events = 0;
    loop {
        let (a, b) = match (lo.step(lower.horizon), hi.step(upper.horizon)) {
            (Some(a), Some(b)) => (a, b),
            (None, None) => break,
            _ => unreachable!("shared clocks give identical ring sequences"),
        };
        debug_assert_eq!((a.vertex, a.ordinal), (b.vertex, b.ordinal));
        events += 1;
        rec_lo.record(&a);
        rec_hi.record(&b);
        let was = a.before > b.before;
        let is = a.after > b.after;
        if was != is {
            if is {
                above += 1;
            } else {
                above -= 1;
            }
        }
        if above > 0 {
            violations += 1;
        }
    }
    lo.now = lo.now.max(lower.horizon);
    hi.now = hi.now.max(upper.horizon);
    let lower_t = rec_lo.finish(lower, &lo, lo.is_stable().then_some(lo.now));
    let upper_t = rec_hi.finish(upper, &hi, hi.is_stable().then_some(hi.now));
    Ok(CoupledTrajectories { lower: lower_t, upper: upper_t, order_violations: violations, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::VertexSet;

    fn torus_run(side: usize, field: SpinField, seed: u64, horizon: f64) -> DynamicsRun {
        let g = Geometry::torus(2, side).unwrap();
        DynamicsRun::new(g, Boundary::Periodic, field, ClockStream::new(seed), horizon)
    }

    #[test]
    fn all_plus_is_absorbing() {
        let g = Geometry::block(2, 6).unwrap();
        let init = SpinField::constant(&g, Spin::Plus);
        let r = DynamicsRun::new(g, Boundary::Plus, init.clone(), ClockStream::new(1), 50.0);
        let t = run(&r).unwrap();
        assert!(t.flips.is_empty());
        assert_eq!(t.final_state, init);
        assert!(t.ring_counts.iter().all(|&c| c > 0));
        let (t, stable) = run_until_stable(&r, 50.0).unwrap();
        assert!(stable);
        assert_eq!(t.stable_at, Some(0.0));
    }

    #[test]
    fn three_cycle_forced_majority() {
        let g = Geometry::torus(1, 3).unwrap();
        let init = SpinField::from_spins(vec![Spin::Plus, Spin::Minus, Spin::Minus]);
        let mut checked = 0;
        for seed in 0..40 {
            let clocks = ClockStream::new(seed);
            let first: Vec<f64> = (0..3).map(|x| clocks.first_ring(g.site_key(x))).collect();
            // Only the seeds where the '+' vertex rings before the others.
            if !(first[0] < first[1] && first[0] < first[2]) {
                continue;
            }
            checked += 1;
            let r = DynamicsRun::new(g.clone(), Boundary::Periodic, init.clone(), clocks, 20.0);
            let t = run(&r).unwrap();
            assert_eq!(t.flips, [Flip { vertex: 0, time: first[0], spin: Spin::Minus }]);
            assert!(t.final_state.all(Spin::Minus));
        }
        assert!(checked > 5);
    }

    #[test]
    fn lone_minus_flips_at_first_ring() {
        let g = Geometry::torus(2, 8).unwrap();
        let x = 19;
        let mut init = SpinField::constant(&g, Spin::Plus);
        init.set(x, Spin::Minus);
        let clocks = ClockStream::new(3);
        let t = run(&DynamicsRun::new(g.clone(), Boundary::Periodic, init, clocks.clone(), 30.0)).unwrap();
        assert_eq!(t.flips.len(), 1);
        assert_eq!(t.flips[0].time, clocks.first_ring(g.site_key(x)));
        assert!(t.final_state.all(Spin::Plus));
    }

    #[test]
    fn stability_examples() {
        let g = Geometry::torus(2, 4).unwrap();
        assert!(is_stable(&g, &SpinField::constant(&g, Spin::Plus), Boundary::Periodic));
        let checker = SpinField::from_spins(
            g.vertices().map(|x| if (g.coord(x, 0) + g.coord(x, 1)) % 2 == 0 { Spin::Plus } else { Spin::Minus }).collect(),
        );
        assert!(!is_stable(&g, &checker, Boundary::Periodic));
        let stripe = SpinField::from_minus_set(&VertexSet::from_predicate(16, |x| g.coord(x, 0) < 2));
        assert!(is_stable(&g, &stripe, Boundary::Periodic));
        let r = DynamicsRun::new(g.clone(), Boundary::Periodic, stripe.clone(), ClockStream::new(0), 10.0);
        assert!(Dynamics::new(&r).unwrap().is_stable());
        let single = SpinField::from_minus_set(&VertexSet::from_predicate(16, |x| g.coord(x, 0) == 0));
        assert!(!is_stable(&g, &single, Boundary::Periodic));
    }

    #[test]
    fn boundary_validation() {
        let g = Geometry::torus(2, 4).unwrap();
        let f = SpinField::constant(&g, Spin::Plus);
        let bad = DynamicsRun::new(g.clone(), Boundary::Plus, f.clone(), ClockStream::new(0), 1.0);
        assert!(matches!(run(&bad), Err(Error::Boundary(_))));
        let b = Geometry::block(2, 4).unwrap();
        let bad = DynamicsRun::new(b, Boundary::Periodic, f.clone(), ClockStream::new(0), 1.0);
        assert!(run(&bad).is_err());
        let bad = DynamicsRun::new(g, Boundary::Periodic, f, ClockStream::new(0), 1.0).with_alpha(1.5);
        assert!(run(&bad).is_err());
    }

    #[test]
    fn plus_boundary_flushes_small_block() {
        let g = Geometry::block(2, 3).unwrap();
        let init = SpinField::constant(&g, Spin::Minus);
        let mut flushed = 0;
        for seed in 0..200 {
            let r = DynamicsRun::new(g.clone(), Boundary::Plus, init.clone(), ClockStream::new(seed), 1000.0);
            let (t, stable) = run_until_stable(&r, 1000.0).unwrap();
            if stable && t.final_state.all(Spin::Plus) {
                flushed += 1;
            }
        }
        assert!(flushed >= 198, "{flushed}");
    }

    #[test]
    fn flips_align_with_rings_and_inactive_sites_keep_their_spin() {
        let g = Geometry::torus(2, 10).unwrap();
        let init = SpinField::sample(&g, 0.5, 21).unwrap();
        let clocks = ClockStream::new(77);
        let t = run(&DynamicsRun::new(g.clone(), Boundary::Periodic, init.clone(), clocks.clone(), 0.3)).unwrap();
        for f in &t.flips {
            let site = g.site_key(f.vertex);
            assert!(clocks.rings(site).take_while(|&(_, s)| s <= f.time).any(|(_, s)| s == f.time));
        }
        for x in g.vertices() {
            let times: Vec<f64> = t.flips_of(x).map(|f| f.time).collect();
            assert!(times.windows(2).all(|w| w[0] < w[1]));
            if t.ring_counts[x] == 0 {
                assert_eq!(t.final_state.get(x), init.get(x));
            }
            assert_eq!(t.ring_counts[x] as usize, clocks.ring_count(g.site_key(x), 0.3));
        }
        assert_eq!(t.state_at(0.3).spins(), t.final_state.spins());
    }

    #[test]
    fn mirror_run_is_exact_mirror() {
        let g = Geometry::block(2, 12).unwrap();
        let init = SpinField::sample(&g, 0.5, 5).unwrap();
        let r = DynamicsRun::new(g, Boundary::Plus, init, ClockStream::new(6), 40.0);
        let a = run(&r).unwrap();
        let b = run(&r.mirrored()).unwrap();
        assert_eq!(a.flips.len(), b.flips.len());
        for (f, h) in a.flips.iter().zip(&b.flips) {
            assert_eq!((f.vertex, f.time, f.spin), (h.vertex, h.time, h.spin.flip()));
        }
        assert_eq!(a.final_state.flipped().spins(), b.final_state.spins());
    }

    #[test]
    fn coupled_extremes_and_identical_initials() {
        let g = Geometry::torus(2, 8).unwrap();
        let lo = torus_run(8, SpinField::constant(&g, Spin::Minus), 1, 20.0);
        let hi = torus_run(8, SpinField::constant(&g, Spin::Plus), 1, 20.0);
        let c = coupled_run(&lo, &hi).unwrap();
        assert_eq!(c.order_violations, 0);
        assert!(c.lower.flips.is_empty() && c.upper.flips.is_empty());

        let f = SpinField::sample(&g, 0.5, 9).unwrap();
        let c = coupled_run(&torus_run(8, f.clone(), 2, 20.0), &torus_run(8, f, 2, 20.0)).unwrap();
        assert_eq!(c.lower, c.upper);

        let wrong = coupled_run(&hi, &lo);
        assert!(wrong.is_err());
        let other = DynamicsRun::new(Geometry::torus(2, 9).unwrap(), Boundary::Periodic, SpinField::constant(&Geometry::torus(2, 9).unwrap(), Spin::Plus), ClockStream::new(1), 20.0);
        assert!(matches!(coupled_run(&lo, &other), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn nested_pairs_stay_ordered() {
        let g = Geometry::torus(2, 16).unwrap();
        for seed in 0..20 {
            let lo = SpinField::sample(&g, 0.45, seed).unwrap();
            let hi = SpinField::sample(&g, 0.6, seed).unwrap();
            let c = coupled_run(&torus_run(16, lo, seed + 100, 20.0), &torus_run(16, hi, seed + 100, 20.0)).unwrap();
            assert_eq!(c.order_violations, 0);
            assert!(c.lower.final_state.le(&c.upper.final_state));
        }
    }

    #[test]
    fn incremental_stability_matches_direct_check() {
        let g = Geometry::block(2, 7).unwrap();
        let init = SpinField::sample(&g, 0.6, 12).unwrap();
        let r = DynamicsRun::new(g.clone(), Boundary::Plus, init, ClockStream::new(13), 30.0);
        let mut d = Dynamics::new(&r).unwrap();
        while let Some(_) = d.step(30.0) {
            assert_eq!(d.is_stable(), is_stable(&g, &d.state(), Boundary::Plus));
        }
    }
}
