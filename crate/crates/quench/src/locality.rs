//! Resampling probes of how far the coupling sets and block goodness
//! depend on the underlying spins and clocks.
//!
//! A trial draws spins and clocks, records whether a vertex belongs to the
//! set (or whether a block is good), redraws everything outside a
//! neighbourhood and records it again. A claimed radius is refuted by any
//! trial where the answer changes. Each probe also redraws the
//! neighbourhood itself, which should change answers now and then; a probe
//! that never sees those changes has no power.

use rayon::prelude::*;
use serde::Serialize;

use quench_core::block_field::Randomness;
use quench_core::coupling::{classification_sites, classify_block, local_set, CouplingParams, CouplingReport, LocalQuantity};
use quench_core::geometry::BlockLayout;
use quench_core::rng::{split_seed, uniform};
use quench_core::{ClockStream, Geometry, SpinField, Vertex, VertexSet};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Set(LocalQuantity),
    Goodness,
}

impl Probe {
    pub fn parse(s: &str) -> Result<Probe, Error> {
        match s {
            "X" | "x" => Ok(Probe::Set(LocalQuantity::X)),
            "Z" | "z" => Ok(Probe::Set(LocalQuantity::Z)),
            "Z40" | "z40" => Ok(Probe::Set(LocalQuantity::Z40)),
            "goodness" => Ok(Probe::Goodness),
            _ => Err(Error::Usage(format!("unknown event {s:?} (X, Z, Z40, goodness)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Probe::Set(q) => q.name(),
            Probe::Goodness => "goodness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityReport {
    pub event: &'static str,
    pub radius: usize,
    pub trials: u64,
    /// Trials whose answer changed after redrawing outside the radius.
    pub changes: u64,
    /// Trials whose answer changed after redrawing inside it instead.
    pub inside_changes: u64,
    /// Trials where the probed vertex was in the set (always 0 for goodness
    /// probes, which count good blocks in `good_blocks`).
    pub members: u64,
    pub good_blocks: u64,
}

impl LocalityReport {
    pub fn holds(&self) -> bool {
        self.changes == 0
    }
}

/// One `(outside, inside, member)` outcome per trial.
type Trial = (bool, bool, bool);

/// Probes `q` on the `d`-torus of side `side`. The probed vertex is a
/// member of the set in odd trials whenever the set is nonempty, so both
/// directions of change are exercised.
pub fn probe_set(
    q: LocalQuantity,
    dim: usize,
    side: usize,
    params: &CouplingParams,
    radius: usize,
    trials: u64,
    seed: u64,
) -> Result<LocalityReport, Error> {
    let g = Geometry::torus(dim, side)?;
    let p = params.p();
    let out: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = split_seed(seed, t);
            let field = SpinField::sample(&g, p, split_seed(s, 0))?;
            let clocks = ClockStream::new(split_seed(s, 1));
            let set = local_set(q, &g, &field, &clocks, params)?;
            let v = pick_vertex(&g, &set, s, t % 2 == 1);
            let ball = g.ball(v, radius)?;
            let outside = VertexSet::full(g.len()).difference(&ball);
            let fresh = split_seed(s, 2);
            let changed = |region: &VertexSet| -> Result<bool, Error> {
                let f2 = field.resample_region(&g, region, fresh)?;
                let c2 = clocks.resample_region(&g, region, fresh ^ 0x9E37_79B9_7F4A_7C15);
                Ok(local_set(q, &g, &f2, &c2, params)?.contains(v) != set.contains(v))
            };
            Ok((changed(&outside)?, changed(&ball)?, set.contains(v)))
        })
        .collect::<Result<_, Error>>()?;
    Ok(tally(Probe::Set(q).name(), radius, &out, 0))
}

fn pick_vertex(g: &Geometry, set: &VertexSet, seed: u64, member: bool) -> Vertex {
    let u = uniform(seed, 0x10CA, 0);
    if member && !set.is_empty() {
        let k = ((u * set.len() as f64) as usize).min(set.len() - 1);
        return set.iter().nth(k).expect("index below set size");
    }
    ((u * g.len() as f64) as usize).min(g.len() - 1)
}

/// Probes block goodness: keeps the randomness of `B'` and its collar and
/// redraws the rest of `Z^d` (or the reverse).
pub fn probe_goodness(layout: &BlockLayout, params: &CouplingParams, trials: u64, seed: u64) -> Result<LocalityReport, Error> {
    let sites = classification_sites(layout);
    let block = layout.outer_block();
    let classify = |r: &Randomness| -> Result<CouplingReport, Error> {
        Ok(classify_block(layout, &r.field_on(&block), &r.clocks, params)?)
    };
    let key = |c: &CouplingReport| (c.good, c.inner_all_plus, c.f_doubleprime, c.f, c.f_prime);
    let out: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = split_seed(seed, t);
            let r = Randomness::new(params.p(), split_seed(s, 0), split_seed(s, 1))?;
            let before = classify(&r)?;
            let fresh = split_seed(s, 2);
            let outside = classify(&r.resample_all_but(&sites, fresh))?;
            let inside = classify(&r.resample_sites(&sites, fresh))?;
            Ok((key(&outside) != key(&before), key(&inside) != key(&before), before.good))
        })
        .collect::<Result<_, Error>>()?;
    let good = out.iter().filter(|t| t.2).count() as u64;
    let mut report = tally("goodness", layout.margin() + 1, &out, good);
    report.members = 0;
    Ok(report)
}

fn tally(event: &'static str, radius: usize, out: &[Trial], good_blocks: u64) -> LocalityReport {
    let count = |f: fn(&Trial) -> bool| out.iter().filter(|t| f(t)).count() as u64;
    LocalityReport {
        event,
        radius,
        trials: out.len() as u64,
        changes: count(|t| t.0),
        inside_changes: count(|t| t.1),
        members: count(|t| t.2),
        good_blocks,
    }
}
