//! Replicated Monte Carlo: fixation and percolation probabilities,
//! threshold bisection and flip-activity profiles.
//!
//! Replica `i` of master seed `s` draws its spins from
//! `split_seed(split_seed(s, i), 0)` and its clocks from
//! `split_seed(split_seed(s, i), 1)`. Spins are keyed by site and compared
//! with `p`, so runs at different `p` with the same seed start from nested
//! fields and share clocks and coins.

use rayon::prelude::*;
use serde::Serialize;

use quench_core::bootstrap::percolates;
use quench_core::glauber::{is_stable, Boundary, Dynamics, DynamicsRun};
use quench_core::rng::split_seed;
use quench_core::{ClockStream, Geometry, Spin, SpinField};

use crate::stats::{mean_and_sem, wilson, Z95};
use crate::Error;

/// Spin and clock seeds of one replica.
pub fn replica_seeds(master: u64, replica: u64) -> (u64, u64) {
    let s = split_seed(master, replica);
    (split_seed(s, 0), split_seed(s, 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub successes: u64,
    pub replicas: u64,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn new(successes: u64, replicas: u64) -> Self {
        let point = if replicas == 0 { 0.0 } else { successes as f64 / replicas as f64 };
        let (lower, upper) = wilson(successes, replicas, Z95);
        Estimate { successes, replicas, point, lower, upper }
    }
}

/// One family of Glauber runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsConfig {
    pub dim: usize,
    pub side: usize,
    #[serde(serialize_with = "crate::records::boundary_name")]
    pub boundary: Boundary,
    pub p: f64,
    pub alpha: f64,
    pub max_t: f64,
    pub seed: u64,
}

impl DynamicsConfig {
    pub fn geometry(&self) -> Result<Geometry, Error> {
        let g = Geometry::new(vec![self.side; self.dim], self.boundary == Boundary::Periodic)?;
        Ok(g)
    }

    pub fn run(&self, g: &Geometry, replica: u64) -> Result<DynamicsRun, Error> {
        let (spin_seed, clock_seed) = replica_seeds(self.seed, replica);
        let field = SpinField::sample(g, self.p, spin_seed)?;
        let run = DynamicsRun::new(g.clone(), self.boundary, field, ClockStream::new(clock_seed), self.max_t).with_alpha(self.alpha);
        run.validate()?;
        Ok(run)
    }
}

/// How one run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    PlusConsensus,
    MinusConsensus,
    /// Stable but mixed, e.g. stripes on a torus.
    OtherStable,
    Unstable,
}

/// Runs until stable or the run's horizon.
pub fn classify_run(run: &DynamicsRun) -> Result<Outcome, Error> {
    let mut dynamics = Dynamics::new(run)?;
    let stable = dynamics.advance_until_stable(run.horizon, |_, _| {}).is_some();
    Ok(outcome_of(dynamics.spins(), stable))
}

fn outcome_of(spins: &[Spin], stable: bool) -> Outcome {
    if !stable {
        Outcome::Unstable
    } else if spins.iter().all(|s| s.is_plus()) {
        Outcome::PlusConsensus
    } else if spins.iter().all(|s| !s.is_plus()) {
        Outcome::MinusConsensus
    } else {
        Outcome::OtherStable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixationSummary {
    /// Success means a stable all-`'+'` configuration by `max_t`.
    pub estimate: Estimate,
    pub plus_consensus: u64,
    pub minus_consensus: u64,
    pub other_stable: u64,
    pub unstable: u64,
}

impl FixationSummary {
    pub fn from_outcomes(outcomes: &[Outcome]) -> Self {
        let count = |o| outcomes.iter().filter(|&&x| x == o).count() as u64;
        let plus = count(Outcome::PlusConsensus);
        FixationSummary {
            estimate: Estimate::new(plus, outcomes.len() as u64),
            plus_consensus: plus,
            minus_consensus: count(Outcome::MinusConsensus),
            other_stable: count(Outcome::OtherStable),
            unstable: count(Outcome::Unstable),
        }
    }
}

/// Outcomes of replicas `0..replicas`, in replica order. With `mirrored`
/// every run is replaced by its sign-reversed twin.
pub fn fixation_outcomes(cfg: &DynamicsConfig, replicas: u64, mirrored: bool) -> Result<Vec<Outcome>, Error> {
    let g = cfg.geometry()?;
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let run = cfg.run(&g, i)?;
            let run = if mirrored { run.mirrored() } else { run };
            classify_run(&run)
        })
        .collect()
}

pub fn fixation_probability(cfg: &DynamicsConfig, replicas: u64) -> Result<FixationSummary, Error> {
    Ok(FixationSummary::from_outcomes(&fixation_outcomes(cfg, replicas, false)?))
}

/// Bootstrap percolation with each vertex initially infected with
/// probability `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercolationConfig {
    pub dim: usize,
    pub side: usize,
    pub wrap: bool,
    pub r: usize,
    pub p: f64,
    pub seed: u64,
}

impl PercolationConfig {
    pub fn geometry(&self) -> Result<Geometry, Error> {
        Ok(Geometry::new(vec![self.side; self.dim], self.wrap)?)
    }
}

/// Infected set of one replica: the `'−'` sites of a field with `'+'`
/// density `1 − p`, so the sets are nested in `p`.
pub fn infected_set(g: &Geometry, p: f64, master: u64, replica: u64) -> Result<quench_core::VertexSet, Error> {
    let (spin_seed, _) = replica_seeds(master, replica);
    Ok(SpinField::sample(g, 1.0 - p, spin_seed)?.minus_set())
}

pub fn bootstrap_percolation_probability(cfg: &PercolationConfig, replicas: u64) -> Result<Estimate, Error> {
    let g = cfg.geometry()?;
    let hits: Vec<bool> = (0..replicas)
        .into_par_iter()
        .map(|i| Ok(percolates(&g, &infected_set(&g, cfg.p, cfg.seed, i)?, cfg.r)))
        .collect::<Result<_, Error>>()?;
    Ok(Estimate::new(hits.iter().filter(|&&h| h).count() as u64, replicas))
}

/// One probe of a bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BisectStep {
    pub lo: f64,
    pub hi: f64,
    pub p: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bisection {
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub target: f64,
    pub tol: f64,
    pub trace: Vec<BisectStep>,
}

/// Finds where an increasing estimated probability crosses `target`,
/// halving `[lo, hi]` until it is shorter than `tol`.
pub fn threshold_bisect(
    mut evaluate: impl FnMut(f64) -> Result<Estimate, Error>,
    target: f64,
    tol: f64,
    lo: f64,
    hi: f64,
) -> Result<Bisection, Error> {
    if !(tol > 0.0) || !(lo < hi) {
        return Err(Error::Usage(format!("bisection needs lo < hi and tol > 0 (got {lo}, {hi}, {tol})")));
    }
    let mut trace = Vec::new();
    let at_lo = evaluate(lo)?;
    trace.push(BisectStep { lo, hi, p: lo, estimate: at_lo });
    let at_hi = evaluate(hi)?;
    trace.push(BisectStep { lo, hi, p: hi, estimate: at_hi });
    if !(at_lo.point < target && at_hi.point >= target) {
        return Err(quench_core::Error::NotBracketing {
            low: format!("P({lo}) = {}", at_lo.point),
            high: format!("P({hi}) = {}", at_hi.point),
        }
        .into());
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let e = evaluate(mid)?;
        trace.push(BisectStep { lo: a, hi: b, p: mid, estimate: e });
        if e.point >= target {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Bisection { p_hat: 0.5 * (a + b), lo: a, hi: b, target, tol, trace })
}

/// Flip statistics of one configuration family over time windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityProfile {
    /// `(a, b, mean, sem)`: fraction of vertices flipping at least once in
    /// `[a, b]`, averaged over replicas.
    pub windows: Vec<(f64, f64, f64, f64)>,
    /// `(t, mean, sem)`: fraction of vertices that flipped by time `t`.
    /// Vertices of a torus are exchangeable, so this estimates the chance
    /// the origin has flipped by `t`.
    pub flipped_by: Vec<(f64, f64, f64)>,
    /// `(t, fraction)`: the origin alone, across replicas.
    pub origin_flipped_by: Vec<(f64, f64)>,
}

pub fn activity_profile(cfg: &DynamicsConfig, replicas: u64, windows: &[(f64, f64)], times: &[f64]) -> Result<ActivityProfile, Error> {
    let g = cfg.geometry()?;
    let end = windows.iter().map(|w| w.1).chain(times.iter().copied()).fold(0.0, f64::max).min(cfg.max_t);
    let per: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let run = cfg.run(&g, i)?;
            let mut dynamics = Dynamics::new(&run)?;
            let n = g.len();
            let mut first_flip = vec![f64::INFINITY; n];
            let mut in_window = vec![vec![false; n]; windows.len()];
            dynamics.advance(end, |ring, _| {
                if ring.flipped() {
                    let v = ring.vertex;
                    if first_flip[v].is_infinite() {
                        first_flip[v] = ring.time;
                    }
                    for (w, &(a, b)) in windows.iter().enumerate() {
                        if ring.time >= a && ring.time <= b {
                            in_window[w][v] = true;
                        }
                    }
                }
            });
            let wf = in_window.iter().map(|f| f.iter().filter(|&&x| x).count() as f64 / n as f64).collect();
            let tf = times.iter().map(|&t| first_flip.iter().filter(|&&s| s <= t).count() as f64 / n as f64).collect();
            let origin = times.iter().map(|&t| first_flip[0] <= t).collect();
            Ok((wf, tf, origin))
        })
        .collect::<Result<_, Error>>()?;
    let column = |pick: &dyn Fn(&(Vec<f64>, Vec<f64>, Vec<bool>)) -> f64| mean_and_sem(&per.iter().map(pick).collect::<Vec<_>>());
    let windows_out = windows
        .iter()
        .enumerate()
        .map(|(w, &(a, b))| {
            let (m, s) = column(&|r| r.0[w]);
            (a, b, m, s)
        })
        .collect();
    let flipped_by = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (m, s) = column(&|r| r.1[k]);
            (t, m, s)
        })
        .collect();
    let origin_flipped_by = times
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, per.iter().filter(|r| r.2[k]).count() as f64 / per.len().max(1) as f64))
        .collect();
    Ok(ActivityProfile { windows: windows_out, flipped_by, origin_flipped_by })
}

/// Coupled runs of nested fields at `p_low ≤ p_high`: number of replicas
/// where the lower run fixates at `'+'` but the upper one does not.
pub fn monotonicity_violations(cfg: &DynamicsConfig, p_low: f64, p_high: f64, replicas: u64) -> Result<u64, Error> {
    let lo = DynamicsConfig { p: p_low, ..cfg.clone() };
    let hi = DynamicsConfig { p: p_high, ..cfg.clone() };
    let a = fixation_outcomes(&lo, replicas, false)?;
    let b = fixation_outcomes(&hi, replicas, false)?;
    Ok(a.iter()
        .zip(&b)
        .filter(|(x, y)| **x == Outcome::PlusConsensus && **y != Outcome::PlusConsensus)
        .count() as u64)
}

/// Whether the final state of a stable run passes the direct stability
/// check; used to cross-check the incremental bookkeeping.
pub fn stable_by_definition(g: &Geometry, spins: &[Spin], boundary: Boundary) -> bool {
    is_stable(g, &SpinField::from_spins(spins.to_vec()), boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64) -> DynamicsConfig {
        DynamicsConfig { dim: 2, side: 8, boundary: Boundary::Periodic, p, alpha: 0.5, max_t: 200.0, seed: 3 }
    }

    #[test]
    fn extremes() {
        assert_eq!(fixation_probability(&cfg(1.0), 20).unwrap().estimate.point, 1.0);
        let free = DynamicsConfig { boundary: Boundary::Free, ..cfg(0.0) };
        assert_eq!(fixation_probability(&free, 20).unwrap().estimate.point, 0.0);
        let perc = PercolationConfig { dim: 2, side: 5, wrap: true, r: 2, p: 1.0, seed: 1 };
        assert_eq!(bootstrap_percolation_probability(&perc, 10).unwrap().point, 1.0);
        let perc = PercolationConfig { p: 0.0, ..perc };
        assert_eq!(bootstrap_percolation_probability(&perc, 10).unwrap().point, 0.0);
    }

    #[test]
    fn identity_bisection() {
        let b = threshold_bisect(|p| Ok(Estimate { point: p, ..Estimate::new(0, 1) }), 0.5, 1.0 / 64.0, 0.0, 1.0).unwrap();
        assert!((b.p_hat - 0.5).abs() <= 1.0 / 64.0);
        assert!(threshold_bisect(|_| Ok(Estimate::new(1, 1)), 0.5, 0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn all_plus_has_no_activity() {
        let prof = activity_profile(&cfg(1.0), 3, &[(0.0, 10.0)], &[5.0, 10.0]).unwrap();
        assert_eq!(prof.windows[0].2, 0.0);
        assert!(prof.flipped_by.iter().all(|x| x.1 == 0.0));
    }

    #[test]
    fn outcomes_are_consistent_with_direct_stability() {
        let c = cfg(0.6);
        let g = c.geometry().unwrap();
        for i in 0..20 {
            let run = c.run(&g, i).unwrap();
            let mut d = Dynamics::new(&run).unwrap();
            let stable = d.advance_until_stable(run.horizon, |_, _| {}).is_some();
            assert_eq!(stable, stable_by_definition(&g, d.spins(), run.boundary));
        }
    }
}
