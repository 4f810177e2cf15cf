//! Estimators against exhaustive enumeration, symmetry, coverage and
//! monotone-coupling checks.

use quench::estimation::*;
use quench::stats::{wilson, Z95};
use quench_core::glauber::Boundary;
use quench_core::rng::uniform;

/// Whether `set` (a bit mask on the 3×3 torus) percolates at r = 2, by
/// repeated sweeps.
fn percolates_3x3(mut set: u32) -> bool {
    let nbrs = |v: usize| {
        let (x, y) = (v % 3, v / 3);
        [((x + 1) % 3) + 3 * y, ((x + 2) % 3) + 3 * y, x + 3 * ((y + 1) % 3), x + 3 * ((y + 2) % 3)]
    };
    loop {
        let mut next = set;
        for v in 0..9 {
            if nbrs(v).iter().filter(|&&w| set >> w & 1 == 1).count() >= 2 {
                next |= 1 << v;
            }
        }
        if next == set {
            return set == 0x1FF;
        }
        set = next;
    }
}

fn exact_3x3(p: f64) -> f64 {
    (0u32..512)
        .filter(|&s| percolates_3x3(s))
        .map(|s| {
            let k = s.count_ones() as i32;
            p.powi(k) * (1.0 - p).powi(9 - k)
        })
        .sum()
}

#[test]
fn three_by_three_torus_matches_enumeration() {
    for &p in &[0.1, 0.2, 0.35, 0.5] {
        let cfg = PercolationConfig { dim: 2, side: 3, wrap: true, r: 2, p, seed: 17 };
        let e = bootstrap_percolation_probability(&cfg, 10_000).unwrap();
        let exact = exact_3x3(p);
        let sigma = (exact * (1.0 - exact) / 10_000.0).sqrt();
        assert!((e.point - exact).abs() <= 3.0 * sigma, "p = {p}: {} vs {exact}", e.point);
    }
}

#[test]
fn mirrored_replicas_swap_consensus_exactly() {
    let cfg = DynamicsConfig { dim: 2, side: 32, boundary: Boundary::Periodic, p: 0.5, alpha: 0.5, max_t: 500.0, seed: 8 };
    let plain = fixation_outcomes(&cfg, 200, false).unwrap();
    let mirrored = fixation_outcomes(&cfg, 200, true).unwrap();
    for (a, b) in plain.iter().zip(&mirrored) {
        let swapped = match a {
            Outcome::PlusConsensus => Outcome::MinusConsensus,
            Outcome::MinusConsensus => Outcome::PlusConsensus,
            o => *o,
        };
        assert_eq!(*b, swapped);
    }
    let s = FixationSummary::from_outcomes(&plain);
    let m = FixationSummary::from_outcomes(&mirrored);
    assert_eq!(s.plus_consensus, m.minus_consensus);
}

/// Exact coverage of the interval: sum of binomial probabilities over the
/// counts whose interval contains `p`.
fn exact_coverage(n: u64, p: f64) -> f64 {
    let mut ln_c = 0.0;
    let mut total = 0.0;
    for s in 0..=n {
        if s > 0 {
            ln_c += ((n - s + 1) as f64).ln() - (s as f64).ln();
        }
        let (lo, hi) = wilson(s, n, Z95);
        if lo <= p && p <= hi {
            total += (ln_c + s as f64 * p.ln() + (n - s) as f64 * (1.0 - p).ln()).exp();
        }
    }
    total
}

#[test]
fn wilson_coverage_on_synthetic_streams() {
    let n = 200u64;
    for &p in &[0.1, 0.5, 0.8] {
        let exact = exact_coverage(n, p);
        assert!((0.93..=0.97).contains(&exact), "p = {p}: exact coverage {exact}");
        let reps = 10_000u64;
        let covered = (0..reps)
            .filter(|&rep| {
                let s = (0..n).filter(|&i| uniform(rep, 0x5EED, i) < p).count() as u64;
                let (lo, hi) = wilson(s, n, Z95);
                lo <= p && p <= hi
            })
            .count() as f64
            / reps as f64;
        assert!((0.93..=0.97).contains(&covered), "p = {p}: coverage {covered}");
        assert!((covered - exact).abs() < 4.0 * (exact * (1.0 - exact) / reps as f64).sqrt());
    }
}

#[test]
fn fixation_is_monotone_in_p() {
    let cfg = DynamicsConfig { dim: 2, side: 12, boundary: Boundary::Periodic, p: 0.0, alpha: 0.5, max_t: 200.0, seed: 4 };
    for &(a, b) in &[(0.5, 0.6), (0.6, 0.8), (0.45, 0.9)] {
        assert_eq!(monotonicity_violations(&cfg, a, b, 200).unwrap(), 0);
    }
}

#[test]
fn estimates_are_reproducible() {
    let cfg = DynamicsConfig { dim: 2, side: 10, boundary: Boundary::Plus, p: 0.55, alpha: 0.5, max_t: 100.0, seed: 12 };
    assert_eq!(fixation_probability(&cfg, 100).unwrap(), fixation_probability(&cfg, 100).unwrap());
}

fn bootstrap_threshold(side: usize) -> Bisection {
    let eval = |p| bootstrap_percolation_probability(&PercolationConfig { dim: 2, side, wrap: true, r: 2, p, seed: 21 }, 200);
    threshold_bisect(eval, 0.5, 1.0 / 64.0, 0.0, 1.0).unwrap()
}

#[test]
fn bisection_trace_is_bit_identical() {
    assert_eq!(bootstrap_threshold(16), bootstrap_threshold(16));
}

#[test]
fn threshold_does_not_grow_with_the_torus() {
    let hats: Vec<f64> = [8, 16, 32].iter().map(|&n| bootstrap_threshold(n).p_hat).collect();
    // Resolution of one bracket plus sampling noise of the crossing point.
    let slack = 3.0 * (0.25f64 / 200.0).sqrt() + 1.0 / 64.0;
    for w in hats.windows(2) {
        assert!(w[1] <= w[0] + slack, "{hats:?}");
    }
}
