//! Structural properties of the coupling sets and block classification.

use proptest::prelude::*;
use quench_core::bounds::binomial_tail;
use quench_core::coupling::{classify_block, compute_x, compute_z, closure40, CouplingParams};
use quench_core::geometry::BlockLayout;
use quench_core::{ClockStream, Geometry, Ratio, SpinField};

fn params(eps: (i128, i128)) -> CouplingParams {
    CouplingParams::new(Ratio::new(eps.0, eps.1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn sets_are_nested(d in 1usize..=3, n in 3usize..=8, e in 1i128..10, s1: u64, s2: u64) {
        let g = Geometry::torus(d, n).unwrap();
        let p = params((e, 20));
        let field = SpinField::sample(&g, p.p(), s1).unwrap();
        let clocks = ClockStream::new(s2);
        let a = field.minus_set();
        let x = compute_x(&g, &a, &p).unwrap();
        let z = compute_z(&g, &a, &x, &clocks, p.time_d(d)).unwrap();
        let z40 = closure40(&g, &z, &p).unwrap();
        prop_assert!(!x.intersects(&a));
        prop_assert!(z.is_subset(&z40));
        for v in x.iter() {
            prop_assert!(g.neighbors(v).unwrap().iter().all(|&w| z.contains(w)));
        }
    }

    #[test]
    fn classification_is_consistent(d in 1usize..=2, inner in 1usize..=4, pad in 0usize..=3, e in 1i128..10, s1: u64, s2: u64, horizon in 0.0f64..30.0) {
        let layout = BlockLayout::tiled(d, inner, inner + 2 * pad, &vec![1; d]).unwrap();
        let mut p = params((e, 20));
        p.horizon = Some(horizon.max(p.time_d(d)));
        let field = SpinField::sample(&layout.outer_block(), p.p(), s1).unwrap();
        let r = classify_block(&layout, &field, &ClockStream::new(s2), &p).unwrap();
        prop_assert!(r.consistent());
        prop_assert!(!r.early_implication_violated());
        prop_assert!(!r.late_implication_violated());
    }
}

/// The membership rate of `Z` stays below the sum of its three causes:
/// a silent clock, at least `d` `'−'` neighbours, a neighbour in `X`.
#[test]
fn z_rate_below_union_bound() {
    let d = 4;
    let g = Geometry::torus(d, 6).unwrap();
    let p = params((3, 10));
    let (mut xs, mut zs, mut n) = (0usize, 0usize, 0usize);
    for s in 0..40u64 {
        let field = SpinField::sample(&g, p.p(), s).unwrap();
        let clocks = ClockStream::new(s ^ 0xABCD);
        let a = field.minus_set();
        let x = compute_x(&g, &a, &p).unwrap();
        let z = compute_z(&g, &a, &x, &clocks, d as f64).unwrap();
        xs += x.len();
        zs += z.len();
        n += g.len();
    }
    let x_rate = xs as f64 / n as f64;
    let z_rate = zs as f64 / n as f64;
    let bound = (-(d as f64)).exp() + binomial_tail(2 * d as u64, 1.0 - p.p(), d as u64).unwrap() + 2.0 * d as f64 * x_rate;
    let sigma = (z_rate * (1.0 - z_rate) / n as f64).sqrt();
    assert!(z_rate <= bound + 3.0 * sigma, "Z rate {z_rate} vs bound {bound}");
}
