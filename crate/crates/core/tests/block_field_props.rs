use quench_core::block_field::{BlockField, GoodnessSetup, Randomness};
use quench_core::coupling::{classification_sites, CouplingParams};
use quench_core::Ratio;

fn setup(dims: Vec<usize>, horizon: f64) -> GoodnessSetup {
    let mut params = CouplingParams::new(Ratio::new(9, 20)).unwrap();
    params.time_d = Some(horizon.min(1.0));
    params.horizon = Some(horizon);
    GoodnessSetup { block_side: 9, outer_side: 15, dims, params }
}

fn field(s: &GoodnessSetup, r: &Randomness) -> BlockField {
    let good: Vec<bool> = (0..s.lattice().unwrap().len()).map(|b| s.classify(b, r).unwrap().good).collect();
    s.field_from(&good, r).unwrap()
}

#[test]
fn all_plus_start_without_paths_gives_all_good_blocks() {
    let s = setup(vec![3, 3], 0.01);
    let r = Randomness::new(1.0, 1, 2).unwrap();
    assert!(field(&s, &r).spins().iter().all(|x| x.is_plus()));
}

#[test]
fn all_minus_start_gives_all_bad_blocks() {
    let s = setup(vec![3, 3], 1.0);
    for seed in 0..5 {
        let r = Randomness::new(0.0, seed, seed + 100).unwrap();
        assert!(field(&s, &r).spins().iter().all(|x| !x.is_plus()));
    }
}

#[test]
fn separated_blocks_ignore_each_others_regions() {
    let s = setup(vec![4, 4], 1.0);
    for seed in 0..6u64 {
        let r = Randomness::new(0.95, seed, seed ^ 0xFF).unwrap();
        let before = field(&s, &r);
        let target = (seed % 16) as usize;
        let redrawn = r.resample_sites(&classification_sites(&s.layout(target).unwrap()), seed + 1000);
        let after = field(&s, &redrawn);
        let lattice = s.lattice().unwrap();
        for b in lattice.vertices() {
            let far = quench_core::geometry::linf_block_distance(&lattice.coords(b), &lattice.coords(target)) >= 2;
            if far {
                assert_eq!(before.get(b), after.get(b), "block {b} changed when block {target} was redrawn");
            }
        }
    }
}

/// Goodness of blocks two apart: sample correlation within 4σ of zero.
#[test]
fn separated_goodness_is_uncorrelated() {
    let s = setup(vec![3, 1], 1.0);
    let n = 1000;
    let (mut a, mut b, mut ab) = (0.0, 0.0, 0.0);
    for seed in 0..n as u64 {
        let r = Randomness::new(0.95, seed, seed.wrapping_mul(31) + 7).unwrap();
        let x = s.classify(0, &r).unwrap().good as u8 as f64;
        let y = s.classify(2, &r).unwrap().good as u8 as f64;
        a += x;
        b += y;
        ab += x * y;
    }
    let (ma, mb) = (a / n as f64, b / n as f64);
    assert!(ma > 0.02 && mb > 0.02, "degenerate goodness rates {ma}, {mb}");
    let cov = ab / n as f64 - ma * mb;
    let corr = cov / (ma * (1.0 - ma) * mb * (1.0 - mb)).sqrt();
    assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "correlation {corr}");
}
