//! Membership checks for block-constant spin distributions.
//!
//! Constancy on blocks is checked exactly on every sample. Equal block
//! densities and independence of blocks at L∞ block distance at least 2
//! can only be tested statistically, from many samples: a homogeneity
//! chi-square across blocks, and independence chi-squares for pairs and
//! triples of separated blocks, Bonferroni-corrected at a common level.

use serde::Serialize;

use quench_core::block_field::{condition_one_violations, BlockField};
use quench_core::geometry::linf_block_distance;
use quench_core::{Geometry, SpinField};

use crate::stats::{chi_square_homogeneity, chi_square_independence, chi_square_mutual_independence3};
use crate::Error;

pub const DEFAULT_LEVEL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub tests: usize,
    /// Smallest p-value over the family.
    pub min_p: f64,
    /// Tests rejected after dividing the level by the family size.
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaReport {
    pub samples: usize,
    pub blocks: usize,
    /// Samples with at least one non-constant block.
    pub constancy_violations: usize,
    pub plus_frequency: f64,
    pub homogeneity_p: f64,
    pub pairs: TestSummary,
    pub triples: TestSummary,
    pub level: f64,
}

impl OmegaReport {
    pub fn passes(&self) -> bool {
        self.constancy_violations == 0 && self.homogeneity_p >= self.level && self.pairs.rejected == 0 && self.triples.rejected == 0
    }
}

/// Checks vertex-level samples on `g` against blocks of side `block_side`.
/// At most `max_pairs` pairs and `max_triples` triples are tested.
pub fn check_fields(
    g: &Geometry,
    samples: &[SpinField],
    block_side: usize,
    max_pairs: usize,
    max_triples: usize,
    level: f64,
) -> Result<OmegaReport, Error> {
    let part = g.partition_into_blocks(block_side)?;
    let nb = part.block_count();
    let mut constancy_violations = 0;
    let mut plus: Vec<Vec<bool>> = Vec::with_capacity(samples.len());
    for f in samples {
        if !condition_one_violations(g, f, block_side)?.is_empty() {
            constancy_violations += 1;
        }
        let mut row = vec![false; nb];
        for b in 0..nb {
            row[b] = f.get(part.members(b)[0]).is_plus();
        }
        plus.push(row);
    }
    let coords: Vec<Vec<usize>> = (0..nb).map(|b| part.block_coords(b)).collect();
    let n = samples.len() as u64;
    let counts: Vec<u64> = (0..nb).map(|b| plus.iter().filter(|r| r[b]).count() as u64).collect();
    let total: u64 = counts.iter().sum();
    let plus_frequency = if nb == 0 || n == 0 { 0.0 } else { total as f64 / (nb as f64 * n as f64) };
    let (_, homogeneity_p) = chi_square_homogeneity(&counts, n);

    let separated = |a: usize, b: usize| linf_block_distance(&coords[a], &coords[b]) >= 2;
    let mut pair_p = Vec::new();
    'pairs: for a in 0..nb {
        for b in a + 1..nb {
            if pair_p.len() >= max_pairs {
                break 'pairs;
            }
            if !separated(a, b) {
                continue;
            }
            let mut t = vec![vec![0u64; 2]; 2];
            for r in &plus {
                t[r[a] as usize][r[b] as usize] += 1;
            }
            pair_p.push(chi_square_independence(&t).1);
        }
    }
    let mut triple_p = Vec::new();
    'triples: for a in 0..nb {
        for b in a + 1..nb {
            if !separated(a, b) {
                continue;
            }
            for c in b + 1..nb {
                if triple_p.len() >= max_triples {
                    break 'triples;
                }
                if !separated(a, c) || !separated(b, c) {
                    continue;
                }
                let mut t = [[[0u64; 2]; 2]; 2];
                for r in &plus {
                    t[r[a] as usize][r[b] as usize][r[c] as usize] += 1;
                }
                triple_p.push(chi_square_mutual_independence3(&t).1);
            }
        }
    }
    Ok(OmegaReport {
        samples: samples.len(),
        blocks: nb,
        constancy_violations,
        plus_frequency,
        homogeneity_p,
        pairs: summarize(&pair_p, level),
        triples: summarize(&triple_p, level),
        level,
    })
}

/// [`check_fields`] on block fields of identical shape.
pub fn check_blockfields(fields: &[BlockField], max_pairs: usize, max_triples: usize, level: f64) -> Result<OmegaReport, Error> {
    let Some(first) = fields.first() else {
        return Err(Error::Usage("no samples to check".into()));
    };
    let g = first.vertex_geometry(false)?;
    let samples = fields.iter().map(|f| f.to_spin_field(&g)).collect::<Result<Vec<_>, _>>()?;
    check_fields(&g, &samples, first.block_side(), max_pairs, max_triples, level)
}

fn summarize(ps: &[f64], level: f64) -> TestSummary {
    let cut = level / ps.len().max(1) as f64;
    TestSummary {
        tests: ps.len(),
        min_p: ps.iter().copied().fold(1.0, f64::min),
        rejected: ps.iter().filter(|&&p| p < cut).count(),
    }
}
