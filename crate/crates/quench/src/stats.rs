//! Interval estimates and contingency tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(phat), (centre + half).min(1.0).max(phat))
}

/// Standard error of a proportion.
pub fn proportion_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Mean and standard error of the mean.
pub fn mean_and_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pearson chi-square statistic and p-value for independence in a
/// two-way table. Rows or columns that are entirely zero are dropped.
pub fn chi_square_independence(table: &[Vec<u64>]) -> (f64, f64) {
    let rows: Vec<&Vec<u64>> = table.iter().filter(|r| r.iter().sum::<u64>() > 0).collect();
    if rows.is_empty() {
        return (0.0, 1.0);
    }
    let ncol = rows[0].len();
    let cols: Vec<usize> = (0..ncol).filter(|&j| rows.iter().map(|r| r[j]).sum::<u64>() > 0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return (0.0, 1.0);
    }
    let total: f64 = rows.iter().map(|r| r.iter().sum::<u64>() as f64).sum();
    let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = cols.iter().map(|&j| rows.iter().map(|r| r[j] as f64).sum()).collect();
    let mut stat = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for (jj, &j) in cols.iter().enumerate() {
            let e = row_sums[i] * col_sums[jj] / total;
            stat += (r[j] as f64 - e).powi(2) / e;
        }
    }
    let dof = ((rows.len() - 1) * (cols.len() - 1)) as f64;
    (stat, chi_square_sf(stat, dof))
}

/// Mutual independence of three binary indicators: the 2×2×2 table
/// against the product of its margins, 4 degrees of freedom.
pub fn chi_square_mutual_independence3(counts: &[[[u64; 2]; 2]; 2]) -> (f64, f64) {
    let total: u64 = counts.iter().flatten().flatten().sum();
    if total == 0 {
        return (0.0, 1.0);
    }
    let t = total as f64;
    let mut m = [[0.0f64; 2]; 3];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let v = counts[a][b][c] as f64;
                m[0][a] += v;
                m[1][b] += v;
                m[2][c] += v;
            }
        }
    }
    if m.iter().any(|x| x[0] == 0.0 || x[1] == 0.0) {
        return (0.0, 1.0);
    }
    let mut stat = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let e = m[0][a] * m[1][b] * m[2][c] / (t * t);
                stat += (counts[a][b][c] as f64 - e).powi(2) / e;
            }
        }
    }
    (stat, chi_square_sf(stat, 4.0))
}

/// Goodness of fit of per-group success counts to one common rate.
pub fn chi_square_homogeneity(successes: &[u64], trials: u64) -> (f64, f64) {
    let table: Vec<Vec<u64>> = successes.iter().map(|&s| vec![s, trials - s]).collect();
    chi_square_independence(&table)
}

pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).map(|c| c.sf(stat)).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_and_is_narrow() {
        let (lo, hi) = wilson(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((hi - lo - 0.192).abs() < 0.01);
        assert_eq!(wilson(0, 10, Z95).0, 0.0);
        assert_eq!(wilson(10, 10, Z95).1, 1.0);
    }

    #[test]
    fn wilson_matches_textbook_value() {
        // 81 of 263: interval (0.2553, 0.3662).
        let (lo, hi) = wilson(81, 263, Z95);
        assert!((lo - 0.2553).abs() < 5e-4 && (hi - 0.3662).abs() < 5e-4, "{lo} {hi}");
    }

    #[test]
    fn chi_square_detects_dependence() {
        let (_, p) = chi_square_independence(&[vec![50, 50], vec![50, 50]]);
        assert!((p - 1.0).abs() < 1e-12);
        let (s, p) = chi_square_independence(&[vec![90, 10], vec![10, 90]]);
        assert!(s > 100.0 && p < 1e-10);
        let mut c = [[[0u64; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for d in 0..2 {
                    c[a][b][d] = 25;
                }
            }
        }
        assert!(chi_square_mutual_independence3(&c).1 > 0.99);
    }
}
