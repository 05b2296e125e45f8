//! Rank tests: one-sample Wilcoxon signed-rank against a reference value and
//! the two-sample Mann-Whitney U test.
//!
//! Both tests use midranks for ties. Exact p-values are computed by counting
//! the full null distribution whenever the total sample size is at most
//! [`EXACT_ENUMERATION_LIMIT`] (a dynamic-programming count over doubled
//! midrank sums, cheap at this size and free of approximation error exactly
//! where approximations are worst); larger samples use the tie-corrected
//! normal approximation with continuity correction.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::stats::{Alternative, TestResult};

/// Total sample size at or below which exact enumeration is used
/// (≤ 4096 sign patterns for the signed-rank test, ≤ 924 arrangements for
/// Mann-Whitney).
pub const EXACT_ENUMERATION_LIMIT: usize = 12;

/// Assigns midranks (average rank of tied runs) to `values`, returning ranks
/// aligned with the input order.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 (1-based) share the average
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Doubles midranks into exact integers (midranks move in steps of 0.5).
fn doubled(ranks: &[f64]) -> Vec<i64> {
    ranks.iter().map(|r| (2.0 * r).round() as i64).collect()
}

fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Combines lower/upper tail probabilities per the alternative.
fn combine_tails(p_le: f64, p_ge: f64, alternative: Alternative) -> f64 {
    let p = match alternative {
        Alternative::Greater => p_ge,
        Alternative::Less => p_le,
        Alternative::TwoSided => 2.0 * p_ge.min(p_le),
    };
    p.clamp(0.0, 1.0)
}

/// One-sample Wilcoxon signed-rank test of `sample` against a reference value.
///
/// Differences equal to the reference are dropped (signed-rank convention);
/// ties among the absolute differences receive midranks. The statistic is W⁺,
/// the rank sum of the positive differences. Exact enumeration when the
/// number of nonzero differences is ≤ 12, tie-corrected normal approximation
/// with continuity correction otherwise.
pub fn signed_rank_vs_reference(
    sample: &[f64],
    reference: f64,
    alternative: Alternative,
) -> Result<TestResult> {
    let diffs: Vec<f64> = sample
        .iter()
        .map(|x| x - reference)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::validation(
            "degenerate sample: all differences from the reference are zero",
        ));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    if n <= EXACT_ENUMERATION_LIMIT {
        let dr = doubled(&ranks);
        let w2 = (2.0 * w_plus).round() as i64;
        let (p_le, p_ge) = signed_rank_exact_tails(&dr, w2);
        return Ok(TestResult {
            statistic: w_plus,
            p_value: combine_tails(p_le, p_ge, alternative),
            method: format!("Wilcoxon signed-rank, exact enumeration (n = {n})"),
            alternative,
        });
    }

    // Null moments of W+ with midranks: E = Σr/2, Var = Σr²/4.
    let mean: f64 = ranks.iter().sum::<f64>() / 2.0;
    let var: f64 = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    if var <= 0.0 {
        return Err(Error::validation(
            "degenerate sample: zero variance in signed ranks",
        ));
    }
    let sd = var.sqrt();
    let p_ge = 1.0 - normal_cdf((w_plus - 0.5 - mean) / sd);
    let p_le = normal_cdf((w_plus + 0.5 - mean) / sd);
    Ok(TestResult {
        statistic: w_plus,
        p_value: combine_tails(p_le, p_ge, alternative),
        method: format!("Wilcoxon signed-rank, tie-corrected normal approximation (n = {n})"),
        alternative,
    })
}

/// Exact lower/upper tail probabilities of 2·W⁺ at `w2` over all 2^n sign
/// patterns, via subset-sum counting over the doubled ranks.
fn signed_rank_exact_tails(doubled_ranks: &[i64], w2: i64) -> (f64, f64) {
    let total: i64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    for &r in doubled_ranks {
        for s in (0..=(total - r) as usize).rev() {
            if counts[s] > 0 {
                counts[s + r as usize] += counts[s];
            }
        }
    }
    let patterns = (1u64 << doubled_ranks.len()) as f64;
    let le: u64 = counts[..=(w2.min(total)) as usize].iter().sum();
    let ge: u64 = counts[(w2.max(0)) as usize..].iter().sum();
    (le as f64 / patterns, ge as f64 / patterns)
}

/// Two-sample Mann-Whitney U test.
///
/// The statistic is U_x = R_x − n_x(n_x+1)/2, the number of (x, y) pairs with
/// x above y (ties counted half). Exact enumeration over all C(n_x+n_y, n_x)
/// rank assignments when n_x + n_y ≤ 12; tie-corrected normal approximation
/// with continuity correction otherwise. `Greater` means x tends to exceed y.
pub fn mann_whitney_u(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::validation("both samples must be nonempty"));
    }
    let nx = x.len();
    let ny = y.len();
    let n = nx + ny;
    let pooled: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
    let ranks = midranks(&pooled);
    let r_x: f64 = ranks[..nx].iter().sum();
    let u_x = r_x - (nx * (nx + 1)) as f64 / 2.0;

    if n <= EXACT_ENUMERATION_LIMIT {
        let dr = doubled(&ranks);
        // Work with doubled rank sums: 2U = s − nx(nx+1).
        let s2_obs = (2.0 * r_x).round() as i64;
        let (p_le, p_ge) = mann_whitney_exact_tails(&dr, nx, s2_obs);
        return Ok(TestResult {
            statistic: u_x,
            p_value: combine_tails(p_le, p_ge, alternative),
            method: format!("Mann-Whitney U, exact enumeration (n = {nx} + {ny})"),
            alternative,
        });
    }

    let mean_u = (nx * ny) as f64 / 2.0;
    // Tie correction: Var(U) = nx·ny/12 · [(n+1) − Σ(t³−t)/(n(n−1))].
    let mut tie_term = 0.0;
    {
        let mut sorted = pooled.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    let nf = n as f64;
    let var_u = (nx * ny) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var_u <= 0.0 {
        // All pooled values identical: no separation at all.
        return Ok(TestResult {
            statistic: u_x,
            p_value: 1.0,
            method: format!("Mann-Whitney U, degenerate pooled sample (n = {nx} + {ny})"),
            alternative,
        });
    }
    let sd = var_u.sqrt();
    let p_ge = 1.0 - normal_cdf((u_x - 0.5 - mean_u) / sd);
    let p_le = normal_cdf((u_x + 0.5 - mean_u) / sd);
    Ok(TestResult {
        statistic: u_x,
        p_value: combine_tails(p_le, p_ge, alternative),
        method: format!("Mann-Whitney U, tie-corrected normal approximation (n = {nx} + {ny})"),
        alternative,
    })
}

/// Exact lower/upper tail probabilities of the doubled x rank sum at `s2`
/// over all C(n, nx) assignments, via size-constrained subset-sum counting.
fn mann_whitney_exact_tails(doubled_ranks: &[i64], nx: usize, s2: i64) -> (f64, f64) {
    let total: i64 = doubled_ranks.iter().sum();
    let width = total as usize + 1;
    let mut counts = vec![vec![0u64; width]; nx + 1];
    counts[0][0] = 1;
    for &r in doubled_ranks {
        for k in (0..nx).rev() {
            for s in (0..=(total - r) as usize).rev() {
                if counts[k][s] > 0 {
                    let add = counts[k][s];
                    counts[k + 1][s + r as usize] += add;
                }
            }
        }
    }
    let row = &counts[nx];
    let arrangements: u64 = row.iter().sum();
    let le: u64 = row[..=(s2.min(total)) as usize].iter().sum();
    let ge: u64 = row[(s2.max(0)) as usize..].iter().sum();
    (
        le as f64 / arrangements as f64,
        ge as f64 / arrangements as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_rank_all_positive_exact() {
        // Five positive differences: W+ is maximal, P(W ≥ max) = 1/32.
        let r = signed_rank_vs_reference(
            &[1.2, 1.3, 1.4, 1.5, 1.6],
            1.0,
            Alternative::Greater,
        )
        .unwrap();
        assert_eq!(r.statistic, 15.0);
        assert_eq!(r.p_value, 1.0 / 32.0);
        assert!(r.method.contains("exact"));
    }

    #[test]
    fn signed_rank_symmetric_sample_is_null_centered() {
        let r = signed_rank_vs_reference(&[0.8, 1.2, 0.9, 1.1], 1.0, Alternative::TwoSided)
            .unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn signed_rank_drops_zero_differences() {
        let r = signed_rank_vs_reference(
            &[1.0, 1.2, 1.3, 1.4, 1.5, 1.6],
            1.0,
            Alternative::Greater,
        )
        .unwrap();
        // The exact-reference observation drops out; same test as n = 5.
        assert_eq!(r.p_value, 1.0 / 32.0);
    }

    #[test]
    fn signed_rank_degenerate_errors() {
        assert!(signed_rank_vs_reference(&[1.0, 1.0], 1.0, Alternative::TwoSided).is_err());
    }

    #[test]
    fn mann_whitney_small_exact() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mann_whitney_complete_separation() {
        let x: Vec<f64> = (0..6).map(|i| 1000.0 + i as f64).collect();
        let y: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let r = mann_whitney_u(&x, &y, Alternative::Greater).unwrap();
        assert_eq!(r.statistic, 36.0);
        assert!((r.p_value - 1.0 / 924.0).abs() < 1e-15);
    }

    #[test]
    fn mann_whitney_identical_samples_near_one() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let r = mann_whitney_u(&x, &x, Alternative::TwoSided).unwrap();
        assert!(r.p_value >= 0.99, "p = {}", r.p_value);
    }

    #[test]
    fn mann_whitney_ties_use_midranks() {
        // Pooled sample {1,2,2,3}: the tied 2s get rank 2.5 each.
        let r = mann_whitney_u(&[2.0, 3.0], &[1.0, 2.0], Alternative::TwoSided).unwrap();
        // R_x = 2.5 + 4 = 6.5, U_x = 6.5 - 3 = 3.5
        assert_eq!(r.statistic, 3.5);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn normal_approximation_reasonable_at_n50() {
        // Shifted samples, n = 25 + 25: approximation must produce a small
        // one-sided p for a clear separation.
        let x: Vec<f64> = (0..25).map(|i| 10.0 + i as f64 * 0.1).collect();
        let y: Vec<f64> = (0..25).map(|i| 9.0 + i as f64 * 0.1).collect();
        let r = mann_whitney_u(&x, &y, Alternative::Greater).unwrap();
        assert!(r.method.contains("normal approximation"));
        assert!(r.p_value < 0.01);
    }
}
