//! Paired two-sided Wilcoxon signed-rank test.
//!
//! Zero differences are dropped and tied absolute differences get mid-ranks.
//! For up to [`EXACT_MAX_N`] nonzero differences the p-value is exact,
//! from the null distribution of the positive rank sum over all 2^n sign
//! assignments. Beyond that a normal approximation with tie and continuity
//! corrections is used.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W+, W-).
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
    /// All differences were zero; `p_value` is 1.
    pub degenerate: bool,
}

/// Mid-ranks of `values` (1-based), doubled so ties stay integral.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share (i + j + 2) / 2
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided exact p from the distribution of the doubled positive rank sum.
fn exact_p(ranks2: &[u64], observed2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let tail: u64 = counts[..=observed2 as usize].iter().sum();
    let all = 2f64.powi(ranks2.len() as i32);
    (2.0 * tail as f64 / all).min(1.0)
}

fn normal_p(abs: &[f64], w_plus: f64) -> f64 {
    let n = abs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Wilcoxon signed-rank test on paired samples `a[i]`, `b[i]`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("paired samples are empty".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("paired samples must be finite".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|&d| d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            n: 0,
            p_value: 1.0,
            exact: true,
            degenerate: true,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks2 = doubled_midranks(&abs);
    let plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let minus2 = total2 - plus2;
    let stat2 = plus2.min(minus2);
    let exact = diffs.len() <= EXACT_MAX_N;
    let w_plus = plus2 as f64 / 2.0;
    let p_value = if exact {
        exact_p(&ranks2, stat2)
    } else {
        normal_p(&abs, w_plus)
    };
    Ok(WilcoxonResult {
        statistic: stat2 as f64 / 2.0,
        w_plus,
        w_minus: minus2 as f64 / 2.0,
        n: diffs.len(),
        p_value,
        exact,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_six() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [0.0; 6];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.w_plus, 21.0);
        assert!(r.exact);
        assert_eq!(r.p_value, 0.03125);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let a = [0.3, 0.7, 0.1];
        let r = wilcoxon_signed_rank(&a, &a).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn midranks_for_ties() {
        assert_eq!(doubled_midranks(&[3.0, 1.0, 3.0, 2.0]), vec![7, 2, 7, 4]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
        assert!(wilcoxon_signed_rank(&[], &[]).is_err());
        assert!(wilcoxon_signed_rank(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn normal_approximation_for_large_n() {
        let a: Vec<f64> = (1..=30).map(f64::from).collect();
        let b = vec![0.0; 30];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!r.exact);
        // z = (232.5 - 0.5) / sqrt(2363.75)
        let z: f64 = 232.0 / 2363.75f64.sqrt();
        let want = erfc(z / std::f64::consts::SQRT_2);
        assert!((r.p_value - want).abs() < 1e-15);
        assert!(r.p_value > 0.0 && r.p_value < 1e-5);
    }

    #[test]
    fn p_stays_in_unit_interval() {
        let a = [0.1, -0.2, 0.3, 0.05, -0.4, 0.9, 0.2, -0.1];
        let b = [0.0; 8];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }
}
