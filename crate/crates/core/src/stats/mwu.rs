//! Two-sided Mann-Whitney U test.
//!
//! Small samples use the exact permutation distribution of U, computed by
//! counting rank-sum subsets over mid-ranks, so ties are handled exactly.
//! Larger samples use the normal approximation with tie-corrected variance
//! and a continuity correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const DEFAULT_EXACT_THRESHOLD: usize = 64;

/// Pooled sizes above this never use the exact branch, whatever the threshold.
const MAX_EXACT_POOLED: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub metric_name: String,
    /// U for the first sample: pairs with a > b plus half the ties.
    pub u_statistic: f64,
    pub p_value: f64,
    pub n_real: usize,
    pub n_synth: usize,
    pub method: TestMethod,
}

impl TestResult {
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.metric_name = name.into();
        self
    }
}

/// Mid-ranks (1-based) of the pooled values, doubled so they are integers.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share (i+1 + j+1) / 2; doubled: i + j + 2
        let r2 = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    (ranks, tie_sizes)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    mann_whitney_u_with(a, b, DEFAULT_EXACT_THRESHOLD)
}

/// `exact_threshold` bounds `n_a * n_b` for the exact branch.
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], exact_threshold: usize) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("Mann-Whitney U needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("Mann-Whitney U samples contain NaN".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks2, ties) = doubled_midranks(&pooled);
    let rank_sum2: u64 = ranks2[..na].iter().sum();
    // doubled U_a = 2 R_a - n_a (n_a + 1)
    let u2 = rank_sum2 - (na * (na + 1)) as u64;
    let u = u2 as f64 / 2.0;

    let exact = na * nb <= exact_threshold && na + nb <= MAX_EXACT_POOLED;
    let (p, method) = if exact {
        (exact_p(&ranks2, na, u2), TestMethod::Exact)
    } else {
        (normal_p(u, na, nb, &ties), TestMethod::NormalApprox)
    };
    Ok(TestResult {
        metric_name: String::new(),
        u_statistic: u,
        p_value: p.clamp(0.0, 1.0),
        n_real: na,
        n_synth: nb,
        method,
    })
}

/// Exact two-sided p: the share of all size-`na` subsets of the pooled
/// doubled ranks whose doubled U is at least as far from its mean as observed.
fn exact_p(ranks2: &[u64], na: usize, u2_obs: u64) -> f64 {
    let n = ranks2.len();
    let max_sum: usize = ranks2.iter().sum::<u64>() as usize;
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0u128; max_sum + 1]; na + 1];
    counts[0][0] = 1;
    for (seen, &r) in ranks2.iter().enumerate() {
        let r = r as usize;
        for k in (1..=na.min(seen + 1)).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let offset = (na * (na + 1)) as i64;
    let mean2 = (na * (n - na)) as i64;
    let observed = (u2_obs as i64 - mean2).abs();
    let (mut extreme, mut total) = (0u128, 0u128);
    for (s, &c) in counts[na].iter().enumerate() {
        if c == 0 {
            continue;
        }
        total += c;
        if (s as i64 - offset - mean2).abs() >= observed {
            extreme += c;
        }
    }
    extreme as f64 / total as f64
}

fn normal_p(u: f64, na: usize, nb: usize, ties: &[usize]) -> f64 {
    let (naf, nbf) = (na as f64, nb as f64);
    let n = naf + nbf;
    let mean = naf * nbf / 2.0;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / (n * (n - 1.0));
    let var = naf * nbf / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2)
}
