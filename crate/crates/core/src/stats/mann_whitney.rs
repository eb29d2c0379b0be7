//! Two-sided Mann-Whitney U test with midranks for ties.
//!
//! Small problems use the exact permutation distribution of the rank sum
//! under the observed tie pattern. Larger ones use the tie-corrected normal
//! approximation with a 0.5 continuity correction.

use serde::{Deserialize, Serialize};

use super::normal::two_sided_p;
use crate::error::{Error, Result};

/// Largest `n1 + n2` handled exactly: C(20, 10) = 184,756 assignments.
pub const EXACT_MAX_TOTAL: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MannWhitneyMethod {
    Exact,
    NormalApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyResult {
    /// U for the first sample: number of (a, b) pairs with a > b, ties counting half.
    pub u_statistic: f64,
    pub p_two_sided: f64,
    pub method: MannWhitneyMethod,
    pub n1: usize,
    pub n2: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyOptions {
    pub exact_max_total: usize,
    pub continuity_correction: bool,
}

impl Default for MannWhitneyOptions {
    fn default() -> Self {
        MannWhitneyOptions {
            exact_max_total: EXACT_MAX_TOTAL,
            continuity_correction: true,
        }
    }
}

pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitneyResult> {
    mann_whitney_with(a, b, &MannWhitneyOptions::default())
}

pub fn mann_whitney_with(
    a: &[f64],
    b: &[f64],
    opts: &MannWhitneyOptions,
) -> Result<MannWhitneyResult> {
    if a.is_empty() {
        return Err(Error::EmptySample("first Mann-Whitney sample"));
    }
    if b.is_empty() {
        return Err(Error::EmptySample("second Mann-Whitney sample"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Mann-Whitney sample"));
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let ranked = doubled_midranks(a, b);

    let s1: u64 = ranked.iter().filter(|r| r.first).map(|r| r.doubled_rank).sum();
    // U1 = R1 - n1(n1+1)/2 with R1 = s1 / 2
    let u = s1 as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;

    if n <= opts.exact_max_total {
        let ranks: Vec<u64> = ranked.iter().map(|r| r.doubled_rank).collect();
        let p = exact_p(&ranks, n1, s1);
        return Ok(MannWhitneyResult {
            u_statistic: u,
            p_two_sided: p,
            method: MannWhitneyMethod::Exact,
            n1,
            n2,
        });
    }

    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let tie_term: f64 = tie_block_sizes(&ranked)
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if variance <= 0.0 {
        1.0
    } else {
        let mut dev = (u - n1f * n2f / 2.0).abs();
        if opts.continuity_correction {
            dev = (dev - 0.5).max(0.0);
        }
        two_sided_p(dev / variance.sqrt())
    };
    Ok(MannWhitneyResult {
        u_statistic: u,
        p_two_sided: p.clamp(0.0, 1.0),
        method: MannWhitneyMethod::NormalApprox,
        n1,
        n2,
    })
}

struct Ranked {
    value: f64,
    first: bool,
    /// Twice the 1-based midrank, which is always an integer.
    doubled_rank: u64,
}

fn doubled_midranks(a: &[f64], b: &[f64]) -> Vec<Ranked> {
    let mut pooled: Vec<Ranked> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .map(|(value, first)| Ranked {
            value,
            first,
            doubled_rank: 0,
        })
        .collect();
    pooled.sort_by(|x, y| x.value.total_cmp(&y.value));
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].value == pooled[i].value {
            j += 1;
        }
        // ranks i+1 ..= j share the midrank (i+1+j)/2
        let doubled = (i + 1 + j) as u64;
        for r in &mut pooled[i..j] {
            r.doubled_rank = doubled;
        }
        i = j;
    }
    pooled
}

fn tie_block_sizes(ranked: &[Ranked]) -> impl Iterator<Item = usize> + '_ {
    ranked
        .chunk_by(|x, y| x.doubled_rank == y.doubled_rank)
        .map(<[Ranked]>::len)
        .filter(|&t| t > 1)
}

/// Exact two-sided p: the fraction of size-`n1` subsets of `ranks` whose
/// rank sum is at least as far from its null mean as `observed`.
///
/// The subset-sum distribution is counted by dynamic programming over items,
/// which visits the same C(n, n1) assignments as explicit enumeration.
fn exact_p(ranks: &[u64], n1: usize, observed: u64) -> f64 {
    let n = ranks.len();
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // counts[k * width + s]: subsets of size k with doubled rank sum s
    let mut counts = vec![0u64; (n1 + 1) * width];
    counts[0] = 1;
    for (seen, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for k in (1..=n1.min(seen + 1)).rev() {
            let (lower, upper) = counts.split_at_mut(k * width);
            let prev = &lower[(k - 1) * width..];
            let cur = &mut upper[..width];
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let row = &counts[n1 * width..];
    // null mean of the doubled rank sum: n1 * (n + 1)
    let mean = (n1 * (n + 1)) as i64;
    let obs_dev = (observed as i64 - mean).abs();
    let total: u64 = row.iter().sum();
    let extreme: u64 = row
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as i64 - mean).abs() >= obs_dev)
        .map(|(_, &c)| c)
        .sum();
    (extreme as f64 / total as f64).min(1.0)
}
