//! Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped and tied absolute differences get midranks.
//! Up to [`EXACT_MAX_N`] nonzero differences the p-value is exact: the null
//! distribution of W+ is built over all sign assignments of the observed rank
//! multiset. Midranks are multiples of 1/2, so the distribution is counted
//! over doubled ranks, which keeps every sum an integer.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairedSample {
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

impl PairedSample {
    pub fn new(pre: Vec<f64>, post: Vec<f64>) -> Self {
        PairedSample { pre, post }
    }

    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    pub fn push(&mut self, pre: f64, post: f64) {
        self.pre.push(pre);
        self.post.push(post);
    }

    pub fn swapped(&self) -> PairedSample {
        PairedSample { pre: self.post.clone(), post: self.pre.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_effective: usize,
    pub w_plus: f64,
    pub p_two_sided: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WilcoxonError {
    #[error("pre has {pre} values but post has {post}")]
    LengthMismatch { pre: usize, post: usize },
    #[error("all differences are zero")]
    NoNonzeroDifferences,
}

/// `(doubled_rank, positive)` per nonzero difference, plus tie group sizes.
pub type SignedRanks = (Vec<(u64, bool)>, Vec<usize>);

/// Signed midranks of the nonzero differences `post - pre`, doubled.
pub fn signed_ranks(sample: &PairedSample) -> Result<SignedRanks, WilcoxonError> {
    if sample.pre.len() != sample.post.len() {
        return Err(WilcoxonError::LengthMismatch { pre: sample.pre.len(), post: sample.post.len() });
    }
    let mut diffs: Vec<f64> =
        sample.pre.iter().zip(&sample.post).map(|(a, b)| b - a).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(WilcoxonError::NoNonzeroDifferences);
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut ranked = Vec::with_capacity(diffs.len());
    let mut ties = Vec::new();
    let mut i = 0;
    while i < diffs.len() {
        let mut j = i;
        while j + 1 < diffs.len() && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share the midrank (i+j+2)/2
        let doubled = (i + j + 2) as u64;
        ranked.extend(diffs[i..=j].iter().map(|d| (doubled, *d > 0.0)));
        ties.push(j - i + 1);
        i = j + 1;
    }
    Ok((ranked, ties))
}

/// Number of sign assignments per doubled W+ value, index = doubled sum.
fn null_counts(doubled_ranks: &[u64]) -> Vec<f64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

pub fn wilcoxon_signed_rank(sample: &PairedSample) -> Result<WilcoxonResult, WilcoxonError> {
    let (ranked, ties) = signed_ranks(sample)?;
    let n = ranked.len();
    let w2: u64 = ranked.iter().filter(|(_, pos)| *pos).map(|(r, _)| r).sum();
    let w_plus = w2 as f64 / 2.0;

    if n <= EXACT_MAX_N {
        let ranks: Vec<u64> = ranked.iter().map(|(r, _)| *r).collect();
        let counts = null_counts(&ranks);
        let total = 2f64.powi(n as i32);
        let lower: f64 = counts[..=w2 as usize].iter().sum::<f64>() / total;
        let upper: f64 = counts[w2 as usize..].iter().sum::<f64>() / total;
        let p = (2.0 * lower.min(upper)).min(1.0);
        return Ok(WilcoxonResult { n_effective: n, w_plus, p_two_sided: p, method: Method::Exact });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * (1.0 - normal.cdf(z))).min(1.0);
    Ok(WilcoxonResult { n_effective: n, w_plus, p_two_sided: p, method: Method::NormalApprox })
}
