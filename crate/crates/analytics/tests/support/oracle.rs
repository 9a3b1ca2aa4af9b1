//! Reference implementations used only by tests: plain enumeration over all
//! sign assignments, with ranks computed by counting.

use std::path::PathBuf;

use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct Case {
    pub case: String,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn corpus() -> Vec<Case> {
    let text = std::fs::read_to_string(fixtures_dir().join("wilcoxon_corpus.jsonl")).expect("corpus fixture");
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).expect("corpus line")).collect()
}

/// `(w_plus, p_two_sided)`, or `None` when every difference is zero.
pub fn brute_force(pre: &[f64], post: &[f64]) -> Option<(f64, f64)> {
    let d: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return None;
    }
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let less = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed {
            le += 1;
        }
        if w >= observed {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    let p = (2.0 * (le.min(ge) as f64) / total).min(1.0);
    Some((observed, p))
}
