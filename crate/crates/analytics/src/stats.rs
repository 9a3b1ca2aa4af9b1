//! Order statistics.

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("empty sample")]
pub struct EmptySample;

fn sorted(values: &[f64]) -> Result<Vec<f64>, EmptySample> {
    if values.is_empty() {
        return Err(EmptySample);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Quantile `p` by linear interpolation between order statistics at the
/// 1-based position `p(n-1)+1`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64, EmptySample> {
    let v = sorted(values)?;
    Ok(quantile_sorted(&v, p))
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> Result<f64, EmptySample> {
    let v = sorted(values)?;
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub fn iqr(values: &[f64]) -> Result<f64, EmptySample> {
    let v = sorted(values)?;
    Ok(quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25))
}
