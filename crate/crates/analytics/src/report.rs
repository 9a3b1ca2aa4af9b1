//! Analysis rows and their CSV / text renderings.

use serde::Serialize;

use crate::stats::{iqr, median};
use crate::usage::PairUsageSummary;
use crate::wilcoxon::{wilcoxon_signed_rank, Method, PairedSample, WilcoxonError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedItemReport {
    pub item: String,
    pub n: usize,
    pub pre_median: f64,
    pub pre_iqr: f64,
    pub post_median: f64,
    pub post_iqr: f64,
    pub n_effective: usize,
    /// `None` when every difference is zero.
    pub w_plus: Option<f64>,
    pub p_two_sided: Option<f64>,
    pub method: Option<Method>,
}

pub fn analyze_paired(items: &[(String, PairedSample)]) -> Result<Vec<PairedItemReport>, WilcoxonError> {
    let mut out = Vec::with_capacity(items.len());
    for (item, sample) in items {
        let test = match wilcoxon_signed_rank(sample) {
            Ok(r) => Some(r),
            Err(WilcoxonError::NoNonzeroDifferences) => None,
            Err(e) => return Err(e),
        };
        // samples come from non-empty CSV groups
        let stat = |v: &[f64], f: fn(&[f64]) -> Result<f64, _>| f(v).unwrap_or(f64::NAN);
        out.push(PairedItemReport {
            item: item.clone(),
            n: sample.len(),
            pre_median: stat(&sample.pre, median),
            pre_iqr: stat(&sample.pre, iqr),
            post_median: stat(&sample.post, median),
            post_iqr: stat(&sample.post, iqr),
            n_effective: test.as_ref().map_or(0, |t| t.n_effective),
            w_plus: test.as_ref().map(|t| t.w_plus),
            p_two_sided: test.as_ref().map(|t| t.p_two_sided),
            method: test.map(|t| t.method),
        });
    }
    Ok(out)
}

fn write_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("serializing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv is utf-8")
}

pub fn usage_csv(rows: &[PairUsageSummary]) -> String {
    if rows.is_empty() {
        return "pair_id,notes_written,emojis_total,nt_used,cc_used\n".into();
    }
    write_csv(rows)
}

pub fn paired_csv(rows: &[PairedItemReport]) -> String {
    if rows.is_empty() {
        return "item,n,pre_median,pre_iqr,post_median,post_iqr,n_effective,w_plus,p_two_sided,method\n".into();
    }
    write_csv(rows)
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_owned() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in &rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn usage_table(rows: &[PairUsageSummary]) -> String {
    table(
        &["pair", "notes", "emojis", "nt", "cc"],
        rows.iter()
            .map(|r| {
                vec![
                    r.pair_id.clone(),
                    r.notes_written.to_string(),
                    r.emojis_total.to_string(),
                    r.nt_used.to_string(),
                    r.cc_used.to_string(),
                ]
            })
            .collect(),
    )
}

pub fn paired_table(rows: &[PairedItemReport]) -> String {
    let opt = |v: Option<f64>, digits: usize| v.map_or("-".to_owned(), |v| format!("{v:.digits$}"));
    table(
        &["item", "n", "pre_med", "pre_iqr", "post_med", "post_iqr", "n_eff", "w_plus", "p", "method"],
        rows.iter()
            .map(|r| {
                vec![
                    r.item.clone(),
                    r.n.to_string(),
                    format!("{:.2}", r.pre_median),
                    format!("{:.2}", r.pre_iqr),
                    format!("{:.2}", r.post_median),
                    format!("{:.2}", r.post_iqr),
                    r.n_effective.to_string(),
                    opt(r.w_plus, 1),
                    opt(r.p_two_sided, 4),
                    r.method.map_or("-", |m| match m {
                        Method::Exact => "exact",
                        Method::NormalApprox => "normal",
                    })
                    .to_owned(),
                ]
            })
            .collect(),
    )
}
