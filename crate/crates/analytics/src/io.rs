//! Readers for usage logs, pair maps and paired questionnaire responses.

use std::io::{BufRead, Read};

use notebridge_core::UsageEvent;
use serde::Deserialize;

use crate::usage::{PairMap, PairMapError};
use crate::wilcoxon::PairedSample;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Pairs(#[from] PairMapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a `usage.jsonl` log. Blank lines are skipped; every other line must
/// be a valid event.
pub fn read_usage_log(reader: impl BufRead) -> Result<Vec<UsageEvent>, InputError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: UsageEvent =
            serde_json::from_str(&line).map_err(|e| InputError::Line { line: i + 1, msg: e.to_string() })?;
        event.validate().map_err(|e| InputError::Line { line: i + 1, msg: e.to_string() })?;
        events.push(event);
    }
    Ok(events)
}

#[derive(Deserialize)]
struct PairRow {
    pair: String,
    user: String,
    #[serde(default)]
    class: Option<String>,
}

/// Reads a pair map CSV with header `pair,user[,class]`.
pub fn read_pair_map(reader: impl Read) -> Result<PairMap, InputError> {
    let mut map = PairMap::new();
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for row in csv.deserialize() {
        let row: PairRow = row?;
        let class = row.class.as_deref().filter(|c| !c.is_empty());
        map.insert(&row.user, class, &row.pair)?;
    }
    Ok(map)
}

#[derive(Deserialize)]
struct ResponseRow {
    item: String,
    pre: f64,
    post: f64,
}

/// Reads paired responses (header `item,pre,post`, one row per respondent and
/// item), grouped by item in order of first appearance.
pub fn read_paired_csv(reader: impl Read) -> Result<Vec<(String, PairedSample)>, InputError> {
    let mut items: Vec<(String, PairedSample)> = Vec::new();
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for row in csv.deserialize() {
        let row: ResponseRow = row?;
        match items.iter_mut().find(|(item, _)| *item == row.item) {
            Some((_, sample)) => sample.push(row.pre, row.post),
            None => items.push((row.item, PairedSample::new(vec![row.pre], vec![row.post]))),
        }
    }
    Ok(items)
}
