//! Per-pair usage counts.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use notebridge_core::{UsageEvent, UsageKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairUsageSummary {
    pub pair_id: String,
    pub notes_written: u64,
    pub emojis_total: u64,
    pub nt_used: u64,
    pub cc_used: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PairMapError {
    #[error("user {user} is mapped to both {first} and {second} in class {class:?}")]
    Conflict { user: String, class: Option<String>, first: String, second: String },
    #[error("event by {user} in class {class} belongs to no pair")]
    UnmappedUser { user: String, class: String },
}

/// Maps users to pairs. A user who belongs to several pairs (one student
/// paired with different note-takers in different classes) is mapped per
/// class; a mapping without a class applies to every class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairMap {
    by_class: HashMap<(String, String), String>,
    any_class: HashMap<String, String>,
}

impl PairMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, user: &str, class: Option<&str>, pair: &str) -> Result<(), PairMapError> {
        let existing = match class {
            Some(c) => self.by_class.insert((user.to_owned(), c.to_owned()), pair.to_owned()),
            None => self.any_class.insert(user.to_owned(), pair.to_owned()),
        };
        match existing {
            Some(first) if first != pair => Err(PairMapError::Conflict {
                user: user.to_owned(),
                class: class.map(str::to_owned),
                first,
                second: pair.to_owned(),
            }),
            _ => Ok(()),
        }
    }

    pub fn pair_of(&self, user: &str, class: &str) -> Option<&str> {
        self.by_class
            .get(&(user.to_owned(), class.to_owned()))
            .or_else(|| self.any_class.get(user))
            .map(String::as_str)
    }
}

/// Orders ids like `G2` before `G10`.
fn natural_cmp(a: &str, b: &str) -> Ordering {
    let split = |s: &str| {
        let digits = s.len() - s.bytes().rev().take_while(u8::is_ascii_digit).count();
        let (head, tail) = s.split_at(digits);
        (head.to_owned(), tail.parse::<u64>().ok())
    };
    split(a).cmp(&split(b)).then_with(|| a.cmp(b))
}

/// Counts notes and emoji use per pair. Resolutions are not counted.
pub fn summarize_usage(events: &[UsageEvent], pairs: &PairMap) -> Result<Vec<PairUsageSummary>, PairMapError> {
    let mut rows: BTreeMap<String, PairUsageSummary> = BTreeMap::new();
    for e in events {
        let pair = pairs
            .pair_of(&e.user_id, &e.class_id)
            .ok_or_else(|| PairMapError::UnmappedUser { user: e.user_id.clone(), class: e.class_id.clone() })?;
        let row = rows.entry(pair.to_owned()).or_insert_with(|| PairUsageSummary {
            pair_id: pair.to_owned(),
            notes_written: 0,
            emojis_total: 0,
            nt_used: 0,
            cc_used: 0,
        });
        match e.kind {
            UsageKind::NoteCreated => row.notes_written += 1,
            UsageKind::NtEmojiInserted => row.nt_used += 1,
            UsageKind::CcEmojiSent => row.cc_used += 1,
            UsageKind::NtEmojiResolved => {}
        }
        row.emojis_total = row.nt_used + row.cc_used;
    }
    let mut out: Vec<_> = rows.into_values().collect();
    out.sort_by(|a, b| natural_cmp(&a.pair_id, &b.pair_id));
    Ok(out)
}
