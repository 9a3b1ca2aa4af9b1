use notebridge_analytics::{iqr, median, summarize_usage, PairMap};
use notebridge_core::{emoji_catalog, EmojiCategory, UsageEvent, UsageKind};
use proptest::prelude::*;

/// Quartile at 1-based position p(n-1)+1, written out from the definition.
fn quartile_by_position(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() as f64 - 1.0) + 1.0;
    let k = pos.floor();
    let below = v[k as usize - 1];
    let above = if (k as usize) < v.len() { v[k as usize] } else { below };
    below + (pos - k) * (above - below)
}

proptest! {
    #[test]
    fn median_iqr_ignore_order(mut values in prop::collection::vec(-50i32..50, 1..40), seed in any::<u64>()) {
        let v: Vec<f64> = values.iter().map(|x| f64::from(*x)).collect();
        let (m, q) = (median(&v).unwrap(), iqr(&v).unwrap());
        let k = (seed % values.len() as u64) as usize;
        values.rotate_left(k);
        values.reverse();
        let w: Vec<f64> = values.iter().map(|x| f64::from(*x)).collect();
        prop_assert_eq!(median(&w).unwrap(), m);
        prop_assert_eq!(iqr(&w).unwrap(), q);
    }

    #[test]
    fn iqr_matches_position_rule(values in prop::collection::vec(1i32..8, 1..30)) {
        let v: Vec<f64> = values.iter().map(|x| f64::from(*x)).collect();
        let want = quartile_by_position(&v, 0.75) - quartile_by_position(&v, 0.25);
        prop_assert!((iqr(&v).unwrap() - want).abs() < 1e-12);
        prop_assert!((median(&v).unwrap() - quartile_by_position(&v, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn totals_are_nt_plus_cc(kinds in prop::collection::vec((0u8..4, 0usize..4, 0usize..18), 0..200)) {
        let mut pairs = PairMap::new();
        for u in 0..4 {
            pairs.insert(&format!("u{u}"), None, &format!("G{}", u / 2 + 1)).unwrap();
        }
        let catalog = emoji_catalog();
        let events: Vec<UsageEvent> = kinds
            .into_iter()
            .map(|(k, u, e)| {
                let kind = [UsageKind::NoteCreated, UsageKind::NtEmojiInserted, UsageKind::NtEmojiResolved, UsageKind::CcEmojiSent][k as usize];
                let want = if kind == UsageKind::CcEmojiSent { EmojiCategory::ChitChat } else { EmojiCategory::NoteTaking };
                let emoji = catalog.iter().cycle().skip(e).find(|c| c.category() == want).copied();
                UsageEvent {
                    ts: 0,
                    class_id: "c".into(),
                    doc_id: "d".into(),
                    user_id: format!("u{u}"),
                    kind,
                    emoji_code: (kind != UsageKind::NoteCreated).then(|| emoji.unwrap()),
                }
            })
            .collect();
        for row in summarize_usage(&events, &pairs).unwrap() {
            prop_assert_eq!(row.emojis_total, row.nt_used + row.cc_used);
        }
    }
}
