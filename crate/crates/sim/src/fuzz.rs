//! Random editing sessions.

use std::collections::BTreeSet;

use notebridge_core::{emoji_catalog, BlockEdit, BlockKind, EmojiCode, Mark, OpBatch, ReplicaState};
use notebridge_server::Role;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::action::ClientAction;
use crate::engine::{Participant, ScenarioReport, SimError, Simulation};
use crate::net::NetConfig;

pub enum Edit {
    Ops(OpBatch),
    Chitchat(EmojiCode),
}

const KINDS: [BlockKind; 5] =
    [BlockKind::Paragraph, BlockKind::Heading1, BlockKind::Heading2, BlockKind::BulletItem, BlockKind::NumberedItem];

/// One random user action on `state`, weighted toward typing. Always
/// well-formed for the current local view.
pub fn random_edit(state: &mut ReplicaState, rng: &mut ChaCha8Rng, user: &str, now: u64) -> Edit {
    let blocks = state.block_ids();
    if blocks.is_empty() || rng.gen_bool(0.06) {
        let at = rng.gen_range(0..=blocks.len());
        let kind = *KINDS.choose(rng).expect("non-empty");
        return Edit::Ops(state.local_insert_block_at(at, kind).expect("index in range").1);
    }
    let block = *blocks.choose(rng).expect("non-empty");
    let len = state.block_len(block).expect("live block");
    let roll = rng.gen_range(0..100);
    let ops = match roll {
        0..=44 => {
            let pos = rng.gen_range(0..=len);
            let text: String = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
            state.local_insert_text(block, pos, &text)
        }
        45..=59 if len > 0 => {
            let from = rng.gen_range(0..len);
            let n = rng.gen_range(1..=(len - from).min(4));
            state.local_delete_range(block, from, n)
        }
        60..=64 => state.local_block_edit(BlockEdit::SetKind { block, kind: *KINDS.choose(rng).expect("non-empty") }),
        65..=70 if len > 0 => {
            let from = rng.gen_range(0..len);
            let n = rng.gen_range(1..=len - from);
            let mark = *Mark::ALL.choose(rng).expect("non-empty");
            state.local_set_mark(block, from, n, mark, rng.gen_bool(0.7))
        }
        71..=72 => state.local_block_edit(BlockEdit::SetTitle { text: format!("Lecture {}", rng.gen_range(1..100)) }),
        73..=74 if blocks.len() > 2 => state.local_block_edit(BlockEdit::Delete { block }),
        75..=84 => {
            let nt: Vec<EmojiCode> = emoji_catalog().iter().copied().filter(EmojiCode::is_note_taking).collect();
            state.local_annotate(block, *nt.choose(rng).expect("non-empty"), user, now)
        }
        85..=93 => {
            let open: Vec<_> = state.annotation_ids().filter(|a| state.is_resolved(*a) == Some(false)).collect();
            match open.choose(rng) {
                Some(ann) => state.local_resolve(*ann),
                None => Ok(Vec::new()),
            }
        }
        94..=99 => {
            let cc: Vec<EmojiCode> = emoji_catalog().iter().copied().filter(EmojiCode::is_chit_chat).collect();
            return Edit::Chitchat(*cc.choose(rng).expect("non-empty"));
        }
        _ => Ok(Vec::new()),
    };
    Edit::Ops(ops.expect("random edits are generated within the local view"))
}

/// `n_clients` users each perform `ops_per_client` random actions, 5-40 ms
/// apart, starting once everyone has joined.
pub fn run_fuzz(n_clients: usize, ops_per_client: usize, net: NetConfig) -> Result<ScenarioReport, SimError> {
    if n_clients == 0 {
        return Err(SimError::InvalidScenario("at least one client is required".into()));
    }
    let participants: Vec<Participant> = (1..=n_clients)
        .map(|i| Participant {
            name: format!("c{i}"),
            user: None,
            role: if i % 2 == 1 { Role::Pnt } else { Role::Swd },
        })
        .collect();
    let mut sim = Simulation::new(net, "Fuzz lecture", &participants, None)?;
    for c in 0..n_clients {
        sim.schedule(c as u64, c, ClientAction::Reconnect);
    }
    let mut plan = BTreeSet::new();
    for c in 0..n_clients {
        let mut t = 200u64;
        for _ in 0..ops_per_client {
            t += sim.edit_rng().gen_range(5..=40);
            plan.insert((t, c));
        }
    }
    for (t, c) in plan {
        sim.schedule(t, c, ClientAction::RandomEdit);
    }
    sim.run()
}
