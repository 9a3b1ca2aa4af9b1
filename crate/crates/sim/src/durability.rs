//! A crash-recovery workload whose ops do not depend on delivery timing.
//!
//! Each of three writers owns one block and edits only it. Their ops are
//! prepared up front on isolated replicas, so every run (with or without a
//! crash) sends byte-identical ops and must end in the same document.

use notebridge_core::{parse_emoji_code, BlockKind, Mark, Op, ReplicaId, ReplicaState, StateHash};
use notebridge_server::Role;

use crate::action::ClientAction;
use crate::engine::{Participant, SimError, Simulation};
use crate::net::NetConfig;

pub const WRITERS: usize = 3;
pub const DURABILITY_OPS: usize = 300;

/// Ops per writer, grouped into the frames they are sent in.
pub fn durability_script(doc_id: &str) -> Vec<Vec<Vec<Op>>> {
    let per_writer = DURABILITY_OPS / WRITERS;
    (0..WRITERS)
        .map(|w| {
            let mut state = ReplicaState::new(doc_id, "", ReplicaId(w as u64 + 1));
            let mut frames: Vec<Vec<Op>> = Vec::new();
            let mut count = 0usize;
            let (block, ops) = state.local_insert_block_at(0, BlockKind::Paragraph).expect("empty doc");
            count += ops.len();
            frames.push(ops);
            let mut step = 0usize;
            while count < per_writer {
                let len = state.block_len(block).expect("own block");
                let remaining = per_writer - count;
                let ops = match step % 10 {
                    3 if len > 2 => state.local_delete_range(block, 1, 1).expect("in range"),
                    5 if len > 0 => state.local_set_mark(block, 0, len, Mark::Bold, true).expect("in range"),
                    7 => state
                        .local_annotate(block, parse_emoji_code("nt.important").expect("catalog"), "w", 0)
                        .expect("live block"),
                    8 => {
                        let open = state.annotation_ids().find(|a| state.is_resolved(*a) == Some(false));
                        match open {
                            Some(ann) => state.local_resolve(ann).expect("known"),
                            None => Vec::new(),
                        }
                    }
                    _ => {
                        let n = remaining.min(1 + step % 3);
                        let text: String = (0..n).map(|i| (b'a' + ((step + i + w) % 26) as u8) as char).collect();
                        state.local_insert_text(block, len, &text).expect("in range")
                    }
                };
                step += 1;
                if ops.is_empty() || ops.len() > remaining {
                    continue;
                }
                count += ops.len();
                frames.push(ops);
            }
            frames
        })
        .collect()
}

/// Result of one durability run.
pub struct DurabilityRun {
    pub authority: StateHash,
    pub client_hashes: Vec<StateHash>,
    pub ops_total: u64,
    pub crashes: u64,
}

/// Runs the workload, optionally killing the server after its `crash_after`-th
/// op append.
pub fn run_durability(crash_after: Option<u64>, seed: u64) -> Result<DurabilityRun, SimError> {
    let participants: Vec<Participant> = (1..=WRITERS)
        .map(|i| Participant { name: format!("w{i}"), user: None, role: Role::Pnt })
        .collect();
    let net = NetConfig { seed, latency_ms: (2, 20), ..NetConfig::default() };
    let mut sim = Simulation::new(net, "Durability", &participants, None)?;
    // stagger joins so replica ids follow writer order
    for w in 0..WRITERS {
        sim.schedule(100 * w as u64, w, ClientAction::Reconnect);
    }
    let script = durability_script(sim.doc_id());
    for (w, frames) in script.into_iter().enumerate() {
        let mut t = 500 + w as u64 * 3;
        for ops in frames {
            sim.schedule(t, w, ClientAction::RawOps(ops));
            t += 9;
        }
    }
    if let Some(k) = crash_after {
        sim.crash_after_appends(k, 250);
    }
    let report = sim.run()?;
    Ok(DurabilityRun {
        authority: sim.authority_hash(),
        client_hashes: (0..WRITERS).map(|w| sim.client_hash(w)).collect(),
        ops_total: report.ops_total,
        crashes: sim.crashes(),
    })
}
