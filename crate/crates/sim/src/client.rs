//! A simulated editor client: local replica, outbox and catch-up tracking.

use std::collections::{BTreeMap, BTreeSet};

use notebridge_core::{
    snapshot_decode, ChitChatEvent, Frame, NoteDocument, Op, ReplicaId, ReplicaState, CHITCHAT_TTL_MS,
};

use notebridge_server::SessionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Link {
    Down,
    /// Hello sent on connection `epoch`, no welcome yet.
    Joining { epoch: u64 },
    Up { epoch: u64, session: SessionId },
}

pub(crate) struct SimClient {
    pub name: String,
    pub user_id: String,
    pub token: String,
    pub state: ReplicaState,
    pub replica: Option<ReplicaId>,
    pub link: Link,
    pub epoch: u64,
    /// Cut off by a partition: stays down until the partition heals.
    pub partitioned: bool,
    /// Own ops the server has not echoed back yet, in issue order.
    pub unacked: Vec<Op>,
    /// Every op this client has integrated, for rebuilding after a snapshot.
    pub known: BTreeMap<(ReplicaId, u64), Op>,
    /// Highest server seq up to which every op has been received.
    pub have_seq: u64,
    received_beyond: BTreeSet<u64>,
    /// Per origin, the highest seq whose apply time has been recorded.
    recorded: BTreeMap<ReplicaId, u64>,
    pub toasts: Vec<ChitChatEvent>,
    pub buffered_max: usize,
}

impl SimClient {
    pub fn new(name: &str, user_id: &str, token: String, doc_id: &str) -> Self {
        SimClient {
            name: name.to_owned(),
            user_id: user_id.to_owned(),
            token,
            state: ReplicaState::new(doc_id, "", ReplicaId::AUTHORITY),
            replica: None,
            link: Link::Down,
            epoch: 0,
            partitioned: false,
            unacked: Vec::new(),
            known: BTreeMap::new(),
            have_seq: 0,
            received_beyond: BTreeSet::new(),
            recorded: BTreeMap::new(),
            toasts: Vec::new(),
            buffered_max: 0,
        }
    }

    pub fn hello(&self) -> Frame {
        Frame::Hello {
            token: self.token.clone(),
            doc: self.state.doc_id().to_owned(),
            have_seq: self.have_seq,
            replica: self.replica,
        }
    }

    pub fn current_epoch(&self) -> Option<u64> {
        match self.link {
            Link::Down => None,
            Link::Joining { epoch } | Link::Up { epoch, .. } => Some(epoch),
        }
    }

    pub fn is_up(&self) -> bool {
        matches!(self.link, Link::Up { .. })
    }

    pub fn session(&self) -> Option<SessionId> {
        match self.link {
            Link::Up { session, .. } => Some(session),
            _ => None,
        }
    }

    pub fn document(&self) -> NoteDocument {
        self.state.document()
    }

    /// Records ops produced by a local edit.
    pub fn local(&mut self, ops: &[Op]) {
        for op in ops {
            self.known.insert(op.id(), op.clone());
            self.unacked.push(op.clone());
        }
    }

    fn integrate(&mut self, op: &Op) {
        self.known.entry(op.id()).or_insert_with(|| op.clone());
        self.state.integrate(op.clone());
        self.buffered_max = self.buffered_max.max(self.state.pending_len());
    }

    fn mark_received(&mut self, from: u64, to: u64) {
        for s in from..=to {
            if s > self.have_seq {
                self.received_beyond.insert(s);
            }
        }
        while self.received_beyond.remove(&(self.have_seq + 1)) {
            self.have_seq += 1;
        }
    }

    /// Applies a frame from the server. Returns ops that became applied with
    /// their (origin, seq) so the caller can timestamp them.
    pub fn receive(&mut self, frame: Frame) -> Vec<(ReplicaId, u64)> {
        match frame {
            Frame::Welcome { snapshot, replica, .. } => {
                if let Some(bytes) = snapshot {
                    let mut fresh = snapshot_decode(&bytes).expect("server snapshots decode");
                    fresh.set_replica(replica);
                    let covered: u64 = fresh.version_vector().values().sum();
                    let acked = fresh.applied_seq(replica);
                    self.unacked.retain(|op| op.origin != replica || op.seq > acked);
                    self.state = fresh;
                    let known: Vec<Op> = self.known.values().cloned().collect();
                    for op in &known {
                        self.state.integrate(op.clone());
                    }
                    if covered > 0 {
                        self.mark_received(1, covered);
                    }
                } else {
                    self.state.set_replica(replica);
                }
                self.replica = Some(replica);
            }
            Frame::Ops { ops, seq } => {
                if let Some(last) = seq {
                    let first = last + 1 - ops.len() as u64;
                    self.mark_received(first, last);
                }
                let mine = self.replica;
                for op in &ops {
                    self.integrate(op);
                    if Some(op.origin) == mine {
                        let id = op.id();
                        self.unacked.retain(|u| u.id() != id);
                    }
                }
            }
            Frame::ChitchatFanout { emoji, sender, sent_at } => {
                self.toasts.push(ChitChatEvent {
                    event_id: self.toasts.len() as u64,
                    emoji,
                    sender,
                    sent_at,
                    ttl_ms: CHITCHAT_TTL_MS,
                });
            }
            _ => {}
        }
        self.newly_applied()
    }

    fn newly_applied(&mut self) -> Vec<(ReplicaId, u64)> {
        let mut out = Vec::new();
        for (origin, applied) in self.state.version_vector() {
            let seen = self.recorded.entry(*origin).or_insert(0);
            out.extend((*seen + 1..=*applied).map(|s| (*origin, s)));
            *seen = (*seen).max(*applied);
        }
        out
    }

    /// Local ops count as applied the moment they are issued.
    pub fn note_local_applied(&mut self) -> Vec<(ReplicaId, u64)> {
        self.newly_applied()
    }

    pub fn visible_toasts(&self, now: u64) -> Vec<&ChitChatEvent> {
        self.toasts.iter().filter(|t| t.is_visible(now)).collect()
    }
}
