//! The virtual-time event loop.
//!
//! Client to server links are reliable and FIFO (the op log append is the
//! durability point, so a lost upstream frame would just be a lost edit).
//! Server to client links carry two kinds of frames: direct replies are
//! reliable and never overtake earlier frames; fan-out frames may be dropped,
//! duplicated or overtaken by up to `reorder_window` successors. Gaps are
//! closed by reconnecting with `have_seq` once traffic quiesces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use notebridge_analytics::quantile;
use notebridge_core::{
    parse_emoji_code, BlockEdit, BlockId, ChitChatEvent, CursorPos, Frame, NoteDocument, OpBatch, ReplicaId,
    StateHash, UsageEvent,
};
use notebridge_server::{
    load_document_state, Delivery, Durability, Effects, Role, ServerFault, SessionId, Store, SyncConfig, SyncServer,
    UsageFilter,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::ClientAction;
use crate::client::{Link as ClientLink, SimClient};
use crate::fuzz::random_edit;
use crate::net::{Link, NetConfig};

/// Upper bound on reconnect rounds after traffic quiesces.
const MAX_RESYNC_ROUNDS: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Net(#[from] crate::net::InvalidNet),
    #[error("store: {0}")]
    Store(#[from] notebridge_server::StoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub name: String,
    #[serde(default)]
    pub user: Option<String>,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub min_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub converged: bool,
    pub final_hashes: BTreeMap<String, String>,
    pub authority_hash: String,
    pub ops_total: u64,
    pub latency_stats: LatencyStats,
    pub buffered_max: usize,
}

impl std::fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "converged:  {}", self.converged)?;
        writeln!(f, "ops total:  {}", self.ops_total)?;
        writeln!(f, "authority:  {}", self.authority_hash)?;
        for (name, hash) in &self.final_hashes {
            let mark = if *hash == self.authority_hash { "ok" } else { "DIVERGED" };
            writeln!(f, "  {name:<10} {hash} {mark}")?;
        }
        let l = &self.latency_stats;
        writeln!(f, "latency ms: min {:.0}  median {:.1}  p95 {:.1}", l.min_ms, l.median_ms, l.p95_ms)?;
        write!(f, "buffered max: {}", self.buffered_max)
    }
}

enum Event {
    ToServer { client: usize, epoch: u64, frame: Frame },
    ToClient { client: usize, epoch: u64, frame: Frame },
    Act { client: usize, action: ClientAction },
    PartitionStart(usize),
    PartitionEnd(usize),
    Restart,
}

pub struct Simulation {
    net: NetConfig,
    net_rng: ChaCha8Rng,
    edit_rng: ChaCha8Rng,
    _tmp: Option<tempfile::TempDir>,
    data_dir: PathBuf,
    store: Arc<Store>,
    server: Option<SyncServer>,
    sync_config: SyncConfig,
    doc_id: String,
    clients: Vec<SimClient>,
    up_links: Vec<Link>,
    down_links: Vec<Link>,
    sessions: BTreeMap<SessionId, (usize, u64)>,
    queue: BTreeMap<(u64, u64), Event>,
    next_event: u64,
    now: u64,
    crash: Option<(u64, u64)>,
    crashes: u64,
    issued_at: BTreeMap<(ReplicaId, u64), u64>,
    last_applied: BTreeMap<(ReplicaId, u64), u64>,
    error: Option<SimError>,
}

fn hex(h: StateHash) -> String {
    h.to_string()
}

impl Simulation {
    /// Sets up users, one class and one document, created by the first
    /// participant. Uses a temporary data directory unless one is given.
    pub fn new(
        net: NetConfig,
        title: &str,
        participants: &[Participant],
        data_dir: Option<&Path>,
    ) -> Result<Self, SimError> {
        net.validate()?;
        if participants.is_empty() {
            return Err(SimError::InvalidScenario("no sessions declared".into()));
        }
        let (tmp, dir) = match data_dir {
            Some(d) => (None, d.to_path_buf()),
            None => {
                let t = tempfile::TempDir::new()?;
                let p = t.path().to_path_buf();
                (Some(t), p)
            }
        };
        let store = Arc::new(Store::open(&dir, Durability::Flush)?);
        let class = store.create_class("Simulated class")?;
        let mut accounts = Vec::new();
        for p in participants {
            let display = p.user.clone().unwrap_or_else(|| p.name.clone());
            let (account, token) = store.create_user(&display, p.role)?;
            store.enroll(&class.class_id, &account.user_id)?;
            accounts.push((account, token));
        }
        let doc = store.create_document(&class.class_id, title, &accounts[0].0.user_id, 0)?;
        let clients = participants
            .iter()
            .zip(accounts)
            .map(|(p, (account, token))| SimClient::new(&p.name, &account.user_id, token, &doc.doc_id))
            .collect::<Vec<_>>();
        let n = clients.len();
        let sync_config = SyncConfig::default();
        let mut sim = Simulation {
            net_rng: ChaCha8Rng::seed_from_u64(net.seed),
            edit_rng: ChaCha8Rng::seed_from_u64(net.seed ^ 0x5eed_ed17),
            net,
            _tmp: tmp,
            data_dir: dir,
            server: Some(SyncServer::new(store.clone(), sync_config.clone())),
            store,
            sync_config,
            doc_id: doc.doc_id,
            clients,
            up_links: (0..n).map(|_| Link::default()).collect(),
            down_links: (0..n).map(|_| Link::default()).collect(),
            sessions: BTreeMap::new(),
            queue: BTreeMap::new(),
            next_event: 0,
            now: 0,
            crash: None,
            crashes: 0,
            issued_at: BTreeMap::new(),
            last_applied: BTreeMap::new(),
            error: None,
        };
        for (i, p) in sim.net.partitions.clone().iter().enumerate() {
            for name in &p.side_a {
                if sim.client_index(name).is_none() {
                    return Err(SimError::InvalidScenario(format!("partition names unknown session {name:?}")));
                }
            }
            sim.push(p.start_ms, Event::PartitionStart(i));
            sim.push(p.end_ms, Event::PartitionEnd(i));
        }
        Ok(sim)
    }

    pub fn client_index(&self, name: &str) -> Option<usize> {
        self.clients.iter().position(|c| c.name == name)
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn crashes(&self) -> u64 {
        self.crashes
    }

    /// Kills the server right after its `n`-th op append; it restarts from
    /// disk `restart_delay_ms` later and every client reconnects.
    pub fn crash_after_appends(&mut self, n: u64, restart_delay_ms: u64) {
        self.crash = Some((n, restart_delay_ms));
        if let Some(server) = &self.server {
            server.crash_after_appends(n);
        }
    }

    pub fn schedule(&mut self, at: u64, client: usize, action: ClientAction) {
        self.push(at, Event::Act { client, action });
    }

    fn push(&mut self, at: u64, event: Event) {
        self.next_event += 1;
        self.queue.insert((at, self.next_event), event);
    }

    /// Runs until no events remain and every client has caught up.
    pub fn run(&mut self) -> Result<ScenarioReport, SimError> {
        for _ in 0..MAX_RESYNC_ROUNDS {
            self.drain()?;
            if !self.resync() {
                break;
            }
        }
        self.drain()?;
        Ok(self.report())
    }

    /// Processes every queued event up to and including `until`.
    pub fn run_until(&mut self, until: u64) -> Result<(), SimError> {
        self.process_through(until)?;
        self.now = self.now.max(until);
        Ok(())
    }

    fn drain(&mut self) -> Result<(), SimError> {
        self.process_through(u64::MAX)
    }

    /// Handles queued events due at or before `until` without moving the
    /// clock past the last one.
    fn process_through(&mut self, until: u64) -> Result<(), SimError> {
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > until {
                break;
            }
            let ((at, _), event) = entry.remove_entry();
            self.now = at;
            self.handle(event);
            if let Some(e) = self.error.take() {
                return Err(e);
            }
        }
        Ok(())
    }

    /// Reconnects every client that is behind. Returns whether any was.
    fn resync(&mut self) -> bool {
        let server_seq = self.store.op_count(&self.doc_id).unwrap_or(0);
        let mut any = false;
        for i in 0..self.clients.len() {
            let c = &self.clients[i];
            if c.partitioned {
                continue;
            }
            if !c.is_up() || c.have_seq < server_seq || !c.unacked.is_empty() {
                any = true;
                self.disconnect(i);
                self.connect(i);
            }
        }
        any
    }

    fn handle(&mut self, event: Event) {
        match event {
            Event::ToServer { client, epoch, frame } => self.server_receive(client, epoch, frame),
            Event::ToClient { client, epoch, frame } => {
                let c = &mut self.clients[client];
                if c.current_epoch() != Some(epoch) {
                    return;
                }
                let applied = c.receive(frame);
                let now = self.now;
                for id in applied {
                    let t = self.last_applied.entry(id).or_insert(now);
                    *t = (*t).max(now);
                }
            }
            Event::Act { client, action } => {
                if let Err(msg) = self.act(client, action) {
                    self.error = Some(SimError::InvalidScenario(format!(
                        "t={} session {}: {msg}",
                        self.now, self.clients[client].name
                    )));
                }
            }
            Event::PartitionStart(i) => {
                for name in self.net.partitions[i].side_a.clone() {
                    let c = self.client_index(&name).expect("validated");
                    self.clients[c].partitioned = true;
                    self.disconnect(c);
                }
            }
            Event::PartitionEnd(i) => {
                for name in self.net.partitions[i].side_a.clone() {
                    let c = self.client_index(&name).expect("validated");
                    self.clients[c].partitioned = false;
                    self.connect(c);
                }
            }
            Event::Restart => {
                let store = match Store::open(&self.data_dir, Durability::Flush) {
                    Ok(s) => Arc::new(s),
                    Err(e) => {
                        self.error = Some(e.into());
                        return;
                    }
                };
                self.store = store.clone();
                self.server = Some(SyncServer::new(store, self.sync_config.clone()));
                for i in 0..self.clients.len() {
                    if !self.clients[i].partitioned {
                        self.connect(i);
                    }
                }
            }
        }
    }

    fn send_up(&mut self, client: usize, frame: Frame) {
        let Some(epoch) = self.clients[client].current_epoch() else {
            return;
        };
        let lat = self.net.latency(&mut self.net_rng);
        let at = self.up_links[client].schedule(self.now + lat, 0);
        self.push(at, Event::ToServer { client, epoch, frame });
    }

    fn connect(&mut self, client: usize) {
        if self.server.is_none() || self.clients[client].partitioned {
            return;
        }
        let c = &mut self.clients[client];
        c.epoch += 1;
        c.link = ClientLink::Joining { epoch: c.epoch };
        let hello = c.hello();
        let resend = c.unacked.clone();
        self.send_up(client, hello);
        if !resend.is_empty() {
            self.send_up(client, Frame::Ops { ops: resend, seq: None });
        }
    }

    fn disconnect(&mut self, client: usize) {
        if let Some(session) = self.clients[client].session() {
            self.sessions.remove(&session);
            if let Some(server) = &self.server {
                let fx = server.disconnect(session);
                self.dispatch(fx);
            }
        }
        self.clients[client].link = ClientLink::Down;
    }

    fn server_receive(&mut self, client: usize, epoch: u64, frame: Frame) {
        if self.clients[client].current_epoch() != Some(epoch) {
            return;
        }
        let Some(server) = &self.server else {
            return;
        };
        let result = match frame {
            hello @ Frame::Hello { .. } => match server.open_session(&hello, self.now) {
                Ok(Ok((session, fx))) => {
                    self.clients[client].link = ClientLink::Up { epoch, session };
                    self.sessions.insert(session, (client, epoch));
                    Ok(fx)
                }
                Ok(Err(refusal)) => {
                    self.error = Some(SimError::InvalidScenario(format!(
                        "server refused {}: {refusal:?}",
                        self.clients[client].name
                    )));
                    self.clients[client].link = ClientLink::Down;
                    return;
                }
                Err(fault) => Err(fault),
            },
            other => match self.clients[client].session() {
                Some(session) => server.handle_frame(session, other, self.now),
                None => return,
            },
        };
        match result {
            Ok(fx) => self.dispatch(fx),
            Err(ServerFault::InjectedCrash(_)) | Err(ServerFault::Down) => self.crash_server(),
            Err(ServerFault::Storage(e)) => self.error = Some(e.into()),
        }
    }

    fn crash_server(&mut self) {
        self.server = None;
        self.crashes += 1;
        self.sessions.clear();
        for c in &mut self.clients {
            c.link = ClientLink::Down;
        }
        let delay = self.crash.map_or(1_000, |(_, d)| d);
        self.crash = None;
        self.push(self.now + delay, Event::Restart);
    }

    fn dispatch(&mut self, fx: Effects) {
        for out in fx.outbound {
            let Some(&(client, epoch)) = self.sessions.get(&out.to) else {
                continue;
            };
            if let (Frame::Ops { ops, .. }, Delivery::Fanout) = (&out.frame, out.delivery) {
                for op in ops {
                    let t = self.last_applied.entry(op.id()).or_insert(self.now);
                    *t = (*t).max(self.now);
                }
            }
            match out.delivery {
                Delivery::Reply => {
                    let lat = self.net.latency(&mut self.net_rng);
                    let at = self.down_links[client].schedule(self.now + lat, 0);
                    self.push(at, Event::ToClient { client, epoch, frame: out.frame });
                }
                Delivery::Fanout => {
                    if self.net_rng.gen_bool(self.net.drop_prob) {
                        continue;
                    }
                    let copies = if self.net_rng.gen_bool(self.net.duplicate_prob) { 2 } else { 1 };
                    for _ in 0..copies {
                        let lat = self.net.latency(&mut self.net_rng);
                        let at = self.down_links[client].schedule(self.now + lat, self.net.reorder_window);
                        self.push(at, Event::ToClient { client, epoch, frame: out.frame.clone() });
                    }
                }
            }
        }
        for session in fx.closed {
            if let Some((client, epoch)) = self.sessions.remove(&session) {
                if self.clients[client].current_epoch() == Some(epoch) {
                    self.clients[client].link = ClientLink::Down;
                }
            }
        }
    }

    fn block_at(&self, client: usize, index: usize) -> Result<BlockId, String> {
        let blocks = self.clients[client].state.block_ids();
        blocks.get(index).copied().ok_or_else(|| format!("no block at index {index} ({} blocks)", blocks.len()))
    }

    fn act(&mut self, client: usize, action: ClientAction) -> Result<(), String> {
        let now = self.now;
        let ops: OpBatch = match action {
            ClientAction::Disconnect => {
                self.disconnect(client);
                return Ok(());
            }
            ClientAction::Reconnect => {
                if self.clients[client].current_epoch().is_none() {
                    self.connect(client);
                }
                return Ok(());
            }
            ClientAction::Cursor { block, offset } => {
                let block = self.block_at(client, block)?;
                if self.clients[client].is_up() {
                    self.send_up(client, Frame::Presence { cursor: Some(CursorPos { block, offset }) });
                }
                return Ok(());
            }
            ClientAction::Chitchat { emoji } => {
                if self.clients[client].is_up() {
                    self.send_up(client, Frame::Chitchat { emoji });
                }
                return Ok(());
            }
            ClientAction::RawOps(ops) => {
                let c = &mut self.clients[client];
                for op in &ops {
                    c.state.integrate(op.clone());
                }
                ops
            }
            ClientAction::RandomEdit => {
                let user = self.clients[client].user_id.clone();
                let state = &mut self.clients[client].state;
                match random_edit(state, &mut self.edit_rng, &user, now) {
                    crate::fuzz::Edit::Ops(ops) => ops,
                    crate::fuzz::Edit::Chitchat(emoji) => {
                        if self.clients[client].is_up() {
                            self.send_up(client, Frame::Chitchat { emoji: emoji.code().to_owned() });
                        }
                        return Ok(());
                    }
                }
            }
            other => self.scripted_edit(client, other, now)?,
        };
        if ops.is_empty() {
            return Ok(());
        }
        let c = &mut self.clients[client];
        c.local(&ops);
        for id in c.note_local_applied() {
            self.issued_at.entry(id).or_insert(now);
        }
        if c.current_epoch().is_some() {
            self.send_up(client, Frame::Ops { ops, seq: None });
        }
        Ok(())
    }

    fn scripted_edit(&mut self, client: usize, action: ClientAction, now: u64) -> Result<OpBatch, String> {
        let user = self.clients[client].user_id.clone();
        let result = match action {
            ClientAction::InsertBlock { index, kind } => {
                self.clients[client].state.local_insert_block_at(index, kind).map(|(_, ops)| ops)
            }
            ClientAction::Type { block, pos, text } => {
                let b = self.block_at(client, block)?;
                let state = &mut self.clients[client].state;
                let pos = pos.unwrap_or_else(|| state.block_len(b).unwrap_or(0));
                state.local_insert_text(b, pos, &text)
            }
            ClientAction::Delete { block, from, len } => {
                let b = self.block_at(client, block)?;
                self.clients[client].state.local_delete_range(b, from, len)
            }
            ClientAction::DeleteBlock { block } => {
                let b = self.block_at(client, block)?;
                self.clients[client].state.local_block_edit(BlockEdit::Delete { block: b })
            }
            ClientAction::SetKind { block, kind } => {
                let b = self.block_at(client, block)?;
                self.clients[client].state.local_block_edit(BlockEdit::SetKind { block: b, kind })
            }
            ClientAction::Mark { block, from, len, mark, enabled } => {
                let b = self.block_at(client, block)?;
                self.clients[client].state.local_set_mark(b, from, len, mark, enabled)
            }
            ClientAction::Title { text } => self.clients[client].state.local_block_edit(BlockEdit::SetTitle { text }),
            ClientAction::Annotate { block, emoji } => {
                let b = self.block_at(client, block)?;
                let emoji = parse_emoji_code(&emoji).map_err(|e| e.to_string())?;
                self.clients[client].state.local_annotate(b, emoji, &user, now)
            }
            ClientAction::Resolve { block } => {
                let b = self.block_at(client, block)?;
                let doc = self.clients[client].document();
                let ann = doc
                    .annotations_on(b)
                    .filter(|a| !a.resolved)
                    .min_by_key(|a| (a.created_at, a.ann_id))
                    .map(|a| a.ann_id)
                    .ok_or_else(|| format!("no unresolved annotation on block {block}"))?;
                self.clients[client].state.local_resolve(ann)
            }
            other => return Err(format!("unsupported action {other:?}")),
        };
        result.map_err(|e| e.to_string())
    }

    fn authority(&self) -> (StateHash, NoteDocument) {
        if let Some(server) = &self.server {
            if let (Some((hash, _)), Some(doc)) =
                (server.authority(&self.doc_id), server.authority_document(&self.doc_id))
            {
                return (hash, doc);
            }
        }
        let (state, _) = load_document_state(&self.store, &self.doc_id).expect("document loads");
        (state.state_hash(), state.document())
    }

    pub fn report(&self) -> ScenarioReport {
        let (authority, _) = self.authority();
        let final_hashes: BTreeMap<String, String> =
            self.clients.iter().map(|c| (c.name.clone(), hex(c.state.state_hash()))).collect();
        let authority_hash = hex(authority);
        let converged = final_hashes.values().all(|h| *h == authority_hash);
        let mut latencies: Vec<f64> = self
            .issued_at
            .iter()
            .filter_map(|(id, t0)| self.last_applied.get(id).map(|t| t.saturating_sub(*t0) as f64))
            .collect();
        latencies.sort_by(f64::total_cmp);
        let latency_stats = if latencies.is_empty() {
            LatencyStats::default()
        } else {
            LatencyStats {
                min_ms: latencies[0],
                median_ms: quantile(&latencies, 0.5).unwrap_or(0.0),
                p95_ms: quantile(&latencies, 0.95).unwrap_or(0.0),
            }
        };
        ScenarioReport {
            converged,
            final_hashes,
            authority_hash,
            ops_total: self.store.op_count(&self.doc_id).unwrap_or(0),
            latency_stats,
            buffered_max: self.clients.iter().map(|c| c.buffered_max).max().unwrap_or(0),
        }
    }

    pub fn authority_document(&self) -> NoteDocument {
        self.authority().1
    }

    pub fn authority_hash(&self) -> StateHash {
        self.authority().0
    }

    pub fn client_document(&self, client: usize) -> NoteDocument {
        self.clients[client].document()
    }

    pub fn client_hash(&self, client: usize) -> StateHash {
        self.clients[client].state.state_hash()
    }

    pub fn client_names(&self) -> Vec<String> {
        self.clients.iter().map(|c| c.name.clone()).collect()
    }

    pub fn usage(&self) -> Vec<UsageEvent> {
        self.store.read_usage(&UsageFilter::default()).unwrap_or_default()
    }

    /// Chit-chat toasts a client shows at `now`.
    pub fn visible_toasts(&self, client: usize, now: u64) -> Vec<ChitChatEvent> {
        self.clients[client].visible_toasts(now).into_iter().cloned().collect()
    }

    /// Chit-chat events the server considers active at `now`.
    pub fn server_toasts(&self, now: u64) -> Vec<ChitChatEvent> {
        self.server.as_ref().map_or_else(Vec::new, |s| s.active_chitchat(&self.doc_id, now))
    }

    pub fn edit_rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.edit_rng
    }
}
