//! Rooms, sessions and frame handling, independent of any transport.
//!
//! Every entry point returns [`Effects`]: the frames to deliver and the
//! sessions to close. The websocket layer and the simulator both drive this
//! same code; neither needs to know how rooms work.
//!
//! Ops from a session are appended to the document's op log *before* they are
//! integrated into the room's authority state or fanned out, so a frame is
//! only ever visible to clients once it is on disk. Fan-out follows log order,
//! and the sender receives its own ops back as acknowledgement.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use notebridge_core::{
    parse_emoji_code, snapshot_decode, snapshot_encode, CursorPos, ErrorCode, Frame, Op, OpKind, PresenceError,
    ReplicaId, ReplicaState, RoomPresence, UsageEvent, UsageKind,
};

use crate::storage::{Store, StoreError};

pub type SessionId = u64;

/// Tunables of the sync server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncConfig {
    /// Write a snapshot after every this many appended ops.
    pub snapshot_every: u64,
    /// Largest `server_seq - have_seq` gap answered with a plain op replay.
    pub replay_limit: u64,
    pub idle_timeout_ms: u64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig { snapshot_every: 100, replay_limit: 1_000, idle_timeout_ms: 45_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    /// Direct answer to the receiving session (welcome, replay, errors).
    Reply,
    /// Broadcast caused by another event in the room.
    Fanout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: SessionId,
    pub frame: Frame,
    pub delivery: Delivery,
}

#[derive(Debug, Default)]
pub struct Effects {
    pub outbound: Vec<Outbound>,
    /// Sessions the server has dropped; close their channels after sending.
    pub closed: Vec<SessionId>,
}

impl Effects {
    fn reply(&mut self, to: SessionId, frame: Frame) {
        self.outbound.push(Outbound { to, frame, delivery: Delivery::Reply });
    }

    fn fanout(&mut self, to: SessionId, frame: Frame) {
        self.outbound.push(Outbound { to, frame, delivery: Delivery::Fanout });
    }

    fn extend(&mut self, other: Effects) {
        self.outbound.extend(other.outbound);
        self.closed.extend(other.closed);
    }
}

/// Failures that take the server (or a room) down rather than one request.
#[derive(Debug, thiserror::Error)]
pub enum ServerFault {
    #[error("storage failure: {0}")]
    Storage(#[from] StoreError),
    #[error("injected crash after append #{0}")]
    InjectedCrash(u64),
    #[error("server is down after an earlier fault")]
    Down,
}

struct Session {
    user: String,
    replica: ReplicaId,
    last_seen: u64,
}

struct Room {
    doc_id: String,
    class_id: String,
    state: ReplicaState,
    presence: RoomPresence,
    sessions: BTreeMap<SessionId, Session>,
    server_seq: u64,
    replicas: BTreeMap<ReplicaId, String>,
}

impl Room {
    fn others(&self, except: SessionId) -> impl Iterator<Item = SessionId> + '_ {
        self.sessions.keys().copied().filter(move |s| *s != except)
    }

    fn participants(&self) -> Vec<String> {
        self.presence.participants().map(str::to_owned).collect()
    }

    fn presence_frame(&self) -> Frame {
        Frame::presence_fanout(self.presence.snapshot(), self.participants())
    }

    fn remove_session(&mut self, session: SessionId, fx: &mut Effects) {
        if let Some(s) = self.sessions.remove(&session) {
            self.presence.leave(&s.user);
            let frame = self.presence_frame();
            for other in self.sessions.keys() {
                fx.fanout(*other, frame.clone());
            }
        }
    }
}

/// Loads the authority state of a document: latest readable snapshot plus the
/// ops after it. Also used for audits and exports.
pub fn load_document_state(store: &Store, doc_id: &str) -> Result<(ReplicaState, u64), StoreError> {
    let meta = store.document(doc_id).ok_or_else(|| StoreError::NoSuchDocument(doc_id.to_owned()))?;
    let base = store
        .read_latest_snapshot(doc_id)?
        .and_then(|(seq, bytes)| snapshot_decode(&bytes).ok().map(|s| (s, seq)));
    let (mut state, from) = base.unwrap_or_else(|| (ReplicaState::new(doc_id, &meta.title, ReplicaId::AUTHORITY), 0));
    let ops = store.read_ops(doc_id, from)?;
    let server_seq = from + ops.len() as u64;
    for (_, op) in ops {
        state.integrate(op);
    }
    Ok((state, server_seq))
}

/// Replays a document's full op log from an empty state.
pub fn replay_from_empty(store: &Store, doc_id: &str) -> Result<ReplicaState, StoreError> {
    let meta = store.document(doc_id).ok_or_else(|| StoreError::NoSuchDocument(doc_id.to_owned()))?;
    let mut state = ReplicaState::new(doc_id, &meta.title, ReplicaId::AUTHORITY);
    for (_, op) in store.read_ops(doc_id, 0)? {
        state.integrate(op);
    }
    Ok(state)
}

pub struct SyncServer {
    store: Arc<Store>,
    config: SyncConfig,
    rooms: Mutex<BTreeMap<String, Arc<Mutex<Room>>>>,
    routes: Mutex<BTreeMap<SessionId, String>>,
    next_session: AtomicU64,
    appends: AtomicU64,
    crash_after: Mutex<Option<u64>>,
    down: AtomicBool,
}

impl SyncServer {
    pub fn new(store: Arc<Store>, config: SyncConfig) -> Self {
        SyncServer {
            store,
            config,
            rooms: Mutex::new(BTreeMap::new()),
            routes: Mutex::new(BTreeMap::new()),
            next_session: AtomicU64::new(1),
            appends: AtomicU64::new(0),
            crash_after: Mutex::new(None),
            down: AtomicBool::new(false),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn config(&self) -> &SyncConfig {
        &self.config
    }

    /// Fault injection: the server dies right after its `n`-th durable op
    /// append (counted from now), before integrating or fanning it out.
    pub fn crash_after_appends(&self, n: u64) {
        *self.crash_after.lock().expect("fault lock") = Some(self.appends.load(Ordering::SeqCst) + n);
    }

    pub fn is_down(&self) -> bool {
        self.down.load(Ordering::SeqCst)
    }

    fn check_up(&self) -> Result<(), ServerFault> {
        if self.is_down() {
            Err(ServerFault::Down)
        } else {
            Ok(())
        }
    }

    fn room(&self, doc_id: &str) -> Result<Arc<Mutex<Room>>, StoreError> {
        let mut rooms = self.rooms.lock().expect("room table");
        if let Some(room) = rooms.get(doc_id) {
            return Ok(room.clone());
        }
        let meta = self.store.document(doc_id).ok_or_else(|| StoreError::NoSuchDocument(doc_id.to_owned()))?;
        let (state, server_seq) = load_document_state(&self.store, doc_id)?;
        let room = Arc::new(Mutex::new(Room {
            doc_id: doc_id.to_owned(),
            class_id: meta.class_id,
            state,
            presence: RoomPresence::new(),
            sessions: BTreeMap::new(),
            server_seq,
            replicas: self.store.read_replicas(doc_id)?,
        }));
        rooms.insert(doc_id.to_owned(), room.clone());
        Ok(room)
    }

    fn room_of(&self, session: SessionId) -> Option<Arc<Mutex<Room>>> {
        let doc = self.routes.lock().expect("routes").get(&session).cloned()?;
        self.rooms.lock().expect("room table").get(&doc).cloned()
    }

    /// Authority state hash and log length of a loaded room.
    pub fn authority(&self, doc_id: &str) -> Option<(notebridge_core::StateHash, u64)> {
        let room = self.rooms.lock().expect("room table").get(doc_id).cloned()?;
        let room = room.lock().expect("room");
        Some((room.state.state_hash(), room.server_seq))
    }

    pub fn authority_document(&self, doc_id: &str) -> Option<notebridge_core::NoteDocument> {
        let room = self.rooms.lock().expect("room table").get(doc_id).cloned()?;
        let room = room.lock().expect("room");
        Some(room.state.document())
    }

    /// Chit-chat toasts of a room still visible at `now`.
    pub fn active_chitchat(&self, doc_id: &str, now: u64) -> Vec<notebridge_core::ChitChatEvent> {
        let Some(room) = self.rooms.lock().expect("room table").get(doc_id).cloned() else {
            return Vec::new();
        };
        let mut room = room.lock().expect("room");
        room.presence.active_events(now)
    }

    /// Handles the first frame of a channel. On rejection the returned error
    /// frame should be sent and the channel closed.
    pub fn open_session(&self, hello: &Frame, now: u64) -> Result<Result<(SessionId, Effects), Frame>, ServerFault> {
        self.check_up()?;
        let Frame::Hello { token, doc, have_seq, replica } = hello else {
            return Ok(Err(Frame::error(ErrorCode::MalformedFrame, "expected hello")));
        };
        let Some(user) = self.store.authenticate(token) else {
            return Ok(Err(Frame::error(ErrorCode::AuthFailed, "invalid token")));
        };
        let meta = match self.store.document(doc) {
            Some(m) if !m.deleted => m,
            _ => return Ok(Err(Frame::error(ErrorCode::NoSuchDocument, format!("no document {doc}")))),
        };
        if !self.store.is_enrolled(&meta.class_id, &user.user_id) {
            return Ok(Err(Frame::error(ErrorCode::NotEnrolled, format!("not enrolled in {}", meta.class_id))));
        }
        let room = self.room(doc)?;
        let mut room = room.lock().expect("room");
        let mut fx = Effects::default();

        let replica = match replica {
            Some(r) => {
                if room.replicas.get(r) != Some(&user.user_id) {
                    return Ok(Err(Frame::error(ErrorCode::ReplicaUnavailable, format!("replica {r} cannot be resumed"))));
                }
                // the previous channel of this replica is stale: take over
                let stale: Vec<SessionId> =
                    room.sessions.iter().filter(|(_, s)| s.replica == *r).map(|(id, _)| *id).collect();
                for old in stale {
                    room.remove_session(old, &mut fx);
                    self.routes.lock().expect("routes").remove(&old);
                    fx.closed.push(old);
                }
                *r
            }
            None => {
                let next = room.replicas.keys().next_back().map_or(1, |r| r.0 + 1);
                let r = ReplicaId(next);
                self.store.record_replica(doc, r, &user.user_id)?;
                room.replicas.insert(r, user.user_id.clone());
                r
            }
        };

        let session = self.next_session.fetch_add(1, Ordering::SeqCst);
        room.sessions.insert(session, Session { user: user.user_id.clone(), replica, last_seen: now });
        room.presence.join(&user.user_id);
        self.routes.lock().expect("routes").insert(session, doc.clone());

        let server_seq = room.server_seq;
        let replay = *have_seq > 0 && *have_seq <= server_seq && server_seq - have_seq <= self.config.replay_limit;
        let (snapshot, from) = if replay {
            (None, *have_seq)
        } else {
            match self.store.read_latest_snapshot(doc)? {
                Some((seq, bytes)) if snapshot_decode(&bytes).is_ok() => (Some(bytes), seq),
                _ => {
                    let empty = ReplicaState::new(doc.as_str(), meta.title.as_str(), ReplicaId::AUTHORITY);
                    (Some(snapshot_encode(&empty)), 0)
                }
            }
        };
        let participants = room.participants();
        fx.reply(session, Frame::Welcome { snapshot, seq: server_seq, replica, participants });
        let trailing: Vec<Op> = self.store.read_ops(doc, from)?.into_iter().map(|(_, op)| op).collect();
        if !trailing.is_empty() {
            fx.reply(session, Frame::Ops { ops: trailing, seq: Some(server_seq) });
        }
        let presence = room.presence_frame();
        fx.reply(session, presence.clone());
        for other in room.others(session).collect::<Vec<_>>() {
            fx.fanout(other, presence.clone());
        }
        Ok(Ok((session, fx)))
    }

    /// Handles a frame from an open session.
    pub fn handle_frame(&self, session: SessionId, frame: Frame, now: u64) -> Result<Effects, ServerFault> {
        self.check_up()?;
        let mut fx = Effects::default();
        let Some(room) = self.room_of(session) else {
            fx.closed.push(session);
            return Ok(fx);
        };
        let mut room = room.lock().expect("room");
        let Some(s) = room.sessions.get_mut(&session) else {
            fx.closed.push(session);
            return Ok(fx);
        };
        s.last_seen = now;
        match frame {
            Frame::Ops { ops, .. } => self.handle_client_ops(&mut room, session, ops, now, &mut fx)?,
            Frame::Presence { cursor } => handle_presence(&mut room, session, cursor, now, &mut fx),
            Frame::Chitchat { emoji } => self.handle_chitchat(&mut room, session, &emoji, now, &mut fx)?,
            other => fx.reply(session, Frame::error(ErrorCode::MalformedFrame, format!("unexpected frame {}", frame_tag(&other)))),
        }
        Ok(fx)
    }

    fn handle_client_ops(
        &self,
        room: &mut Room,
        session: SessionId,
        ops: Vec<Op>,
        now: u64,
        fx: &mut Effects,
    ) -> Result<(), ServerFault> {
        let (user, replica) = {
            let s = &room.sessions[&session];
            (s.user.clone(), s.replica)
        };
        if let Some(bad) = ops.iter().find(|op| op.origin != replica) {
            fx.reply(session, Frame::error(ErrorCode::OriginMismatch, format!("op origin {} is not your replica {replica}", bad.origin)));
            self.close(room, session, fx);
            return Ok(());
        }
        if let Some(err) = ops.iter().find_map(|op| op.validate().err()) {
            fx.reply(session, Frame::error(ErrorCode::MalformedOp, err.to_string()));
            return Ok(());
        }

        let mut accepted = Vec::new();
        for op in ops {
            if room.state.has_seen(op.origin, op.seq) {
                continue; // re-sent after reconnect, already in the log
            }
            let seq = self.store.append_op(&room.doc_id, &op).inspect_err(|_| self.go_down())?;
            debug_assert_eq!(seq, room.server_seq + 1);
            room.server_seq = seq;
            self.count_append()?;

            let usage = match &op.kind {
                OpKind::AddAnnotation { emoji, .. } => Some((UsageKind::NtEmojiInserted, *emoji)),
                OpKind::ResolveAnnotation { ann_id } => match room.state.is_resolved(*ann_id) {
                    Some(true) => None,
                    _ => room.state.document().annotations.get(ann_id).map(|a| (UsageKind::NtEmojiResolved, a.emoji)),
                },
                _ => None,
            };
            let title_before = room.state.title().to_owned();
            room.state.integrate(op.clone());
            if let Some((kind, emoji)) = usage {
                self.store.append_usage(UsageEvent {
                    ts: now,
                    class_id: room.class_id.clone(),
                    doc_id: room.doc_id.clone(),
                    user_id: user.clone(),
                    kind,
                    emoji_code: Some(emoji),
                })?;
            }
            if room.state.title() != title_before {
                self.store.set_document_title(&room.doc_id, room.state.title())?;
            }
            if self.config.snapshot_every > 0 && seq % self.config.snapshot_every == 0 {
                self.store.write_snapshot(&room.doc_id, seq, &snapshot_encode(&room.state))?;
            }
            accepted.push(op);
        }
        if !accepted.is_empty() {
            let frame = Frame::Ops { ops: accepted, seq: Some(room.server_seq) };
            for to in room.sessions.keys() {
                fx.fanout(*to, frame.clone());
            }
        }
        Ok(())
    }

    fn handle_chitchat(
        &self,
        room: &mut Room,
        session: SessionId,
        code: &str,
        now: u64,
        fx: &mut Effects,
    ) -> Result<(), ServerFault> {
        let user = room.sessions[&session].user.clone();
        let emoji = match parse_emoji_code(code) {
            Ok(e) => e,
            Err(e) => {
                fx.reply(session, Frame::error(ErrorCode::UnknownEmoji, e.to_string()));
                return Ok(());
            }
        };
        let event = match room.presence.emit_chitchat(&user, emoji, now) {
            Ok(ev) => ev,
            Err(e @ PresenceError::WrongEmojiCategory(_)) => {
                fx.reply(session, Frame::error(ErrorCode::WrongEmojiCategory, e.to_string()));
                return Ok(());
            }
            Err(e) => {
                fx.reply(session, Frame::error(ErrorCode::Internal, e.to_string()));
                return Ok(());
            }
        };
        self.store.append_usage(UsageEvent {
            ts: now,
            class_id: room.class_id.clone(),
            doc_id: room.doc_id.clone(),
            user_id: user,
            kind: UsageKind::CcEmojiSent,
            emoji_code: Some(emoji),
        })?;
        let frame = Frame::chitchat_fanout(&event);
        for to in room.sessions.keys() {
            fx.fanout(*to, frame.clone());
        }
        Ok(())
    }

    fn close(&self, room: &mut Room, session: SessionId, fx: &mut Effects) {
        room.remove_session(session, fx);
        self.routes.lock().expect("routes").remove(&session);
        fx.closed.push(session);
    }

    /// The channel of `session` went away.
    pub fn disconnect(&self, session: SessionId) -> Effects {
        let mut fx = Effects::default();
        if let Some(room) = self.room_of(session) {
            let mut room = room.lock().expect("room");
            room.remove_session(session, &mut fx);
        }
        self.routes.lock().expect("routes").remove(&session);
        fx
    }

    /// Notes liveness of a session (e.g. a heartbeat reply).
    pub fn touch(&self, session: SessionId, now: u64) {
        if let Some(room) = self.room_of(session) {
            if let Some(s) = room.lock().expect("room").sessions.get_mut(&session) {
                s.last_seen = s.last_seen.max(now);
            }
        }
    }

    /// Drops sessions idle for longer than the configured timeout.
    pub fn tick(&self, now: u64) -> Effects {
        let mut fx = Effects::default();
        let rooms: Vec<_> = self.rooms.lock().expect("room table").values().cloned().collect();
        for room in rooms {
            let mut room = room.lock().expect("room");
            let idle: Vec<SessionId> = room
                .sessions
                .iter()
                .filter(|(_, s)| now.saturating_sub(s.last_seen) >= self.config.idle_timeout_ms)
                .map(|(id, _)| *id)
                .collect();
            for session in idle {
                let mut local = Effects::default();
                self.close(&mut room, session, &mut local);
                fx.extend(local);
            }
        }
        fx
    }

    fn go_down(&self) {
        self.down.store(true, Ordering::SeqCst);
    }

    fn count_append(&self) -> Result<(), ServerFault> {
        let n = self.appends.fetch_add(1, Ordering::SeqCst) + 1;
        if *self.crash_after.lock().expect("fault lock") == Some(n) {
            self.go_down();
            return Err(ServerFault::InjectedCrash(n));
        }
        Ok(())
    }
}

fn handle_presence(room: &mut Room, session: SessionId, cursor: Option<CursorPos>, now: u64, fx: &mut Effects) {
    let user = room.sessions[&session].user.clone();
    let result = match cursor {
        Some(c) => room.presence.update_cursor(&user, c.block, c.offset, now),
        None => room.presence.clear_cursor(&user),
    };
    match result {
        Ok(snapshot) => {
            let frame = Frame::presence_fanout(snapshot, room.participants());
            for other in room.others(session).collect::<Vec<_>>() {
                fx.fanout(other, frame.clone());
            }
        }
        Err(e) => fx.reply(session, Frame::error(ErrorCode::Internal, e.to_string())),
    }
}

fn frame_tag(frame: &Frame) -> &'static str {
    match frame {
        Frame::Hello { .. } => "hello",
        Frame::Welcome { .. } => "welcome",
        Frame::Ops { .. } => "ops",
        Frame::Presence { .. } => "presence",
        Frame::PresenceFanout { .. } => "presence_fanout",
        Frame::Chitchat { .. } => "chitchat",
        Frame::ChitchatFanout { .. } => "chitchat_fanout",
        Frame::Error { .. } => "error",
    }
}
