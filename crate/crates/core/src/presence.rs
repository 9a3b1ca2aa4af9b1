//! Ephemeral room state: cursors and chit-chat toasts.
//!
//! Nothing here is persisted or replicated through ops; a restarted server
//! starts with empty presence.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::emoji::EmojiCode;
use crate::id::BlockId;

/// How long a chit-chat toast stays up.
pub const CHITCHAT_TTL_MS: u64 = 5_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CursorState {
    pub user: String,
    pub block: BlockId,
    pub offset: usize,
    pub updated_at: u64,
}

/// Cursors of all participants, ordered by user.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceSnapshot {
    pub cursors: Vec<CursorState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChitChatEvent {
    pub event_id: u64,
    pub emoji: EmojiCode,
    pub sender: String,
    pub sent_at: u64,
    pub ttl_ms: u64,
}

impl ChitChatEvent {
    /// Visible on `[sent_at, sent_at + ttl)`.
    pub fn is_visible(&self, now: u64) -> bool {
        self.sent_at <= now && now < self.sent_at.saturating_add(self.ttl_ms)
    }

    pub fn expires_at(&self) -> u64 {
        self.sent_at.saturating_add(self.ttl_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PresenceError {
    #[error("{0} is not a participant of this room")]
    NotAParticipant(String),
    #[error("{0} is not a chit-chat emoji")]
    WrongEmojiCategory(EmojiCode),
}

#[derive(Debug, Clone, Default)]
pub struct RoomPresence {
    /// user -> number of live sessions
    participants: BTreeMap<String, usize>,
    cursors: BTreeMap<String, CursorState>,
    events: VecDeque<ChitChatEvent>,
    next_event: u64,
}

impl RoomPresence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers one more session for `user`.
    pub fn join(&mut self, user: &str) {
        *self.participants.entry(user.to_owned()).or_default() += 1;
    }

    /// Removes one session of `user`; the user leaves with their last session.
    pub fn leave(&mut self, user: &str) -> PresenceSnapshot {
        match self.participants.get_mut(user) {
            Some(n) if *n > 1 => {
                *n -= 1;
                self.snapshot()
            }
            _ => self.drop_user(user),
        }
    }

    pub fn is_participant(&self, user: &str) -> bool {
        self.participants.contains_key(user)
    }

    pub fn participants(&self) -> impl Iterator<Item = &str> {
        self.participants.keys().map(String::as_str)
    }

    pub fn snapshot(&self) -> PresenceSnapshot {
        PresenceSnapshot { cursors: self.cursors.values().cloned().collect() }
    }

    pub fn update_cursor(
        &mut self,
        user: &str,
        block: BlockId,
        offset: usize,
        now: u64,
    ) -> Result<PresenceSnapshot, PresenceError> {
        if !self.is_participant(user) {
            return Err(PresenceError::NotAParticipant(user.to_owned()));
        }
        self.cursors
            .insert(user.to_owned(), CursorState { user: user.to_owned(), block, offset, updated_at: now });
        Ok(self.snapshot())
    }

    pub fn clear_cursor(&mut self, user: &str) -> Result<PresenceSnapshot, PresenceError> {
        if !self.is_participant(user) {
            return Err(PresenceError::NotAParticipant(user.to_owned()));
        }
        self.cursors.remove(user);
        Ok(self.snapshot())
    }

    pub fn emit_chitchat(&mut self, user: &str, emoji: EmojiCode, now: u64) -> Result<ChitChatEvent, PresenceError> {
        if !emoji.is_chit_chat() {
            return Err(PresenceError::WrongEmojiCategory(emoji));
        }
        if !self.is_participant(user) {
            return Err(PresenceError::NotAParticipant(user.to_owned()));
        }
        self.next_event += 1;
        let event = ChitChatEvent {
            event_id: self.next_event,
            emoji,
            sender: user.to_owned(),
            sent_at: now,
            ttl_ms: CHITCHAT_TTL_MS,
        };
        // keep sent_at order even if callers hand in a slightly older clock
        let at = self.events.partition_point(|e| e.sent_at <= now);
        self.events.insert(at, event.clone());
        Ok(event)
    }

    /// Events visible at `now`, oldest first. Expired events are dropped.
    pub fn active_events(&mut self, now: u64) -> Vec<ChitChatEvent> {
        self.events.retain(|e| now < e.expires_at());
        self.events.iter().filter(|e| e.is_visible(now)).cloned().collect()
    }

    /// Forgets a user's cursor and membership. Their toasts expire on their own.
    pub fn drop_user(&mut self, user: &str) -> PresenceSnapshot {
        self.participants.remove(user);
        self.cursors.remove(user);
        self.snapshot()
    }
}
