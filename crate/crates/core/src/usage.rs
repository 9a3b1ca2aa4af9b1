//! Usage events: the activity log that analytics reads.

use serde::{Deserialize, Serialize};

use crate::emoji::EmojiCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageKind {
    NoteCreated,
    NtEmojiInserted,
    NtEmojiResolved,
    CcEmojiSent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEvent {
    pub ts: u64,
    pub class_id: String,
    pub doc_id: String,
    pub user_id: String,
    pub kind: UsageKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emoji_code: Option<EmojiCode>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed usage event: {0}")]
pub struct MalformedEvent(pub String);

impl UsageEvent {
    /// Emoji events must carry a code of the matching category; note
    /// creation must carry none.
    pub fn validate(&self) -> Result<(), MalformedEvent> {
        match (self.kind, self.emoji_code) {
            (UsageKind::NoteCreated, None) => Ok(()),
            (UsageKind::NoteCreated, Some(e)) => Err(MalformedEvent(format!("note_created carries emoji {e}"))),
            (_, None) => Err(MalformedEvent(format!("{:?} without emoji", self.kind))),
            (UsageKind::NtEmojiInserted | UsageKind::NtEmojiResolved, Some(e)) if !e.is_note_taking() => {
                Err(MalformedEvent(format!("{e} is not a note-taking emoji")))
            }
            (UsageKind::CcEmojiSent, Some(e)) if !e.is_chit_chat() => {
                Err(MalformedEvent(format!("{e} is not a chit-chat emoji")))
            }
            _ => Ok(()),
        }
    }
}
