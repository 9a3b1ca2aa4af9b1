//! Core data model for NoteBridge: block documents with emoji annotations,
//! their operation-based replication, ephemeral presence, usage events and
//! the JSON wire frames spoken between clients and the sync server.

pub mod document;
pub mod emoji;
pub mod id;
pub mod op;
pub mod presence;
pub mod protocol;
pub mod replica;
mod rga;
pub mod snapshot;
pub mod usage;

pub use document::{export_txt, Annotation, Block, BlockKind, Mark, MarkSpan, NoteDocument};
pub use emoji::{emoji_catalog, parse_emoji_code, EmojiCategory, EmojiCode, UnknownEmoji};
pub use id::{AnnotationId, BlockId, ElementId, LamportStamp, ReplicaId};
pub use op::{MalformedOp, Op, OpKind};
pub use presence::{ChitChatEvent, CursorState, PresenceError, PresenceSnapshot, RoomPresence, CHITCHAT_TTL_MS};
pub use protocol::{CursorPos, ErrorCode, Frame};
pub use replica::{BlockEdit, EditError, Integration, OpBatch, ReplicaState, StateHash};
pub use snapshot::{snapshot_decode, snapshot_encode, CorruptSnapshot};
pub use usage::{MalformedEvent, UsageEvent, UsageKind};
