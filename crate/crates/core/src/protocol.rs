//! Wire frames exchanged between client sessions and the sync server.
//!
//! Every frame is one UTF-8 JSON object tagged by `"t"`, carried as one
//! message of the underlying channel (a websocket text message).

use serde::{Deserialize, Serialize};

use crate::emoji::EmojiCode;
use crate::id::{BlockId, ReplicaId};
use crate::op::Op;
use crate::presence::{ChitChatEvent, CursorState, PresenceSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CursorPos {
    pub block: BlockId,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Frame {
    Hello {
        token: String,
        doc: String,
        #[serde(default)]
        have_seq: u64,
        /// Replica id of a previous session to resume, so unacknowledged ops
        /// can be re-sent under their original origin.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replica: Option<ReplicaId>,
    },
    Welcome {
        /// Base64 snapshot; `null` when the server replays ops since `have_seq`.
        #[serde(with = "base64_opt")]
        snapshot: Option<Vec<u8>>,
        seq: u64,
        replica: ReplicaId,
        participants: Vec<String>,
    },
    Ops {
        ops: Vec<Op>,
        /// Server log length after these ops; absent client -> server.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
    Presence {
        cursor: Option<CursorPos>,
    },
    PresenceFanout {
        cursors: Vec<CursorState>,
        /// Users currently in the room, including those without a cursor.
        #[serde(default)]
        participants: Vec<String>,
    },
    Chitchat {
        emoji: String,
    },
    ChitchatFanout {
        emoji: EmojiCode,
        sender: String,
        sent_at: u64,
    },
    Error {
        code: ErrorCode,
        msg: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    AuthFailed,
    NoSuchDocument,
    NotEnrolled,
    MalformedFrame,
    MalformedOp,
    OriginMismatch,
    WrongEmojiCategory,
    UnknownEmoji,
    ReplicaUnavailable,
    Internal,
}

impl ErrorCode {
    /// Whether the server closes the channel after sending this error.
    pub fn is_fatal(self) -> bool {
        matches!(
            self,
            ErrorCode::AuthFailed
                | ErrorCode::NoSuchDocument
                | ErrorCode::NotEnrolled
                | ErrorCode::OriginMismatch
                | ErrorCode::ReplicaUnavailable
                | ErrorCode::Internal
        )
    }
}

impl Frame {
    pub fn error(code: ErrorCode, msg: impl Into<String>) -> Frame {
        Frame::Error { code, msg: msg.into() }
    }

    pub fn presence_fanout(snapshot: PresenceSnapshot, participants: Vec<String>) -> Frame {
        Frame::PresenceFanout { cursors: snapshot.cursors, participants }
    }

    pub fn chitchat_fanout(event: &ChitChatEvent) -> Frame {
        Frame::ChitchatFanout { emoji: event.emoji, sender: event.sender.clone(), sent_at: event.sent_at }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }

    pub fn from_json(text: &str) -> Result<Frame, serde_json::Error> {
        serde_json::from_str(text)
    }
}

mod base64_opt {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match bytes {
            Some(b) => s.serialize_str(&STANDARD.encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| STANDARD.decode(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id::ElementId;

    #[test]
    fn field_names_on_the_wire() {
        let hello = Frame::Hello { token: "u1.abc".into(), doc: "d1".into(), have_seq: 0, replica: None };
        assert_eq!(hello.to_json(), r#"{"t":"hello","token":"u1.abc","doc":"d1","have_seq":0}"#);

        let welcome = Frame::Welcome {
            snapshot: Some(vec![1, 2, 3]),
            seq: 5,
            replica: ReplicaId(2),
            participants: vec!["u1".into()],
        };
        assert_eq!(
            welcome.to_json(),
            r#"{"t":"welcome","snapshot":"AQID","seq":5,"replica":2,"participants":["u1"]}"#
        );
        assert_eq!(Frame::from_json(&welcome.to_json()).unwrap(), welcome);

        let ops = Frame::Ops { ops: vec![], seq: None };
        assert_eq!(ops.to_json(), r#"{"t":"ops","ops":[]}"#);

        let presence = Frame::Presence { cursor: Some(CursorPos { block: ElementId::new(1, ReplicaId(1)), offset: 3 }) };
        assert_eq!(presence.to_json(), r#"{"t":"presence","cursor":{"block":"1@1","offset":3}}"#);
        assert_eq!(Frame::Presence { cursor: None }.to_json(), r#"{"t":"presence","cursor":null}"#);

        assert_eq!(Frame::Chitchat { emoji: "cc.great".into() }.to_json(), r#"{"t":"chitchat","emoji":"cc.great"}"#);
        assert_eq!(
            Frame::error(ErrorCode::AuthFailed, "bad token").to_json(),
            r#"{"t":"error","code":"auth_failed","msg":"bad token"}"#
        );
    }

    #[test]
    fn rejects_untagged_and_unknown() {
        assert!(Frame::from_json(r#"{"token":"x"}"#).is_err());
        assert!(Frame::from_json(r#"{"t":"nope"}"#).is_err());
        assert!(Frame::from_json("not json").is_err());
    }
}
