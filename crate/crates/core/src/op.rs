//! Operations: the unit of replication.
//!
//! JSON form is a flat object, e.g.
//! `{"origin":2,"seq":7,"op":"insert_text","id":"31@2","block":"4@1","anchor":"30@2","ch":"x"}`.
//! A missing/`null` `anchor` means the start of the block (or of the document
//! for `insert_block`).

use serde::{Deserialize, Serialize};

use crate::document::{BlockKind, Mark};
use crate::emoji::EmojiCode;
use crate::id::{AnnotationId, BlockId, ElementId, LamportStamp, ReplicaId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Op {
    pub origin: ReplicaId,
    /// Gapless per origin, starting at 1.
    pub seq: u64,
    #[serde(flatten)]
    pub kind: OpKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpKind {
    InsertText {
        id: ElementId,
        block: BlockId,
        #[serde(default)]
        anchor: Option<ElementId>,
        ch: char,
    },
    DeleteText {
        block: BlockId,
        targets: Vec<ElementId>,
    },
    InsertBlock {
        id: BlockId,
        #[serde(default)]
        anchor: Option<BlockId>,
        kind: BlockKind,
    },
    DeleteBlock {
        block: BlockId,
    },
    SetBlockKind {
        block: BlockId,
        kind: BlockKind,
        ts: LamportStamp,
    },
    /// Applies to the element range `from..=to` in replicated order.
    SetMark {
        block: BlockId,
        from: ElementId,
        to: ElementId,
        mark: Mark,
        enabled: bool,
        ts: LamportStamp,
    },
    SetTitle {
        text: String,
        ts: LamportStamp,
    },
    AddAnnotation {
        ann_id: AnnotationId,
        block: BlockId,
        emoji: EmojiCode,
        author: String,
        created_at: u64,
    },
    ResolveAnnotation {
        ann_id: AnnotationId,
    },
}

impl Op {
    pub fn id(&self) -> (ReplicaId, u64) {
        (self.origin, self.seq)
    }

    /// Largest logical time carried by the op, used to advance Lamport clocks.
    pub fn max_time(&self) -> u64 {
        match &self.kind {
            OpKind::InsertText { id, .. } | OpKind::InsertBlock { id, .. } => id.counter,
            OpKind::AddAnnotation { ann_id, .. } => ann_id.counter,
            OpKind::SetBlockKind { ts, .. } | OpKind::SetMark { ts, .. } | OpKind::SetTitle { ts, .. } => ts.time,
            OpKind::DeleteText { .. } | OpKind::DeleteBlock { .. } | OpKind::ResolveAnnotation { .. } => 0,
        }
    }

    /// Structural checks that do not need replica state.
    ///
    /// Ids minted by the op must belong to its origin, and annotations must
    /// use note-taking emojis.
    pub fn validate(&self) -> Result<(), MalformedOp> {
        if self.seq == 0 {
            return Err(MalformedOp("seq must start at 1".into()));
        }
        let minted = match &self.kind {
            OpKind::InsertText { id, .. } | OpKind::InsertBlock { id, .. } => Some(*id),
            OpKind::AddAnnotation { ann_id, .. } => Some(*ann_id),
            _ => None,
        };
        if let Some(id) = minted {
            if id.replica != self.origin || id.counter == 0 {
                return Err(MalformedOp(format!("id {id} not minted by replica {}", self.origin)));
            }
        }
        match &self.kind {
            OpKind::SetBlockKind { ts, .. } | OpKind::SetMark { ts, .. } | OpKind::SetTitle { ts, .. }
                if ts.replica != self.origin || ts.time == 0 =>
            {
                Err(MalformedOp("stamp not issued by origin".into()))
            }
            OpKind::DeleteText { targets, .. } if targets.is_empty() => Err(MalformedOp("empty delete".into())),
            OpKind::AddAnnotation { emoji, .. } if !emoji.is_note_taking() => {
                Err(MalformedOp(format!("{emoji} is not a note-taking emoji")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed op: {0}")]
pub struct MalformedOp(pub String);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emoji::parse_emoji_code;

    #[test]
    fn json_shape() {
        let op = Op {
            origin: ReplicaId(2),
            seq: 7,
            kind: OpKind::InsertText {
                id: ElementId::new(31, ReplicaId(2)),
                block: ElementId::new(4, ReplicaId(1)),
                anchor: None,
                ch: 'x',
            },
        };
        let json = serde_json::to_string(&op).unwrap();
        assert_eq!(
            json,
            r#"{"origin":2,"seq":7,"op":"insert_text","id":"31@2","block":"4@1","anchor":null,"ch":"x"}"#
        );
        assert_eq!(serde_json::from_str::<Op>(&json).unwrap(), op);
        let no_anchor = r#"{"origin":2,"seq":7,"op":"insert_text","id":"31@2","block":"4@1","ch":"x"}"#;
        assert_eq!(serde_json::from_str::<Op>(no_anchor).unwrap(), op);
    }

    #[test]
    fn validate_rejects_foreign_ids_and_chitchat_annotations() {
        let spoofed = Op {
            origin: ReplicaId(2),
            seq: 1,
            kind: OpKind::InsertBlock { id: ElementId::new(1, ReplicaId(3)), anchor: None, kind: BlockKind::Paragraph },
        };
        assert!(spoofed.validate().is_err());
        let cc = Op {
            origin: ReplicaId(2),
            seq: 1,
            kind: OpKind::AddAnnotation {
                ann_id: ElementId::new(1, ReplicaId(2)),
                block: ElementId::new(1, ReplicaId(1)),
                emoji: parse_emoji_code("cc.great").unwrap(),
                author: "u".into(),
                created_at: 0,
            },
        };
        assert!(cc.validate().is_err());
        let ok = Op { origin: ReplicaId(2), seq: 1, kind: OpKind::ResolveAnnotation { ann_id: ElementId::new(1, ReplicaId(1)) } };
        assert!(ok.validate().is_ok());
    }
}
