//! Materialized view of a note: the value every replica converges to.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::emoji::EmojiCode;
use crate::id::{AnnotationId, BlockId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    #[default]
    Paragraph,
    Heading1,
    Heading2,
    Heading3,
    BulletItem,
    NumberedItem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    Bold,
    Italic,
    Underline,
}

impl Mark {
    pub const ALL: [Mark; 3] = [Mark::Bold, Mark::Italic, Mark::Underline];
}

/// A styled run over visible character positions `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MarkSpan {
    pub mark: Mark,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub block_id: BlockId,
    pub kind: BlockKind,
    pub text: String,
    /// Maximal runs, sorted by `(mark, start)`.
    pub marks: Vec<MarkSpan>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub ann_id: AnnotationId,
    pub emoji: EmojiCode,
    pub block_id: BlockId,
    pub author: String,
    pub created_at: u64,
    pub resolved: bool,
    /// The target block has been deleted.
    pub orphaned: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteDocument {
    pub doc_id: String,
    pub title: String,
    pub blocks: Vec<Block>,
    pub annotations: BTreeMap<AnnotationId, Annotation>,
}

impl NoteDocument {
    pub fn empty(doc_id: impl Into<String>, title: impl Into<String>) -> Self {
        NoteDocument {
            doc_id: doc_id.into(),
            title: title.into(),
            blocks: Vec::new(),
            annotations: BTreeMap::new(),
        }
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.iter().find(|b| b.block_id == id)
    }

    /// A block is highlighted while it carries an unresolved annotation.
    pub fn is_highlighted(&self, id: BlockId) -> bool {
        self.annotations
            .values()
            .any(|a| a.block_id == id && !a.resolved && !a.orphaned)
    }

    pub fn highlighted_blocks(&self) -> Vec<BlockId> {
        self.blocks
            .iter()
            .map(|b| b.block_id)
            .filter(|id| self.is_highlighted(*id))
            .collect()
    }

    pub fn annotations_on(&self, id: BlockId) -> impl Iterator<Item = &Annotation> {
        self.annotations.values().filter(move |a| a.block_id == id)
    }
}

fn push_line(out: &mut String, text: &str) {
    // One block is one line; embedded breaks would split it.
    out.extend(text.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }));
    out.push('\n');
}

/// Plain-text export: the title line, then one line per block.
///
/// Bullet items are prefixed `- `, numbered items `<n>. ` where `n` restarts
/// at 1 for every run of consecutive numbered items. Marks and emojis are
/// dropped.
pub fn export_txt(doc: &NoteDocument) -> Vec<u8> {
    let mut out = String::new();
    push_line(&mut out, &doc.title);
    let mut number = 0usize;
    for block in &doc.blocks {
        if block.kind == BlockKind::NumberedItem {
            number += 1;
        } else {
            number = 0;
        }
        match block.kind {
            BlockKind::BulletItem => out.push_str("- "),
            BlockKind::NumberedItem => out.push_str(&format!("{number}. ")),
            _ => {}
        }
        push_line(&mut out, &block.text);
    }
    out.into_bytes()
}
