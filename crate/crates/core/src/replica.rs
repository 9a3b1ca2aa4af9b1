//! Operation-based replication of a [`NoteDocument`].
//!
//! Each replica owns a [`ReplicaState`]. Local edits are applied immediately
//! and returned as ops for broadcast; remote ops go through
//! [`ReplicaState::integrate`], which buffers anything whose dependencies
//! (an earlier seq from the same origin, or a referenced element) have not
//! arrived yet. Any two replicas that have applied the same set of ops hold
//! equal documents regardless of delivery order.
//!
//! Text is an insert-after sequence per block, blocks are a sequence of
//! their own, and block kind, title and marks are last-writer-wins on
//! [`LamportStamp`]. Deleted characters and blocks stay as tombstones so that
//! late ops referencing them still apply.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::document::{Annotation, Block, BlockKind, Mark, MarkSpan, NoteDocument};
use crate::emoji::EmojiCode;
use crate::id::{AnnotationId, BlockId, ElementId, LamportStamp, ReplicaId};
use crate::op::{Op, OpKind};
use crate::rga::Sequence;

pub type OpBatch = Vec<Op>;

/// Outcome of [`ReplicaState::integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    Applied,
    Buffered,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EditError {
    #[error("no such block {0}")]
    NoSuchBlock(BlockId),
    #[error("position {pos} out of range for length {len}")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("emoji {0} has the wrong category for this action")]
    WrongEmojiCategory(EmojiCode),
    #[error("no such annotation {0}")]
    NoSuchAnnotation(AnnotationId),
}

/// Structural edits on blocks and document metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockEdit {
    Insert { after: Option<BlockId>, kind: BlockKind },
    Delete { block: BlockId },
    SetKind { block: BlockId, kind: BlockKind },
    SetTitle { text: String },
}

/// SHA-256 over the canonical form of the observable document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateHash(pub [u8; 32]);

impl std::fmt::Display for StateHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Lww<T> {
    value: T,
    ts: LamportStamp,
}

impl<T> Lww<T> {
    fn set(&mut self, value: T, ts: LamportStamp) {
        if ts > self.ts {
            self.value = value;
            self.ts = ts;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MarkOp {
    from: ElementId,
    to: ElementId,
    mark: Mark,
    enabled: bool,
    ts: LamportStamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlockBody {
    kind: Lww<BlockKind>,
    text: Sequence<char>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    marks: Vec<MarkOp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AnnotationRecord {
    emoji: EmojiCode,
    block: BlockId,
    author: String,
    created_at: u64,
    resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaState {
    doc_id: String,
    replica: ReplicaId,
    /// Lamport clock: the highest logical time minted or observed.
    clock: u64,
    title: Lww<String>,
    blocks: Sequence<BlockBody>,
    annotations: BTreeMap<AnnotationId, AnnotationRecord>,
    vv: BTreeMap<ReplicaId, u64>,
    pending: BTreeMap<ReplicaId, BTreeMap<u64, Op>>,
}

impl ReplicaState {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, replica: ReplicaId) -> Self {
        ReplicaState {
            doc_id: doc_id.into(),
            replica,
            clock: 0,
            title: Lww { value: title.into(), ts: LamportStamp::ZERO },
            blocks: Sequence::default(),
            annotations: BTreeMap::new(),
            vv: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn replica(&self) -> ReplicaId {
        self.replica
    }

    /// Re-homes a state (typically decoded from a server snapshot) onto the
    /// local replica id.
    pub fn set_replica(&mut self, replica: ReplicaId) {
        self.replica = replica;
    }

    pub fn version_vector(&self) -> &BTreeMap<ReplicaId, u64> {
        &self.vv
    }

    /// Highest contiguously applied seq from `origin`.
    pub fn applied_seq(&self, origin: ReplicaId) -> u64 {
        self.vv.get(&origin).copied().unwrap_or(0)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.values().map(BTreeMap::len).sum()
    }

    /// True when `(origin, seq)` is already applied or waiting in the buffer.
    pub fn has_seen(&self, origin: ReplicaId, seq: u64) -> bool {
        seq <= self.applied_seq(origin) || self.pending.get(&origin).is_some_and(|p| p.contains_key(&seq))
    }

    pub fn title(&self) -> &str {
        &self.title.value
    }

    pub fn block_exists(&self, block: BlockId) -> bool {
        self.blocks.get(block).is_some_and(|n| !n.deleted)
    }

    /// Ids of live blocks in document order.
    pub fn block_ids(&self) -> Vec<BlockId> {
        self.blocks.visible().map(|n| n.id).collect()
    }

    pub fn block_len(&self, block: BlockId) -> Option<usize> {
        self.live_block(block).ok().map(|b| b.text.visible_len())
    }

    pub fn annotation_ids(&self) -> impl Iterator<Item = AnnotationId> + '_ {
        self.annotations.keys().copied()
    }

    pub fn is_resolved(&self, ann: AnnotationId) -> Option<bool> {
        self.annotations.get(&ann).map(|a| a.resolved)
    }

    fn live_block(&self, block: BlockId) -> Result<&BlockBody, EditError> {
        match self.blocks.get(block) {
            Some(n) if !n.deleted => Ok(&n.value),
            _ => Err(EditError::NoSuchBlock(block)),
        }
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn fresh_id(&mut self) -> ElementId {
        ElementId::new(self.tick(), self.replica)
    }

    fn fresh_stamp(&mut self) -> LamportStamp {
        LamportStamp::new(self.tick(), self.replica)
    }

    /// Stamps, applies and returns a locally generated op.
    fn emit(&mut self, kind: OpKind) -> Op {
        let op = Op { origin: self.replica, seq: self.applied_seq(self.replica) + 1, kind };
        debug_assert!(self.ready(&op));
        self.apply(&op);
        op
    }

    pub fn local_insert_text(&mut self, block: BlockId, position: usize, text: &str) -> Result<OpBatch, EditError> {
        let body = self.live_block(block)?;
        let len = body.text.visible_len();
        if position > len {
            return Err(EditError::PositionOutOfRange { pos: position, len });
        }
        let mut anchor = position.checked_sub(1).and_then(|i| body.text.visible_id(i));
        let mut batch = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let id = self.fresh_id();
            batch.push(self.emit(OpKind::InsertText { id, block, anchor, ch }));
            anchor = Some(id);
        }
        Ok(batch)
    }

    pub fn local_delete_range(&mut self, block: BlockId, from: usize, len: usize) -> Result<OpBatch, EditError> {
        let body = self.live_block(block)?;
        let visible = body.text.visible_len();
        if from.checked_add(len).is_none_or(|end| end > visible) {
            return Err(EditError::PositionOutOfRange { pos: from.saturating_add(len), len: visible });
        }
        if len == 0 {
            return Ok(Vec::new());
        }
        let targets: Vec<ElementId> = body.text.visible().skip(from).take(len).map(|n| n.id).collect();
        Ok(vec![self.emit(OpKind::DeleteText { block, targets })])
    }

    pub fn local_block_edit(&mut self, edit: BlockEdit) -> Result<OpBatch, EditError> {
        let kind = match edit {
            BlockEdit::Insert { after, kind } => {
                if let Some(a) = after {
                    self.live_block(a)?;
                }
                OpKind::InsertBlock { id: self.fresh_id(), anchor: after, kind }
            }
            BlockEdit::Delete { block } => {
                self.live_block(block)?;
                OpKind::DeleteBlock { block }
            }
            BlockEdit::SetKind { block, kind } => {
                self.live_block(block)?;
                OpKind::SetBlockKind { block, kind, ts: self.fresh_stamp() }
            }
            BlockEdit::SetTitle { text } => OpKind::SetTitle { text, ts: self.fresh_stamp() },
        };
        Ok(vec![self.emit(kind)])
    }

    /// Inserts a block at a visible block index; returns the new block id too.
    pub fn local_insert_block_at(&mut self, index: usize, kind: BlockKind) -> Result<(BlockId, OpBatch), EditError> {
        let ids = self.block_ids();
        if index > ids.len() {
            return Err(EditError::PositionOutOfRange { pos: index, len: ids.len() });
        }
        let after = index.checked_sub(1).map(|i| ids[i]);
        let batch = self.local_block_edit(BlockEdit::Insert { after, kind })?;
        let OpKind::InsertBlock { id, .. } = batch[0].kind else { unreachable!() };
        Ok((id, batch))
    }

    /// Sets or clears `mark` on visible characters `[from, from + len)`.
    pub fn local_set_mark(
        &mut self,
        block: BlockId,
        from: usize,
        len: usize,
        mark: Mark,
        enabled: bool,
    ) -> Result<OpBatch, EditError> {
        let body = self.live_block(block)?;
        let visible = body.text.visible_len();
        if from.checked_add(len).is_none_or(|end| end > visible) {
            return Err(EditError::PositionOutOfRange { pos: from.saturating_add(len), len: visible });
        }
        if len == 0 {
            return Ok(Vec::new());
        }
        let start = body.text.visible_id(from).expect("in range");
        let end = body.text.visible_id(from + len - 1).expect("in range");
        let ts = self.fresh_stamp();
        Ok(vec![self.emit(OpKind::SetMark { block, from: start, to: end, mark, enabled, ts })])
    }

    pub fn local_annotate(
        &mut self,
        block: BlockId,
        emoji: EmojiCode,
        author: &str,
        now_ms: u64,
    ) -> Result<OpBatch, EditError> {
        if !emoji.is_note_taking() {
            return Err(EditError::WrongEmojiCategory(emoji));
        }
        self.live_block(block)?;
        let ann_id = self.fresh_id();
        Ok(vec![self.emit(OpKind::AddAnnotation {
            ann_id,
            block,
            emoji,
            author: author.to_owned(),
            created_at: now_ms,
        })])
    }

    pub fn local_resolve(&mut self, ann_id: AnnotationId) -> Result<OpBatch, EditError> {
        if !self.annotations.contains_key(&ann_id) {
            return Err(EditError::NoSuchAnnotation(ann_id));
        }
        Ok(vec![self.emit(OpKind::ResolveAnnotation { ann_id })])
    }

    /// Integrates a remote (or re-delivered) op.
    pub fn integrate(&mut self, op: Op) -> Integration {
        let (origin, seq) = op.id();
        if self.has_seen(origin, seq) {
            return Integration::Duplicate;
        }
        if seq != self.applied_seq(origin) + 1 || !self.ready(&op) {
            self.pending.entry(origin).or_default().insert(seq, op);
            return Integration::Buffered;
        }
        self.apply(&op);
        self.drain_pending();
        Integration::Applied
    }

    fn drain_pending(&mut self) {
        loop {
            let next = self.pending.iter().find_map(|(origin, ops)| {
                let (seq, op) = ops.first_key_value()?;
                (*seq == self.applied_seq(*origin) + 1 && self.ready(op)).then_some((*origin, *seq))
            });
            let Some((origin, seq)) = next else { break };
            let ops = self.pending.get_mut(&origin).expect("present");
            let op = ops.remove(&seq).expect("present");
            if ops.is_empty() {
                self.pending.remove(&origin);
            }
            self.apply(&op);
        }
    }

    fn text_contains(&self, block: BlockId, id: ElementId) -> bool {
        self.blocks.get(block).is_some_and(|b| b.value.text.contains(id))
    }

    /// Whether every element the op references is known (tombstones count).
    fn ready(&self, op: &Op) -> bool {
        let known_block = |b: BlockId| self.blocks.contains(b);
        match &op.kind {
            OpKind::InsertText { block, anchor, .. } => {
                known_block(*block) && anchor.is_none_or(|a| self.text_contains(*block, a))
            }
            OpKind::DeleteText { block, targets } => {
                known_block(*block) && targets.iter().all(|t| self.text_contains(*block, *t))
            }
            OpKind::InsertBlock { anchor, .. } => anchor.is_none_or(known_block),
            OpKind::DeleteBlock { block } | OpKind::SetBlockKind { block, .. } => known_block(*block),
            OpKind::SetMark { block, from, to, .. } => {
                known_block(*block) && self.text_contains(*block, *from) && self.text_contains(*block, *to)
            }
            OpKind::SetTitle { .. } => true,
            OpKind::AddAnnotation { block, .. } => known_block(*block),
            OpKind::ResolveAnnotation { ann_id } => self.annotations.contains_key(ann_id),
        }
    }

    fn apply(&mut self, op: &Op) {
        match &op.kind {
            OpKind::InsertText { id, block, anchor, ch } => {
                let body = &mut self.blocks.get_mut(*block).expect("ready").value;
                body.text.insert_after(*anchor, *id, *ch);
            }
            OpKind::DeleteText { block, targets } => {
                let body = &mut self.blocks.get_mut(*block).expect("ready").value;
                for t in targets {
                    body.text.delete(*t);
                }
            }
            OpKind::InsertBlock { id, anchor, kind } => {
                let body = BlockBody {
                    kind: Lww { value: *kind, ts: LamportStamp::new(id.counter, id.replica) },
                    text: Sequence::default(),
                    marks: Vec::new(),
                };
                self.blocks.insert_after(*anchor, *id, body);
            }
            OpKind::DeleteBlock { block } => {
                self.blocks.delete(*block);
            }
            OpKind::SetBlockKind { block, kind, ts } => {
                self.blocks.get_mut(*block).expect("ready").value.kind.set(*kind, *ts);
            }
            OpKind::SetMark { block, from, to, mark, enabled, ts } => {
                let body = &mut self.blocks.get_mut(*block).expect("ready").value;
                body.marks.push(MarkOp { from: *from, to: *to, mark: *mark, enabled: *enabled, ts: *ts });
            }
            OpKind::SetTitle { text, ts } => self.title.set(text.clone(), *ts),
            OpKind::AddAnnotation { ann_id, block, emoji, author, created_at } => {
                self.annotations.entry(*ann_id).or_insert_with(|| AnnotationRecord {
                    emoji: *emoji,
                    block: *block,
                    author: author.clone(),
                    created_at: *created_at,
                    resolved: false,
                });
            }
            OpKind::ResolveAnnotation { ann_id } => {
                if let Some(a) = self.annotations.get_mut(ann_id) {
                    a.resolved = true;
                }
            }
        }
        self.clock = self.clock.max(op.max_time());
        self.vv.insert(op.origin, op.seq);
    }

    /// The observable document.
    pub fn document(&self) -> NoteDocument {
        let blocks = self
            .blocks
            .visible()
            .map(|n| Block {
                block_id: n.id,
                kind: n.value.kind.value,
                text: n.value.text.visible().map(|c| c.value).collect(),
                marks: materialize_marks(&n.value),
            })
            .collect();
        let annotations = self
            .annotations
            .iter()
            .map(|(id, a)| {
                let orphaned = !self.block_exists(a.block);
                let ann = Annotation {
                    ann_id: *id,
                    emoji: a.emoji,
                    block_id: a.block,
                    author: a.author.clone(),
                    created_at: a.created_at,
                    resolved: a.resolved,
                    orphaned,
                };
                (*id, ann)
            })
            .collect();
        NoteDocument { doc_id: self.doc_id.clone(), title: self.title.value.clone(), blocks, annotations }
    }

    pub fn state_hash(&self) -> StateHash {
        let canonical = serde_json::to_vec(&self.document()).expect("document serializes");
        StateHash(Sha256::digest(&canonical).into())
    }
}

/// Resolves mark registers per visible character and folds them into runs.
///
/// A character's value for a mark is decided by the highest-stamped mark op
/// whose element range covers it in replicated order, so characters inserted
/// concurrently inside a range resolve identically everywhere.
fn materialize_marks(body: &BlockBody) -> Vec<MarkSpan> {
    if body.marks.is_empty() {
        return Vec::new();
    }
    let nodes = body.text.nodes();
    let ranges: Vec<(usize, usize, &MarkOp)> = body
        .marks
        .iter()
        .filter_map(|m| {
            let a = body.text.position(m.from)?;
            let b = body.text.position(m.to)?;
            Some((a.min(b), a.max(b), m))
        })
        .collect();
    let mut spans = Vec::new();
    for mark in Mark::ALL {
        let mut visible_idx = 0usize;
        let mut run_start: Option<usize> = None;
        for (pos, node) in nodes.iter().enumerate() {
            if node.deleted {
                continue;
            }
            let on = ranges
                .iter()
                .filter(|(a, b, m)| m.mark == mark && *a <= pos && pos <= *b)
                .max_by_key(|(_, _, m)| m.ts)
                .is_some_and(|(_, _, m)| m.enabled);
            match (on, run_start) {
                (true, None) => run_start = Some(visible_idx),
                (false, Some(s)) => {
                    spans.push(MarkSpan { mark, start: s, end: visible_idx });
                    run_start = None;
                }
                _ => {}
            }
            visible_idx += 1;
        }
        if let Some(s) = run_start {
            spans.push(MarkSpan { mark, start: s, end: visible_idx });
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emoji::parse_emoji_code;

    fn replica(r: u64) -> ReplicaState {
        ReplicaState::new("d1", "Lecture", ReplicaId(r))
    }

    fn text(s: &ReplicaState, b: BlockId) -> String {
        s.document().block(b).map(|b| b.text.clone()).unwrap_or_default()
    }

    fn deliver(to: &mut ReplicaState, ops: &[Op]) {
        for op in ops {
            to.integrate(op.clone());
        }
    }

    /// Two replicas sharing one empty block created by replica 1.
    fn pair() -> (ReplicaState, ReplicaState, BlockId) {
        let mut a = replica(1);
        let mut b = replica(2);
        let (blk, ops) = a.local_insert_block_at(0, BlockKind::Paragraph).unwrap();
        deliver(&mut b, &ops);
        (a, b, blk)
    }

    #[test]
    fn sequential_and_middle_insert() {
        let (mut a, _, blk) = pair();
        let ops = a.local_insert_text(blk, 0, "ab").unwrap();
        assert_eq!(ops.len(), 2);
        assert_eq!(text(&a, blk), "ab");
        let mut c = replica(3);
        let (blk2, _) = c.local_insert_block_at(0, BlockKind::Paragraph).unwrap();
        c.local_insert_text(blk2, 0, "ac").unwrap();
        c.local_insert_text(blk2, 1, "b").unwrap();
        assert_eq!(text(&c, blk2), "abc");
    }

    #[test]
    fn insert_errors() {
        let (mut a, _, blk) = pair();
        assert_eq!(
            a.local_insert_text(blk, 1, "x"),
            Err(EditError::PositionOutOfRange { pos: 1, len: 0 })
        );
        let ghost = ElementId::new(99, ReplicaId(9));
        assert_eq!(a.local_insert_text(ghost, 0, "x"), Err(EditError::NoSuchBlock(ghost)));
    }

    #[test]
    fn concurrent_inserts_at_same_position_converge() {
        let (mut a, mut b, blk) = pair();
        let xa = a.local_insert_text(blk, 0, "x").unwrap();
        let yb = b.local_insert_text(blk, 0, "y").unwrap();
        deliver(&mut a, &yb);
        deliver(&mut b, &xa);
        assert_eq!(text(&a, blk).chars().count(), 2);
        assert_eq!(text(&a, blk), text(&b, blk));
        assert_eq!(a.state_hash(), b.state_hash());
        // both ops carry counter 2; replica 2 wins the sibling tie-break
        assert_eq!(text(&a, blk), "yx");
    }

    #[test]
    fn delete_range_and_concurrent_duplicate_delete() {
        let (mut a, mut b, blk) = pair();
        deliver(&mut b, &a.local_insert_text(blk, 0, "abc").unwrap());
        let da = a.local_delete_range(blk, 1, 1).unwrap();
        let db = b.local_delete_range(blk, 1, 1).unwrap();
        assert_eq!(text(&a, blk), "ac");
        deliver(&mut a, &db);
        deliver(&mut b, &da);
        assert_eq!(text(&a, blk), "ac");
        assert_eq!(text(&b, blk), "ac");
        let h = a.state_hash();
        assert_eq!(a.integrate(db[0].clone()), Integration::Duplicate);
        assert_eq!(a.state_hash(), h);
        a.local_delete_range(blk, 0, 2).unwrap();
        assert_eq!(text(&a, blk), "");
        assert!(a.local_delete_range(blk, 0, 1).is_err());
    }

    #[test]
    fn block_kind_lww_converges_to_larger_stamp() {
        let (mut a, mut b, blk) = pair();
        let ka = a.local_block_edit(BlockEdit::SetKind { block: blk, kind: BlockKind::Heading1 }).unwrap();
        let kb = b.local_block_edit(BlockEdit::SetKind { block: blk, kind: BlockKind::BulletItem }).unwrap();
        let winner = {
            let OpKind::SetBlockKind { ts: ta, .. } = ka[0].kind else { panic!() };
            let OpKind::SetBlockKind { ts: tb, .. } = kb[0].kind else { panic!() };
            if ta > tb { BlockKind::Heading1 } else { BlockKind::BulletItem }
        };
        deliver(&mut a, &kb);
        deliver(&mut b, &ka);
        assert_eq!(a.document().block(blk).unwrap().kind, winner);
        assert_eq!(b.document().block(blk).unwrap().kind, winner);
    }

    #[test]
    fn delete_block_orphans_annotations_everywhere() {
        let (mut a, mut b, blk) = pair();
        let ann = b.local_annotate(blk, parse_emoji_code("nt.important").unwrap(), "swd", 10).unwrap();
        deliver(&mut a, &ann);
        let del = a.local_block_edit(BlockEdit::Delete { block: blk }).unwrap();
        deliver(&mut b, &del);
        for s in [&a, &b] {
            let doc = s.document();
            assert!(doc.blocks.is_empty());
            let only = doc.annotations.values().next().unwrap();
            assert!(only.orphaned);
        }
        assert_eq!(a.state_hash(), b.state_hash());
    }

    #[test]
    fn annotate_highlights_and_category_gate() {
        let (mut a, _, blk) = pair();
        a.local_annotate(blk, parse_emoji_code("nt.detail_plz").unwrap(), "swd", 1).unwrap();
        assert!(a.document().is_highlighted(blk));
        let cc = parse_emoji_code("cc.thank_you").unwrap();
        assert_eq!(a.local_annotate(blk, cc, "swd", 1), Err(EditError::WrongEmojiCategory(cc)));

        // concurrent annotations on the same block: set union
        let (mut c, mut d, blk2) = pair();
        let x = c.local_annotate(blk2, parse_emoji_code("nt.brb").unwrap(), "u1", 1).unwrap();
        let y = d.local_annotate(blk2, parse_emoji_code("nt.important").unwrap(), "u2", 1).unwrap();
        deliver(&mut c, &y);
        deliver(&mut d, &x);
        assert_eq!(c.document().annotations.len(), 2);
        assert_eq!(c.state_hash(), d.state_hash());
    }

    #[test]
    fn resolve_is_idempotent_and_survives_concurrent_edit() {
        let (mut a, mut b, blk) = pair();
        let ann = a.local_annotate(blk, parse_emoji_code("nt.detail_plz").unwrap(), "swd", 1).unwrap();
        deliver(&mut b, &ann);
        let ann_id = a.annotation_ids().next().unwrap();
        let res = b.local_resolve(ann_id).unwrap();
        let edit = a.local_insert_text(blk, 0, "more").unwrap();
        assert_eq!(b.is_resolved(ann_id), Some(true));
        let h = b.state_hash();
        assert_eq!(b.integrate(res[0].clone()), Integration::Duplicate);
        assert_eq!(b.state_hash(), h);
        deliver(&mut a, &res);
        deliver(&mut b, &edit);
        for s in [&a, &b] {
            assert_eq!(s.is_resolved(ann_id), Some(true));
            assert_eq!(text(s, blk), "more");
            assert!(!s.document().is_highlighted(blk));
        }
        let ghost = ElementId::new(77, ReplicaId(7));
        assert_eq!(a.local_resolve(ghost), Err(EditError::NoSuchAnnotation(ghost)));
    }

    #[test]
    fn gap_buffering_then_drain() {
        let (mut a, mut b, blk) = pair();
        let ops = a.local_insert_text(blk, 0, "abc").unwrap();
        assert_eq!(b.integrate(ops[2].clone()), Integration::Buffered);
        assert_eq!(b.integrate(ops[1].clone()), Integration::Buffered);
        assert_eq!(b.pending_len(), 2);
        assert_eq!(b.integrate(ops[1].clone()), Integration::Duplicate);
        assert_eq!(b.integrate(ops[0].clone()), Integration::Applied);
        assert_eq!(b.pending_len(), 0);
        assert_eq!(text(&b, blk), "abc");
    }

    #[test]
    fn missing_anchor_from_other_origin_buffers() {
        let (mut a, mut b, blk) = pair();
        let from_a = a.local_insert_text(blk, 0, "a").unwrap();
        deliver(&mut b, &from_a);
        let from_b = b.local_insert_text(blk, 1, "b").unwrap();
        let mut c = replica(3);
        // c knows nothing yet: block creation and a's text are missing
        assert_eq!(c.integrate(from_b[0].clone()), Integration::Buffered);
        let create = {
            let mut fresh = replica(1);
            let (_, ops) = fresh.local_insert_block_at(0, BlockKind::Paragraph).unwrap();
            ops
        };
        deliver(&mut c, &create);
        assert_eq!(c.pending_len(), 1);
        deliver(&mut c, &from_a);
        assert_eq!(c.pending_len(), 0);
        assert_eq!(text(&c, blk), "ab");
    }

    #[test]
    fn hash_ignores_tombstones_but_not_title() {
        let (mut a, _, blk) = pair();
        let (mut b, _, blk_b) = pair();
        assert_eq!(blk, blk_b);
        a.local_insert_text(blk, 0, "hi").unwrap();
        b.local_insert_text(blk, 0, "xhi").unwrap();
        b.local_delete_range(blk, 0, 1).unwrap();
        // same visible text, but different element ids: hashes still match
        assert_eq!(a.state_hash(), b.state_hash());
        assert_eq!(replica(1).state_hash(), replica(2).state_hash());
        let other = ReplicaState::new("d1", "Other", ReplicaId(1));
        assert_ne!(replica(1).state_hash(), other.state_hash());
    }

    #[test]
    fn deleting_and_reinserting_never_resurrects() {
        let (mut a, mut b, blk) = pair();
        deliver(&mut b, &a.local_insert_text(blk, 0, "abc").unwrap());
        let del = a.local_delete_range(blk, 0, 3).unwrap();
        let ins = a.local_insert_text(blk, 0, "abc").unwrap();
        deliver(&mut b, &ins);
        deliver(&mut b, &del);
        assert_eq!(text(&a, blk), "abc");
        assert_eq!(text(&b, blk), "abc");
    }

    #[test]
    fn marks_converge_with_concurrent_insert_inside_range() {
        let (mut a, mut b, blk) = pair();
        deliver(&mut b, &a.local_insert_text(blk, 0, "abcd").unwrap());
        let bold = a.local_set_mark(blk, 0, 4, Mark::Bold, true).unwrap();
        let ins = b.local_insert_text(blk, 2, "X").unwrap();
        deliver(&mut a, &ins);
        deliver(&mut b, &bold);
        let spans = a.document().block(blk).unwrap().marks.clone();
        assert_eq!(spans, vec![MarkSpan { mark: Mark::Bold, start: 0, end: 5 }]);
        assert_eq!(a.state_hash(), b.state_hash());
        let unbold = a.local_set_mark(blk, 1, 2, Mark::Bold, false).unwrap();
        deliver(&mut b, &unbold);
        assert_eq!(
            b.document().block(blk).unwrap().marks,
            vec![MarkSpan { mark: Mark::Bold, start: 0, end: 1 }, MarkSpan { mark: Mark::Bold, start: 3, end: 5 }]
        );
    }

    #[test]
    fn title_lww() {
        let mut a = replica(1);
        let mut b = replica(2);
        let ta = a.local_block_edit(BlockEdit::SetTitle { text: "A".into() }).unwrap();
        let tb = b.local_block_edit(BlockEdit::SetTitle { text: "B".into() }).unwrap();
        deliver(&mut a, &tb);
        deliver(&mut b, &ta);
        assert_eq!(a.title(), b.title());
        assert_eq!(a.title(), "B");
    }
}
