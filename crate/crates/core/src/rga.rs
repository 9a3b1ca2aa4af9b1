//! Replicated growable array: an insert-after sequence with tombstones.

use serde::{Deserialize, Serialize};

use crate::id::ElementId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Node<T> {
    pub id: ElementId,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub deleted: bool,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub(crate) struct Sequence<T> {
    nodes: Vec<Node<T>>,
}

impl<T> Default for Sequence<T> {
    fn default() -> Self {
        Sequence { nodes: Vec::new() }
    }
}

impl<T> Sequence<T> {
    pub fn position(&self, id: ElementId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.position(id).is_some()
    }

    pub fn get(&self, id: ElementId) -> Option<&Node<T>> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn get_mut(&mut self, id: ElementId) -> Option<&mut Node<T>> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    /// Places `id` right after `anchor` (or at the front), skipping over
    /// siblings with a greater id so every replica picks the same slot.
    ///
    /// Returns false when the anchor is unknown. Re-inserting a known id is a
    /// no-op.
    pub fn insert_after(&mut self, anchor: Option<ElementId>, id: ElementId, value: T) -> bool {
        if self.contains(id) {
            return true;
        }
        let mut pos = match anchor {
            None => 0,
            Some(a) => match self.position(a) {
                Some(p) => p + 1,
                None => return false,
            },
        };
        while pos < self.nodes.len() && self.nodes[pos].id > id {
            pos += 1;
        }
        self.nodes.insert(pos, Node { id, deleted: false, value });
        true
    }

    /// Tombstones `id`. Returns false when unknown.
    pub fn delete(&mut self, id: ElementId) -> bool {
        match self.get_mut(id) {
            Some(n) => {
                n.deleted = true;
                true
            }
            None => false,
        }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn visible(&self) -> impl Iterator<Item = &Node<T>> {
        self.nodes.iter().filter(|n| !n.deleted)
    }

    pub fn visible_len(&self) -> usize {
        self.visible().count()
    }

    pub fn visible_id(&self, index: usize) -> Option<ElementId> {
        self.visible().nth(index).map(|n| n.id)
    }
}
