//! Identifiers shared by the replication engine and the wire protocol.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Identifies one client session's replica of a document.
///
/// The sync server hands these out per document; `ReplicaId(0)` is reserved
/// for the server's authority copy, which never originates operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplicaId(pub u64);

impl ReplicaId {
    pub const AUTHORITY: ReplicaId = ReplicaId(0);
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identity of a replicated element (a character, a block or an annotation).
///
/// Ordered lexicographically by `(counter, replica)`; field order matters for
/// the derived `Ord`. Rendered as `"<counter>@<replica>"` on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementId {
    pub counter: u64,
    pub replica: ReplicaId,
}

impl ElementId {
    pub fn new(counter: u64, replica: ReplicaId) -> Self {
        ElementId { counter, replica }
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.counter, self.replica.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid element id {0:?}, expected <counter>@<replica>")]
pub struct ParseIdError(pub String);

impl FromStr for ElementId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (counter, replica) = s.split_once('@').ok_or_else(|| ParseIdError(s.to_owned()))?;
        let counter = counter.parse().map_err(|_| ParseIdError(s.to_owned()))?;
        let replica = replica.parse().map_err(|_| ParseIdError(s.to_owned()))?;
        Ok(ElementId::new(counter, ReplicaId(replica)))
    }
}

impl Serialize for ElementId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Blocks are identified by the element id of their insertion.
pub type BlockId = ElementId;

/// Annotations are identified by an element id minted by their author.
pub type AnnotationId = ElementId;

/// Logical timestamp for last-writer-wins registers; `replica` breaks ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct LamportStamp {
    pub time: u64,
    pub replica: ReplicaId,
}

impl LamportStamp {
    pub const ZERO: LamportStamp = LamportStamp { time: 0, replica: ReplicaId(0) };

    pub fn new(time: u64, replica: ReplicaId) -> Self {
        LamportStamp { time, replica }
    }
}
