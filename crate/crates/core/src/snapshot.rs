//! Versioned snapshot encoding of a [`ReplicaState`].
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! +---------+--------------+----------------------+------------------+
//! | version | body length  | body                 | SHA-256 of body  |
//! | u8 = 1  | u32          | canonical JSON state | 32 bytes         |
//! +---------+--------------+----------------------+------------------+
//! ```
//!
//! The body is the serde JSON form of the full replica state, including
//! tombstones, the version vector and buffered ops. All maps are ordered, so
//! encoding is deterministic.

use sha2::{Digest, Sha256};

use crate::replica::ReplicaState;

pub const SNAPSHOT_VERSION: u8 = 1;

const HEADER_LEN: usize = 1 + 4;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("corrupt snapshot: {0}")]
pub struct CorruptSnapshot(pub String);

pub fn snapshot_encode(state: &ReplicaState) -> Vec<u8> {
    let body = serde_json::to_vec(state).expect("replica state serializes");
    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + DIGEST_LEN);
    out.push(SNAPSHOT_VERSION);
    out.extend_from_slice(&u32::try_from(body.len()).expect("snapshot under 4 GiB").to_le_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&Sha256::digest(&body));
    out
}

pub fn snapshot_decode(bytes: &[u8]) -> Result<ReplicaState, CorruptSnapshot> {
    let (&version, rest) = bytes.split_first().ok_or_else(|| CorruptSnapshot("empty input".into()))?;
    if version != SNAPSHOT_VERSION {
        return Err(CorruptSnapshot(format!("unsupported version {version}")));
    }
    if rest.len() < 4 {
        return Err(CorruptSnapshot("truncated header".into()));
    }
    let (len, rest) = rest.split_at(4);
    let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
    if rest.len() != len + DIGEST_LEN {
        return Err(CorruptSnapshot(format!("expected {} payload bytes, found {}", len + DIGEST_LEN, rest.len())));
    }
    let (body, digest) = rest.split_at(len);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CorruptSnapshot("checksum mismatch".into()));
    }
    serde_json::from_slice(body).map_err(|e| CorruptSnapshot(e.to_string()))
}
