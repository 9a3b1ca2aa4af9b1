use notebridge_core::{BlockKind, Mark, Op};
use serde::{Deserialize, Serialize};

fn yes() -> bool {
    true
}

/// Something a simulated user does. Blocks are addressed by their visible
/// index in the acting client's current view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientAction {
    InsertBlock {
        index: usize,
        #[serde(default)]
        kind: BlockKind,
    },
    /// Types `text` at `pos` (default: end of the block).
    Type {
        block: usize,
        #[serde(default)]
        pos: Option<usize>,
        text: String,
    },
    Delete {
        block: usize,
        from: usize,
        len: usize,
    },
    DeleteBlock {
        block: usize,
    },
    SetKind {
        block: usize,
        kind: BlockKind,
    },
    Mark {
        block: usize,
        from: usize,
        len: usize,
        mark: Mark,
        #[serde(default = "yes")]
        enabled: bool,
    },
    Title {
        text: String,
    },
    Annotate {
        block: usize,
        emoji: String,
    },
    /// Resolves the oldest unresolved annotation on the block.
    Resolve {
        block: usize,
    },
    Cursor {
        block: usize,
        offset: usize,
    },
    Chitchat {
        emoji: String,
    },
    Disconnect,
    Reconnect,
    /// Sends ops prepared elsewhere, as if typed locally.
    #[serde(skip)]
    RawOps(Vec<Op>),
    /// A random local edit drawn from the simulation's seed.
    #[serde(skip)]
    RandomEdit,
}
