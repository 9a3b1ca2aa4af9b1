//! Durable storage, document rooms and the websocket sync server.

pub mod config;
pub mod storage;
pub mod sync;
pub mod ws;

pub use config::{ConfigError, ServerConfig};
pub use storage::{
    ClassFolder, DocumentMeta, Durability, Role, Store, StoreError, UsageFilter, UserAccount,
};
pub use sync::{
    load_document_state, replay_from_empty, Delivery, Effects, Outbound, ServerFault, SessionId, SyncConfig,
    SyncServer,
};
