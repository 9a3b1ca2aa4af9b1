//! Durable system of record.
//!
//! On-disk layout under the data directory:
//!
//! ```text
//! users.json            accounts (salted token hashes only)
//! classes.json          class folders and their members
//! docs.json             document metadata
//! usage.jsonl           usage events, one JSON object per line
//! docs/<doc_id>/
//!     ops.jsonl         {"seq":N,"op":{...}} per line, N gapless from 1
//!     replicas.jsonl    replica ids handed out for the document
//!     snap-<seq>.bin    snapshot of the authority state after op <seq>
//! ```
//!
//! Catalog files are rewritten atomically (temp file + rename) by a single
//! writer; readers work from an immutable in-memory copy. Each op log has a
//! single writer, the room that owns the document.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use notebridge_core::{MalformedEvent, Op, ReplicaId, UsageEvent, UsageKind};
use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no such user {0}")]
    NoSuchUser(String),
    #[error("no such class {0}")]
    NoSuchClass(String),
    #[error("no such document {0}")]
    NoSuchDocument(String),
    #[error("user {user} is not enrolled in class {class}")]
    NotEnrolled { user: String, class: String },
    #[error("title is empty")]
    EmptyTitle,
    #[error(transparent)]
    MalformedEvent(#[from] MalformedEvent),
    #[error("corrupt store file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

impl StoreError {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NoSuchUser(_) => "no_such_user",
            StoreError::NoSuchClass(_) => "no_such_class",
            StoreError::NoSuchDocument(_) => "no_such_document",
            StoreError::NotEnrolled { .. } => "not_enrolled",
            StoreError::EmptyTitle => "empty_title",
            StoreError::MalformedEvent(_) => "malformed_event",
            StoreError::Corrupt { .. } => "corrupt_store",
            StoreError::Io(_) => "io_failure",
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Swd,
    Pnt,
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "swd" => Ok(Role::Swd),
            "pnt" => Ok(Role::Pnt),
            other => Err(format!("unknown role {other:?}, expected swd or pnt")),
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Swd => "swd",
            Role::Pnt => "pnt",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: String,
    pub display_name: String,
    pub role: Role,
    pub token_salt: String,
    pub token_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassFolder {
    pub class_id: String,
    pub name: String,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub doc_id: String,
    pub class_id: String,
    pub title: String,
    pub created_at: u64,
    pub created_by: String,
    pub deleted: bool,
}

/// Criteria for [`Store::read_usage`]. `from_ms..to_ms` is half-open.
#[derive(Debug, Clone, Default)]
pub struct UsageFilter {
    pub class_id: Option<String>,
    pub doc_id: Option<String>,
    pub user_id: Option<String>,
    pub from_ms: Option<u64>,
    pub to_ms: Option<u64>,
}

impl UsageFilter {
    fn matches(&self, e: &UsageEvent) -> bool {
        self.class_id.as_ref().is_none_or(|c| *c == e.class_id)
            && self.doc_id.as_ref().is_none_or(|d| *d == e.doc_id)
            && self.user_id.as_ref().is_none_or(|u| *u == e.user_id)
            && self.from_ms.is_none_or(|f| e.ts >= f)
            && self.to_ms.is_none_or(|t| e.ts < t)
    }
}

/// How hard appends push data to disk before returning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Durability {
    /// `fsync` every append: survives power loss.
    #[default]
    Sync,
    /// Hand the write to the OS: survives a process crash.
    Flush,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Table<T> {
    next_id: u64,
    rows: Vec<T>,
}

impl<T> Default for Table<T> {
    fn default() -> Self {
        Table { next_id: 1, rows: Vec::new() }
    }
}

#[derive(Debug, Clone, Default)]
struct Catalog {
    users: Table<UserAccount>,
    classes: Table<ClassFolder>,
    docs: Table<DocumentMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogLine {
    seq: u64,
    op: Op,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReplicaLine {
    replica: ReplicaId,
    user: String,
}

struct OpLog {
    file: File,
    len: u64,
}

pub struct Store {
    root: PathBuf,
    durability: Durability,
    catalog: RwLock<Arc<Catalog>>,
    catalog_writer: Mutex<()>,
    usage: Mutex<File>,
    logs: Mutex<HashMap<String, Arc<Mutex<OpLog>>>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish_non_exhaustive()
    }
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::thread_rng().fill_bytes(&mut buf);
    buf.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_secret(salt: &str, secret: &str) -> String {
    let digest = Sha256::new().chain_update(salt.as_bytes()).chain_update(secret.as_bytes()).finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn read_table<T: DeserializeOwned>(path: &Path) -> Result<Table<T>> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map_err(|e| StoreError::Corrupt { path: path.to_owned(), reason: e.to_string() }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Table { next_id: 1, rows: Vec::new() }),
        Err(e) => Err(e.into()),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        // make the rename itself durable; not supported everywhere
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

impl Store {
    /// Opens (or initializes) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>, durability: Durability) -> Result<Store> {
        let root = root.into();
        fs::create_dir_all(root.join("docs"))?;
        let catalog = Catalog {
            users: read_table(&root.join("users.json"))?,
            classes: read_table(&root.join("classes.json"))?,
            docs: read_table(&root.join("docs.json"))?,
        };
        let usage_path = root.join("usage.jsonl");
        repair_jsonl_tail(&usage_path)?;
        let usage = OpenOptions::new().create(true).append(true).open(usage_path)?;
        Ok(Store {
            root,
            durability,
            catalog: RwLock::new(Arc::new(catalog)),
            catalog_writer: Mutex::new(()),
            usage: Mutex::new(usage),
            logs: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn catalog(&self) -> Arc<Catalog> {
        self.catalog.read().expect("catalog lock").clone()
    }

    /// Applies `f` to a copy of the catalog, persists it, then publishes it.
    fn update_catalog<T>(&self, f: impl FnOnce(&mut Catalog) -> Result<T>) -> Result<T> {
        let _writer = self.catalog_writer.lock().expect("catalog writer");
        let mut next = (*self.catalog()).clone();
        let out = f(&mut next)?;
        let current = self.catalog();
        let files: [(&str, Vec<u8>, bool); 3] = [
            ("users.json", to_json(&next.users), !same(&next.users, &current.users)),
            ("classes.json", to_json(&next.classes), !same(&next.classes, &current.classes)),
            ("docs.json", to_json(&next.docs), !same(&next.docs, &current.docs)),
        ];
        for (name, bytes, dirty) in files {
            if dirty {
                write_atomic(&self.root.join(name), &bytes)?;
            }
        }
        *self.catalog.write().expect("catalog lock") = Arc::new(next);
        Ok(out)
    }

    pub fn create_user(&self, name: &str, role: Role) -> Result<(UserAccount, String)> {
        let secret = random_hex(32);
        let salt = random_hex(16);
        let hash = hash_secret(&salt, &secret);
        let account = self.update_catalog(|c| {
            let user_id = format!("u{}", c.users.next_id);
            c.users.next_id += 1;
            let account = UserAccount {
                user_id,
                display_name: name.to_owned(),
                role,
                token_salt: salt,
                token_hash: hash,
            };
            c.users.rows.push(account.clone());
            Ok(account)
        })?;
        let token = format!("{}.{}", account.user_id, secret);
        Ok((account, token))
    }

    pub fn user(&self, user_id: &str) -> Option<UserAccount> {
        self.catalog().users.rows.iter().find(|u| u.user_id == user_id).cloned()
    }

    pub fn users(&self) -> Vec<UserAccount> {
        self.catalog().users.rows.clone()
    }

    /// Resolves a bearer token of the form `<user_id>.<secret>`.
    pub fn authenticate(&self, token: &str) -> Option<UserAccount> {
        let (user_id, secret) = token.split_once('.')?;
        let user = self.user(user_id)?;
        (hash_secret(&user.token_salt, secret) == user.token_hash).then_some(user)
    }

    pub fn create_class(&self, name: &str) -> Result<ClassFolder> {
        self.update_catalog(|c| {
            let class = ClassFolder {
                class_id: format!("c{}", c.classes.next_id),
                name: name.to_owned(),
                members: BTreeSet::new(),
            };
            c.classes.next_id += 1;
            c.classes.rows.push(class.clone());
            Ok(class)
        })
    }

    pub fn class(&self, class_id: &str) -> Option<ClassFolder> {
        self.catalog().classes.rows.iter().find(|c| c.class_id == class_id).cloned()
    }

    pub fn enroll(&self, class_id: &str, user_id: &str) -> Result<ClassFolder> {
        self.update_catalog(|c| {
            if !c.users.rows.iter().any(|u| u.user_id == user_id) {
                return Err(StoreError::NoSuchUser(user_id.to_owned()));
            }
            let class = c
                .classes
                .rows
                .iter_mut()
                .find(|k| k.class_id == class_id)
                .ok_or_else(|| StoreError::NoSuchClass(class_id.to_owned()))?;
            class.members.insert(user_id.to_owned());
            Ok(class.clone())
        })
    }

    pub fn is_enrolled(&self, class_id: &str, user_id: &str) -> bool {
        self.class(class_id).is_some_and(|c| c.members.contains(user_id))
    }

    pub fn list_classes(&self, user_id: &str) -> Result<Vec<ClassFolder>> {
        let cat = self.catalog();
        if !cat.users.rows.iter().any(|u| u.user_id == user_id) {
            return Err(StoreError::NoSuchUser(user_id.to_owned()));
        }
        Ok(cat.classes.rows.iter().filter(|c| c.members.contains(user_id)).cloned().collect())
    }

    pub fn create_document(&self, class_id: &str, title: &str, user_id: &str, now: u64) -> Result<DocumentMeta> {
        let title = title.trim();
        let meta = self.update_catalog(|c| {
            if !c.users.rows.iter().any(|u| u.user_id == user_id) {
                return Err(StoreError::NoSuchUser(user_id.to_owned()));
            }
            let class = c
                .classes
                .rows
                .iter()
                .find(|k| k.class_id == class_id)
                .ok_or_else(|| StoreError::NoSuchClass(class_id.to_owned()))?;
            if !class.members.contains(user_id) {
                return Err(StoreError::NotEnrolled { user: user_id.to_owned(), class: class_id.to_owned() });
            }
            if title.is_empty() {
                return Err(StoreError::EmptyTitle);
            }
            let meta = DocumentMeta {
                doc_id: format!("d{}", c.docs.next_id),
                class_id: class_id.to_owned(),
                title: title.to_owned(),
                created_at: now,
                created_by: user_id.to_owned(),
                deleted: false,
            };
            c.docs.next_id += 1;
            let dir = self.doc_dir(&meta.doc_id);
            fs::create_dir_all(&dir)?;
            OpenOptions::new().create(true).append(true).open(dir.join("ops.jsonl"))?;
            c.docs.rows.push(meta.clone());
            Ok(meta)
        })?;
        self.append_usage(UsageEvent {
            ts: now,
            class_id: meta.class_id.clone(),
            doc_id: meta.doc_id.clone(),
            user_id: user_id.to_owned(),
            kind: UsageKind::NoteCreated,
            emoji_code: None,
        })?;
        Ok(meta)
    }

    /// Metadata of a document, deleted or not.
    pub fn document(&self, doc_id: &str) -> Option<DocumentMeta> {
        self.catalog().docs.rows.iter().find(|d| d.doc_id == doc_id).cloned()
    }

    /// Soft delete; the op log stays on disk.
    pub fn delete_document(&self, doc_id: &str, user_id: &str) -> Result<DocumentMeta> {
        self.update_catalog(|c| {
            let members = |class_id: &str| {
                c.classes.rows.iter().find(|k| k.class_id == class_id).map(|k| k.members.clone()).unwrap_or_default()
            };
            let meta = c
                .docs
                .rows
                .iter()
                .find(|d| d.doc_id == doc_id && !d.deleted)
                .ok_or_else(|| StoreError::NoSuchDocument(doc_id.to_owned()))?;
            if !members(&meta.class_id).contains(user_id) {
                return Err(StoreError::NotEnrolled { user: user_id.to_owned(), class: meta.class_id.clone() });
            }
            let meta = c.docs.rows.iter_mut().find(|d| d.doc_id == doc_id).expect("found above");
            meta.deleted = true;
            Ok(meta.clone())
        })
    }

    pub fn set_document_title(&self, doc_id: &str, title: &str) -> Result<()> {
        self.update_catalog(|c| {
            let meta = c
                .docs
                .rows
                .iter_mut()
                .find(|d| d.doc_id == doc_id)
                .ok_or_else(|| StoreError::NoSuchDocument(doc_id.to_owned()))?;
            meta.title = title.to_owned();
            Ok(())
        })
    }

    /// Live documents of a class, newest first.
    pub fn list_documents(&self, class_id: &str) -> Result<Vec<DocumentMeta>> {
        let cat = self.catalog();
        if !cat.classes.rows.iter().any(|c| c.class_id == class_id) {
            return Err(StoreError::NoSuchClass(class_id.to_owned()));
        }
        let mut docs: Vec<_> = cat.docs.rows.iter().filter(|d| d.class_id == class_id && !d.deleted).cloned().collect();
        docs.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| doc_number(&b.doc_id).cmp(&doc_number(&a.doc_id))));
        Ok(docs)
    }

    fn doc_dir(&self, doc_id: &str) -> PathBuf {
        self.root.join("docs").join(doc_id)
    }

    fn existing_doc_dir(&self, doc_id: &str) -> Result<PathBuf> {
        if self.document(doc_id).is_none() {
            return Err(StoreError::NoSuchDocument(doc_id.to_owned()));
        }
        Ok(self.doc_dir(doc_id))
    }

    fn op_log(&self, doc_id: &str) -> Result<Arc<Mutex<OpLog>>> {
        let mut logs = self.logs.lock().expect("log table");
        if let Some(log) = logs.get(doc_id) {
            return Ok(log.clone());
        }
        let path = self.existing_doc_dir(doc_id)?.join("ops.jsonl");
        fs::create_dir_all(path.parent().expect("doc dir"))?;
        repair_jsonl_tail(&path)?;
        let len = read_log_lines(&path)?.len() as u64;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let log = Arc::new(Mutex::new(OpLog { file, len }));
        logs.insert(doc_id.to_owned(), log.clone());
        Ok(log)
    }

    /// Appends one op and returns its server sequence number. The line is on
    /// disk (per the configured durability) before this returns.
    pub fn append_op(&self, doc_id: &str, op: &Op) -> Result<u64> {
        let log = self.op_log(doc_id)?;
        let mut log = log.lock().expect("op log");
        let seq = log.len + 1;
        let mut line = serde_json::to_vec(&LogLine { seq, op: op.clone() }).expect("op serializes");
        line.push(b'\n');
        log.file.write_all(&line)?;
        self.settle(&log.file)?;
        log.len = seq;
        Ok(seq)
    }

    pub fn op_count(&self, doc_id: &str) -> Result<u64> {
        let log = self.op_log(doc_id)?;
        let len = log.lock().expect("op log").len;
        Ok(len)
    }

    /// Ops with seq greater than `from_seq`, in log order.
    pub fn read_ops(&self, doc_id: &str, from_seq: u64) -> Result<Vec<(u64, Op)>> {
        let log = self.op_log(doc_id)?;
        let _guard = log.lock().expect("op log");
        let path = self.doc_dir(doc_id).join("ops.jsonl");
        Ok(read_log_lines(&path)?.into_iter().filter(|(s, _)| *s > from_seq).collect())
    }

    pub fn write_snapshot(&self, doc_id: &str, seq: u64, bytes: &[u8]) -> Result<()> {
        let dir = self.existing_doc_dir(doc_id)?;
        write_atomic(&dir.join(format!("snap-{seq}.bin")), bytes)?;
        Ok(())
    }

    /// Sequence numbers of stored snapshots, ascending.
    pub fn snapshot_seqs(&self, doc_id: &str) -> Result<Vec<u64>> {
        let dir = self.existing_doc_dir(doc_id)?;
        let mut seqs = Vec::new();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(seqs),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(seq) = name.strip_prefix("snap-").and_then(|n| n.strip_suffix(".bin")) {
                if let Ok(seq) = seq.parse() {
                    seqs.push(seq);
                }
            }
        }
        seqs.sort_unstable();
        Ok(seqs)
    }

    pub fn read_snapshot(&self, doc_id: &str, seq: u64) -> Result<Vec<u8>> {
        let dir = self.existing_doc_dir(doc_id)?;
        Ok(fs::read(dir.join(format!("snap-{seq}.bin")))?)
    }

    pub fn read_latest_snapshot(&self, doc_id: &str) -> Result<Option<(u64, Vec<u8>)>> {
        match self.snapshot_seqs(doc_id)?.last() {
            Some(&seq) => Ok(Some((seq, self.read_snapshot(doc_id, seq)?))),
            None => Ok(None),
        }
    }

    pub fn record_replica(&self, doc_id: &str, replica: ReplicaId, user_id: &str) -> Result<()> {
        let path = self.existing_doc_dir(doc_id)?.join("replicas.jsonl");
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let mut line = serde_json::to_vec(&ReplicaLine { replica, user: user_id.to_owned() }).expect("serializes");
        line.push(b'\n');
        f.write_all(&line)?;
        self.settle(&f)?;
        Ok(())
    }

    pub fn read_replicas(&self, doc_id: &str) -> Result<BTreeMap<ReplicaId, String>> {
        let path = self.existing_doc_dir(doc_id)?.join("replicas.jsonl");
        repair_jsonl_tail(&path)?;
        let lines: Vec<ReplicaLine> = read_jsonl(&path)?;
        Ok(lines.into_iter().map(|l| (l.replica, l.user)).collect())
    }

    pub fn append_usage(&self, event: UsageEvent) -> Result<()> {
        event.validate()?;
        let mut line = serde_json::to_vec(&event).expect("event serializes");
        line.push(b'\n');
        let mut f = self.usage.lock().expect("usage log");
        f.write_all(&line)?;
        self.settle(&f)?;
        Ok(())
    }

    /// Matching usage events in timestamp order.
    pub fn read_usage(&self, filter: &UsageFilter) -> Result<Vec<UsageEvent>> {
        let _guard = self.usage.lock().expect("usage log");
        let mut events: Vec<UsageEvent> = read_jsonl(&self.root.join("usage.jsonl"))?;
        events.retain(|e| filter.matches(e));
        events.sort_by_key(|e| e.ts);
        Ok(events)
    }

    fn settle(&self, f: &File) -> io::Result<()> {
        match self.durability {
            Durability::Sync => f.sync_data(),
            Durability::Flush => Ok(()),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("catalog serializes");
    bytes.push(b'\n');
    bytes
}

fn same<T: Serialize>(a: &T, b: &T) -> bool {
    serde_json::to_vec(a).ok() == serde_json::to_vec(b).ok()
}

fn doc_number(id: &str) -> u64 {
    id.trim_start_matches('d').parse().unwrap_or(0)
}

/// Drops a torn final line left by a crash mid-append.
fn repair_jsonl_tail(path: &Path) -> Result<()> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e.into()),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    let f = OpenOptions::new().write(true).open(path)?;
    f.set_len(keep as u64)?;
    f.sync_all()?;
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_owned(),
            reason: format!("line {}: {e}", n + 1),
        })?;
        out.push(row);
    }
    Ok(out)
}

fn read_log_lines(path: &Path) -> Result<Vec<(u64, Op)>> {
    let lines: Vec<LogLine> = read_jsonl(path)?;
    for (i, l) in lines.iter().enumerate() {
        if l.seq != i as u64 + 1 {
            return Err(StoreError::Corrupt {
                path: path.to_owned(),
                reason: format!("expected seq {}, found {}", i + 1, l.seq),
            });
        }
    }
    Ok(lines.into_iter().map(|l| (l.seq, l.op)).collect())
}

#[cfg(test)]
mod tests {
    use notebridge_core::{parse_emoji_code, ElementId, OpKind};

    use super::*;

    fn store() -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), Durability::Flush).unwrap();
        (dir, store)
    }

    fn op(seq: u64) -> Op {
        Op { origin: ReplicaId(1), seq, kind: OpKind::SetTitle { text: format!("t{seq}"), ts: notebridge_core::LamportStamp::new(seq, ReplicaId(1)) } }
    }

    fn setup(store: &Store) -> (UserAccount, ClassFolder) {
        let (user, _) = store.create_user("A", Role::Pnt).unwrap();
        let class = store.create_class("Algorithms").unwrap();
        let class = store.enroll(&class.class_id, &user.user_id).unwrap();
        (user, class)
    }

    #[test]
    fn token_verifies_and_raw_token_is_not_stored() {
        let (dir, store) = store();
        let (user, token) = store.create_user("A", Role::Pnt).unwrap();
        assert_eq!(user.role, Role::Pnt);
        assert_eq!(store.authenticate(&token).unwrap().user_id, user.user_id);
        assert!(store.authenticate(&format!("{}.deadbeef", user.user_id)).is_none());
        assert!(store.authenticate("garbage").is_none());
        let on_disk = fs::read_to_string(dir.path().join("users.json")).unwrap();
        let secret = token.split_once('.').unwrap().1;
        assert!(!on_disk.contains(secret));
    }

    #[test]
    fn enroll_is_set_semantics_and_checks_ids() {
        let (_dir, store) = store();
        let (user, class) = setup(&store);
        let again = store.enroll(&class.class_id, &user.user_id).unwrap();
        assert_eq!(again.members, class.members);
        assert!(matches!(store.enroll("c999", &user.user_id), Err(StoreError::NoSuchClass(_))));
        assert!(matches!(store.enroll(&class.class_id, "u999"), Err(StoreError::NoSuchUser(_))));
    }

    #[test]
    fn documents_lifecycle() {
        let (_dir, store) = store();
        let (user, class) = setup(&store);
        let d1 = store.create_document(&class.class_id, "Week 1", &user.user_id, 10).unwrap();
        assert_eq!(store.list_documents(&class.class_id).unwrap().len(), 1);
        assert!(matches!(store.create_document(&class.class_id, "  ", &user.user_id, 11), Err(StoreError::EmptyTitle)));
        let (other, _) = store.create_user("B", Role::Swd).unwrap();
        assert!(matches!(
            store.create_document(&class.class_id, "x", &other.user_id, 11),
            Err(StoreError::NotEnrolled { .. })
        ));
        let d2 = store.create_document(&class.class_id, "Week 2", &user.user_id, 20).unwrap();
        let listed: Vec<_> = store.list_documents(&class.class_id).unwrap().into_iter().map(|d| d.doc_id).collect();
        assert_eq!(listed, [d2.doc_id.clone(), d1.doc_id.clone()]);
        store.delete_document(&d1.doc_id, &user.user_id).unwrap();
        assert_eq!(store.list_documents(&class.class_id).unwrap().len(), 1);
        assert!(matches!(store.delete_document(&d1.doc_id, &user.user_id), Err(StoreError::NoSuchDocument(_))));
        assert!(store.document(&d1.doc_id).unwrap().deleted);
        let created = store
            .read_usage(&UsageFilter::default())
            .unwrap()
            .into_iter()
            .filter(|e| e.kind == UsageKind::NoteCreated)
            .count();
        assert_eq!(created, 2);
    }

    #[test]
    fn five_docs_one_deleted_lists_four() {
        let (_dir, store) = store();
        let (user, class) = setup(&store);
        let docs: Vec<_> =
            (0..5).map(|i| store.create_document(&class.class_id, &format!("n{i}"), &user.user_id, i).unwrap()).collect();
        store.delete_document(&docs[2].doc_id, &user.user_id).unwrap();
        assert_eq!(store.list_documents(&class.class_id).unwrap().len(), 4);
        let second = store.create_class("Physics").unwrap();
        store.enroll(&second.class_id, &user.user_id).unwrap();
        assert_eq!(store.list_classes(&user.user_id).unwrap().len(), 2);
        assert!(store.list_classes("u404").is_err());
        assert!(store.list_documents("c404").is_err());
    }

    #[test]
    fn op_log_append_and_read() {
        let (_dir, store) = store();
        let (user, class) = setup(&store);
        let doc = store.create_document(&class.class_id, "T", &user.user_id, 0).unwrap();
        for s in 1..=3 {
            assert_eq!(store.append_op(&doc.doc_id, &op(s)).unwrap(), s);
        }
        assert_eq!(store.read_ops(&doc.doc_id, 0).unwrap().len(), 3);
        assert_eq!(store.read_ops(&doc.doc_id, 2).unwrap(), vec![(3, op(3))]);
        assert!(store.read_latest_snapshot(&doc.doc_id).unwrap().is_none());
        assert!(matches!(store.append_op("d404", &op(1)), Err(StoreError::NoSuchDocument(_))));
    }

    #[test]
    fn log_survives_reopen_and_torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let doc_id = {
            let store = Store::open(dir.path(), Durability::Sync).unwrap();
            let (user, class) = setup(&store);
            let doc = store.create_document(&class.class_id, "T", &user.user_id, 0).unwrap();
            store.append_op(&doc.doc_id, &op(1)).unwrap();
            store.append_op(&doc.doc_id, &op(2)).unwrap();
            doc.doc_id
        };
        let path = dir.path().join("docs").join(&doc_id).join("ops.jsonl");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"seq":3,"op":{"ori"#).unwrap();
        drop(f);
        let store = Store::open(dir.path(), Durability::Sync).unwrap();
        assert_eq!(store.op_count(&doc_id).unwrap(), 2);
        assert_eq!(store.append_op(&doc_id, &op(3)).unwrap(), 3);
        assert_eq!(store.read_ops(&doc_id, 0).unwrap().len(), 3);
    }

    #[test]
    fn snapshots_pick_highest_seq() {
        let (_dir, store) = store();
        let (user, class) = setup(&store);
        let doc = store.create_document(&class.class_id, "T", &user.user_id, 0).unwrap();
        store.write_snapshot(&doc.doc_id, 100, b"a").unwrap();
        store.write_snapshot(&doc.doc_id, 200, b"b").unwrap();
        store.write_snapshot(&doc.doc_id, 20, b"c").unwrap();
        assert_eq!(store.read_latest_snapshot(&doc.doc_id).unwrap(), Some((200, b"b".to_vec())));
        assert_eq!(store.snapshot_seqs(&doc.doc_id).unwrap(), [20, 100, 200]);
    }

    #[test]
    fn usage_validation_and_filters() {
        let (_dir, store) = store();
        let ev = |ts, kind, code: &str| UsageEvent {
            ts,
            class_id: "c1".into(),
            doc_id: "d1".into(),
            user_id: "u1".into(),
            kind,
            emoji_code: Some(parse_emoji_code(code).unwrap()),
        };
        assert!(matches!(
            store.append_usage(ev(0, UsageKind::NtEmojiInserted, "cc.great")),
            Err(StoreError::MalformedEvent(_))
        ));
        for ts in (0..29).rev() {
            store.append_usage(ev(ts, UsageKind::NtEmojiInserted, "nt.important")).unwrap();
        }
        let all = store.read_usage(&UsageFilter::default()).unwrap();
        assert_eq!(all.len(), 29);
        assert!(all.windows(2).all(|w| w[0].ts <= w[1].ts));
        let empty = UsageFilter { from_ms: Some(5), to_ms: Some(5), ..Default::default() };
        assert!(store.read_usage(&empty).unwrap().is_empty());
        let window = UsageFilter { from_ms: Some(5), to_ms: Some(10), ..Default::default() };
        assert_eq!(store.read_usage(&window).unwrap().len(), 5);
        let other_user = UsageFilter { user_id: Some("u2".into()), ..Default::default() };
        assert!(store.read_usage(&other_user).unwrap().is_empty());
    }

    #[test]
    fn replica_assignments_persist() {
        let dir = tempfile::tempdir().unwrap();
        let doc_id = {
            let store = Store::open(dir.path(), Durability::Flush).unwrap();
            let (user, class) = setup(&store);
            let doc = store.create_document(&class.class_id, "T", &user.user_id, 0).unwrap();
            store.record_replica(&doc.doc_id, ReplicaId(1), &user.user_id).unwrap();
            store.record_replica(&doc.doc_id, ReplicaId(2), &user.user_id).unwrap();
            doc.doc_id
        };
        let store = Store::open(dir.path(), Durability::Flush).unwrap();
        let replicas = store.read_replicas(&doc_id).unwrap();
        assert_eq!(replicas.keys().copied().collect::<Vec<_>>(), [ReplicaId(1), ReplicaId(2)]);
        let _ = ElementId::new(1, ReplicaId(1));
    }
}
