//! Embedded property-graph store.
//!
//! Nodes carry labels and scalar properties; edges are typed and directed.
//! Readers work on an O(1) snapshot of the last committed graph. A single
//! writer at a time mutates a private copy and publishes it on commit after
//! the transaction's ops are appended to the commit log.
//!
//! Entities that need history are stored as an identity node linked to
//! immutable state nodes by numbered `HAS_STATE` edges (see
//! [`Transaction::create_versioned`]). Deletion is soft: the identity node is
//! flagged deprecated and hidden from default listings.

mod graph;
mod log;
mod value;
mod versioning;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};

pub use graph::{EdgeRecord, NodeRecord};
pub use value::{props, Properties, Value};
pub use versioning::{VersionedEntity, VersionedState};

use graph::{Graph, IndexDef, Op};
use log::{CommitLog, Record};

/// Soft-delete flag on identity nodes. Absent means `false`.
pub const DEPRECATED: &str = "deprecated";
/// Highest version number of a versioned entity, on its identity node.
pub const CURRENT_VERSION: &str = "current_version";
/// Version number carried by each `HAS_STATE` edge.
pub const VERSION: &str = "version";
pub const HAS_STATE: &str = "HAS_STATE";
pub const STATE_LABEL: &str = "State";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store is closed")]
    Closed,
    #[error("write attempted in a read-only transaction")]
    ReadOnly,
    #[error("a node needs at least one label")]
    EmptyLabels,
    #[error("edge endpoint {0} does not exist")]
    DanglingEndpoint(NodeId),
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("edge {0} does not exist")]
    UnknownEdge(EdgeId),
    #[error("node {0} is not a versioned entity")]
    UnknownEntity(NodeId),
    #[error("entity {entity} has no version {version}")]
    UnknownVersion { entity: NodeId, version: u32 },
    #[error("entity {0} is deprecated")]
    Deprecated(NodeId),
    #[error("state node {0} is immutable")]
    ImmutableState(NodeId),
    #[error("page limit must be at least 1")]
    InvalidPage,
    #[error("commit log corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Read,
    Write,
}

/// Page index plus page size. Page `offset` covers items
/// `offset * limit .. (offset + 1) * limit` of the id-ordered result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Page {
    offset: usize,
    limit: usize,
}

impl Page {
    pub fn new(offset: usize, limit: usize) -> Result<Self> {
        if limit == 0 {
            return Err(StoreError::InvalidPage);
        }
        Ok(Self { offset, limit })
    }

    pub fn all() -> Self {
        Self {
            offset: 0,
            limit: usize::MAX,
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    fn skip(&self) -> usize {
        self.offset.saturating_mul(self.limit)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StoreOptions {
    /// fsync the log on every commit.
    pub sync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self { sync: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxEventKind {
    Begin,
    Commit,
    Rollback,
}

#[derive(Debug, Clone, Copy)]
pub struct TxEvent {
    pub kind: TxEventKind,
    pub mode: Mode,
    /// Caller-chosen label passed to [`Store::begin_tagged`].
    pub tag: &'static str,
    /// Number of mutations; zero for `Begin` and for read transactions.
    pub ops: usize,
}

/// Receives transaction lifecycle events. Used for instrumentation.
pub trait TxObserver: Send + Sync {
    fn on_event(&self, event: &TxEvent);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreStats {
    pub read_transactions: u64,
    pub write_transactions: u64,
    pub commits: u64,
    pub committed_ops: u64,
}

#[derive(Default)]
struct Counters {
    reads: AtomicU64,
    writes: AtomicU64,
    commits: AtomicU64,
    ops: AtomicU64,
}

struct Shared {
    committed: RwLock<(u64, Graph)>,
    writer_busy: Mutex<bool>,
    writer_free: Condvar,
    next_id: AtomicU64,
    log: Mutex<Option<CommitLog>>,
    closed: AtomicBool,
    observer: RwLock<Option<Arc<dyn TxObserver>>>,
    counters: Counters,
    dir: Option<PathBuf>,
}

impl Shared {
    fn emit(&self, event: TxEvent) {
        if let Some(obs) = self.observer.read().as_ref() {
            obs.on_event(&event);
        }
    }

    fn release_writer(&self) {
        *self.writer_busy.lock() = false;
        self.writer_free.notify_one();
    }

    fn acquire_writer(&self) {
        let mut busy = self.writer_busy.lock();
        while *busy {
            self.writer_free.wait(&mut busy);
        }
        *busy = true;
    }
}

/// Handle to an open store. Cheap to clone and share across threads.
#[derive(Clone)]
pub struct Store {
    shared: Arc<Shared>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("dir", &self.shared.dir)
            .field("seq", &self.shared.committed.read().0)
            .finish()
    }
}

impl Store {
    /// Opens the store persisted under `dir`, replaying its commit log.
    pub fn open(dir: impl AsRef<Path>, options: StoreOptions) -> Result<Self> {
        let dir = dir.as_ref();
        let (log, recovered) = CommitLog::open(dir, options.sync)?;
        ::log::debug!(
            "opened {} at seq {} ({} nodes)",
            log.path().display(),
            recovered.seq,
            recovered.graph.nodes.len()
        );
        Ok(Self::from_parts(
            recovered.graph,
            recovered.seq,
            recovered.next_id,
            Some(log),
            Some(dir.to_path_buf()),
        ))
    }

    /// A store with no backing directory; contents vanish on drop.
    pub fn in_memory() -> Self {
        Self::from_parts(Graph::default(), 0, 1, None, None)
    }

    fn from_parts(
        graph: Graph,
        seq: u64,
        next_id: u64,
        log: Option<CommitLog>,
        dir: Option<PathBuf>,
    ) -> Self {
        Self {
            shared: Arc::new(Shared {
                committed: RwLock::new((seq, graph)),
                writer_busy: Mutex::new(false),
                writer_free: Condvar::new(),
                next_id: AtomicU64::new(next_id),
                log: Mutex::new(log),
                closed: AtomicBool::new(false),
                observer: RwLock::new(None),
                counters: Counters::default(),
                dir,
            }),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.shared.dir.as_deref()
    }

    pub fn begin(&self, mode: Mode) -> Result<Transaction> {
        self.begin_tagged(mode, "")
    }

    pub fn read(&self) -> Result<Transaction> {
        self.begin(Mode::Read)
    }

    pub fn write(&self) -> Result<Transaction> {
        self.begin(Mode::Write)
    }

    /// Begins a transaction whose lifecycle events carry `tag`.
    pub fn begin_tagged(&self, mode: Mode, tag: &'static str) -> Result<Transaction> {
        let shared = &self.shared;
        if shared.closed.load(Ordering::Acquire) {
            return Err(StoreError::Closed);
        }
        if mode == Mode::Write {
            shared.acquire_writer();
            if shared.closed.load(Ordering::Acquire) {
                shared.release_writer();
                return Err(StoreError::Closed);
            }
            shared.counters.writes.fetch_add(1, Ordering::Relaxed);
        } else {
            shared.counters.reads.fetch_add(1, Ordering::Relaxed);
        }
        let (snapshot, graph) = {
            let committed = shared.committed.read();
            (committed.0, committed.1.clone())
        };
        shared.emit(TxEvent {
            kind: TxEventKind::Begin,
            mode,
            tag,
            ops: 0,
        });
        Ok(Transaction {
            shared: Arc::clone(shared),
            mode,
            snapshot,
            graph,
            ops: Vec::new(),
            issued_ids: false,
            tag,
            finished: false,
        })
    }

    /// Refuses new transactions. Open transactions may still finish.
    pub fn close(&self) {
        self.shared.closed.store(true, Ordering::Release);
    }

    pub fn is_closed(&self) -> bool {
        self.shared.closed.load(Ordering::Acquire)
    }

    pub fn stats(&self) -> StoreStats {
        let c = &self.shared.counters;
        StoreStats {
            read_transactions: c.reads.load(Ordering::Relaxed),
            write_transactions: c.writes.load(Ordering::Relaxed),
            commits: c.commits.load(Ordering::Relaxed),
            committed_ops: c.ops.load(Ordering::Relaxed),
        }
    }

    pub fn set_observer(&self, observer: Option<Arc<dyn TxObserver>>) {
        *self.shared.observer.write() = observer;
    }

    /// Commit sequence number of the latest published snapshot.
    pub fn last_commit(&self) -> u64 {
        self.shared.committed.read().0
    }

    /// Declares an equality index over `keys` for nodes labelled `label`.
    /// Indexes live in memory and are rebuilt by declaring them after open.
    pub fn ensure_node_index(&self, label: &str, keys: &[&str]) {
        self.with_committed(|g| {
            g.add_node_index(IndexDef {
                scope: label.to_owned(),
                keys: keys.iter().map(|k| (*k).to_owned()).collect(),
            })
        });
    }

    /// Declares an equality index over `keys` for edges of `kind`.
    pub fn ensure_edge_index(&self, kind: &str, keys: &[&str]) {
        self.with_committed(|g| {
            g.add_edge_index(IndexDef {
                scope: kind.to_owned(),
                keys: keys.iter().map(|k| (*k).to_owned()).collect(),
            })
        });
    }

    fn with_committed(&self, f: impl FnOnce(&mut Graph)) {
        // Holding the writer slot keeps an in-flight writer from publishing a
        // graph that lacks the new index.
        self.shared.acquire_writer();
        f(&mut self.shared.committed.write().1);
        self.shared.release_writer();
    }
}

/// A read or write transaction over one snapshot.
///
/// Dropping an unfinished transaction rolls it back.
pub struct Transaction {
    shared: Arc<Shared>,
    mode: Mode,
    snapshot: u64,
    graph: Graph,
    ops: Vec<Op>,
    issued_ids: bool,
    tag: &'static str,
    finished: bool,
}

impl fmt::Debug for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transaction")
            .field("mode", &self.mode)
            .field("snapshot", &self.snapshot)
            .field("pending_ops", &self.ops.len())
            .finish()
    }
}

impl Transaction {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Commit sequence number this transaction reads from.
    pub fn snapshot(&self) -> u64 {
        self.snapshot
    }

    fn require_write(&self) -> Result<()> {
        match self.mode {
            Mode::Write => Ok(()),
            Mode::Read => Err(StoreError::ReadOnly),
        }
    }

    fn fresh_id(&mut self) -> u64 {
        self.issued_ids = true;
        self.shared.next_id.fetch_add(1, Ordering::SeqCst)
    }

    fn push(&mut self, op: Op) {
        self.graph.apply(op.clone());
        self.ops.push(op);
    }

    // ---- reads ----

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.graph.nodes.get(&id).map(|n| n.as_ref())
    }

    pub fn get_node(&self, id: NodeId) -> Result<&NodeRecord> {
        self.node(id).ok_or(StoreError::UnknownNode(id))
    }

    pub fn edge(&self, id: EdgeId) -> Option<&EdgeRecord> {
        self.graph.edges.get(&id).map(|e| e.as_ref())
    }

    pub fn node_count(&self) -> usize {
        self.graph.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edges.len()
    }

    /// Edges of `kind` leaving `node`, in creation order.
    pub fn outgoing<'a>(
        &'a self,
        node: NodeId,
        kind: &str,
    ) -> impl Iterator<Item = &'a EdgeRecord> + 'a {
        self.adjacent(&self.graph.outgoing, node, kind)
    }

    /// Edges of `kind` entering `node`, in creation order.
    pub fn incoming<'a>(
        &'a self,
        node: NodeId,
        kind: &str,
    ) -> impl Iterator<Item = &'a EdgeRecord> + 'a {
        self.adjacent(&self.graph.incoming, node, kind)
    }

    fn adjacent<'a>(
        &'a self,
        adj: &'a im::HashMap<(NodeId, String), im::OrdSet<EdgeId>>,
        node: NodeId,
        kind: &str,
    ) -> impl Iterator<Item = &'a EdgeRecord> + 'a {
        adj.get(&(node, kind.to_owned()))
            .into_iter()
            .flat_map(|set| set.iter())
            .map(move |id| self.graph.edges[id].as_ref())
    }

    fn effective_filters(filters: &Properties, include_deprecated: bool) -> Properties {
        let mut f = filters.clone();
        if !include_deprecated {
            f.entry(DEPRECATED.to_owned()).or_insert(Value::Bool(false));
        }
        f
    }

    /// Posting list of an index whose keys are exactly the filter keys.
    fn exact_posting(&self, label: &str, filters: &Properties) -> Option<graph::Posting> {
        let (def, postings) = Graph::plan(&self.graph.node_indexes, label, filters)?;
        if def.keys.len() != filters.len() {
            return None;
        }
        let key: Vec<Value> = def.keys.iter().map(|k| filters[k].clone()).collect();
        Some(postings.get(&key).cloned().unwrap_or_default())
    }

    fn node_candidates<'a>(
        &'a self,
        label: &str,
        filters: &Properties,
    ) -> (Box<dyn Iterator<Item = NodeId> + 'a>, Option<usize>) {
        if let Some((def, postings)) = Graph::plan(&self.graph.node_indexes, label, filters) {
            let key: Vec<Value> = def.keys.iter().map(|k| filters[k].clone()).collect();
            let exact = def.keys.len() == filters.len();
            return match postings.get(&key) {
                Some(set) => (
                    Box::new(set.iter().map(|id| NodeId(*id))),
                    exact.then_some(set.len()),
                ),
                None => (Box::new(std::iter::empty()), Some(0)),
            };
        }
        match self.graph.labels.get(label) {
            Some(set) => (Box::new(set.iter().copied()), None),
            None => (Box::new(std::iter::empty()), Some(0)),
        }
    }

    /// Nodes labelled `label` whose properties equal every filter, ordered by
    /// ascending id and paginated. Deprecated nodes are skipped unless
    /// `include_deprecated` is set.
    pub fn match_nodes(
        &self,
        label: &str,
        filters: &Properties,
        page: Page,
        include_deprecated: bool,
    ) -> Vec<Arc<NodeRecord>> {
        let filters = Self::effective_filters(filters, include_deprecated);
        if let Some(ids) = self.exact_posting(label, &filters) {
            let end = ids.len().min(page.skip().saturating_add(page.limit()));
            return (page.skip().min(end)..end)
                .map(|i| self.graph.nodes[&NodeId(ids[i])].clone())
                .collect();
        }
        let (candidates, _) = self.node_candidates(label, &filters);
        candidates
            .map(|id| &self.graph.nodes[&id])
            .filter(|n| graph::matches(&n.properties, &filters))
            .skip(page.skip())
            .take(page.limit())
            .cloned()
            .collect()
    }

    /// Number of nodes [`match_nodes`](Self::match_nodes) would yield across
    /// all pages.
    pub fn count_nodes(&self, label: &str, filters: &Properties, include_deprecated: bool) -> usize {
        let filters = Self::effective_filters(filters, include_deprecated);
        let (candidates, exact) = self.node_candidates(label, &filters);
        if let Some(n) = exact {
            return n;
        }
        candidates
            .filter(|id| graph::matches(&self.graph.nodes[id].properties, &filters))
            .count()
    }

    /// First node (lowest id) matching the filters, deprecated or not.
    pub fn find_node(&self, label: &str, filters: &Properties) -> Option<Arc<NodeRecord>> {
        self.match_nodes(label, filters, Page::new(0, 1).unwrap(), true)
            .into_iter()
            .next()
    }

    /// Edges of `kind` whose properties equal every filter, by ascending id.
    pub fn match_edges(&self, kind: &str, filters: &Properties) -> Vec<Arc<EdgeRecord>> {
        if let Some((def, postings)) = Graph::plan(&self.graph.edge_indexes, kind, filters) {
            let key: Vec<Value> = def.keys.iter().map(|k| filters[k].clone()).collect();
            return postings
                .get(&key)
                .into_iter()
                .flat_map(|set| set.iter())
                .map(|id| &self.graph.edges[&EdgeId(*id)])
                .filter(|e| graph::matches(&e.properties, filters))
                .cloned()
                .collect();
        }
        self.graph
            .edges
            .values()
            .filter(|e| e.kind == kind && graph::matches(&e.properties, filters))
            .cloned()
            .collect()
    }

    // ---- writes ----

    pub fn create_node<L, S>(&mut self, labels: L, properties: Properties) -> Result<NodeId>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.require_write()?;
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(StoreError::EmptyLabels);
        }
        let id = self.fresh_id();
        self.push(Op::CreateNode {
            id: NodeId(id),
            labels,
            properties,
        });
        Ok(NodeId(id))
    }

    pub fn create_edge(
        &mut self,
        kind: &str,
        from: NodeId,
        to: NodeId,
        properties: Properties,
    ) -> Result<EdgeId> {
        self.require_write()?;
        for end in [from, to] {
            if self.node(end).is_none() {
                return Err(StoreError::DanglingEndpoint(end));
            }
        }
        let id = EdgeId(self.fresh_id());
        self.push(Op::CreateEdge {
            id,
            kind: kind.to_owned(),
            from,
            to,
            properties,
        });
        Ok(id)
    }

    /// Merges `properties` into a node. State nodes are immutable.
    pub fn set_node_properties(&mut self, id: NodeId, properties: Properties) -> Result<()> {
        self.require_write()?;
        let node = self.get_node(id)?;
        if node.has_label(STATE_LABEL) {
            return Err(StoreError::ImmutableState(id));
        }
        self.push(Op::SetNodeProperties { id, properties });
        Ok(())
    }

    pub fn delete_edge(&mut self, id: EdgeId) -> Result<()> {
        self.require_write()?;
        if self.edge(id).is_none() {
            return Err(StoreError::UnknownEdge(id));
        }
        self.push(Op::DeleteEdge { id });
        Ok(())
    }

    /// Makes the transaction's effects durable and visible to later readers.
    /// Returns the commit sequence number (the snapshot for read transactions).
    pub fn commit(mut self) -> Result<u64> {
        self.finished = true;
        let shared = Arc::clone(&self.shared);
        if self.mode == Mode::Read {
            shared.emit(TxEvent {
                kind: TxEventKind::Commit,
                mode: Mode::Read,
                tag: self.tag,
                ops: 0,
            });
            return Ok(self.snapshot);
        }
        let ops = std::mem::take(&mut self.ops);
        let n_ops = ops.len();
        let result = if ops.is_empty() {
            Ok(self.snapshot)
        } else {
            let seq = self.snapshot + 1;
            let record = Record::Commit { seq, ops };
            let logged = match shared.log.lock().as_mut() {
                Some(log) => log.append(&record),
                None => Ok(()),
            };
            match logged {
                Ok(()) => {
                    let graph = std::mem::take(&mut self.graph);
                    *shared.committed.write() = (seq, graph);
                    shared.counters.commits.fetch_add(1, Ordering::Relaxed);
                    shared.counters.ops.fetch_add(n_ops as u64, Ordering::Relaxed);
                    Ok(seq)
                }
                Err(e) => {
                    self.note_high_water();
                    Err(e)
                }
            }
        };
        shared.release_writer();
        shared.emit(TxEvent {
            kind: if result.is_ok() {
                TxEventKind::Commit
            } else {
                TxEventKind::Rollback
            },
            mode: Mode::Write,
            tag: self.tag,
            ops: n_ops,
        });
        result
    }

    /// Discards the transaction's effects.
    pub fn rollback(mut self) {
        self.abort();
    }

    fn abort(&mut self) {
        if self.finished {
            return;
        }
        self.finished = true;
        if self.mode == Mode::Write {
            self.note_high_water();
            self.shared.release_writer();
        }
        self.shared.emit(TxEvent {
            kind: TxEventKind::Rollback,
            mode: self.mode,
            tag: self.tag,
            ops: 0,
        });
    }

    /// Records the id high-water mark so ids handed out by an aborted
    /// transaction are not reissued after a restart.
    fn note_high_water(&mut self) {
        if !self.issued_ids {
            return;
        }
        let next_id = self.shared.next_id.load(Ordering::SeqCst);
        if let Some(log) = self.shared.log.lock().as_mut() {
            if let Err(e) = log.append(&Record::HighWater { next_id }) {
                ::log::error!("failed to record id high-water mark: {e}");
            }
        }
    }
}

impl Drop for Transaction {
    fn drop(&mut self) {
        self.abort();
    }
}
