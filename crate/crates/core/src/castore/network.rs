use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::{CastoreError, ContentId};

/// Simulated clock in milliseconds. Only the driver advances it.
#[derive(Clone, Default)]
pub struct SimClock(Arc<AtomicU64>);

/// Milliseconds since simulation start.
pub type SimTime = u64;

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.0.load(Ordering::SeqCst)
    }

    pub fn advance(&self, by: Duration) -> SimTime {
        self.0.fetch_add(by.as_millis() as u64, Ordering::SeqCst) + by.as_millis() as u64
    }

    pub fn set(&self, at: SimTime) {
        self.0.store(at, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Origin,
    Gateway,
    Pinner,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Origin => "origin",
            NodeKind::Gateway => "gateway",
            NodeKind::Pinner => "pinner",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheEntry {
    pub content_id: ContentId,
    pub cached_at: SimTime,
    pub ttl: Duration,
}

impl CacheEntry {
    pub fn expired(&self, now: SimTime) -> bool {
        now.saturating_sub(self.cached_at) > self.ttl.as_millis() as u64
    }
}

/// One storage node. Pinned content is never collected; cached content is
/// collectable once its TTL has elapsed.
pub struct StoreNode {
    pub id: String,
    pub kind: NodeKind,
    pub online: bool,
    pub ttl: Duration,
    pinned: BTreeSet<ContentId>,
    cache: BTreeMap<ContentId, CacheEntry>,
    blobs: HashMap<ContentId, Arc<Vec<u8>>>,
    corrupt: BTreeSet<ContentId>,
}

impl StoreNode {
    fn new(id: String, kind: NodeKind, ttl: Duration) -> Self {
        StoreNode {
            id,
            kind,
            online: true,
            ttl,
            pinned: BTreeSet::new(),
            cache: BTreeMap::new(),
            blobs: HashMap::new(),
            corrupt: BTreeSet::new(),
        }
    }

    pub fn is_pinned(&self, cid: &ContentId) -> bool {
        self.pinned.contains(cid)
    }

    pub fn cache_entry(&self, cid: &ContentId) -> Option<CacheEntry> {
        self.cache.get(cid).copied()
    }

    pub fn pinned(&self) -> impl Iterator<Item = &ContentId> {
        self.pinned.iter()
    }

    /// Whether this node can serve `cid` at `now`.
    pub fn holds(&self, cid: &ContentId, now: SimTime) -> bool {
        self.online
            && (self.pinned.contains(cid)
                || self.cache.get(cid).is_some_and(|e| !e.expired(now)))
    }

    fn serve(&self, cid: &ContentId, now: SimTime) -> Option<Vec<u8>> {
        if !self.holds(cid, now) {
            return None;
        }
        let mut bytes = self.blobs.get(cid)?.as_ref().clone();
        if self.corrupt.contains(cid) {
            match bytes.first_mut() {
                Some(b) => *b ^= 0xff,
                None => bytes.push(0),
            }
        }
        Some(bytes)
    }

    fn install_cache(&mut self, cid: ContentId, bytes: Arc<Vec<u8>>, now: SimTime) {
        self.blobs.entry(cid).or_insert(bytes);
        self.cache.insert(
            cid,
            CacheEntry {
                content_id: cid,
                cached_at: now,
                ttl: self.ttl,
            },
        );
    }

    fn gc(&mut self, now: SimTime) -> BTreeSet<ContentId> {
        let evict: BTreeSet<ContentId> = self
            .cache
            .values()
            .filter(|e| e.expired(now) && !self.pinned.contains(&e.content_id))
            .map(|e| e.content_id)
            .collect();
        for cid in &evict {
            self.cache.remove(cid);
            self.blobs.remove(cid);
        }
        evict
    }
}

/// In-process network of storage nodes sharing one simulated clock.
///
/// Each node sits behind its own lock, so operations on distinct nodes do
/// not contend.
pub struct Network {
    clock: SimClock,
    default_ttl: Duration,
    nodes: RwLock<BTreeMap<String, Arc<Mutex<StoreNode>>>>,
}

impl Network {
    pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);

    pub fn new(clock: SimClock) -> Self {
        Self::with_ttl(clock, Self::DEFAULT_TTL)
    }

    pub fn with_ttl(clock: SimClock, default_ttl: Duration) -> Self {
        Network {
            clock,
            default_ttl,
            nodes: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn now(&self) -> SimTime {
        self.clock.now()
    }

    pub fn add_node(&self, id: impl Into<String>, kind: NodeKind) -> String {
        self.add_node_with_ttl(id, kind, self.default_ttl)
    }

    pub fn add_node_with_ttl(&self, id: impl Into<String>, kind: NodeKind, ttl: Duration) -> String {
        let id = id.into();
        self.nodes
            .write()
            .insert(id.clone(), Arc::new(Mutex::new(StoreNode::new(id.clone(), kind, ttl))));
        id
    }

    fn node(&self, id: &str) -> Result<Arc<Mutex<StoreNode>>, CastoreError> {
        self.nodes
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| CastoreError::UnknownNode(id.to_string()))
    }

    pub fn node_ids(&self) -> Vec<String> {
        self.nodes.read().keys().cloned().collect()
    }

    pub fn kind(&self, id: &str) -> Result<NodeKind, CastoreError> {
        Ok(self.node(id)?.lock().kind)
    }

    /// Runs `f` with the node locked.
    pub fn inspect<T>(&self, id: &str, f: impl FnOnce(&StoreNode) -> T) -> Result<T, CastoreError> {
        let node = self.node(id)?;
        let guard = node.lock();
        Ok(f(&guard))
    }

    pub fn set_online(&self, id: &str, online: bool) -> Result<(), CastoreError> {
        self.node(id)?.lock().online = online;
        Ok(())
    }

    pub fn is_online(&self, id: &str) -> Result<bool, CastoreError> {
        Ok(self.node(id)?.lock().online)
    }

    /// Test hook: the node serves a flipped first byte for `cid` from now on.
    pub fn corrupt(&self, id: &str, cid: ContentId) -> Result<(), CastoreError> {
        self.node(id)?.lock().corrupt.insert(cid);
        Ok(())
    }

    /// Stores and pins `bytes` at `node`.
    pub fn add(&self, node: &str, bytes: &[u8]) -> Result<ContentId, CastoreError> {
        let node = self.node(node)?;
        let mut guard = node.lock();
        if !guard.online {
            return Err(CastoreError::NodeOffline(guard.id.clone()));
        }
        let cid = ContentId::of(bytes);
        guard.blobs.insert(cid, Arc::new(bytes.to_vec()));
        guard.pinned.insert(cid);
        Ok(cid)
    }

    pub fn pin(&self, node: &str, cid: ContentId) -> Result<(), CastoreError> {
        let node = self.node(node)?;
        let mut guard = node.lock();
        if !guard.blobs.contains_key(&cid) {
            return Err(CastoreError::NotFound(cid));
        }
        guard.pinned.insert(cid);
        Ok(())
    }

    /// Drops a pin; the bytes go too unless a live cache entry still needs them.
    /// Returns whether the pin existed.
    pub fn unpin(&self, node: &str, cid: &ContentId) -> Result<bool, CastoreError> {
        let node = self.node(node)?;
        let mut guard = node.lock();
        let existed = guard.pinned.remove(cid);
        if existed && !guard.cache.contains_key(cid) {
            guard.blobs.remove(cid);
        }
        Ok(existed)
    }

    /// Per node: (pinned, cached) content ids. For state comparisons.
    pub fn holdings(&self) -> BTreeMap<String, (BTreeSet<ContentId>, BTreeSet<ContentId>)> {
        self.nodes
            .read()
            .iter()
            .map(|(id, n)| {
                let guard = n.lock();
                (id.clone(), (guard.pinned.clone(), guard.cache.keys().copied().collect()))
            })
            .collect()
    }

    /// Whether any online node can serve `cid` right now.
    pub fn is_available(&self, cid: &ContentId) -> bool {
        let now = self.now();
        self.nodes
            .read()
            .values()
            .any(|n| n.lock().holds(cid, now))
    }

    /// Pulls bytes for `cid` from the first online provider (by node id,
    /// skipping `exclude`) whose bytes verify.
    fn locate(&self, cid: &ContentId, exclude: &str) -> Result<Arc<Vec<u8>>, CastoreError> {
        let now = self.now();
        let nodes: Vec<_> = self.nodes.read().values().cloned().collect();
        let mut saw_corrupt = false;
        for node in nodes {
            let served = {
                let guard = node.lock();
                if guard.id == exclude {
                    continue;
                }
                guard.serve(cid, now)
            };
            if let Some(bytes) = served {
                if cid.verifies(&bytes) {
                    return Ok(Arc::new(bytes));
                }
                saw_corrupt = true;
            }
        }
        if saw_corrupt {
            Err(CastoreError::IntegrityMismatch(*cid))
        } else {
            Err(CastoreError::NotFound(*cid))
        }
    }

    /// Fetches `cid` through `via` (a gateway, or a pinner serving its own
    /// gateway interface). On success `via` caches the content with a fresh
    /// TTL, including when it already held it.
    pub fn fetch(&self, cid: &ContentId, via: &str) -> Result<Vec<u8>, CastoreError> {
        let via_node = self.node(via)?;
        let now = self.now();
        {
            let guard = via_node.lock();
            if !guard.online {
                return Err(CastoreError::NodeOffline(guard.id.clone()));
            }
            if guard.kind == NodeKind::Origin {
                return Err(CastoreError::NotAGateway(guard.id.clone()));
            }
        }
        let local = via_node.lock().serve(cid, now);
        let bytes = match local {
            Some(bytes) if cid.verifies(&bytes) => Arc::new(bytes),
            Some(_) => return Err(CastoreError::IntegrityMismatch(*cid)),
            None => self.locate(cid, via)?,
        };
        let mut guard = via_node.lock();
        guard.install_cache(*cid, bytes.clone(), now);
        Ok(bytes.as_ref().clone())
    }

    /// Retrieves `cid` from the network and pins it at `node`.
    pub fn fetch_and_pin(&self, node: &str, cid: &ContentId) -> Result<bool, CastoreError> {
        let target = self.node(node)?;
        {
            let guard = target.lock();
            if !guard.online {
                return Err(CastoreError::NodeOffline(guard.id.clone()));
            }
            if guard.pinned.contains(cid) {
                return Ok(false);
            }
        }
        let now = self.now();
        let local = target.lock().serve(cid, now).filter(|b| cid.verifies(b));
        let bytes = match local {
            Some(b) => Arc::new(b),
            None => self.locate(cid, node)?,
        };
        let mut guard = target.lock();
        guard.blobs.insert(*cid, bytes);
        guard.pinned.insert(*cid);
        Ok(true)
    }

    /// Evicts expired, unpinned cache entries at `node`.
    pub fn gc(&self, node: &str) -> Result<BTreeSet<ContentId>, CastoreError> {
        let now = self.now();
        Ok(self.node(node)?.lock().gc(now))
    }

    pub fn gc_all(&self) -> BTreeMap<String, BTreeSet<ContentId>> {
        let now = self.now();
        self.nodes
            .read()
            .iter()
            .map(|(id, n)| (id.clone(), n.lock().gc(now)))
            .filter(|(_, evicted)| !evicted.is_empty())
            .collect()
    }
}
