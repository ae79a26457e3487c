//! Simulated content-addressed storage network.
//!
//! Origin nodes hold what was added to them, gateways cache on request for a
//! TTL, pinners keep everything they pin. Content is available exactly when
//! some online node has it pinned or cached and unexpired.

mod cid;
pub mod http;
mod network;
mod refresh;
pub mod scenario;
mod select;
mod sync;

use std::time::Duration;

pub use cid::{CidError, ContentId};
pub use network::{CacheEntry, Network, NodeKind, SimClock, SimTime, StoreNode};
pub use refresh::{advance_with_refresh, RefreshDaemon, RefreshReport};
pub use select::{
    fastest, probe_all, public_gateway_probe, public_gateways, select_gateway, GatewayInfo,
    RttProbe, TableProbe, PUBLIC_GATEWAY_RTTS,
};
pub use sync::{consortium_sync, pin_all, SyncError, SyncReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CastoreError {
    #[error("content {0} is not available from any online node")]
    NotFound(ContentId),
    #[error("served bytes do not hash to {0}")]
    IntegrityMismatch(ContentId),
    #[error("node {0} is offline")]
    NodeOffline(String),
    #[error("node {0} does not serve a gateway interface")]
    NotAGateway(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("no gateway reachable")]
    NoGatewayReachable,
    #[error("refresh period {period:?} does not undercut gateway ttl {ttl:?}")]
    RefreshTooSlow { period: Duration, ttl: Duration },
    #[error("gateway transport error: {0}")]
    Transport(String),
}

#[cfg(test)]
mod tests;
