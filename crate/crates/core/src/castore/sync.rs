use std::collections::BTreeSet;

use super::network::Network;
use super::{CastoreError, ContentId};
use crate::registry::{Registry, RegistryError};

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct SyncReport {
    pub indexed: usize,
    pub newly_pinned: BTreeSet<ContentId>,
    pub failures: Vec<(ContentId, String)>,
}

/// Pins at `pinner` every content id indexed by the registry. Running it
/// again pins nothing new. Content that cannot be retrieved is reported per
/// id and does not stop the run.
pub fn consortium_sync(
    network: &Network,
    pinner: &str,
    registry: &Registry,
) -> Result<SyncReport, SyncError> {
    if !network.is_online(pinner)? {
        return Err(CastoreError::NodeOffline(pinner.to_string()).into());
    }
    let cids: BTreeSet<ContentId> = registry
        .records()?
        .into_iter()
        .map(|s| s.record.content_id)
        .collect();
    Ok(pin_all(network, pinner, cids))
}

/// Pins every id in `cids` at `pinner`.
pub fn pin_all(network: &Network, pinner: &str, cids: impl IntoIterator<Item = ContentId>) -> SyncReport {
    let mut report = SyncReport::default();
    for cid in cids {
        report.indexed += 1;
        match network.fetch_and_pin(pinner, &cid) {
            Ok(true) => {
                report.newly_pinned.insert(cid);
            }
            Ok(false) => {}
            Err(err) => report.failures.push((cid, err.to_string())),
        }
    }
    report
}

#[derive(Debug, thiserror::Error)]
pub enum SyncError {
    #[error(transparent)]
    Store(#[from] CastoreError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}
