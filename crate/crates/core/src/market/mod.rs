//! Upstream market adapters.
//!
//! A [`MarketRegistry`] maps page URLs to per-market extraction rules. A
//! retrieval resolves the download URL, reads any checksum the page
//! declares, optionally upgrades the link to https and downloads the APK;
//! [`assess`] then turns the result into a [`SecurityVerdict`].

mod extract;
mod fetch;
pub mod fixtures;
mod pattern;
mod verdict;

use serde::Serialize;
use url::Url;

pub use extract::{direct_file_url, extract_checksum, https_rewrite, resolve_download_url, script_value};
pub use fetch::{FetchError, Fetcher, FixtureWeb, HostLimited, HttpFetcher};
pub use pattern::{ChecksumSource, DownloadUrlRule, HostSubstitution, MarketPattern, MarketRegistry, UrlPattern};
pub use verdict::{
    annotate_origin, assess, fallback_verify, is_flagged_unverified, md5_hex, sha256, verify_checksum,
    verify_digest, FallbackEvidence, SecurityVerdict, VerdictChannel,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarketError {
    #[error("no registered market matches {0}")]
    UnknownMarket(String),
    #[error("{url} does not match market {market}")]
    PatternMismatch { market: String, url: String },
    #[error("market {market}: download url extraction failed: {reason}")]
    ExtractionFailed { market: String, reason: String },
    #[error("market {market}: declared checksum missing: {reason}")]
    ChecksumSourceMissing { market: String, reason: String },
    #[error("https rewrite inapplicable: {0}")]
    RewriteInapplicable(String),
    #[error("invalid url {0}")]
    InvalidUrl(String),
    #[error("retrieval failed: {0}")]
    Retrieval(#[from] FetchError),
    #[error("downloaded file is empty")]
    EmptyDownload,
    #[error("market registry: {0}")]
    Registry(String),
}

/// An APK as downloaded from its market, before any verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetrievedApp {
    #[serde(skip)]
    pub bytes: Vec<u8>,
    pub market_id: String,
    pub origin_page_url: String,
    pub download_url: String,
    pub declared_checksum: Option<String>,
    pub transport_secure: bool,
    /// The download URL was produced by an https rewrite.
    pub rewritten: bool,
}

/// Steps of [`retrieve`] before the APK download itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub market_id: String,
    pub page_url: String,
    pub download_url: String,
    pub declared_checksum: Option<String>,
    pub rewritten: bool,
}

/// Finds the market, reads its page and works out what to download.
pub fn resolve(
    registry: &MarketRegistry,
    fetcher: &dyn Fetcher,
    page_url: &str,
) -> Result<Resolution, MarketError> {
    let url = Url::parse(page_url).map_err(|e| MarketError::InvalidUrl(format!("{page_url}: {e}")))?;
    let pattern = registry.lookup(page_url)?;
    let page = match pattern.download {
        DownloadUrlRule::Direct => Vec::new(),
        _ => fetcher.get(&url)?,
    };
    let resolved = resolve_download_url(pattern, &page, page_url)?;
    let declared_checksum = extract_checksum(pattern, &page, resolved.as_str())?;
    let (download_url, rewritten) = match pattern.download {
        DownloadUrlRule::HttpsRewrite { .. } => (https_rewrite(pattern, resolved.as_str())?, true),
        _ => (resolved, false),
    };
    Ok(Resolution {
        market_id: pattern.id.clone(),
        page_url: page_url.to_string(),
        download_url: download_url.to_string(),
        declared_checksum,
        rewritten,
    })
}

/// Downloads what a resolution points at.
pub fn download(fetcher: &dyn Fetcher, resolution: Resolution) -> Result<RetrievedApp, MarketError> {
    let url = Url::parse(&resolution.download_url)
        .map_err(|e| MarketError::InvalidUrl(format!("{}: {e}", resolution.download_url)))?;
    let bytes = fetcher.get(&url)?;
    if bytes.is_empty() {
        return Err(MarketError::EmptyDownload);
    }
    Ok(RetrievedApp {
        bytes,
        market_id: resolution.market_id,
        origin_page_url: resolution.page_url,
        transport_secure: url.scheme() == "https",
        download_url: resolution.download_url,
        declared_checksum: resolution.declared_checksum,
        rewritten: resolution.rewritten,
    })
}

/// [`resolve`] then [`download`].
pub fn retrieve(
    registry: &MarketRegistry,
    fetcher: &dyn Fetcher,
    page_url: &str,
) -> Result<RetrievedApp, MarketError> {
    download(fetcher, resolve(registry, fetcher, page_url)?)
}
