//! The server node: upload and download workflows over the market
//! adapters, APK checks, content store and registry.
//!
//! An upload runs resolve, retrieve, verify, parse and repackaging check,
//! duplicate check, store and register, in that order. Any failure before
//! the store step leaves chain, store, serial database and fee tickets as
//! they were; a failure after it undoes the store pin and the ticket.

mod config;
mod fees;
mod timing;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use dashmap::DashMap;
use num_bigint::BigUint;
use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use tracing::{info, warn};

pub use config::{
    parse_address, AllocationConfig, CastoreConfig, Config, FeeConfig, GatewayNodeConfig, LedgerConfig,
    MarketsConfig, RecordLimits,
};
pub use fees::{FeeBook, FeeRejection, FeeTicket};
pub use timing::{timing_report, PhaseTimings, TimingReport};

use crate::apkcheck::{parse_apk, repack_check, ApkError, ApkSummary, SerialDb};
use crate::castore::{
    consortium_sync, probe_all, CastoreError, ContentId, GatewayInfo, Network, NodeKind, RefreshDaemon,
    RefreshReport, RttProbe, SimClock, SyncError, SyncReport,
};
use crate::hash::{Address, H256};
use crate::ledger::{Ledger, LedgerError, Wei};
use crate::market::{
    self, annotate_origin, assess, fixtures::FixtureCorpus, FallbackEvidence, Fetcher, HostLimited, HttpFetcher,
    MarketError, MarketRegistry, SecurityVerdict, VerdictChannel,
};
use crate::registry::{
    AppRecord, ExecutionOverhead, Registry, RegistryContract, RegistryError, RepackVerdict, StoredApp,
};
use timing::PhaseClock;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no registered market matches {0}")]
    UnknownMarket(String),
    #[error("retrieval failed: {0}")]
    RetrievalFailed(MarketError),
    #[error("upload rejected: {0}")]
    SecurityRejected(SecurityVerdict),
    #[error("invalid apk: {0}")]
    InvalidApk(String),
    #[error("{package} {version} is already stored")]
    Duplicate { package: String, version: String },
    #[error("fee required: supply the id of a donation transaction")]
    FeeRequired,
    #[error("fee rejected ({}): {0}", .0.condition())]
    FeeRejected(FeeRejection),
    #[error("server account {0} is not whitelisted")]
    NotWhitelisted(Address),
    #[error("{package} {version} is not on chain")]
    NotOnChain { package: String, version: String },
    #[error("content store: {0}")]
    Storage(#[from] CastoreError),
    #[error("registry: {0}")]
    Chain(#[from] RegistryError),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<SyncError> for GatewayError {
    fn from(err: SyncError) -> Self {
        match err {
            SyncError::Store(e) => GatewayError::Storage(e),
            SyncError::Registry(e) => GatewayError::Chain(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UploadRequest {
    pub page_url: String,
    #[serde(default)]
    pub fee_tx_id: Option<H256>,
}

impl UploadRequest {
    pub fn new(page_url: impl Into<String>) -> Self {
        UploadRequest {
            page_url: page_url.into(),
            fee_tx_id: None,
        }
    }

    pub fn with_fee(mut self, tx_id: H256) -> Self {
        self.fee_tx_id = Some(tx_id);
        self
    }

    fn validated_url(&self) -> Result<&str, GatewayError> {
        let url = self.page_url.trim();
        if url.is_empty() {
            return Err(GatewayError::InvalidRequest("pageUrl is empty".into()));
        }
        url::Url::parse(url).map_err(|e| GatewayError::InvalidRequest(format!("pageUrl: {e}")))?;
        Ok(url)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UploadResult {
    pub package_name: String,
    pub version_name: String,
    pub content_id: ContentId,
    pub verdict: SecurityVerdict,
    pub repack_verdict: RepackVerdict,
    pub repack_detail: String,
    pub origin_url: String,
    pub tx_id: H256,
    pub block: u64,
    pub gas_used: u64,
    pub fee_ticket: Option<FeeTicket>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FeeEstimate {
    pub gas: u64,
    #[serde(with = "fees::wei_string")]
    pub gas_price: Wei,
    #[serde(with = "fees::wei_string")]
    pub fee: Wei,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DownloadResult {
    pub content_id: ContentId,
    pub bytes: Vec<u8>,
    pub served_by: GatewayInfo,
    pub record: AppRecord,
}

/// What an upload of a page would see, without its side effects.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DryRun {
    pub market_id: String,
    pub download_url: String,
    pub declared_checksum: Option<String>,
    pub rewritten: bool,
    pub size: usize,
    pub content_id: ContentId,
    pub verdict: SecurityVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apk: Option<ApkSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apk_error: Option<String>,
    pub repack: Option<String>,
}

/// Where markets, transport and verification evidence come from.
pub struct MarketEnv {
    pub markets: MarketRegistry,
    pub fetcher: Arc<dyn Fetcher>,
    pub evidence: FallbackEvidence,
    pub serial_db: SerialDb,
}

impl MarketEnv {
    pub fn from_corpus(corpus: &FixtureCorpus) -> Self {
        MarketEnv {
            markets: corpus.registry.clone(),
            fetcher: corpus.web.clone(),
            evidence: corpus.evidence.clone(),
            serial_db: corpus.serial_db.clone(),
        }
    }

    /// From the `[markets]` section: a fixture corpus if one is configured,
    /// otherwise the live web with the configured registry and evidence.
    pub fn load(config: &MarketsConfig) -> Result<Self, GatewayError> {
        let mut env = match &config.fixtures {
            Some(dir) => MarketEnv::from_corpus(&FixtureCorpus::load_dir(dir)?),
            None => {
                let fetcher = HttpFetcher::new(config.http_timeout).map_err(|e| GatewayError::Config(e.to_string()))?;
                MarketEnv {
                    markets: MarketRegistry::default(),
                    fetcher: Arc::new(HostLimited::new(fetcher, config.per_host_connections)),
                    evidence: FallbackEvidence::default(),
                    serial_db: SerialDb::new(),
                }
            }
        };
        if let Some(path) = &config.registry {
            env.markets = MarketRegistry::load(path).map_err(|e| GatewayError::Config(e.to_string()))?;
        }
        if config.known_apps.is_some() || config.developer_serials.is_some() {
            let none = PathBuf::new();
            let extra = FallbackEvidence::load(
                config.known_apps.as_deref().unwrap_or(&none),
                config.developer_serials.as_deref().unwrap_or(&none),
            )?;
            env.evidence.known_apps.extend(extra.known_apps);
            env.evidence.developer_serials.extend(extra.developer_serials);
        }
        if let Some(path) = &config.serial_db {
            env.serial_db.merge(&SerialDb::load(path)?);
        }
        Ok(env)
    }
}

/// RTTs from a fixed table, for gateways that are currently online.
struct SimulatedProbe<'a> {
    rtts: &'a BTreeMap<String, f64>,
    network: &'a Network,
}

impl RttProbe for SimulatedProbe<'_> {
    fn probe(&self, gateway: &GatewayInfo) -> Option<f64> {
        match self.network.is_online(&gateway.name) {
            Ok(true) => self.rtts.get(&gateway.name).copied(),
            _ => None,
        }
    }
}

pub struct Gateway {
    registry: Registry,
    owner: Address,
    server: Address,
    markets: MarketRegistry,
    fetcher: Arc<dyn Fetcher>,
    evidence: RwLock<FallbackEvidence>,
    serial_db: RwLock<SerialDb>,
    serial_db_path: Option<PathBuf>,
    network: Arc<Network>,
    server_node: String,
    pinners: Vec<String>,
    gateways: Vec<GatewayInfo>,
    rtts: BTreeMap<String, f64>,
    refresh: Mutex<RefreshDaemon>,
    fees_enabled: bool,
    fee_book: FeeBook,
    limits: RecordLimits,
    blob_dir: Option<PathBuf>,
    admin_token: Option<String>,
    upload_locks: DashMap<(String, String), Arc<Mutex<()>>>,
}

fn ensure_dir(path: &Path) -> Result<(), GatewayError> {
    std::fs::create_dir_all(path).map_err(GatewayError::from)
}

impl Gateway {
    /// Builds a gateway from configuration alone.
    pub fn from_config(config: &Config) -> Result<Self, GatewayError> {
        Self::open(config, MarketEnv::load(&config.markets)?)
    }

    pub fn open(config: &Config, env: MarketEnv) -> Result<Self, GatewayError> {
        config.validate()?;
        let genesis = config.ledger.genesis();
        let (owner, server, address) = (config.ledger.owner(), config.ledger.server(), config.ledger.registry());
        let contract = Arc::new(RegistryContract::new(owner, ExecutionOverhead::default()));
        if let Some(dir) = &config.data_dir {
            ensure_dir(dir)?;
        }
        let ledger = match &config.data_dir {
            Some(dir) => Ledger::open(dir.join("chain.log"), &genesis, vec![(address, contract)])?,
            None => {
                let ledger = Ledger::new(&genesis);
                ledger.deploy(address, contract);
                ledger
            }
        };
        let registry = Registry::attach(Arc::new(ledger), address);
        if !registry.is_whitelisted(&server) {
            registry.whitelist_add(owner, server)?;
        }

        let castore = &config.castore;
        let network = Arc::new(Network::with_ttl(SimClock::new(), castore.ttl));
        network.add_node(castore.server_node.as_str(), NodeKind::Origin);
        for pinner in &castore.pinners {
            network.add_node(pinner.as_str(), NodeKind::Pinner);
        }
        let mut gateways = Vec::new();
        let mut rtts = BTreeMap::new();
        for gw in &castore.gateways {
            network.add_node(gw.name.as_str(), NodeKind::Gateway);
            gateways.push(GatewayInfo::new(gw.name.as_str(), format!("sim://{}", gw.name)));
            rtts.insert(gw.name.clone(), gw.rtt);
        }

        let blob_dir = config.data_dir.as_ref().map(|d| d.join("blobs"));
        if let Some(dir) = &blob_dir {
            ensure_dir(dir)?;
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                let bytes = std::fs::read(&path)?;
                let cid = network.add(&castore.server_node, &bytes)?;
                if path.file_name().and_then(|n| n.to_str()) != Some(cid.to_string().as_str()) {
                    warn!(path = %path.display(), "blob content does not match its name");
                }
            }
        }

        let mut serial_db = env.serial_db;
        let serial_db_path = config.data_dir.as_ref().map(|d| d.join("serials.tsv"));
        if let Some(path) = &serial_db_path {
            let mut stored = SerialDb::load(path)?;
            let added = stored.merge(&serial_db);
            SerialDb::append_to(path, &added)?;
            serial_db = stored;
        }
        let fee_book = match &config.data_dir {
            Some(dir) => FeeBook::open(&dir.join("fee_tickets.txt"))?,
            None => FeeBook::in_memory(),
        };

        let cids = registry.records()?.into_iter().map(|s| s.record.content_id).collect();
        let refresh = RefreshDaemon::new(cids, rtts.keys().cloned().collect(), castore.refresh_period);
        refresh.check_period(&network)?;

        Ok(Gateway {
            registry,
            owner,
            server,
            markets: env.markets,
            fetcher: env.fetcher,
            evidence: RwLock::new(env.evidence),
            serial_db: RwLock::new(serial_db),
            serial_db_path,
            network,
            server_node: castore.server_node.clone(),
            pinners: castore.pinners.clone(),
            gateways,
            rtts,
            refresh: Mutex::new(refresh),
            fees_enabled: config.fees.enabled,
            fee_book,
            limits: config.limits,
            blob_dir,
            admin_token: config.admin_token.clone(),
            upload_locks: DashMap::new(),
        })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        self.registry.ledger()
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.network
    }

    pub fn markets(&self) -> &MarketRegistry {
        &self.markets
    }

    pub fn fetcher(&self) -> &Arc<dyn Fetcher> {
        &self.fetcher
    }

    pub fn owner(&self) -> Address {
        self.owner
    }

    pub fn server(&self) -> Address {
        self.server
    }

    pub fn server_node(&self) -> &str {
        &self.server_node
    }

    pub fn pinners(&self) -> &[String] {
        &self.pinners
    }

    pub fn fees_enabled(&self) -> bool {
        self.fees_enabled
    }

    pub fn fee_book(&self) -> &FeeBook {
        &self.fee_book
    }

    pub fn serial_db(&self) -> SerialDb {
        self.serial_db.read().clone()
    }

    pub fn evidence(&self) -> FallbackEvidence {
        self.evidence.read().clone()
    }

    /// Constant-time comparison against the configured admin token.
    pub fn admin_authorized(&self, token: Option<&str>) -> bool {
        match (&self.admin_token, token) {
            (Some(expected), Some(given)) if expected.len() == given.len() => {
                expected.bytes().zip(given.bytes()).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
            }
            _ => false,
        }
    }

    pub fn upload(&self, req: &UploadRequest) -> Result<UploadResult, GatewayError> {
        self.upload_timed(req).map(|(result, _)| result)
    }

    /// Runs the upload pipeline and reports how long each phase took.
    pub fn upload_timed(&self, req: &UploadRequest) -> Result<(UploadResult, PhaseTimings), GatewayError> {
        let page_url = req.validated_url()?;
        if self.fees_enabled && req.fee_tx_id.is_none() {
            return Err(GatewayError::FeeRequired);
        }
        let mut clock = PhaseClock::start();

        let retrieved = market::retrieve(&self.markets, self.fetcher.as_ref(), page_url).map_err(|e| match e {
            MarketError::UnknownMarket(url) => GatewayError::UnknownMarket(url),
            other => GatewayError::RetrievalFailed(other),
        })?;
        clock.timings.retrieve = clock.lap();

        let needs_fallback = retrieved.declared_checksum.is_none() && !retrieved.transport_secure;
        let early_parse = needs_fallback.then(|| parse_apk(&retrieved.bytes));
        let serial = early_parse.as_ref().and_then(|p| p.as_ref().ok()).map(|s| s.cert_serial.clone());
        let verdict = assess(&retrieved, &self.evidence.read(), serial.as_ref());
        clock.timings.checksum = clock.lap();
        if !verdict.admits_upload() {
            info!(url = page_url, %verdict, "upload rejected");
            return Err(GatewayError::SecurityRejected(verdict));
        }

        let summary = early_parse
            .unwrap_or_else(|| parse_apk(&retrieved.bytes))
            .map_err(|e: ApkError| GatewayError::InvalidApk(e.to_string()))?;
        self.check_limits(&summary)?;
        let repack = repack_check(&summary, &self.serial_db.read());
        clock.timings.repackaging = clock.lap();

        let identity = (summary.package_name.clone(), summary.version_name.clone());
        let lock = self.upload_locks.entry(identity).or_default().clone();
        let _serialized = lock.lock();
        if self.registry.contains(&summary.package_name, &summary.version_name)? {
            return Err(GatewayError::Duplicate {
                package: summary.package_name,
                version: summary.version_name,
            });
        }
        if !self.registry.is_whitelisted(&self.server) {
            return Err(GatewayError::NotWhitelisted(self.server));
        }
        let ticket = match req.fee_tx_id.filter(|_| self.fees_enabled) {
            Some(tx_id) => {
                let required = self.estimate_for(page_url)?.fee;
                let ticket = self
                    .fee_book
                    .reserve(self.ledger(), self.registry.address(), tx_id, required)
                    .map_err(GatewayError::FeeRejected)?;
                Some(ticket)
            }
            None => None,
        };
        let duplicate_check = clock.lap();

        let release = |ticket: &Option<FeeTicket>| {
            if let Some(t) = ticket {
                self.fee_book.release(&t.tx_id);
            }
        };
        let cid = ContentId::of(&retrieved.bytes);
        let was_pinned = self
            .network
            .inspect(&self.server_node, |n| n.is_pinned(&cid))
            .unwrap_or(false);
        let undo_store = || {
            if !was_pinned {
                let _ = self.network.unpin(&self.server_node, &cid);
                if let Some(dir) = &self.blob_dir {
                    let _ = std::fs::remove_file(dir.join(cid.to_string()));
                }
            }
        };
        if let Err(err) = self.network.add(&self.server_node, &retrieved.bytes) {
            release(&ticket);
            return Err(err.into());
        }
        if let Some(dir) = &self.blob_dir {
            if let Err(err) = std::fs::write(dir.join(cid.to_string()), &retrieved.bytes) {
                release(&ticket);
                undo_store();
                return Err(err.into());
            }
        }
        clock.timings.store_upload = clock.lap();

        let record = AppRecord {
            package_name: summary.package_name.clone(),
            version: summary.version_name.clone(),
            cert_serial: summary.cert_serial.clone(),
            origin_url: annotate_origin(page_url, &verdict),
            repack_verdict: repack.verdict,
            content_id: cid,
        };
        let receipt = match self.registry.store_app(self.server, &record) {
            Ok(receipt) => receipt,
            Err(err) => {
                release(&ticket);
                undo_store();
                return Err(err.into());
            }
        };
        clock.timings.chain_submit = duplicate_check + clock.lap();

        if let Some(t) = &ticket {
            self.fee_book.commit(&t.tx_id)?;
        }
        self.refresh.lock().track(cid);
        info!(package = %record.package_name, version = %record.version, %cid, "stored");

        let result = UploadResult {
            package_name: record.package_name,
            version_name: record.version,
            content_id: cid,
            verdict,
            repack_verdict: repack.verdict,
            repack_detail: repack.to_string(),
            origin_url: record.origin_url,
            tx_id: receipt.tx_id,
            block: self.ledger().head(),
            gas_used: receipt.gas_used,
            fee_ticket: ticket,
        };
        Ok((result, clock.finish()))
    }

    /// Retrieves and vets an app without storing anything.
    pub fn dry_run(&self, page_url: &str) -> Result<DryRun, GatewayError> {
        let page_url = UploadRequest::new(page_url).validated_url()?.to_string();
        let retrieved = market::retrieve(&self.markets, self.fetcher.as_ref(), &page_url).map_err(|e| match e {
            MarketError::UnknownMarket(url) => GatewayError::UnknownMarket(url),
            other => GatewayError::RetrievalFailed(other),
        })?;
        let summary = parse_apk(&retrieved.bytes).map_err(|e| e.to_string());
        let verdict = assess(
            &retrieved,
            &self.evidence.read(),
            summary.as_ref().ok().map(|s| &s.cert_serial),
        );
        let repack = summary.as_ref().ok().map(|s| repack_check(s, &self.serial_db.read()).to_string());
        Ok(DryRun {
            market_id: retrieved.market_id.clone(),
            download_url: retrieved.download_url.clone(),
            declared_checksum: retrieved.declared_checksum.clone(),
            rewritten: retrieved.rewritten,
            size: retrieved.bytes.len(),
            content_id: ContentId::of(&retrieved.bytes),
            verdict,
            apk_error: summary.as_ref().err().cloned(),
            apk: summary.ok(),
            repack,
        })
    }

    fn check_limits(&self, summary: &ApkSummary) -> Result<(), GatewayError> {
        let serial_len = summary.cert_serial.to_bytes_be().len();
        let too_long = |what: &str, max: usize| GatewayError::InvalidApk(format!("{what} exceeds {max} bytes"));
        if summary.package_name.len() > self.limits.package_max {
            return Err(too_long("package name", self.limits.package_max));
        }
        if summary.version_name.len() > self.limits.version_max {
            return Err(too_long("version", self.limits.version_max));
        }
        if serial_len > self.limits.serial_max {
            return Err(too_long("certificate serial", self.limits.serial_max));
        }
        Ok(())
    }

    /// Largest record an upload from `page_url` could produce.
    fn placeholder_record(&self, page_url: &str) -> AppRecord {
        let warning = SecurityVerdict::new(VerdictChannel::UnverifiedWarning, "");
        AppRecord {
            package_name: "p".repeat(self.limits.package_max),
            version: "v".repeat(self.limits.version_max),
            cert_serial: BigUint::from_bytes_be(&vec![0xff; self.limits.serial_max]),
            origin_url: annotate_origin(page_url, &warning),
            repack_verdict: RepackVerdict::Fail,
            content_id: ContentId::of(page_url.as_bytes()),
        }
    }

    fn estimate_for(&self, page_url: &str) -> Result<FeeEstimate, GatewayError> {
        self.markets.lookup(page_url).map_err(|_| GatewayError::UnknownMarket(page_url.to_string()))?;
        let gas = self
            .registry
            .store_app_estimate(self.server, &self.placeholder_record(page_url))?;
        let gas_price = self.ledger().gas_price();
        Ok(FeeEstimate {
            gas,
            gas_price,
            fee: gas as Wei * gas_price,
        })
    }

    /// Upper bound on the gas an upload from this page will cost, priced at
    /// the ledger's gas price. Fetches nothing.
    pub fn estimate_fee(&self, req: &UploadRequest) -> Result<FeeEstimate, GatewayError> {
        self.estimate_for(req.validated_url()?)
    }

    /// Checks a donation against `required` and consumes it.
    pub fn verify_fee(&self, tx_id: H256, required: Wei) -> Result<FeeTicket, FeeRejection> {
        let ticket = self
            .fee_book
            .reserve(self.ledger(), self.registry.address(), tx_id, required)?;
        if let Err(err) = self.fee_book.commit(&tx_id) {
            warn!(%tx_id, %err, "could not persist consumed ticket");
        }
        Ok(ticket)
    }

    /// Gateways ranked by RTT, unreachable ones last.
    pub fn gateways(&self) -> Vec<GatewayInfo> {
        let mut probed = self.gateways.clone();
        probe_all(
            &mut probed,
            &SimulatedProbe {
                rtts: &self.rtts,
                network: &self.network,
            },
        );
        probed.sort_by(|a, b| {
            b.reachable
                .cmp(&a.reachable)
                .then(a.last_rtt.total_cmp(&b.last_rtt))
                .then_with(|| a.name.cmp(&b.name))
        });
        probed
    }

    /// Looks the app up in the chain logs and fetches it through the
    /// fastest gateway that can serve it. Sends no transaction.
    pub fn download(&self, package: &str, version: &str) -> Result<DownloadResult, GatewayError> {
        let stored = self
            .registry
            .find(package, version)?
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::NotOnChain {
                package: package.into(),
                version: version.into(),
            })?;
        let cid = stored.record.content_id;
        let mut last_err = CastoreError::NoGatewayReachable;
        for gateway in self.gateways().into_iter().filter(|g| g.reachable) {
            match self.network.fetch(&cid, &gateway.name) {
                Ok(bytes) if cid.verifies(&bytes) => {
                    return Ok(DownloadResult {
                        content_id: cid,
                        bytes,
                        served_by: gateway,
                        record: stored.record,
                    })
                }
                Ok(_) => last_err = CastoreError::IntegrityMismatch(cid),
                Err(err @ CastoreError::IntegrityMismatch(_)) => last_err = err,
                Err(err) if !matches!(last_err, CastoreError::IntegrityMismatch(_)) => last_err = err,
                Err(_) => {}
            }
        }
        Err(last_err.into())
    }

    pub fn apps(&self, offset: usize, limit: usize) -> Result<Vec<StoredApp>, GatewayError> {
        Ok(self.registry.records()?.into_iter().skip(offset).take(limit).collect())
    }

    pub fn app(&self, package: &str, version: &str) -> Result<Option<StoredApp>, GatewayError> {
        Ok(self.registry.find(package, version)?.into_iter().next())
    }

    pub fn whitelist_add(&self, member: Address) -> Result<H256, GatewayError> {
        Ok(self.registry.whitelist_add(self.owner, member)?.tx_id)
    }

    pub fn whitelist_remove(&self, member: Address) -> Result<H256, GatewayError> {
        Ok(self.registry.whitelist_remove(self.owner, member)?.tx_id)
    }

    /// Adds official serials; returns the pairs that were new.
    pub fn import_serials(&self, entries: &SerialDb) -> Result<Vec<(String, BigUint)>, GatewayError> {
        let mut db = self.serial_db.write();
        let added = db.merge(entries);
        if let Some(path) = &self.serial_db_path {
            SerialDb::append_to(path, &added)?;
        }
        Ok(added)
    }

    /// Pins everything indexed on chain at every consortium pinner.
    pub fn sync(&self) -> Result<Vec<(String, SyncReport)>, GatewayError> {
        self.pinners
            .iter()
            .map(|p| Ok((p.clone(), consortium_sync(&self.network, p, &self.registry)?)))
            .collect()
    }

    /// One refresh pass through every gateway.
    pub fn refresh(&self) -> RefreshReport {
        self.refresh.lock().run_cycle(&self.network)
    }

    /// Moves the store's clock forward, collecting garbage and running the
    /// refresh daemon if it is due.
    pub fn advance(&self, by: Duration) -> Option<RefreshReport> {
        self.network.clock().advance(by);
        self.network.gc_all();
        self.refresh.lock().poll(&self.network)
    }
}

#[cfg(test)]
mod tests;
