//! Gateway configuration file.
//!
//! Every key is optional; an empty file gives an in-memory gateway on the
//! fixture-free defaults below.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! data_dir = "var/appgate"        # chain.log, serials.tsv, fee_tickets.txt, blobs/
//! admin_token = "change-me"       # admin routes are disabled without one
//!
//! [ledger]
//! gas_price_wei = "1000000000"
//! owner = "owner"                 # 0x-prefixed hex, or a label hashed to an address
//! server = "server"
//! registry = "registry"
//! allocations = [{ account = "server", balance_wei = "100000000000000000000" }]
//!
//! [fees]
//! enabled = false
//!
//! [markets]
//! registry = "markets.toml"
//! known_apps = "known_apps.txt"
//! developer_serials = "developer_serials.txt"
//! serial_db = "serials.tsv"       # official serials imported at startup
//! fixtures = "fixtures/"          # serve a fixture corpus instead of the live web
//! http_timeout = "30s"
//! per_host_connections = 4
//!
//! [castore]
//! ttl = "30m"
//! refresh_period = "10m"
//! server_node = "server-node"
//! pinners = ["consortium-1"]
//! gateways = [{ name = "ipfs.jbb.one", rtt = 0.04 }]
//!
//! [limits]
//! package_max = 128
//! version_max = 32
//! serial_max = 32
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::castore::{RefreshDaemon, PUBLIC_GATEWAY_RTTS};
use crate::hash::Address;
use crate::ledger::{Genesis, Wei};

use super::GatewayError;

pub(crate) mod duration_text {
    use super::*;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&humantime::format_duration(*d).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let text = String::deserialize(d)?;
        humantime::parse_duration(&text).map_err(serde::de::Error::custom)
    }
}

mod wei_text {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Wei, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Wei, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(v as Wei),
            Raw::Text(t) => t.trim().parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `0x`-prefixed 40-hex address, or any other text hashed to one.
pub fn parse_address(text: &str) -> Address {
    match text.parse::<Address>() {
        Ok(address) if text.starts_with("0x") => address,
        _ => Address::from_label(text),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationConfig {
    pub account: String,
    #[serde(with = "wei_text")]
    pub balance_wei: Wei,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LedgerConfig {
    #[serde(with = "wei_text")]
    pub gas_price_wei: Wei,
    pub owner: String,
    pub server: String,
    pub registry: String,
    pub allocations: Vec<AllocationConfig>,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            gas_price_wei: Genesis::ONE_GWEI,
            owner: "owner".into(),
            server: "server".into(),
            registry: "registry".into(),
            allocations: vec![
                AllocationConfig {
                    account: "owner".into(),
                    balance_wei: 100 * 10u128.pow(18),
                },
                AllocationConfig {
                    account: "server".into(),
                    balance_wei: 100 * 10u128.pow(18),
                },
            ],
        }
    }
}

impl LedgerConfig {
    pub fn owner(&self) -> Address {
        parse_address(&self.owner)
    }

    pub fn server(&self) -> Address {
        parse_address(&self.server)
    }

    pub fn registry(&self) -> Address {
        parse_address(&self.registry)
    }

    pub fn genesis(&self) -> Genesis {
        self.allocations
            .iter()
            .fold(Genesis::new(self.gas_price_wei), |g, a| g.fund(parse_address(&a.account), a.balance_wei))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeeConfig {
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketsConfig {
    pub registry: Option<PathBuf>,
    pub known_apps: Option<PathBuf>,
    pub developer_serials: Option<PathBuf>,
    pub serial_db: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    #[serde(with = "duration_text")]
    pub http_timeout: Duration,
    pub per_host_connections: usize,
}

impl Default for MarketsConfig {
    fn default() -> Self {
        MarketsConfig {
            registry: None,
            known_apps: None,
            developer_serials: None,
            serial_db: None,
            fixtures: None,
            http_timeout: Duration::from_secs(30),
            per_host_connections: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayNodeConfig {
    pub name: String,
    /// Simulated round-trip time in seconds.
    pub rtt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CastoreConfig {
    #[serde(with = "duration_text")]
    pub ttl: Duration,
    #[serde(with = "duration_text")]
    pub refresh_period: Duration,
    pub server_node: String,
    pub pinners: Vec<String>,
    pub gateways: Vec<GatewayNodeConfig>,
}

impl Default for CastoreConfig {
    fn default() -> Self {
        CastoreConfig {
            ttl: crate::castore::Network::DEFAULT_TTL,
            refresh_period: RefreshDaemon::DEFAULT_PERIOD,
            server_node: "server-node".into(),
            pinners: vec!["consortium-1".into()],
            gateways: PUBLIC_GATEWAY_RTTS
                .iter()
                .map(|(name, _, _, rtt)| GatewayNodeConfig {
                    name: name.to_string(),
                    rtt: *rtt,
                })
                .collect(),
        }
    }
}

/// Byte limits on record fields; fee estimates assume records this large.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordLimits {
    pub package_max: usize,
    pub version_max: usize,
    pub serial_max: usize,
}

impl Default for RecordLimits {
    fn default() -> Self {
        RecordLimits {
            package_max: 128,
            version_max: 32,
            serial_max: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub listen: SocketAddr,
    pub data_dir: Option<PathBuf>,
    pub admin_token: Option<String>,
    pub ledger: LedgerConfig,
    pub fees: FeeConfig,
    pub markets: MarketsConfig,
    pub castore: CastoreConfig,
    pub limits: RecordLimits,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: ([127, 0, 0, 1], 8080).into(),
            data_dir: None,
            admin_token: None,
            ledger: LedgerConfig::default(),
            fees: FeeConfig::default(),
            markets: MarketsConfig::default(),
            castore: CastoreConfig::default(),
            limits: RecordLimits::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let config: Config = toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.data_dir);
        fix(&mut self.markets.registry);
        fix(&mut self.markets.known_apps);
        fix(&mut self.markets.developer_serials);
        fix(&mut self.markets.serial_db);
        fix(&mut self.markets.fixtures);
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let fail = |m: &str| Err(GatewayError::Config(m.to_string()));
        if self.castore.refresh_period >= self.castore.ttl {
            return fail("castore.refresh_period must be shorter than castore.ttl");
        }
        if self.castore.gateways.is_empty() {
            return fail("castore.gateways is empty");
        }
        let mut names: Vec<&str> = self.castore.gateways.iter().map(|g| g.name.as_str()).collect();
        names.extend(self.castore.pinners.iter().map(String::as_str));
        names.push(&self.castore.server_node);
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        if unique.len() != names.len() {
            return fail("castore node names must be unique");
        }
        if self.markets.per_host_connections == 0 {
            return fail("markets.per_host_connections must be positive");
        }
        if self.ledger.owner() == self.ledger.server() {
            return fail("ledger.owner and ledger.server must differ");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
