//! Fixture markets: authored pages and APKs for every extraction mechanism.
//!
//! | market | download link | checksum |
//! |---|---|---|
//! | `anchor-md5` | `<a id="download" href>` | MD5 as file name |
//! | `query-md5` | URL embedded in page text | `md5=` query parameter |
//! | `path-md5` | `data-apk` attribute | MD5 path segment |
//! | `script-md5` | `downloadUrl` in a script block | `apkMd5` in the same block |
//! | `https-upgrade` | `<a class="dl">`, rewritten to https on another host | none |
//! | `plain-a` | `<a class="download-link">` | none |
//! | `plain-b` | URL embedded in an `onclick` handler | none |
//! | `github` | the blob URL itself, as a raw link | none, https |
//!
//! On disk a corpus is `markets.toml`, `known_apps.txt`,
//! `developer_serials.txt`, `serials.tsv` and one directory per published
//! app, `<market>/<n>/{page.html, app.apk, meta.toml}`.

use std::path::Path;
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{md5_hex, FallbackEvidence, FixtureWeb, MarketRegistry};
use crate::apkcheck::fixture::ApkBuilder;
use crate::apkcheck::{parse_apk, SerialDb};
use crate::registry::serial_hex;

/// Checksum declared by the tampered-download page.
pub const MITM_DECLARED_MD5: &str = "f5580d6a58bb9d97c27929f1a9c585f1";
/// Digest of the tampered file in the reference incident. No fixture
/// reproduces it: authoring bytes with a chosen MD5 is a preimage attack.
pub const MITM_REPORTED_TAMPERED_MD5: &str = "a05e5187f4e9eb434bc3bbd792e35c54";

pub const MARKETS_TOML: &str = r#"
[[market]]
id = "anchor-md5"
page_url_pattern = 'http://anchor\.market\.test/app/\d+'
download = { rule = "html_attribute", selector = "a#download", attribute = "href" }
checksum = { source = "in_download_url" }

[[market]]
id = "query-md5"
page_url_pattern = 'http://query\.market\.test/details\?id=\d+'
download = { rule = "url_embedded", pattern = "(http://cdn\\.query\\.market\\.test/apk/[^\"'\\s<>]+)" }
checksum = { source = "in_download_url" }

[[market]]
id = "path-md5"
page_url_pattern = 'http://path\.market\.test/soft/\d+\.html'
download = { rule = "html_attribute", selector = "span.btn[data-apk]", attribute = "data-apk" }
checksum = { source = "in_download_url" }

[[market]]
id = "script-md5"
page_url_pattern = 'http://script\.market\.test/app/[A-Za-z0-9._]+'
download = { rule = "script_embedded", key = "downloadUrl" }
checksum = { source = "in_script_block", key = "apkMd5" }

[[market]]
id = "https-upgrade"
page_url_pattern = 'http://upgrade\.market\.test/apps/\d+'
download = { rule = "https_rewrite", selector = "a.dl", attribute = "href", host = { from = "dl.upgrade.market.test", to = "secure.upgrade.market.test" } }
checksum = { source = "none" }

[[market]]
id = "plain-a"
page_url_pattern = 'http://plain-a\.market\.test/item/\d+'
download = { rule = "html_attribute", selector = "a.download-link", attribute = "href" }
checksum = { source = "none" }

[[market]]
id = "plain-b"
page_url_pattern = 'http://plain-b\.market\.test/\?app=\d+'
download = { rule = "url_embedded", pattern = "(http://mirror\\.plain-b\\.market\\.test/[^\"'\\s<>]+\\.apk)" }
checksum = { source = "none" }

[[market]]
id = "github"
page_url_pattern = 'https://(github\.com/[^/]+/[^/]+/(blob|raw)|raw\.githubusercontent\.com/[^/]+/[^/]+)/.+\.apk'
download = { rule = "direct" }
checksum = { source = "none" }
transport_secure = true
"#;

pub const MARKET_IDS: [&str; 8] = [
    "anchor-md5",
    "query-md5",
    "path-md5",
    "script-md5",
    "https-upgrade",
    "plain-a",
    "plain-b",
    "github",
];

/// Markets whose pages declare a checksum.
pub const CHECKSUM_MARKETS: [&str; 4] = ["anchor-md5", "query-md5", "path-md5", "script-md5"];

/// One published app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureApp {
    pub market_id: String,
    pub page_url: String,
    pub download_url: String,
    pub package: String,
    pub version: String,
    #[serde(with = "serial_hex")]
    pub serial: BigUint,
    #[serde(skip)]
    pub page: Vec<u8>,
    #[serde(skip)]
    pub apk: Vec<u8>,
}

/// Registry, transport and verification evidence for a set of fixture apps.
pub struct FixtureCorpus {
    pub registry: MarketRegistry,
    pub web: Arc<FixtureWeb>,
    pub evidence: FallbackEvidence,
    pub serial_db: SerialDb,
    apps: Vec<FixtureApp>,
    next_id: u64,
}

struct Authored {
    page_url: String,
    download_url: String,
    page: String,
}

fn author(market: &str, n: u64, package: &str, md5: &str) -> Authored {
    let (page_url, download_url, body) = match market {
        "anchor-md5" => (
            format!("http://anchor.market.test/app/{n}"),
            format!("http://anchor.market.test/dl/{md5}.apk"),
            format!(r#"<h1>{package}</h1><p>Size 2 MB</p><a id="download" href="/dl/{md5}.apk">Download</a>"#),
        ),
        "query-md5" => {
            let url = format!("http://cdn.query.market.test/apk/{package}.apk?md5={}&v={n}", md5.to_uppercase());
            (
                format!("http://query.market.test/details?id={n}"),
                url.clone(),
                format!(
                    r#"<div class="info" data-src="{}">{package}</div><button>Install</button>"#,
                    url.replace('&', "&amp;")
                ),
            )
        }
        "path-md5" => {
            let url = format!("http://files.path.market.test/{md5}/{package}_{n}.apk");
            (
                format!("http://path.market.test/soft/{n}.html"),
                url.clone(),
                format!(r#"<span class="btn" data-apk="{url}">Get</span>"#),
            )
        }
        "script-md5" => {
            let url = format!("http://dl.script.market.test/f/{n}.apk");
            (
                format!("http://script.market.test/app/{package}"),
                url.clone(),
                format!(
                    r#"<div id="app"></div><script>window.__APP__ = {{"name":"{package}","downloadUrl":"{}","apkMd5":"{md5}"}};</script>"#,
                    url.replace('/', "\\/")
                ),
            )
        }
        "https-upgrade" => (
            format!("http://upgrade.market.test/apps/{n}"),
            format!("https://secure.upgrade.market.test/pkg/{n}.apk"),
            format!(r#"<a class="dl" href="http://dl.upgrade.market.test/pkg/{n}.apk">Download</a>"#),
        ),
        "plain-a" => (
            format!("http://plain-a.market.test/item/{n}"),
            format!("http://plain-a.market.test/files/{n}.apk"),
            format!(r#"<a class="download-link" href="/files/{n}.apk">{package}</a>"#),
        ),
        "plain-b" => (
            format!("http://plain-b.market.test/?app={n}"),
            format!("http://mirror.plain-b.market.test/{n}/{package}.apk"),
            format!(
                r#"<button onclick="location.href='http://mirror.plain-b.market.test/{n}/{package}.apk'">Get</button>"#
            ),
        ),
        "github" => (
            format!("https://github.com/fixture-dev/app{n}/blob/main/release/{package}.apk"),
            format!("https://raw.githubusercontent.com/fixture-dev/app{n}/main/release/{package}.apk"),
            String::new(),
        ),
        other => panic!("unknown fixture market {other}"),
    };
    let page = if body.is_empty() {
        body
    } else {
        format!("<!doctype html><html><head><title>{package}</title></head><body>{body}</body></html>")
    };
    Authored {
        page_url,
        download_url,
        page,
    }
}

impl Default for FixtureCorpus {
    fn default() -> Self {
        Self::new()
    }
}

impl FixtureCorpus {
    /// All markets registered, nothing published.
    pub fn new() -> Self {
        Self {
            registry: MarketRegistry::from_toml(MARKETS_TOML).expect("fixture registry"),
            web: Arc::new(FixtureWeb::new()),
            evidence: FallbackEvidence::default(),
            serial_db: SerialDb::new(),
            apps: Vec::new(),
            next_id: 1,
        }
    }

    /// One app per market, plus the tampered-download page and an
    /// unverifiable no-checksum app. Every app's serial is official except
    /// the unverifiable one's.
    pub fn standard() -> Self {
        let mut corpus = Self::new();
        for (i, market) in MARKET_IDS.iter().enumerate() {
            let package = format!("com.fixture.{}", market.replace('-', "_"));
            let app = corpus.publish(market, &package, "1.0", BigUint::from(0x706a_0000u32 + i as u32));
            corpus.serial_db.insert(&app.package, app.serial.clone());
        }
        let known = corpus.app("plain-a").expect("published").apk.clone();
        corpus.evidence.add_known_app(&known);
        let dev = corpus.app("plain-b").expect("published").serial.clone();
        corpus.evidence.developer_serials.insert(dev);
        corpus.publish("plain-a", "com.fixture.unvetted", "0.9", 0x5eed_u32);
        corpus.publish_mitm_case();
        corpus
    }

    fn next(&mut self) -> u64 {
        let n = self.next_id;
        self.next_id += 1;
        n
    }

    /// Authors an APK and publishes it on `market`.
    pub fn publish(&mut self, market: &str, package: &str, version: &str, serial: impl Into<BigUint>) -> FixtureApp {
        let apk = ApkBuilder::new(package, version, serial).build();
        self.publish_apk(market, apk)
    }

    /// Publishes existing APK bytes on `market`.
    pub fn publish_apk(&mut self, market: &str, apk: Vec<u8>) -> FixtureApp {
        let summary = parse_apk(&apk).expect("fixture apk parses");
        let n = self.next();
        let authored = author(market, n, &summary.package_name, &md5_hex(&apk));
        self.install(FixtureApp {
            market_id: market.into(),
            page_url: authored.page_url,
            download_url: authored.download_url,
            package: summary.package_name,
            version: summary.version_name,
            serial: summary.cert_serial,
            page: authored.page.into_bytes(),
            apk,
        })
    }

    /// An `anchor-md5` page declaring [`MITM_DECLARED_MD5`] while the file
    /// actually served is a different APK.
    pub fn publish_mitm_case(&mut self) -> FixtureApp {
        let apk = ApkBuilder::new("com.fixture.mitm", "1.0", 0x706a633eu32)
            .payload(b"repackaged payload".to_vec())
            .build();
        let n = self.next();
        let authored = author("anchor-md5", n, "com.fixture.mitm", MITM_DECLARED_MD5);
        self.install(FixtureApp {
            market_id: "anchor-md5".into(),
            page_url: authored.page_url,
            download_url: authored.download_url,
            package: "com.fixture.mitm".into(),
            version: "1.0".into(),
            serial: BigUint::from(0x706a633eu32),
            page: authored.page.into_bytes(),
            apk,
        })
    }

    fn install(&mut self, app: FixtureApp) -> FixtureApp {
        if !app.page.is_empty() {
            self.web.serve(&app.page_url, app.page.clone());
        }
        self.web.serve(&app.download_url, app.apk.clone());
        self.apps.push(app.clone());
        app
    }

    pub fn apps(&self) -> &[FixtureApp] {
        &self.apps
    }

    /// First app published on `market`.
    pub fn app(&self, market: &str) -> Option<&FixtureApp> {
        self.apps.iter().find(|a| a.market_id == market)
    }

    pub fn mitm_app(&self) -> Option<&FixtureApp> {
        self.apps.iter().find(|a| a.download_url.contains(MITM_DECLARED_MD5))
    }

    pub fn write_dir(&self, root: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(root)?;
        std::fs::write(root.join("markets.toml"), self.registry.to_toml())?;
        let (apps, serials) = self.evidence.render();
        std::fs::write(root.join("known_apps.txt"), apps)?;
        std::fs::write(root.join("developer_serials.txt"), serials)?;
        std::fs::write(root.join("serials.tsv"), self.serial_db.render())?;
        for (i, app) in self.apps.iter().enumerate() {
            let dir = root.join(&app.market_id).join(format!("{:03}", i + 1));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("page.html"), &app.page)?;
            std::fs::write(dir.join("app.apk"), &app.apk)?;
            let meta = toml::to_string(app).map_err(std::io::Error::other)?;
            std::fs::write(dir.join("meta.toml"), meta)?;
        }
        Ok(())
    }

    pub fn load_dir(root: &Path) -> std::io::Result<Self> {
        let invalid = |e: String| std::io::Error::new(std::io::ErrorKind::InvalidData, e);
        let registry = MarketRegistry::load(&root.join("markets.toml")).map_err(|e| invalid(e.to_string()))?;
        let evidence = FallbackEvidence::load(&root.join("known_apps.txt"), &root.join("developer_serials.txt"))?;
        let serial_db = SerialDb::load(&root.join("serials.tsv"))?;
        let mut corpus = Self {
            registry,
            web: Arc::new(FixtureWeb::new()),
            evidence,
            serial_db,
            apps: Vec::new(),
            next_id: 1,
        };
        let mut dirs = Vec::new();
        for market in std::fs::read_dir(root)? {
            let market = market?.path();
            if market.is_dir() {
                for app in std::fs::read_dir(&market)? {
                    dirs.push(app?.path());
                }
            }
        }
        dirs.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        for dir in dirs {
            let meta = std::fs::read_to_string(dir.join("meta.toml"))?;
            let mut app: FixtureApp = toml::from_str(&meta).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
            app.page = std::fs::read(dir.join("page.html"))?;
            app.apk = std::fs::read(dir.join("app.apk"))?;
            corpus.next_id += 1;
            corpus.install(app);
        }
        Ok(corpus)
    }
}
