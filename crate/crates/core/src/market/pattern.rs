use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::MarketError;

/// A page-URL regex, matched against the whole URL.
#[derive(Debug, Clone)]
pub struct UrlPattern {
    source: String,
    regex: Regex,
}

impl UrlPattern {
    pub fn new(source: &str) -> Result<Self, regex::Error> {
        Ok(Self {
            source: source.to_string(),
            regex: Regex::new(&format!("^(?:{source})$"))?,
        })
    }

    pub fn is_match(&self, url: &str) -> bool {
        self.regex.is_match(url)
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }
}

impl Serialize for UrlPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for UrlPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let source = String::deserialize(d)?;
        UrlPattern::new(&source).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostSubstitution {
    pub from: String,
    pub to: String,
}

/// How a market page leads to its APK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DownloadUrlRule {
    /// Attribute of the first element matching a CSS selector.
    HtmlAttribute { selector: String, attribute: String },
    /// First match of a regex over the raw page text (capture group 1 if present).
    UrlEmbedded { pattern: String },
    /// Value assigned to `key` inside a `<script>` block.
    ScriptEmbedded { key: String },
    /// Like `HtmlAttribute`, then upgraded to https (optionally on another host).
    HttpsRewrite {
        selector: String,
        attribute: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        host: Option<HostSubstitution>,
    },
    /// The page URL is the file; code-hosting blob links become raw links.
    Direct,
}

/// Where the page declares the APK's MD5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ChecksumSource {
    None,
    InDownloadUrl,
    InScriptBlock { key: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketPattern {
    pub id: String,
    pub page_url_pattern: UrlPattern,
    pub download: DownloadUrlRule,
    pub checksum: ChecksumSource,
    #[serde(default)]
    pub transport_secure: bool,
}

impl MarketPattern {
    pub fn matches(&self, page_url: &str) -> bool {
        self.page_url_pattern.is_match(page_url)
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("market id is empty".into());
        }
        match &self.download {
            DownloadUrlRule::HtmlAttribute { selector, .. }
            | DownloadUrlRule::HttpsRewrite { selector, .. } => {
                scraper::Selector::parse(selector)
                    .map_err(|e| format!("{}: bad selector {selector:?}: {e}", self.id))?;
            }
            DownloadUrlRule::UrlEmbedded { pattern } => {
                Regex::new(pattern).map_err(|e| format!("{}: bad pattern: {e}", self.id))?;
            }
            DownloadUrlRule::ScriptEmbedded { key } if key.is_empty() => {
                return Err(format!("{}: empty script key", self.id));
            }
            _ => {}
        }
        if let (DownloadUrlRule::Direct, ChecksumSource::InScriptBlock { .. }) =
            (&self.download, &self.checksum)
        {
            return Err(format!("{}: direct markets have no page to read a script from", self.id));
        }
        Ok(())
    }
}

/// The configured markets, tried in file order.
///
/// TOML schema, one `[[market]]` table per market:
///
/// ```toml
/// [[market]]
/// id = "anchor-md5"
/// page_url_pattern = 'http://anchor\.market\.test/app/\d+'
/// transport_secure = false
/// download = { rule = "html_attribute", selector = "a#download", attribute = "href" }
/// checksum = { source = "in_download_url" }
/// ```
///
/// `download.rule` is one of `html_attribute`, `url_embedded` (`pattern`),
/// `script_embedded` (`key`), `https_rewrite` (`selector`, `attribute`,
/// optional `host = { from, to }`) or `direct`. `checksum.source` is one of
/// `none`, `in_download_url` or `in_script_block` (`key`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MarketRegistry {
    #[serde(rename = "market", default)]
    pub markets: Vec<MarketPattern>,
}

impl MarketRegistry {
    pub fn from_toml(text: &str) -> Result<Self, MarketError> {
        let registry: Self = toml::from_str(text).map_err(|e| MarketError::Registry(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for market in &registry.markets {
            market.validate().map_err(MarketError::Registry)?;
            if !seen.insert(market.id.as_str()) {
                return Err(MarketError::Registry(format!("duplicate market id {}", market.id)));
            }
        }
        Ok(registry)
    }

    pub fn load(path: &Path) -> Result<Self, MarketError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MarketError::Registry(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("registry serializes")
    }

    pub fn get(&self, id: &str) -> Option<&MarketPattern> {
        self.markets.iter().find(|m| m.id == id)
    }

    /// First market whose page pattern matches.
    pub fn lookup(&self, page_url: &str) -> Result<&MarketPattern, MarketError> {
        self.markets
            .iter()
            .find(|m| m.matches(page_url))
            .ok_or_else(|| MarketError::UnknownMarket(page_url.to_string()))
    }
}
