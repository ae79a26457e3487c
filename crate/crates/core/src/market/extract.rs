use std::sync::OnceLock;

use regex::Regex;
use scraper::{Html, Selector};
use url::Url;

use super::pattern::{ChecksumSource, DownloadUrlRule, MarketPattern};
use super::MarketError;

fn parse_url(s: &str) -> Result<Url, MarketError> {
    Url::parse(s).map_err(|e| MarketError::InvalidUrl(format!("{s}: {e}")))
}

fn extraction_failed(pattern: &MarketPattern, reason: impl Into<String>) -> MarketError {
    MarketError::ExtractionFailed {
        market: pattern.id.clone(),
        reason: reason.into(),
    }
}

fn absolute(base: &Url, link: &str) -> Result<Url, MarketError> {
    base.join(link.trim())
        .map_err(|e| MarketError::InvalidUrl(format!("{link}: {e}")))
}

fn html_attribute(html: &str, selector: &str, attribute: &str) -> Option<String> {
    let selector = Selector::parse(selector).ok()?;
    Html::parse_document(html)
        .select(&selector)
        .find_map(|el| el.value().attr(attribute).map(str::to_string))
}

/// Text of every `<script>` element, in document order.
fn script_blocks(html: &str) -> Vec<String> {
    let selector = Selector::parse("script").expect("static selector");
    Html::parse_document(html)
        .select(&selector)
        .map(|el| el.text().collect())
        .collect()
}

/// Value of `key: "..."` / `key = '...'` / `"key": "..."` inside a script block.
pub fn script_value(html: &str, key: &str) -> Option<String> {
    let re = Regex::new(&format!(
        r#"["']?{}["']?\s*[:=]\s*["']([^"']*)["']"#,
        regex::escape(key)
    ))
    .expect("escaped key");
    script_blocks(html).iter().find_map(|block| {
        re.captures(block)
            .map(|c| c[1].replace("\\/", "/"))
    })
}

/// Normalizes a code-hosting blob link to the raw file it names.
///
/// `https://github.com/o/r/blob/ref/path` and `.../raw/ref/path` become
/// `https://raw.githubusercontent.com/o/r/ref/path`; other URLs pass
/// through parsed and unchanged.
pub fn direct_file_url(page_url: &str) -> Result<Url, MarketError> {
    let url = parse_url(page_url)?;
    if url.host_str() != Some("github.com") {
        return Ok(url);
    }
    let segments: Vec<&str> = url.path_segments().map(|s| s.collect()).unwrap_or_default();
    match segments.as_slice() {
        [owner, repo, "blob" | "raw", git_ref, rest @ ..] if !rest.is_empty() => {
            let raw = format!(
                "https://raw.githubusercontent.com/{owner}/{repo}/{git_ref}/{}",
                rest.join("/")
            );
            parse_url(&raw)
        }
        _ => Err(MarketError::InvalidUrl(format!("{page_url}: not a file link"))),
    }
}

/// Applies the market's rule to its page and returns an absolute download URL.
pub fn resolve_download_url(
    pattern: &MarketPattern,
    page_html: &[u8],
    page_url: &str,
) -> Result<Url, MarketError> {
    if !pattern.matches(page_url) {
        return Err(MarketError::PatternMismatch {
            market: pattern.id.clone(),
            url: page_url.to_string(),
        });
    }
    if pattern.download == DownloadUrlRule::Direct {
        return direct_file_url(page_url);
    }
    let base = parse_url(page_url)?;
    let html = String::from_utf8_lossy(page_html);
    let link = match &pattern.download {
        DownloadUrlRule::HtmlAttribute { selector, attribute }
        | DownloadUrlRule::HttpsRewrite { selector, attribute, .. } => {
            html_attribute(&html, selector, attribute).ok_or_else(|| {
                extraction_failed(pattern, format!("no {selector} element with {attribute}"))
            })?
        }
        DownloadUrlRule::UrlEmbedded { pattern: re } => {
            let re = Regex::new(re).map_err(|e| extraction_failed(pattern, e.to_string()))?;
            let caps = re
                .captures(&html)
                .ok_or_else(|| extraction_failed(pattern, "embedded url not found"))?;
            caps.get(1)
                .or_else(|| caps.get(0))
                .map(|m| m.as_str().replace("&amp;", "&"))
                .unwrap_or_default()
        }
        DownloadUrlRule::ScriptEmbedded { key } => script_value(&html, key)
            .ok_or_else(|| extraction_failed(pattern, format!("script key {key} not found")))?,
        DownloadUrlRule::Direct => unreachable!(),
    };
    if link.trim().is_empty() {
        return Err(extraction_failed(pattern, "empty download link"));
    }
    absolute(&base, &link)
}

fn md5_in_text() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:^|[^0-9a-f])([0-9a-f]{32})(?:[^0-9a-f]|$)").unwrap())
}

fn is_md5_hex(s: &str) -> bool {
    s.len() == 32 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// The MD5 the page declares for its APK, lowercased.
pub fn extract_checksum(
    pattern: &MarketPattern,
    page_html: &[u8],
    download_url: &str,
) -> Result<Option<String>, MarketError> {
    let missing = |reason: &str| MarketError::ChecksumSourceMissing {
        market: pattern.id.clone(),
        reason: reason.to_string(),
    };
    match &pattern.checksum {
        ChecksumSource::None => Ok(None),
        ChecksumSource::InDownloadUrl => md5_in_text()
            .captures_iter(download_url)
            .last()
            .map(|c| Some(c[1].to_ascii_lowercase()))
            .ok_or_else(|| missing("download url carries no 32-hex digest")),
        ChecksumSource::InScriptBlock { key } => {
            let value = script_value(&String::from_utf8_lossy(page_html), key)
                .ok_or_else(|| missing("script block has no checksum key"))?;
            let value = value.trim();
            if is_md5_hex(value) {
                Ok(Some(value.to_ascii_lowercase()))
            } else {
                Err(missing("script checksum is not 32 hex characters"))
            }
        }
    }
}

/// Upgrades an http download URL per the market's rewrite rule.
pub fn https_rewrite(pattern: &MarketPattern, download_url: &str) -> Result<Url, MarketError> {
    let DownloadUrlRule::HttpsRewrite { host, .. } = &pattern.download else {
        return Err(MarketError::RewriteInapplicable(format!(
            "market {} has no rewrite rule",
            pattern.id
        )));
    };
    let mut url = parse_url(download_url)?;
    match url.scheme() {
        "https" => return Ok(url),
        "http" => {}
        other => {
            return Err(MarketError::RewriteInapplicable(format!("scheme {other}")));
        }
    }
    if let Some(sub) = host {
        if url.host_str() != Some(sub.from.as_str()) {
            return Err(MarketError::RewriteInapplicable(format!(
                "host {:?} is not {}",
                url.host_str().unwrap_or(""),
                sub.from
            )));
        }
        url.set_host(Some(&sub.to))
            .map_err(|e| MarketError::RewriteInapplicable(e.to_string()))?;
    }
    url.set_scheme("https")
        .map_err(|_| MarketError::RewriteInapplicable("scheme change refused".into()))?;
    if url.port() == Some(80) {
        let _ = url.set_port(None);
    }
    Ok(url)
}
