use std::collections::HashMap;
use std::io::Read;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::{Condvar, Mutex, RwLock};
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("{0}: not found")]
    NotFound(String),
    #[error("{url}: http status {status}")]
    Status { url: String, status: u16 },
    #[error("{url}: {message}")]
    Transport { url: String, message: String },
    #[error("{url}: body exceeds {limit} bytes")]
    TooLarge { url: String, limit: u64 },
}

/// Blocking GET of a URL's body.
pub trait Fetcher: Send + Sync {
    fn get(&self, url: &Url) -> Result<Vec<u8>, FetchError>;
}

impl<F: Fetcher + ?Sized> Fetcher for Arc<F> {
    fn get(&self, url: &Url) -> Result<Vec<u8>, FetchError> {
        (**self).get(url)
    }
}

type Tamper = Arc<dyn Fn(&Url, &mut Vec<u8>) + Send + Sync>;

fn key(url: &Url) -> String {
    let mut url = url.clone();
    url.set_fragment(None);
    url.to_string()
}

/// In-process stand-in for upstream markets.
///
/// Resources are registered per absolute URL, so `http://` and `https://`
/// versions of a path are distinct. An optional interceptor rewrites bodies
/// served over plain http only, modelling an on-path attacker who cannot
/// touch TLS traffic.
#[derive(Default)]
pub struct FixtureWeb {
    resources: RwLock<HashMap<String, Vec<u8>>>,
    interceptor: RwLock<Option<Tamper>>,
    latency: RwLock<Duration>,
    requests: Mutex<Vec<String>>,
}

impl FixtureWeb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn serve(&self, url: &str, body: impl Into<Vec<u8>>) {
        let url = Url::parse(url).expect("fixture url");
        self.resources.write().insert(key(&url), body.into());
    }

    pub fn remove(&self, url: &str) {
        if let Ok(url) = Url::parse(url) {
            self.resources.write().remove(&key(&url));
        }
    }

    pub fn resource(&self, url: &str) -> Option<Vec<u8>> {
        let url = Url::parse(url).ok()?;
        self.resources.read().get(&key(&url)).cloned()
    }

    pub fn urls(&self) -> Vec<String> {
        let mut urls: Vec<String> = self.resources.read().keys().cloned().collect();
        urls.sort();
        urls
    }

    /// Installs an on-path attacker for plain-http responses.
    pub fn intercept_http(&self, tamper: impl Fn(&Url, &mut Vec<u8>) + Send + Sync + 'static) {
        *self.interceptor.write() = Some(Arc::new(tamper));
    }

    pub fn clear_interceptor(&self) {
        *self.interceptor.write() = None;
    }

    /// Sleep applied to every request.
    pub fn set_latency(&self, latency: Duration) {
        *self.latency.write() = latency;
    }

    /// URLs requested so far, in order.
    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().clone()
    }
}

impl Fetcher for FixtureWeb {
    fn get(&self, url: &Url) -> Result<Vec<u8>, FetchError> {
        self.requests.lock().push(url.to_string());
        let latency = *self.latency.read();
        if !latency.is_zero() {
            std::thread::sleep(latency);
        }
        let mut body = self
            .resources
            .read()
            .get(&key(url))
            .cloned()
            .ok_or_else(|| FetchError::NotFound(url.to_string()))?;
        if url.scheme() == "http" {
            if let Some(tamper) = self.interceptor.read().clone() {
                tamper(url, &mut body);
            }
        }
        Ok(body)
    }
}

/// Caps concurrent requests per host for the wrapped fetcher.
pub struct HostLimited<F> {
    inner: F,
    cap: usize,
    active: Mutex<HashMap<String, usize>>,
    released: Condvar,
}

impl<F: Fetcher> HostLimited<F> {
    pub fn new(inner: F, cap: usize) -> Self {
        Self {
            inner,
            cap: cap.max(1),
            active: Mutex::new(HashMap::new()),
            released: Condvar::new(),
        }
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: Fetcher> Fetcher for HostLimited<F> {
    fn get(&self, url: &Url) -> Result<Vec<u8>, FetchError> {
        let host = url.host_str().unwrap_or_default().to_string();
        {
            let mut active = self.active.lock();
            while active.get(&host).copied().unwrap_or(0) >= self.cap {
                self.released.wait(&mut active);
            }
            *active.entry(host.clone()).or_default() += 1;
        }
        let result = self.inner.get(url);
        let mut active = self.active.lock();
        if let Some(n) = active.get_mut(&host) {
            *n -= 1;
            if *n == 0 {
                active.remove(&host);
            }
        }
        self.released.notify_all();
        result
    }
}

/// Live HTTP(S) fetcher. Must not be used from inside an async task.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
    max_bytes: u64,
}

impl HttpFetcher {
    pub const DEFAULT_MAX_BYTES: u64 = 512 * 1024 * 1024;

    pub fn new(timeout: Duration) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("appgate/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| FetchError::Transport {
                url: String::new(),
                message: e.to_string(),
            })?;
        Ok(Self {
            client,
            max_bytes: Self::DEFAULT_MAX_BYTES,
        })
    }

    pub fn with_max_bytes(mut self, max_bytes: u64) -> Self {
        self.max_bytes = max_bytes;
        self
    }
}

impl Fetcher for HttpFetcher {
    fn get(&self, url: &Url) -> Result<Vec<u8>, FetchError> {
        let transport = |e: &dyn std::fmt::Display| FetchError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        };
        let response = self.client.get(url.clone()).send().map_err(|e| transport(&e))?;
        let status = response.status();
        if status == reqwest::StatusCode::NOT_FOUND {
            return Err(FetchError::NotFound(url.to_string()));
        }
        if !status.is_success() {
            return Err(FetchError::Status {
                url: url.to_string(),
                status: status.as_u16(),
            });
        }
        let mut body = Vec::new();
        response
            .take(self.max_bytes + 1)
            .read_to_end(&mut body)
            .map_err(|e| transport(&e))?;
        if body.len() as u64 > self.max_bytes {
            return Err(FetchError::TooLarge {
                url: url.to_string(),
                limit: self.max_bytes,
            });
        }
        Ok(body)
    }
}
