//! Live-mode gateway transport.
//!
//! A node is exposed as `GET /ipfs/{cid}` (raw bytes) and `HEAD /ipfs/{cid}`
//! (status only, used for RTT probing). Clients re-verify every body against
//! the requested content id.

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::future::join_all;

use super::{CastoreError, ContentId, GatewayInfo, Network};

pub const CONTENT_ID_HEADER: &str = "x-content-id";

#[derive(Clone)]
struct NodeState {
    network: Arc<Network>,
    node: String,
}

/// Router serving `node`'s gateway interface.
pub fn router(network: Arc<Network>, node: impl Into<String>) -> Router {
    Router::new()
        .route("/ipfs/:cid", get(serve))
        .with_state(NodeState {
            network,
            node: node.into(),
        })
}

async fn serve(State(state): State<NodeState>, method: Method, Path(cid): Path<String>) -> Response {
    let cid: ContentId = match cid.parse() {
        Ok(cid) => cid,
        Err(err) => return (StatusCode::BAD_REQUEST, err.to_string()).into_response(),
    };
    let result = {
        let network = state.network.clone();
        let node = state.node.clone();
        tokio::task::spawn_blocking(move || network.fetch(&cid, &node))
            .await
            .unwrap_or_else(|e| Err(CastoreError::Transport(e.to_string())))
    };
    match result {
        Ok(bytes) => {
            let mut response = if method == Method::HEAD {
                StatusCode::OK.into_response()
            } else {
                bytes.into_response()
            };
            let headers = response.headers_mut();
            headers.insert(
                header::CONTENT_TYPE,
                HeaderValue::from_static("application/octet-stream"),
            );
            if let Ok(v) = HeaderValue::from_str(&cid.to_string()) {
                headers.insert(CONTENT_ID_HEADER, v);
            }
            response
        }
        Err(CastoreError::NotFound(_)) => StatusCode::NOT_FOUND.into_response(),
        Err(CastoreError::NodeOffline(_)) => StatusCode::SERVICE_UNAVAILABLE.into_response(),
        Err(err) => (StatusCode::BAD_GATEWAY, err.to_string()).into_response(),
    }
}

fn url_for(endpoint: &str, cid: &ContentId) -> String {
    format!("{}/ipfs/{cid}", endpoint.trim_end_matches('/'))
}

/// Downloads `cid` from a gateway endpoint and verifies the bytes.
pub async fn fetch(
    client: &reqwest::Client,
    endpoint: &str,
    cid: &ContentId,
) -> Result<Vec<u8>, CastoreError> {
    let response = client
        .get(url_for(endpoint, cid))
        .send()
        .await
        .map_err(|e| CastoreError::Transport(e.to_string()))?;
    match response.status() {
        StatusCode::NOT_FOUND => return Err(CastoreError::NotFound(*cid)),
        s if !s.is_success() => return Err(CastoreError::Transport(format!("status {s}"))),
        _ => {}
    }
    let bytes = response
        .bytes()
        .await
        .map_err(|e| CastoreError::Transport(e.to_string()))?;
    if !cid.verifies(&bytes) {
        return Err(CastoreError::IntegrityMismatch(*cid));
    }
    Ok(bytes.to_vec())
}

/// Times one `HEAD` request; `None` on any failure.
pub async fn probe(client: &reqwest::Client, gateway: &GatewayInfo, cid: &ContentId) -> Option<f64> {
    let started = Instant::now();
    let response = client.head(url_for(&gateway.endpoint, cid)).send().await.ok()?;
    let elapsed = started.elapsed().as_secs_f64();
    response.status().is_success().then_some(elapsed.max(1e-6))
}

/// Probes all gateways concurrently, updating them in place.
pub async fn probe_all(client: &reqwest::Client, gateways: &mut [GatewayInfo], cid: &ContentId) {
    let results = join_all(gateways.iter().map(|g| probe(client, g, cid))).await;
    for (gw, rtt) in gateways.iter_mut().zip(results) {
        gw.reachable = rtt.is_some();
        if let Some(rtt) = rtt {
            gw.last_rtt = rtt;
        }
    }
}

pub fn client(timeout: Duration) -> reqwest::Client {
    reqwest::Client::builder()
        .timeout(timeout)
        .build()
        .expect("static client configuration")
}
