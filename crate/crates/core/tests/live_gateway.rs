use std::sync::Arc;
use std::time::Duration;

use appgate::castore::http::{self, CONTENT_ID_HEADER};
use appgate::castore::{CastoreError, ContentId, GatewayInfo, Network, NodeKind, SimClock};

async fn spawn(network: Arc<Network>, node: &str) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = http::router(network, node);
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn network() -> (Arc<Network>, ContentId) {
    let net = Arc::new(Network::new(SimClock::new()));
    net.add_node("origin", NodeKind::Origin);
    net.add_node("gw-a", NodeKind::Gateway);
    net.add_node("gw-b", NodeKind::Gateway);
    let cid = net.add("origin", b"served over http").unwrap();
    (net, cid)
}

#[tokio::test]
async fn fetch_verifies_and_caches_at_the_gateway() {
    let (net, cid) = network();
    let endpoint = spawn(net.clone(), "gw-a").await;
    let client = http::client(Duration::from_secs(5));

    let bytes = http::fetch(&client, &endpoint, &cid).await.unwrap();
    assert_eq!(bytes, b"served over http");
    let cached = net.inspect("gw-a", |n| n.cache_entry(&cid).is_some()).unwrap();
    assert!(cached);

    let raw = client.get(format!("{endpoint}/ipfs/{cid}")).send().await.unwrap();
    assert_eq!(raw.headers()[CONTENT_ID_HEADER], cid.to_string().as_str());

    let missing = ContentId::of(b"never added");
    assert!(matches!(
        http::fetch(&client, &endpoint, &missing).await,
        Err(CastoreError::NotFound(_))
    ));
    let bad = client.get(format!("{endpoint}/ipfs/not-a-cid")).send().await.unwrap();
    assert_eq!(bad.status(), 400);
}

#[tokio::test]
async fn tampered_bodies_are_refused() {
    let (net, cid) = network();
    net.corrupt("origin", cid).unwrap();
    let endpoint = spawn(net.clone(), "origin").await;
    let client = http::client(Duration::from_secs(5));
    // The serving node notices its own corruption.
    assert!(matches!(
        http::fetch(&client, &endpoint, &cid).await,
        Err(CastoreError::Transport(_))
    ));

    // A server that lies is caught by the client.
    let liar = axum::Router::new().route(
        "/ipfs/:cid",
        axum::routing::get(|| async { b"not what was asked for".to_vec() }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, liar).await.unwrap() });
    assert!(matches!(
        http::fetch(&client, &format!("http://{addr}"), &cid).await,
        Err(CastoreError::IntegrityMismatch(c)) if c == cid
    ));
}

#[tokio::test]
async fn probing_marks_offline_gateways_unreachable() {
    let (net, cid) = network();
    let a = spawn(net.clone(), "gw-a").await;
    let b = spawn(net.clone(), "gw-b").await;
    net.set_online("gw-b", false).unwrap();
    let mut gateways = vec![GatewayInfo::new("gw-a", a), GatewayInfo::new("gw-b", b)];
    let client = http::client(Duration::from_secs(5));
    http::probe_all(&client, &mut gateways, &cid).await;
    assert!(gateways[0].reachable && gateways[0].last_rtt > 0.0);
    assert!(!gateways[1].reachable);
}
