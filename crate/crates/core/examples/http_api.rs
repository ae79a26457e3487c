//! The JSON API on an ephemeral port, driven by an HTTP client.

use std::sync::Arc;

use appgate::gateway::{Config, Gateway, MarketEnv};
use appgate::market::fixtures::FixtureCorpus;
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = FixtureCorpus::standard();
    let gateway = Arc::new(Gateway::open(&Config::default(), MarketEnv::from_corpus(&corpus))?);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(appgate::api::serve(gateway, listener, async {
        let _ = stopped.await;
    }));

    let client = reqwest::Client::new();
    let app = corpus.app("github").unwrap();
    let est: Value = client
        .get(format!("{base}/api/estimate"))
        .query(&[("pageUrl", &app.page_url)])
        .send()
        .await?
        .json()
        .await?;
    println!("GET  /api/estimate -> {est}");

    let res = client
        .post(format!("{base}/api/upload"))
        .json(&json!({ "pageUrl": app.page_url }))
        .send()
        .await?;
    println!("POST /api/upload -> {}", res.status());
    let uploaded: Value = res.json().await?;
    println!("{}", serde_json::to_string_pretty(&uploaded)?);

    let apps: Value = client.get(format!("{base}/api/apps")).send().await?.json().await?;
    println!("GET  /api/apps -> {} record(s)", apps.as_array().map_or(0, Vec::len));

    let dl = client
        .get(format!("{base}/api/download/{}/{}", app.package, app.version))
        .send()
        .await?;
    let cid = dl.headers()[appgate::api::CONTENT_ID_HEADER].to_str()?.to_string();
    println!("GET  /api/download -> {} bytes, content id {cid}", dl.bytes().await?.len());

    let gateways: Value = client.get(format!("{base}/api/gateways")).send().await?.json().await?;
    println!("GET  /api/gateways -> fastest {}", gateways[0]["name"]);

    let _ = stop.send(());
    server.await??;
    Ok(())
}
