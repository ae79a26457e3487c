//! JSON API over a [`Gateway`].
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/api/upload` | `{pageUrl, feeTxId?}` | [`UploadResult`] |
//! | GET | `/api/apps` | `offset`, `limit` | stored apps |
//! | GET | `/api/apps/{package}/{version}` | | one stored app |
//! | GET | `/api/download/{package}/{version}` | | APK bytes, `x-content-id` header |
//! | GET | `/api/estimate` | `pageUrl` | [`FeeEstimate`] |
//! | GET | `/api/gateways` | | gateways ranked by RTT |
//! | POST | `/api/admin/whitelist` | `{address, action: "add" \| "remove"}` | `{txId}` |
//! | POST | `/api/admin/serialdb` | `package<TAB>hex-serial` lines | `{added}` |
//!
//! Admin routes need `Authorization: Bearer <admin_token>`. Errors are
//! `{"error": kind, "message": text}` plus a `verdict` for rejected uploads.

use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::apkcheck::SerialDb;
use crate::gateway::{parse_address, FeeEstimate, Gateway, GatewayError, UploadRequest, UploadResult};
use crate::registry::{AppRecord, StoredApp};

pub const CONTENT_ID_HEADER: &str = "x-content-id";
const DEFAULT_PAGE: usize = 50;
const MAX_PAGE: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AppView {
    #[serde(flatten)]
    pub record: AppRecord,
    pub block: u64,
}

impl From<StoredApp> for AppView {
    fn from(s: StoredApp) -> Self {
        AppView {
            record: s.record,
            block: s.block,
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl ToString) -> Self {
        ApiError {
            status,
            body: json!({ "error": kind, "message": message.to_string() }),
        }
    }
}

impl From<GatewayError> for ApiError {
    fn from(err: GatewayError) -> Self {
        use GatewayError as E;
        let (status, kind) = match &err {
            E::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "invalidRequest"),
            E::UnknownMarket(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknownMarket"),
            E::RetrievalFailed(_) => (StatusCode::BAD_GATEWAY, "retrievalFailed"),
            E::SecurityRejected(_) => (StatusCode::UNPROCESSABLE_ENTITY, "securityRejected"),
            E::InvalidApk(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalidApk"),
            E::Duplicate { .. } => (StatusCode::CONFLICT, "duplicate"),
            E::FeeRequired => (StatusCode::PAYMENT_REQUIRED, "feeRequired"),
            E::FeeRejected(_) => (StatusCode::PAYMENT_REQUIRED, "feeRejected"),
            E::NotWhitelisted(_) => (StatusCode::SERVICE_UNAVAILABLE, "notWhitelisted"),
            E::NotOnChain { .. } => (StatusCode::NOT_FOUND, "notOnChain"),
            E::Storage(_) => (StatusCode::SERVICE_UNAVAILABLE, "storage"),
            E::Chain(_) | E::Ledger(_) => (StatusCode::INTERNAL_SERVER_ERROR, "chain"),
            E::Config(_) | E::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut api = ApiError::new(status, kind, &err);
        match err {
            E::SecurityRejected(verdict) => api.body["verdict"] = json!(verdict),
            E::FeeRejected(rejection) => api.body["fee"] = json!(rejection),
            _ => {}
        }
        api
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs gateway work off the async executor; it may block on I/O and locks.
async fn blocking<T, F>(gw: &Arc<Gateway>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Gateway) -> Result<T, GatewayError> + Send + 'static,
{
    let gw = gw.clone();
    tokio::task::spawn_blocking(move || f(&gw))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?
        .map_err(ApiError::from)
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/api/upload", post(upload))
        .route("/api/apps", get(list_apps))
        .route("/api/apps/:package/:version", get(app))
        .route("/api/download/:package/:version", get(download))
        .route("/api/estimate", get(estimate))
        .route("/api/gateways", get(gateways))
        .route("/api/admin/whitelist", post(whitelist))
        .route("/api/admin/serialdb", post(serialdb))
        .layer(middleware::from_fn(access_log))
        .with_state(gateway)
}

async fn access_log(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_string());
    let response = next.run(req).await;
    tracing::info!(target: "appgate::access", %method, path, status = response.status().as_u16());
    response
}

async fn upload(State(gw): State<Arc<Gateway>>, Json(req): Json<UploadRequest>) -> ApiResult<Json<UploadResult>> {
    blocking(&gw, move |gw| gw.upload(&req)).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct Page {
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn list_apps(State(gw): State<Arc<Gateway>>, Query(page): Query<Page>) -> ApiResult<Json<Vec<AppView>>> {
    let offset = page.offset.unwrap_or(0);
    let limit = page.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let apps = blocking(&gw, move |gw| gw.apps(offset, limit)).await?;
    Ok(Json(apps.into_iter().map(AppView::from).collect()))
}

async fn app(
    State(gw): State<Arc<Gateway>>,
    Path((package, version)): Path<(String, String)>,
) -> ApiResult<Json<AppView>> {
    let (p, v) = (package.clone(), version.clone());
    blocking(&gw, move |gw| gw.app(&p, &v))
        .await?
        .map(|s| Json(s.into()))
        .ok_or_else(|| GatewayError::NotOnChain { package, version }.into())
}

async fn download(State(gw): State<Arc<Gateway>>, Path((package, version)): Path<(String, String)>) -> ApiResult<Response> {
    let got = blocking(&gw, move |gw| gw.download(&package, &version)).await?;
    let file = format!(
        "attachment; filename=\"{}-{}.apk\"",
        got.record.package_name.replace('"', ""),
        got.record.version.replace('"', "")
    );
    let mut response = Response::new(Body::from(got.bytes));
    let headers = response.headers_mut();
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/vnd.android.package-archive"),
    );
    let text = |s: String| HeaderValue::from_str(&s).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e));
    headers.insert(CONTENT_ID_HEADER, text(got.content_id.to_string())?);
    headers.insert("x-served-by", text(got.served_by.name)?);
    if let Ok(value) = HeaderValue::from_str(&file) {
        headers.insert(header::CONTENT_DISPOSITION, value);
    }
    Ok(response)
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct EstimateQuery {
    page_url: String,
}

async fn estimate(State(gw): State<Arc<Gateway>>, Query(q): Query<EstimateQuery>) -> ApiResult<Json<FeeEstimate>> {
    blocking(&gw, move |gw| gw.estimate_fee(&UploadRequest::new(q.page_url)))
        .await
        .map(Json)
}

async fn gateways(State(gw): State<Arc<Gateway>>) -> ApiResult<Json<Value>> {
    let list = blocking(&gw, |gw| Ok(gw.gateways())).await?;
    Ok(Json(json!(list)))
}

fn authorize(gw: &Gateway, headers: &HeaderMap) -> ApiResult<()> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if gw.admin_authorized(token) {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "admin token required"))
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum WhitelistAction {
    Add,
    Remove,
}

#[derive(Debug, Deserialize)]
struct WhitelistRequest {
    address: String,
    action: WhitelistAction,
}

async fn whitelist(
    State(gw): State<Arc<Gateway>>,
    headers: HeaderMap,
    Json(req): Json<WhitelistRequest>,
) -> ApiResult<Json<Value>> {
    authorize(&gw, &headers)?;
    let member = parse_address(&req.address);
    let tx_id = blocking(&gw, move |gw| match req.action {
        WhitelistAction::Add => gw.whitelist_add(member),
        WhitelistAction::Remove => gw.whitelist_remove(member),
    })
    .await?;
    Ok(Json(json!({ "txId": tx_id, "address": member })))
}

async fn serialdb(State(gw): State<Arc<Gateway>>, headers: HeaderMap, body: String) -> ApiResult<Json<Value>> {
    authorize(&gw, &headers)?;
    let entries = SerialDb::parse(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalidRequest", e))?;
    let added = blocking(&gw, move |gw| gw.import_serials(&entries)).await?;
    Ok(Json(json!({ "added": added.len() })))
}

/// Serves the API until `shutdown` resolves.
pub async fn serve(
    gateway: Arc<Gateway>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(shutdown)
        .await
}
