//! HTTP API over a finished store.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use roleseer_core::query::{Dataset, LassoRequest};
use roleseer_core::roles::RoleRef;
use roleseer_core::store::Store;
use roleseer_core::Error;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use tokio::sync::OnceCell;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ErrorBody {
    pub status: u16,
    /// Short machine-readable kind: `not_found`, `bad_request` or `internal`.
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn not_found(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: msg.into(),
        }
    }

    pub fn bad_request(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: msg.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: msg.into(),
        }
    }

    fn body(&self) -> ErrorBody {
        let code = match self.status {
            StatusCode::NOT_FOUND => "not_found",
            StatusCode::BAD_REQUEST => "bad_request",
            _ => "internal",
        };
        ErrorBody {
            status: self.status.as_u16(),
            code: code.into(),
            message: self.message.clone(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownPlayer(_) | Error::MissingStage { .. } => ApiError::not_found(e.to_string()),
            Error::InvalidArgument(_) => ApiError::bad_request(e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_string(&self.body()).expect("error body serializes");
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

type Shared = Result<Arc<String>, ApiError>;

/// At most one computation per key is in flight; concurrent callers wait for
/// it and share the result. Failures are not kept.
#[derive(Default)]
pub struct SingleFlight {
    cells: Mutex<HashMap<String, Arc<OnceCell<Shared>>>>,
    runs: std::sync::atomic::AtomicUsize,
}

impl SingleFlight {
    pub async fn get<F>(&self, key: &str, compute: F) -> Shared
    where
        F: FnOnce() -> Shared + Send + 'static,
    {
        let cell = self.cells.lock().expect("cache lock").entry(key.to_owned()).or_default().clone();
        let out = cell
            .get_or_init(|| async {
                self.runs.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                tokio::task::spawn_blocking(compute).await.unwrap_or_else(|e| Err(ApiError::internal(e.to_string())))
            })
            .await
            .clone();
        if out.is_err() {
            self.cells.lock().expect("cache lock").remove(key);
        }
        out
    }

    /// Computations started so far.
    pub fn runs(&self) -> usize {
        self.runs.load(std::sync::atomic::Ordering::Relaxed)
    }
}

pub struct AppState {
    data: Result<Arc<Dataset>, String>,
    pub cache: SingleFlight,
}

impl AppState {
    /// Loads the dataset; an unfinished store still serves, answering 404.
    pub fn open(store: &Store) -> Self {
        let data = Dataset::load(store).map(Arc::new).map_err(|e| {
            log::warn!("store not ready: {e}");
            e.to_string()
        });
        AppState {
            data,
            cache: SingleFlight::default(),
        }
    }

    fn data(&self) -> Result<Arc<Dataset>, ApiError> {
        self.data.clone().map_err(|e| ApiError::not_found(format!("no role data in store: {e}")))
    }
}

type AppResult = Result<Response, ApiError>;

fn json_response(body: Arc<String>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body.as_str().to_owned()).into_response()
}

fn to_json<T: Serialize>(v: &T) -> Shared {
    serde_json::to_string(v).map(Arc::new).map_err(|e| ApiError::internal(e.to_string()))
}

/// Serves `key` from the cache, computing it with `f` on a blocking thread.
async fn cached<F>(state: &AppState, key: String, f: F) -> AppResult
where
    F: FnOnce(&Dataset) -> Shared + Send + 'static,
{
    let data = state.data()?;
    let body = state.cache.get(&key, move || f(&data)).await?;
    Ok(json_response(body))
}

async fn overview(State(s): State<Arc<AppState>>) -> AppResult {
    cached(&s, "overview".into(), |d| to_json(d.overview())).await
}

async fn snapshots(State(s): State<Arc<AppState>>) -> AppResult {
    cached(&s, "snapshots".into(), |d| to_json(&d.snapshots_view())).await
}

async fn role(State(s): State<Arc<AppState>>, Path((snapshot, cluster)): Path<(String, String)>) -> AppResult {
    let r = RoleRef {
        snapshot: snapshot.parse().map_err(|_| ApiError::not_found(format!("unknown snapshot `{snapshot}`")))?,
        cluster: cluster.parse().map_err(|_| ApiError::not_found(format!("unknown role `{cluster}`")))?,
    };
    cached(&s, format!("role/{r}"), move |d| match d.role(r) {
        Some(c) => to_json(c),
        None => Err(ApiError::not_found(format!("unknown role {r}"))),
    })
    .await
}

#[derive(Debug, Deserialize)]
struct FlowQuery {
    from: Option<String>,
    to: Option<String>,
}

fn parse_ref(v: Option<String>, name: &str) -> Result<RoleRef, ApiError> {
    let v = v.ok_or_else(|| ApiError::bad_request(format!("missing `{name}`")))?;
    v.parse().map_err(ApiError::bad_request)
}

async fn flow(State(s): State<Arc<AppState>>, Query(q): Query<FlowQuery>) -> AppResult {
    let (from, to) = (parse_ref(q.from, "from")?, parse_ref(q.to, "to")?);
    cached(&s, format!("flow/{from}-{to}"), move |d| match d.flow_detail(from, to) {
        Some(f) => to_json(&f),
        None => Err(ApiError::not_found(format!("no flow from {from} to {to}"))),
    })
    .await
}

async fn lasso(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> AppResult {
    let data = s.data()?;
    if data.flow(&id).is_none() {
        return Err(ApiError::not_found(format!("unknown flow `{id}`")));
    }
    let req: LassoRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed lasso: {e}")))?;
    // sequences are computed once per flow; the subset is cheap
    let key = format!("sequences/{id}");
    let flow_id = id.clone();
    s.cache.get(&key, move || data.flow_sequences(&flow_id).map_err(ApiError::from).and_then(|q| to_json(&q))).await?;
    let data = s.data()?;
    let out = tokio::task::spawn_blocking(move || data.lasso(&id, &req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(json_response(to_json(&out)?))
}

#[derive(Debug, Deserialize)]
struct StorylineQuery {
    snapshot: Option<String>,
}

async fn storyline(State(s): State<Arc<AppState>>, Path(player): Path<String>, Query(q): Query<StorylineQuery>) -> AppResult {
    let snapshot: usize = match q.snapshot {
        None => 0,
        Some(v) => v.parse().map_err(|_| ApiError::bad_request(format!("bad snapshot `{v}`")))?,
    };
    let data = s.data()?;
    if snapshot >= data.roles().len() {
        return Err(ApiError::not_found(format!("unknown snapshot {snapshot}")));
    }
    cached(&s, format!("storyline/{snapshot}/{player}"), move |d| {
        d.storyline(&player, snapshot).map_err(ApiError::from).and_then(|v| to_json(&v))
    })
    .await
}

async fn player_metrics(State(s): State<Arc<AppState>>, Path(player): Path<String>) -> AppResult {
    cached(&s, format!("metrics/{player}"), move |d| d.player_metrics(&player).map_err(ApiError::from).and_then(|v| to_json(&v))).await
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/overview", get(overview))
        .route("/snapshots", get(snapshots))
        .route("/snapshots/{s}/roles/{c}", get(role))
        .route("/flows", get(flow))
        .route("/flows/{id}/lasso", post(lasso))
        .route("/players/{p}/storyline", get(storyline))
        .route("/players/{p}/metrics", get(player_metrics))
        .fallback(fallback)
        .with_state(state)
}

pub async fn serve(store: &Store, host: &str, port: u16) -> anyhow::Result<()> {
    let app = router(Arc::new(AppState::open(store)));
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
