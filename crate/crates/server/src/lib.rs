//! HTTP server over the phylodb core: bearer-token auth, paginated JSON and
//! TSV endpoints, and a background worker draining the job queue.

pub mod auth;
pub mod config;
pub mod error;
pub mod routes;
pub mod services;

use std::sync::Arc;
use std::time::Instant;

use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;

use phylodb_core::domain::User;
use phylodb_core::engine::{Engine, Worker};
use phylodb_core::graphstore::{Store, StoreOptions};

use auth::TokenVerifier;
use config::Config;
use error::ApiError;
use services::Services;

const BODY_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub services: Services,
    pub verifier: Arc<dyn TokenVerifier>,
    /// Default page size.
    pub page_limit: usize,
}

impl AppState {
    pub fn new(store: Store, engine: Engine, verifier: Arc<dyn TokenVerifier>, page_limit: usize) -> Self {
        Self {
            services: Services::new(store, engine),
            verifier,
            page_limit,
        }
    }
}

/// Opens the store and engine described by `config` and starts the worker.
pub fn open(config: &Config) -> anyhow::Result<(AppState, Worker)> {
    config.validate()?;
    let store = Store::open(&config.store, StoreOptions { sync: config.sync })?;
    phylodb_core::install_indexes(&store);
    let engine = Engine::open(store.clone())?;
    let worker = engine.start_worker(config.poll_interval());
    let verifier = Arc::new(auth::HmacTokens::new(&config.token_secret));
    Ok((AppState::new(store, engine, verifier, config.page_limit), worker))
}

/// User id recorded on the response for the request log.
#[derive(Clone)]
struct Principal(String);

async fn authenticate(State(state): State<AppState>, mut req: Request, next: Next) -> Response {
    let header = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
    let user: User = match auth::bearer(header).and_then(|t| state.verifier.verify(t)) {
        Ok(u) => u,
        Err(e) => {
            let mut resp = ApiError::unauthorized(e.to_string()).into_response();
            resp.headers_mut()
                .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
            return resp;
        }
    };
    let id = user.id.clone();
    req.extensions_mut().insert(user);
    let mut resp = next.run(req).await;
    resp.extensions_mut().insert(Principal(id));
    resp
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let started = Instant::now();
    let resp = next.run(req).await;
    let user = resp
        .extensions()
        .get::<Principal>()
        .map_or("-", |p| p.0.as_str())
        .to_owned();
    tracing::info!(
        target: "phylodb::http",
        %method,
        path,
        status = resp.status().as_u16(),
        duration_ms = started.elapsed().as_secs_f64() * 1e3,
        user,
    );
    resp
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method not allowed")
}

pub fn router(state: AppState) -> Router {
    let protected = routes::protected()
        .route_layer(middleware::from_fn_with_state(state.clone(), authenticate));
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .merge(protected)
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}
