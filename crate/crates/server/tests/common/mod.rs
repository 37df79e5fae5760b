#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use phylodb_core::domain::Role;
use phylodb_core::engine::Engine;
use phylodb_core::graphstore::{Store, StoreOptions};
use phylodb_server::auth::HmacTokens;
use phylodb_server::{router, AppState};

pub const SECRET: &str = "test-secret-0123456789";
pub const LOCI: [&str; 7] = ["aroE", "gdh", "gki", "recP", "spi", "xpt", "ddl"];

pub struct App {
    pub router: Router,
    pub state: AppState,
    pub store: Store,
    pub tokens: HmacTokens,
    _dir: tempfile::TempDir,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }

    pub fn total(&self) -> usize {
        self.headers["x-total-count"].to_str().unwrap().parse().unwrap()
    }
}

impl App {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), StoreOptions { sync: false }).unwrap();
        phylodb_core::install_indexes(&store);
        let engine = Engine::open(store.clone()).unwrap();
        let tokens = HmacTokens::new(SECRET);
        let state = AppState::new(store.clone(), engine, Arc::new(tokens.clone()), 20);
        Self {
            router: router(state.clone()),
            state,
            store,
            tokens,
            _dir: dir,
        }
    }

    pub fn token(&self, sub: &str) -> String {
        self.tokens.mint(sub, Role::User, 3600)
    }

    pub fn admin(&self) -> String {
        self.tokens.mint("root", Role::Admin, 3600)
    }

    pub async fn send(&self, method: Method, uri: &str, token: Option<&str>, body: Option<(&str, String)>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let req = match body {
            Some((ct, b)) => req.header(header::CONTENT_TYPE, ct).body(Body::from(b)),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Reply {
            status,
            headers,
            text: String::from_utf8(bytes.to_vec()).unwrap(),
        }
    }

    pub async fn get(&self, uri: &str, token: &str) -> Reply {
        self.send(Method::GET, uri, Some(token), None).await
    }

    pub async fn post(&self, uri: &str, token: &str, body: Value) -> Reply {
        self.send(Method::POST, uri, Some(token), Some(("application/json", body.to_string())))
            .await
    }

    pub async fn put(&self, uri: &str, token: &str, body: Value) -> Reply {
        self.send(Method::PUT, uri, Some(token), Some(("application/json", body.to_string())))
            .await
    }

    pub async fn delete(&self, uri: &str, token: &str) -> Reply {
        self.send(Method::DELETE, uri, Some(token), None).await
    }

    pub async fn post_tsv(&self, uri: &str, token: &str, body: String) -> Reply {
        self.send(Method::POST, uri, Some(token), Some(("text/tab-separated-values", body)))
            .await
    }

    /// Schema `mlst`, public project `p1` owned by `owner`, dataset `d1`.
    pub async fn seed(&self, owner: &str) {
        let admin = self.admin();
        let r = self
            .post(
                "/schemas",
                &admin,
                serde_json::json!({"id": "mlst", "taxon": "spneumoniae", "loci": LOCI}),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        let t = self.token(owner);
        let r = self.post("/projects", &t, serde_json::json!({"id": "p1", "name": "P1"})).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        let r = self
            .post("/projects/p1/datasets", &t, serde_json::json!({"id": "d1", "schema": "mlst"}))
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    }

    /// Drains the job queue on the calling thread.
    pub async fn drain(&self) {
        let engine = self.state.services.engine().clone();
        tokio::task::spawn_blocking(move || engine.run_until_idle()).await.unwrap();
    }
}

pub const DS: &str = "/projects/p1/datasets/d1";

pub fn profile(id: &str, alleles: [u32; 7]) -> Value {
    let alleles: Vec<Value> = alleles
        .iter()
        .map(|&a| if a == 0 { Value::Null } else { Value::String(a.to_string()) })
        .collect();
    serde_json::json!({"id": id, "alleles": alleles})
}
