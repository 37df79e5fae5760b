use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use phylodb_core::domain::DomainError;
use phylodb_core::engine::EngineError;
use phylodb_core::graphstore::StoreError;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub status: u16,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub details: Vec<String>,
}

pub type ApiResult<T> = Result<T, ApiError>;

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            details: vec![],
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    pub fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            status: self.status.as_u16(),
            message: self.message,
            details: self.details,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        DomainError::from(e).into()
    }
}

impl From<DomainError> for ApiError {
    fn from(e: DomainError) -> Self {
        let status = match &e {
            DomainError::Validation(_)
            | DomainError::SchemaMismatch { .. }
            | DomainError::HeaderMismatch { .. }
            | DomainError::CrossDatasetLink => StatusCode::BAD_REQUEST,
            DomainError::NotFound { .. } | DomainError::UnknownVersion { .. } => StatusCode::NOT_FOUND,
            DomainError::Forbidden(_) => StatusCode::FORBIDDEN,
            DomainError::Deprecated { .. } | DomainError::Conflict(_) => StatusCode::CONFLICT,
            DomainError::Store(StoreError::InvalidPage) => StatusCode::BAD_REQUEST,
            DomainError::Store(StoreError::Closed) => StatusCode::SERVICE_UNAVAILABLE,
            DomainError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let details = match &e {
            DomainError::SchemaMismatch { expected, got, .. } => {
                vec![format!("expected {expected} alleles"), format!("got {got}")]
            }
            DomainError::HeaderMismatch { expected, .. } => {
                vec![format!("expected header: {}", expected.join("\t"))]
            }
            _ => vec![],
        };
        if status.is_server_error() {
            tracing::error!("internal error: {e}");
        }
        ApiError::new(status, e.to_string()).with_details(details)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::UnknownAlgorithm(_) | EngineError::InvalidParameters(_) => StatusCode::BAD_REQUEST,
            EngineError::InvalidContext(_) | EngineError::UnknownJob(_) => StatusCode::NOT_FOUND,
            EngineError::Conflict(_) | EngineError::DuplicateAlgorithm(_) => StatusCode::CONFLICT,
            EngineError::Domain(_) => {
                let EngineError::Domain(d) = e else { unreachable!() };
                return d.into();
            }
        };
        ApiError::new(status, e.to_string())
    }
}
