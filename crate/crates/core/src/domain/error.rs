use crate::graphstore::StoreError;

#[derive(Debug, thiserror::Error)]
pub enum DomainError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{kind} '{id}' not found")]
    NotFound { kind: &'static str, id: String },
    #[error("{kind} '{id}' has no version {version}")]
    UnknownVersion {
        kind: &'static str,
        id: String,
        version: u32,
    },
    #[error("{kind} '{id}' is deprecated")]
    Deprecated { kind: &'static str, id: String },
    #[error("{0}")]
    Forbidden(String),
    #[error("profile '{id}' has {got} alleles, schema expects {expected}")]
    SchemaMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("header does not match schema loci: expected {expected:?}, got {got:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("isolate and profile belong to different datasets")]
    CrossDatasetLink,
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl DomainError {
    pub(crate) fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        DomainError::NotFound {
            kind,
            id: id.into(),
        }
    }
}
