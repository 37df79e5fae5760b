//! Typed phylogenetic entities and their repositories.
//!
//! Repositories are free functions over a caller-supplied [`Transaction`].
//! Access to project data goes through handles: [`ProjectHandle`] is only
//! obtainable via [`project::open`], which resolves the caller's permission,
//! and [`DatasetHandle`] carries its project's handle along with the
//! dataset's schema.
//!
//! [`Transaction`]: crate::graphstore::Transaction

pub mod allele;
pub mod dataset;
mod error;
pub mod isolate;
mod model;
pub mod profile;
pub mod project;
pub mod schema;
pub mod tsv;
pub mod user;

pub use dataset::DatasetHandle;
pub use error::DomainError;
pub use model::*;
pub use project::ProjectHandle;

use crate::graphstore::{Store, DEPRECATED};

pub type Result<T, E = DomainError> = std::result::Result<T, E>;

/// Node labels and property keys shared by the repositories.
pub mod keys {
    pub const PROJECT: &str = "Project";
    pub const DATASET: &str = "Dataset";
    pub const SCHEMA: &str = "Schema";
    pub const PROFILE: &str = "Profile";
    pub const ISOLATE: &str = "Isolate";
    pub const ALLELE: &str = "Allele";
    pub const USER: &str = "User";

    /// Business key of any entity.
    pub const KEY: &str = "key";
    /// Owning project node id on a dataset.
    pub const PROJECT_REF: &str = "project";
    /// Owning dataset node id on profiles, isolates and result nodes.
    pub const DATASET_REF: &str = "dataset";
    pub const FREQUENCY: &str = "frequency";
    pub const TAXON: &str = "taxon";
    pub const LOCUS: &str = "locus";
}

/// Declares the indexes the repositories rely on. Call once after opening.
pub fn install_indexes(store: &Store) {
    use keys::*;
    store.ensure_node_index(PROJECT, &[KEY]);
    store.ensure_node_index(USER, &[KEY]);
    store.ensure_node_index(SCHEMA, &[KEY]);
    store.ensure_node_index(DATASET, &[PROJECT_REF, KEY]);
    store.ensure_node_index(DATASET, &[PROJECT_REF, DEPRECATED]);
    store.ensure_node_index(PROFILE, &[DATASET_REF]);
    store.ensure_node_index(PROFILE, &[DATASET_REF, KEY]);
    store.ensure_node_index(PROFILE, &[DATASET_REF, DEPRECATED]);
    store.ensure_node_index(ISOLATE, &[DATASET_REF]);
    store.ensure_node_index(ISOLATE, &[DATASET_REF, KEY]);
    store.ensure_node_index(ISOLATE, &[DATASET_REF, DEPRECATED]);
    store.ensure_node_index(ALLELE, &[TAXON, LOCUS, KEY]);
    store.ensure_node_index(ALLELE, &[TAXON, LOCUS, DEPRECATED]);
}

/// One page of results plus the size of the full result set.
#[derive(Debug, Clone, PartialEq)]
pub struct Paged<T> {
    pub items: Vec<T>,
    pub total: usize,
}

impl<T> Paged<T> {
    pub fn map<U>(self, f: impl FnMut(T) -> U) -> Paged<U> {
        Paged {
            items: self.items.into_iter().map(f).collect(),
            total: self.total,
        }
    }
}

pub(crate) fn require_key(kind: &str, key: &str) -> Result<()> {
    if key.trim().is_empty() {
        return Err(DomainError::Validation(format!("{kind} id must not be empty")));
    }
    if key.contains(['\t', '\n', '\r']) {
        return Err(DomainError::Validation(format!(
            "{kind} id must not contain tabs or line breaks"
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testutil;
