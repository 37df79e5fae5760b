//! Versioned property-graph store with typing-data repositories, goeBURST
//! inference, radial layout and a queued algorithm engine.

pub mod domain;
pub mod engine;
pub mod graphstore;
pub mod inference;
pub mod scalar;
pub mod viz;

/// Distance matrix over allele-count distances.
pub type Matrix = inference::DistanceMatrix<u32>;

/// Rooted layout tree with double precision edge lengths.
pub type Tree = viz::LayoutTree<f64>;

/// Declares every index the repositories rely on. Call once after opening.
pub fn install_indexes(store: &graphstore::Store) {
    domain::install_indexes(store);
    inference::repo::install_indexes(store);
    viz::repo::install_indexes(store);
}
