//! Distance matrices and goeBURST spanning forests over allelic profiles.

mod goeburst;
mod matrix;
pub mod repo;

#[cfg(test)]
mod tests;

pub use goeburst::{edge_compare, goeburst, rank_vertices, vertex_compare, MstEdge, UnionFind, VertexRank};
pub use matrix::{build_matrix, hamming, DistanceMatrix};
pub use repo::{InferenceEdge, InferenceResult, InferenceSummary};

use serde::{Deserialize, Serialize};

use crate::scalar::Distance;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InferenceError {
    #[error("profile length mismatch: expected {expected} loci, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no profiles to compare")]
    Empty,
    #[error("lvs must be between 1 and {max}, got {got}")]
    InvalidLevels { max: usize, got: usize },
}

/// goeBURST tuning. `lvs` bounds the locus-variant depth used to break ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoeBurstParams {
    pub lvs: usize,
}

impl Default for GoeBurstParams {
    fn default() -> Self {
        Self { lvs: 3 }
    }
}

impl GoeBurstParams {
    pub fn validate(&self, loci: usize) -> Result<(), InferenceError> {
        if self.lvs == 0 || self.lvs > loci {
            return Err(InferenceError::InvalidLevels { max: loci, got: self.lvs });
        }
        Ok(())
    }
}

/// Output of a goeBURST run, keyed by profile id.
#[derive(Debug, Clone, PartialEq)]
pub struct Inferred {
    pub edges: Vec<InferenceEdge>,
    /// Profile ids from the highest ranked down.
    pub ranking: Vec<String>,
}

/// Matrix, ranks and spanning forest in one call. Frequencies are taken from
/// the profiles. An empty input yields an empty forest.
pub fn infer<D: Distance>(
    profiles: &[crate::domain::AllelicProfile],
    params: GoeBurstParams,
) -> Result<Inferred, InferenceError> {
    let Some(first) = profiles.first() else {
        return Ok(Inferred { edges: vec![], ranking: vec![] });
    };
    params.validate(first.alleles.len())?;
    let matrix: DistanceMatrix<D> = build_matrix(profiles)?;
    let frequencies: Vec<u64> = profiles.iter().map(|p| p.frequency).collect();
    let ranks = rank_vertices(&matrix, params.lvs, &frequencies);
    let tree = goeburst(&matrix, params, &ranks);

    let ids = matrix.ids();
    let edges = tree
        .iter()
        .map(|e| InferenceEdge {
            from: ids[e.from].clone(),
            to: ids[e.to].clone(),
            distance: e.distance.to_u64().unwrap_or(u64::MAX),
        })
        .collect();
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by(|a, b| vertex_compare(&ranks[*a], &ranks[*b]));
    Ok(Inferred {
        edges,
        ranking: order.into_iter().map(|i| ids[i].clone()).collect(),
    })
}
