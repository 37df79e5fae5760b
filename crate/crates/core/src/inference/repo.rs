//! Inference layers: one `Inference` node per result plus `DISTANCES` edges
//! between profile identity nodes, labelled with the inference id.

use serde::{Deserialize, Serialize};

use crate::domain::keys::{DATASET_REF, KEY};
use crate::domain::{profile, DatasetHandle, DomainError, Paged, Result};
use crate::graphstore::{props, NodeId, NodeRecord, Page, Properties, Store, Transaction, Value};

pub const INFERENCE: &str = "Inference";
pub const DISTANCES: &str = "DISTANCES";
const INFERENCE_REF: &str = "inference";
const DISTANCE: &str = "distance";
const ALGORITHM: &str = "algorithm";
const PARAMETERS: &str = "parameters";
const EDGE_COUNT: &str = "edge_count";
const RANKING: &str = "ranking";

pub fn install_indexes(store: &Store) {
    store.ensure_node_index(INFERENCE, &[DATASET_REF, KEY]);
    store.ensure_edge_index(DISTANCES, &[DATASET_REF, INFERENCE_REF]);
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InferenceEdge {
    pub from: String,
    pub to: String,
    pub distance: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub id: String,
    pub algorithm: String,
    pub dataset: String,
    pub parameters: serde_json::Value,
    pub edges: Vec<InferenceEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceSummary {
    pub id: String,
    pub algorithm: String,
    pub parameters: serde_json::Value,
    pub edge_count: u64,
}

fn scope(ds: &DatasetHandle) -> Properties {
    props([(DATASET_REF, Value::from(ds.node().0))])
}

fn find(tx: &Transaction, ds: &DatasetHandle, id: &str) -> Option<NodeId> {
    let mut filter = scope(ds);
    filter.insert(KEY.into(), id.into());
    tx.find_node(INFERENCE, &filter).map(|n| n.id)
}

pub fn exists(tx: &Transaction, ds: &DatasetHandle, id: &str) -> bool {
    find(tx, ds, id).is_some()
}

fn layer_filter(ds: &DatasetHandle, id: &str) -> Properties {
    let mut filter = scope(ds);
    filter.insert(INFERENCE_REF.into(), id.into());
    filter
}

fn parameters_of(node: &NodeRecord) -> serde_json::Value {
    node.str(PARAMETERS)
        .and_then(|s| serde_json::from_str(s).ok())
        .unwrap_or(serde_json::Value::Null)
}

/// Writes `result` as a layer of the dataset, replacing any layer already
/// stored under the same id. `ranking` lists profile ids from the highest
/// ranked down and is used to choose layout roots.
pub fn persist(
    tx: &mut Transaction,
    ds: &DatasetHandle,
    result: &InferenceResult,
    ranking: &[String],
) -> Result<()> {
    ds.require_write()?;
    crate::domain::require_key("inference", &result.id)?;

    let endpoints = |key: &str| {
        profile::find(tx, ds, key)
            .map(|n| n.id)
            .ok_or_else(|| DomainError::not_found("profile", key))
    };
    let mut resolved = Vec::with_capacity(result.edges.len());
    for e in &result.edges {
        resolved.push((endpoints(&e.from)?, endpoints(&e.to)?, e.distance));
    }

    let mut meta = props([
        (ALGORITHM, Value::from(&result.algorithm)),
        (PARAMETERS, Value::from(result.parameters.to_string())),
        (EDGE_COUNT, Value::from(result.edges.len() as u64)),
        (RANKING, Value::from(serde_json::to_string(ranking).expect("ids serialize"))),
    ]);
    match find(tx, ds, &result.id) {
        Some(node) => {
            for old in tx.match_edges(DISTANCES, &layer_filter(ds, &result.id)) {
                tx.delete_edge(old.id)?;
            }
            tx.set_node_properties(node, meta)?;
        }
        None => {
            meta.extend(scope(ds));
            meta.insert(KEY.into(), Value::from(&result.id));
            tx.create_node([INFERENCE], meta)?;
        }
    }
    for (from, to, d) in resolved {
        let mut p = layer_filter(ds, &result.id);
        p.insert(DISTANCE.into(), Value::from(d));
        tx.create_edge(DISTANCES, from, to, p)?;
    }
    Ok(())
}

pub fn get(tx: &Transaction, ds: &DatasetHandle, id: &str) -> Result<InferenceResult> {
    let node = find(tx, ds, id).ok_or_else(|| DomainError::not_found("inference", id))?;
    let node = tx.get_node(node)?;
    Ok(InferenceResult {
        id: id.to_owned(),
        algorithm: node.str(ALGORITHM).unwrap_or_default().to_owned(),
        dataset: ds.id().to_owned(),
        parameters: parameters_of(node),
        edges: edges(tx, ds, id),
    })
}

/// Edges of one layer in write order; empty for an unknown id.
pub fn edges(tx: &Transaction, ds: &DatasetHandle, id: &str) -> Vec<InferenceEdge> {
    let key = |n| {
        tx.node(n)
            .and_then(|r| r.str(KEY))
            .unwrap_or_default()
            .to_owned()
    };
    tx.match_edges(DISTANCES, &layer_filter(ds, id))
        .iter()
        .map(|e| InferenceEdge {
            from: key(e.from),
            to: key(e.to),
            distance: e.get(DISTANCE).and_then(Value::as_int).unwrap_or(0).max(0) as u64,
        })
        .collect()
}

/// Profile ids of the layer from the highest ranked down, when recorded.
pub fn ranking(tx: &Transaction, ds: &DatasetHandle, id: &str) -> Result<Option<Vec<String>>> {
    let node = find(tx, ds, id).ok_or_else(|| DomainError::not_found("inference", id))?;
    Ok(tx
        .get_node(node)?
        .str(RANKING)
        .and_then(|s| serde_json::from_str(s).ok()))
}

pub fn list(tx: &Transaction, ds: &DatasetHandle, page: Page) -> Paged<InferenceSummary> {
    let filter = scope(ds);
    let items = tx
        .match_nodes(INFERENCE, &filter, page, true)
        .iter()
        .map(|n| InferenceSummary {
            id: n.str(KEY).unwrap_or_default().to_owned(),
            algorithm: n.str(ALGORITHM).unwrap_or_default().to_owned(),
            parameters: parameters_of(n),
            edge_count: n.int(EDGE_COUNT).unwrap_or(0).max(0) as u64,
        })
        .collect();
    Paged {
        items,
        total: tx.count_nodes(INFERENCE, &filter, true),
    }
}
