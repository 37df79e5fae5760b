//! Stored layouts: a `Visualization` node per (inference, id) with one
//! `HAS_COORDINATE` edge to each placed profile.

use serde::{Deserialize, Serialize};

use crate::domain::keys::{DATASET_REF, KEY};
use crate::domain::{profile, require_key, DatasetHandle, DomainError, Paged, Result};
use crate::graphstore::{props, NodeId, Page, Properties, Store, Transaction, Value};
use crate::inference::repo as inference;

pub const VISUALIZATION: &str = "Visualization";
pub const HAS_COORDINATE: &str = "HAS_COORDINATE";
const INFERENCE_REF: &str = "inference";
const ALGORITHM: &str = "algorithm";
const PARAMETERS: &str = "parameters";

pub fn install_indexes(store: &Store) {
    store.ensure_node_index(VISUALIZATION, &[DATASET_REF, INFERENCE_REF, KEY]);
    store.ensure_node_index(VISUALIZATION, &[DATASET_REF, INFERENCE_REF]);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub profile: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualizationResult {
    pub id: String,
    pub inference: String,
    pub algorithm: String,
    #[serde(default)]
    pub parameters: serde_json::Value,
    pub coordinates: Vec<Coordinate>,
}

fn scope(ds: &DatasetHandle, inference: &str) -> Properties {
    props([
        (DATASET_REF, Value::from(ds.node().0)),
        (INFERENCE_REF, Value::from(inference)),
    ])
}

fn find(tx: &Transaction, ds: &DatasetHandle, inference: &str, id: &str) -> Option<NodeId> {
    let mut filter = scope(ds, inference);
    filter.insert(KEY.into(), id.into());
    tx.find_node(VISUALIZATION, &filter).map(|n| n.id)
}

/// Stores `result`, replacing any layout already stored under its id.
pub fn persist(tx: &mut Transaction, ds: &DatasetHandle, result: &VisualizationResult) -> Result<()> {
    ds.require_write()?;
    require_key("visualization", &result.id)?;
    if !inference::exists(tx, ds, &result.inference) {
        return Err(DomainError::not_found("inference", &result.inference));
    }
    let mut targets = Vec::with_capacity(result.coordinates.len());
    for c in &result.coordinates {
        if !(c.x.is_finite() && c.y.is_finite()) {
            return Err(DomainError::Validation(format!("non-finite coordinate for {}", c.profile)));
        }
        let node = profile::find(tx, ds, &c.profile)
            .ok_or_else(|| DomainError::not_found("profile", &c.profile))?;
        targets.push((node.id, c.x, c.y));
    }

    let meta = props([
        (ALGORITHM, Value::from(&result.algorithm)),
        (PARAMETERS, Value::from(result.parameters.to_string())),
    ]);
    let node = match find(tx, ds, &result.inference, &result.id) {
        Some(node) => {
            let old: Vec<_> = tx.outgoing(node, HAS_COORDINATE).map(|e| e.id).collect();
            for e in old {
                tx.delete_edge(e)?;
            }
            tx.set_node_properties(node, meta)?;
            node
        }
        None => {
            let mut p = scope(ds, &result.inference);
            p.extend(meta);
            p.insert(KEY.into(), Value::from(&result.id));
            tx.create_node([VISUALIZATION], p)?
        }
    };
    for (target, x, y) in targets {
        tx.create_edge(HAS_COORDINATE, node, target, props([("x", x), ("y", y)]))?;
    }
    Ok(())
}

pub fn get(tx: &Transaction, ds: &DatasetHandle, inference: &str, id: &str) -> Result<VisualizationResult> {
    let node = find(tx, ds, inference, id).ok_or_else(|| DomainError::not_found("visualization", id))?;
    let record = tx.get_node(node)?;
    let coordinates = tx
        .outgoing(node, HAS_COORDINATE)
        .map(|e| Coordinate {
            profile: tx
                .node(e.to)
                .and_then(|n| n.str(KEY))
                .unwrap_or_default()
                .to_owned(),
            x: e.get("x").and_then(Value::as_float).unwrap_or(f64::NAN),
            y: e.get("y").and_then(Value::as_float).unwrap_or(f64::NAN),
        })
        .collect();
    Ok(VisualizationResult {
        id: id.to_owned(),
        inference: inference.to_owned(),
        algorithm: record.str(ALGORITHM).unwrap_or_default().to_owned(),
        parameters: record
            .str(PARAMETERS)
            .and_then(|s| serde_json::from_str(s).ok())
            .unwrap_or(serde_json::Value::Null),
        coordinates,
    })
}

pub fn exists(tx: &Transaction, ds: &DatasetHandle, inference: &str, id: &str) -> bool {
    find(tx, ds, inference, id).is_some()
}

/// Visualization ids stored for one inference, ascending by creation.
pub fn list(tx: &Transaction, ds: &DatasetHandle, inference: &str, page: Page) -> Paged<String> {
    let filter = scope(ds, inference);
    Paged {
        items: tx
            .match_nodes(VISUALIZATION, &filter, page, true)
            .iter()
            .map(|n| n.str(KEY).unwrap_or_default().to_owned())
            .collect(),
        total: tx.count_nodes(VISUALIZATION, &filter, true),
    }
}
