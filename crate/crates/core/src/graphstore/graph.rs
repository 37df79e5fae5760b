//! Immutable-snapshot graph state backed by persistent collections.
//!
//! Cloning a [`Graph`] is O(1); writers mutate a private clone and publish it
//! on commit, readers keep whichever clone they started with.

use std::collections::BTreeSet;
use std::sync::Arc;

use im::{HashMap as PMap, OrdSet, Vector};
use serde::{Deserialize, Serialize};

use super::value::{Properties, Value};
use super::{EdgeId, NodeId, DEPRECATED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub labels: BTreeSet<String>,
    pub properties: Properties,
}

impl NodeRecord {
    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.properties.get(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(Value::as_str)
    }

    pub fn int(&self, key: &str) -> Option<i64> {
        self.get(key).and_then(Value::as_int)
    }

    pub fn is_deprecated(&self) -> bool {
        matches!(self.get(DEPRECATED), Some(Value::Bool(true)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: EdgeId,
    pub kind: String,
    pub from: NodeId,
    pub to: NodeId,
    pub properties: Properties,
}

impl EdgeRecord {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.properties.get(key)
    }
}

/// One logged mutation. Replaying the ops of every committed transaction in
/// order reconstructs the graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub(crate) enum Op {
    CreateNode {
        id: NodeId,
        labels: BTreeSet<String>,
        properties: Properties,
    },
    CreateEdge {
        id: EdgeId,
        kind: String,
        from: NodeId,
        to: NodeId,
        properties: Properties,
    },
    SetNodeProperties {
        id: NodeId,
        properties: Properties,
    },
    DeleteEdge {
        id: EdgeId,
    },
}

/// Equality index over a fixed tuple of property keys, scoped to a node label
/// or an edge kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct IndexDef {
    pub scope: String,
    pub keys: Vec<String>,
}

impl IndexDef {
    /// Index key for a property map, or `None` when a key is absent.
    /// An absent deprecation flag indexes as `false`.
    pub fn key_of(&self, properties: &Properties) -> Option<Vec<Value>> {
        self.keys
            .iter()
            .map(|k| match properties.get(k) {
                Some(v) => Some(v.clone()),
                None if k == DEPRECATED => Some(Value::Bool(false)),
                None => None,
            })
            .collect()
    }
}

/// Ids ascending. A sorted vector rather than a set so that a page can be
/// cut out by position in O(log n).
pub(crate) type Posting = Vector<u64>;
type Postings = PMap<Vec<Value>, Posting>;

#[derive(Debug, Clone, Default)]
pub(crate) struct Graph {
    pub nodes: im::OrdMap<NodeId, Arc<NodeRecord>>,
    pub edges: im::OrdMap<EdgeId, Arc<EdgeRecord>>,
    pub labels: PMap<String, OrdSet<NodeId>>,
    pub outgoing: PMap<(NodeId, String), OrdSet<EdgeId>>,
    pub incoming: PMap<(NodeId, String), OrdSet<EdgeId>>,
    pub node_indexes: PMap<IndexDef, Postings>,
    pub edge_indexes: PMap<IndexDef, Postings>,
}

fn post(index: &mut Postings, key: Vec<Value>, id: u64) {
    let ids = index.entry(key).or_default();
    match ids.last() {
        None => ids.push_back(id),
        Some(&last) if last < id => ids.push_back(id),
        _ => {
            if let Err(at) = ids.binary_search(&id) {
                ids.insert(at, id);
            }
        }
    }
}

fn unpost(index: &mut Postings, key: &Vec<Value>, id: u64) {
    if let Some(set) = index.get_mut(key) {
        if let Ok(at) = set.binary_search(&id) {
            set.remove(at);
        }
        if set.is_empty() {
            index.remove(key);
        }
    }
}

impl Graph {
    pub fn apply(&mut self, op: Op) {
        match op {
            Op::CreateNode {
                id,
                labels,
                properties,
            } => {
                for label in &labels {
                    self.labels.entry(label.clone()).or_default().insert(id);
                }
                let node = NodeRecord {
                    id,
                    labels,
                    properties,
                };
                self.index_node(&node, true);
                self.nodes.insert(id, Arc::new(node));
            }
            Op::CreateEdge {
                id,
                kind,
                from,
                to,
                properties,
            } => {
                self.outgoing
                    .entry((from, kind.clone()))
                    .or_default()
                    .insert(id);
                self.incoming
                    .entry((to, kind.clone()))
                    .or_default()
                    .insert(id);
                let edge = EdgeRecord {
                    id,
                    kind,
                    from,
                    to,
                    properties,
                };
                self.index_edge(&edge, true);
                self.edges.insert(id, Arc::new(edge));
            }
            Op::SetNodeProperties { id, properties } => {
                let Some(old) = self.nodes.get(&id).cloned() else {
                    return;
                };
                self.index_node(&old, false);
                let mut node = (*old).clone();
                node.properties.extend(properties);
                self.index_node(&node, true);
                self.nodes.insert(id, Arc::new(node));
            }
            Op::DeleteEdge { id } => {
                let Some(edge) = self.edges.remove(&id) else {
                    return;
                };
                self.index_edge(&edge, false);
                for (adj, node) in [
                    (&mut self.outgoing, edge.from),
                    (&mut self.incoming, edge.to),
                ] {
                    let key = (node, edge.kind.clone());
                    if let Some(set) = adj.get_mut(&key) {
                        set.remove(&id);
                        if set.is_empty() {
                            adj.remove(&key);
                        }
                    }
                }
            }
        }
    }

    fn index_node(&mut self, node: &NodeRecord, insert: bool) {
        for (def, postings) in self.node_indexes.iter_mut() {
            if !node.labels.contains(&def.scope) {
                continue;
            }
            if let Some(key) = def.key_of(&node.properties) {
                if insert {
                    post(postings, key, node.id.0);
                } else {
                    unpost(postings, &key, node.id.0);
                }
            }
        }
    }

    fn index_edge(&mut self, edge: &EdgeRecord, insert: bool) {
        for (def, postings) in self.edge_indexes.iter_mut() {
            if def.scope != edge.kind {
                continue;
            }
            if let Some(key) = def.key_of(&edge.properties) {
                if insert {
                    post(postings, key, edge.id.0);
                } else {
                    unpost(postings, &key, edge.id.0);
                }
            }
        }
    }

    pub fn add_node_index(&mut self, def: IndexDef) {
        if self.node_indexes.contains_key(&def) {
            return;
        }
        let mut postings = Postings::new();
        if let Some(ids) = self.labels.get(&def.scope) {
            for id in ids {
                if let Some(key) = def.key_of(&self.nodes[id].properties) {
                    post(&mut postings, key, id.0);
                }
            }
        }
        self.node_indexes.insert(def, postings);
    }

    pub fn add_edge_index(&mut self, def: IndexDef) {
        if self.edge_indexes.contains_key(&def) {
            return;
        }
        let mut postings = Postings::new();
        for edge in self.edges.values() {
            if edge.kind == def.scope {
                if let Some(key) = def.key_of(&edge.properties) {
                    post(&mut postings, key, edge.id.0);
                }
            }
        }
        self.edge_indexes.insert(def, postings);
    }

    /// Picks the index covering the most filter keys among those whose keys
    /// are all constrained by `filters`.
    pub fn plan<'a>(
        indexes: &'a PMap<IndexDef, Postings>,
        scope: &str,
        filters: &Properties,
    ) -> Option<(&'a IndexDef, &'a Postings)> {
        indexes
            .iter()
            .filter(|(def, _)| {
                def.scope == scope && def.keys.iter().all(|k| filters.contains_key(k))
            })
            .max_by_key(|(def, _)| def.keys.len())
    }
}

/// True when every filter is satisfied; an absent deprecation flag matches
/// `false`.
pub(crate) fn matches(properties: &Properties, filters: &Properties) -> bool {
    filters.iter().all(|(k, want)| match properties.get(k) {
        Some(have) => have == want,
        None => k == DEPRECATED && *want == Value::Bool(false),
    })
}
