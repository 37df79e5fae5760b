//! Identity/state versioning on top of plain nodes and edges.

use std::collections::BTreeSet;

use super::{
    NodeId, Properties, Result, StoreError, Transaction, Value, CURRENT_VERSION, DEPRECATED,
    HAS_STATE, STATE_LABEL, VERSION,
};
use super::graph::Op;

/// Shape of a versioned entity as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct VersionedEntity {
    pub entity_node: NodeId,
    /// State node ids; index `i` holds version `i + 1`.
    pub state_nodes: Vec<NodeId>,
    pub current_version: u32,
    pub deprecated: bool,
}

/// One state of a versioned entity plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct VersionedState {
    pub entity: NodeId,
    pub version: u32,
    pub current_version: u32,
    pub deprecated: bool,
    pub properties: Properties,
}

impl Transaction {
    fn current_version_of(&self, entity: NodeId) -> Result<u32> {
        let node = self.node(entity).ok_or(StoreError::UnknownEntity(entity))?;
        node.int(CURRENT_VERSION)
            .map(|v| v as u32)
            .ok_or(StoreError::UnknownEntity(entity))
    }

    fn append_state(&mut self, entity: NodeId, version: u32, state: Properties) -> Result<()> {
        let state_node = self.create_node([STATE_LABEL], state)?;
        let mut edge = Properties::new();
        edge.insert(VERSION.into(), Value::from(version));
        self.create_edge(HAS_STATE, entity, state_node, edge)?;
        Ok(())
    }

    /// Creates an identity node carrying `identity` (business keys only) and
    /// its first state. Returns the identity node and version `1`.
    pub fn create_versioned<L, S>(
        &mut self,
        labels: L,
        mut identity: Properties,
        state: Properties,
    ) -> Result<(NodeId, u32)>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        identity.insert(CURRENT_VERSION.into(), Value::from(1u32));
        identity.insert(DEPRECATED.into(), Value::Bool(false));
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        let entity = self.create_node(labels, identity)?;
        self.append_state(entity, 1, state)?;
        Ok((entity, 1))
    }

    /// Appends a new state, leaving earlier states untouched.
    pub fn put_versioned(&mut self, entity: NodeId, state: Properties) -> Result<u32> {
        self.require_write()?;
        let current = self.current_version_of(entity)?;
        if self.get_node(entity)?.is_deprecated() {
            return Err(StoreError::Deprecated(entity));
        }
        let next = current + 1;
        self.append_state(entity, next, state)?;
        self.set_identity(entity, CURRENT_VERSION, Value::from(next));
        Ok(next)
    }

    /// Reads the state at `version`, or the current one when `None`.
    pub fn get_versioned(&self, entity: NodeId, version: Option<u32>) -> Result<VersionedState> {
        let current = self.current_version_of(entity)?;
        let version = version.unwrap_or(current);
        if version == 0 || version > current {
            return Err(StoreError::UnknownVersion { entity, version });
        }
        let edge = self
            .outgoing(entity, HAS_STATE)
            .nth(version as usize - 1)
            .filter(|e| e.get(VERSION).and_then(Value::as_int) == Some(i64::from(version)))
            .ok_or(StoreError::UnknownVersion { entity, version })?;
        let state = self.get_node(edge.to)?;
        Ok(VersionedState {
            entity,
            version,
            current_version: current,
            deprecated: self.get_node(entity)?.is_deprecated(),
            properties: state.properties.clone(),
        })
    }

    pub fn versioned_entity(&self, entity: NodeId) -> Result<VersionedEntity> {
        let current_version = self.current_version_of(entity)?;
        Ok(VersionedEntity {
            entity_node: entity,
            state_nodes: self.outgoing(entity, HAS_STATE).map(|e| e.to).collect(),
            current_version,
            deprecated: self.get_node(entity)?.is_deprecated(),
        })
    }

    /// Flags a node deprecated. History stays readable.
    pub fn soft_delete(&mut self, entity: NodeId) -> Result<()> {
        self.require_write()?;
        let node = self.node(entity).ok_or(StoreError::UnknownEntity(entity))?;
        if node.is_deprecated() {
            return Err(StoreError::Deprecated(entity));
        }
        self.set_identity(entity, DEPRECATED, Value::Bool(true));
        Ok(())
    }

    /// Clears the deprecation flag. Restoring a live node is a no-op.
    pub fn restore(&mut self, entity: NodeId) -> Result<()> {
        self.require_write()?;
        let node = self.node(entity).ok_or(StoreError::UnknownEntity(entity))?;
        if node.is_deprecated() {
            self.set_identity(entity, DEPRECATED, Value::Bool(false));
        }
        Ok(())
    }

    fn set_identity(&mut self, entity: NodeId, key: &str, value: Value) {
        let mut properties = Properties::new();
        properties.insert(key.into(), value);
        self.push(Op::SetNodeProperties {
            id: entity,
            properties,
        });
    }
}
