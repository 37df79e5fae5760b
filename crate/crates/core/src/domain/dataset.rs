use crate::graphstore::{props, NodeId, NodeRecord, Page, Transaction, Value, DEPRECATED};

use super::keys::{DATASET, KEY, PROJECT_REF};
use super::{require_key, schema, Dataset, DomainError, Paged, ProjectHandle, Result, Schema};

/// Column name written in the first header cell of exported profile TSV.
pub(crate) const ID_COLUMN: &str = "id_column";
const DEFAULT_ID_COLUMN: &str = "id";

/// A dataset resolved within an opened project, with its schema loaded.
#[derive(Debug, Clone)]
pub struct DatasetHandle {
    node: NodeId,
    dataset: Dataset,
    schema: Schema,
    project: ProjectHandle,
    id_column: String,
}

impl DatasetHandle {
    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn id(&self) -> &str {
        &self.dataset.id
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn project(&self) -> &ProjectHandle {
        &self.project
    }

    pub fn id_column(&self) -> &str {
        &self.id_column
    }

    pub(crate) fn set_id_column(&mut self, name: &str) {
        self.id_column = name.to_owned();
    }

    pub fn require_write(&self) -> Result<()> {
        self.project.require_write()
    }
}

fn decode(node: &NodeRecord) -> Dataset {
    Dataset {
        id: node.str(KEY).unwrap_or_default().to_owned(),
        schema: node.str("schema").unwrap_or_default().to_owned(),
        description: node.str("description").unwrap_or_default().to_owned(),
    }
}

fn find(tx: &Transaction, project: &ProjectHandle, key: &str) -> Option<std::sync::Arc<NodeRecord>> {
    tx.find_node(
        DATASET,
        &props([
            (PROJECT_REF, Value::from(project.node().0)),
            (KEY, Value::from(key)),
        ]),
    )
}

fn handle(tx: &Transaction, project: &ProjectHandle, node: &NodeRecord) -> Result<DatasetHandle> {
    let dataset = decode(node);
    let schema = schema::get(tx, &dataset.schema, None)?.value;
    Ok(DatasetHandle {
        node: node.id,
        id_column: node.str(ID_COLUMN).unwrap_or(DEFAULT_ID_COLUMN).to_owned(),
        dataset,
        schema,
        project: project.clone(),
    })
}

/// Creates or updates a dataset. The schema reference is fixed at creation.
/// Returns the handle and whether the dataset was newly created.
pub fn save(
    tx: &mut Transaction,
    project: &ProjectHandle,
    dataset: &Dataset,
) -> Result<(DatasetHandle, bool)> {
    project.require_write()?;
    require_key("dataset", &dataset.id)?;
    // The schema must exist.
    schema::get(tx, &dataset.schema, None)?;
    match find(tx, project, &dataset.id) {
        Some(node) => {
            if node.is_deprecated() {
                return Err(DomainError::Deprecated {
                    kind: "dataset",
                    id: dataset.id.clone(),
                });
            }
            if node.str("schema") != Some(dataset.schema.as_str()) {
                return Err(DomainError::Validation(format!(
                    "schema of dataset '{}' cannot change",
                    dataset.id
                )));
            }
            tx.set_node_properties(
                node.id,
                props([("description", dataset.description.as_str())]),
            )?;
            let node = tx.get_node(node.id)?.clone();
            Ok((handle(tx, project, &node)?, false))
        }
        None => {
            let id = tx.create_node(
                [DATASET],
                props([
                    (PROJECT_REF, Value::from(project.node().0)),
                    (KEY, Value::from(&dataset.id)),
                    ("schema", Value::from(&dataset.schema)),
                    ("description", Value::from(&dataset.description)),
                    (DEPRECATED, Value::Bool(false)),
                ]),
            )?;
            let node = tx.get_node(id)?.clone();
            Ok((handle(tx, project, &node)?, true))
        }
    }
}

pub fn open(
    tx: &Transaction,
    project: &ProjectHandle,
    key: &str,
    include_deprecated: bool,
) -> Result<DatasetHandle> {
    let node = find(tx, project, key)
        .filter(|n| include_deprecated || !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("dataset", key))?;
    handle(tx, project, &node)
}

/// Re-reads a dataset handle (e.g. after another transaction changed it).
pub fn reopen(tx: &Transaction, ds: &DatasetHandle) -> Result<DatasetHandle> {
    let node = tx
        .node(ds.node)
        .ok_or_else(|| DomainError::not_found("dataset", ds.id()))?
        .clone();
    handle(tx, &ds.project, &node)
}

pub fn list(
    tx: &Transaction,
    project: &ProjectHandle,
    page: Page,
    include_deprecated: bool,
) -> Paged<Dataset> {
    let filter = props([(PROJECT_REF, Value::from(project.node().0))]);
    Paged {
        total: tx.count_nodes(DATASET, &filter, include_deprecated),
        items: tx
            .match_nodes(DATASET, &filter, page, include_deprecated)
            .iter()
            .map(|n| decode(n))
            .collect(),
    }
}

pub fn delete(tx: &mut Transaction, ds: &DatasetHandle) -> Result<()> {
    ds.require_write()?;
    tx.soft_delete(ds.node)?;
    Ok(())
}
