use std::collections::BTreeSet;

use crate::graphstore::{props, NodeId, NodeRecord, Page, Properties, Transaction, Value};

use super::keys::{KEY, PROJECT};
use super::{require_key, Access, DomainError, Paged, Project, Result, User, Visibility};

/// A project resolved for a specific caller, together with the permission
/// that caller holds on it.
#[derive(Debug, Clone)]
pub struct ProjectHandle {
    node: NodeId,
    project: Project,
    access: Access,
    deprecated: bool,
}

impl ProjectHandle {
    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn id(&self) -> &str {
        &self.project.id
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn access(&self) -> Access {
        self.access
    }

    pub fn is_deprecated(&self) -> bool {
        self.deprecated
    }

    pub fn require_write(&self) -> Result<()> {
        if self.access < Access::Write {
            return Err(DomainError::Forbidden(format!(
                "no write permission on project '{}'",
                self.project.id
            )));
        }
        if self.deprecated {
            return Err(DomainError::Deprecated {
                kind: "project",
                id: self.project.id.clone(),
            });
        }
        Ok(())
    }
}

/// Permission `user` holds on `project`, if any.
pub fn access_for(user: &User, project: &Project) -> Option<Access> {
    if user.is_admin() || project.members.contains(&user.id) {
        Some(Access::Write)
    } else if project.visibility == Visibility::Public {
        Some(Access::Read)
    } else {
        None
    }
}

fn decode(node: &NodeRecord) -> Project {
    let members: BTreeSet<String> = node
        .str("members")
        .and_then(|m| serde_json::from_str(m).ok())
        .unwrap_or_default();
    Project {
        id: node.str(KEY).unwrap_or_default().to_owned(),
        name: node.str("name").unwrap_or_default().to_owned(),
        visibility: node
            .str("visibility")
            .and_then(Visibility::parse)
            .unwrap_or_default(),
        members,
    }
}

fn encode(project: &Project) -> Properties {
    props([
        (KEY, Value::from(&project.id)),
        ("name", Value::from(&project.name)),
        ("visibility", Value::from(project.visibility.as_str())),
        (
            "members",
            Value::from(serde_json::to_string(&project.members).expect("string set")),
        ),
    ])
}

fn find(tx: &Transaction, key: &str) -> Option<std::sync::Arc<NodeRecord>> {
    tx.find_node(PROJECT, &props([(KEY, key)]))
}

/// Creates or updates a project. The creator becomes a member. Returns the
/// handle and whether the project was newly created.
pub fn save(tx: &mut Transaction, user: &User, project: &Project) -> Result<(ProjectHandle, bool)> {
    require_key("project", &project.id)?;
    let mut project = project.clone();
    match find(tx, &project.id) {
        Some(node) => {
            let existing = decode(&node);
            if node.is_deprecated() {
                return Err(DomainError::Deprecated {
                    kind: "project",
                    id: project.id,
                });
            }
            if access_for(user, &existing) != Some(Access::Write) {
                return Err(DomainError::Forbidden(format!(
                    "no write permission on project '{}'",
                    project.id
                )));
            }
            tx.set_node_properties(node.id, encode(&project))?;
            Ok((
                ProjectHandle {
                    node: node.id,
                    access: Access::Write,
                    project,
                    deprecated: false,
                },
                false,
            ))
        }
        None => {
            project.members.insert(user.id.clone());
            let mut properties = encode(&project);
            properties.insert(crate::graphstore::DEPRECATED.into(), Value::Bool(false));
            let node = tx.create_node([PROJECT], properties)?;
            Ok((
                ProjectHandle {
                    node,
                    access: Access::Write,
                    project,
                    deprecated: false,
                },
                true,
            ))
        }
    }
}

/// Resolves a project for `user`. Deprecated projects are hidden unless
/// `include_deprecated` is set.
pub fn open(
    tx: &Transaction,
    user: &User,
    key: &str,
    include_deprecated: bool,
) -> Result<ProjectHandle> {
    let node = find(tx, key)
        .filter(|n| include_deprecated || !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("project", key))?;
    let project = decode(&node);
    let access = access_for(user, &project).ok_or_else(|| {
        DomainError::Forbidden(format!("project '{key}' is private"))
    })?;
    Ok(ProjectHandle {
        node: node.id,
        project,
        access,
        deprecated: node.is_deprecated(),
    })
}

/// Projects visible to `user`, ordered by creation.
pub fn list(
    tx: &Transaction,
    user: &User,
    page: Page,
    include_deprecated: bool,
) -> Paged<Project> {
    let visible: Vec<Project> = tx
        .match_nodes(PROJECT, &Properties::new(), Page::all(), include_deprecated)
        .iter()
        .map(|n| decode(n))
        .filter(|p| access_for(user, p).is_some())
        .collect();
    let total = visible.len();
    let items = visible
        .into_iter()
        .skip(page.offset().saturating_mul(page.limit()))
        .take(page.limit())
        .collect();
    Paged { items, total }
}

pub fn delete(tx: &mut Transaction, handle: &ProjectHandle) -> Result<()> {
    handle.require_write()?;
    tx.soft_delete(handle.node)?;
    Ok(())
}
