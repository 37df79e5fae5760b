use crate::graphstore::{props, Transaction, Value};

use super::keys::{KEY, USER};
use super::{require_key, DomainError, Result, Role, User};

/// Creates or updates a user record.
pub fn save(tx: &mut Transaction, user: &User) -> Result<()> {
    require_key("user", &user.id)?;
    let properties = props([(KEY, Value::from(&user.id)), ("role", user.role.as_str().into())]);
    match tx.find_node(USER, &props([(KEY, user.id.as_str())])) {
        Some(node) => tx.set_node_properties(node.id, properties)?,
        None => {
            tx.create_node([USER], properties)?;
        }
    }
    Ok(())
}

pub fn get(tx: &Transaction, id: &str) -> Result<User> {
    let node = tx
        .find_node(USER, &props([(KEY, id)]))
        .ok_or_else(|| DomainError::not_found("user", id))?;
    Ok(User {
        id: id.to_owned(),
        role: node.str("role").and_then(Role::parse).unwrap_or(Role::User),
    })
}
