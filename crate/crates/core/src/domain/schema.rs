use std::collections::HashSet;

use crate::graphstore::{props, Page, Properties, Transaction, Value};

use super::keys::{KEY, SCHEMA, TAXON};
use super::{require_key, DomainError, Paged, Result, Schema, User, Versioned};

fn validate(schema: &Schema) -> Result<()> {
    require_key("schema", &schema.id)?;
    if schema.taxon.trim().is_empty() {
        return Err(DomainError::Validation("schema taxon must not be empty".into()));
    }
    if schema.loci.is_empty() {
        return Err(DomainError::Validation("schema needs at least one locus".into()));
    }
    let mut seen = HashSet::new();
    for locus in &schema.loci {
        require_key("locus", locus)?;
        if !seen.insert(locus) {
            return Err(DomainError::Validation(format!("duplicate locus '{locus}'")));
        }
    }
    Ok(())
}

fn state(schema: &Schema) -> Properties {
    props([
        (TAXON, Value::from(&schema.taxon)),
        (
            "loci",
            Value::from(serde_json::to_string(&schema.loci).expect("string list")),
        ),
        ("description", Value::from(&schema.description)),
    ])
}

fn decode(id: &str, state: &Properties) -> Schema {
    let text = |k: &str| {
        state
            .get(k)
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_owned()
    };
    Schema {
        id: id.to_owned(),
        taxon: text(TAXON),
        loci: serde_json::from_str(&text("loci")).unwrap_or_default(),
        description: text("description"),
    }
}

/// Creates a schema or appends a new version. Schemas are shared reference
/// data, so only administrators may write them, and the locus panel is
/// fixed once created. Returns `(version, created)`.
pub fn save(tx: &mut Transaction, user: &User, schema: &Schema) -> Result<(u32, bool)> {
    if !user.is_admin() {
        return Err(DomainError::Forbidden("only administrators may edit schemas".into()));
    }
    validate(schema)?;
    match tx.find_node(SCHEMA, &props([(KEY, schema.id.as_str())])) {
        Some(node) => {
            let current = decode(&schema.id, &tx.get_versioned(node.id, None)?.properties);
            if current.loci != schema.loci {
                return Err(DomainError::Validation(format!(
                    "loci of schema '{}' cannot change after creation",
                    schema.id
                )));
            }
            if node.is_deprecated() {
                return Err(DomainError::Deprecated {
                    kind: "schema",
                    id: schema.id.clone(),
                });
            }
            Ok((tx.put_versioned(node.id, state(schema))?, false))
        }
        None => {
            let identity = props([(KEY, schema.id.as_str())]);
            let (_, v) = tx.create_versioned([SCHEMA], identity, state(schema))?;
            Ok((v, true))
        }
    }
}

pub fn get(tx: &Transaction, id: &str, version: Option<u32>) -> Result<Versioned<Schema>> {
    let node = tx
        .find_node(SCHEMA, &props([(KEY, id)]))
        .ok_or_else(|| DomainError::not_found("schema", id))?;
    let s = tx.get_versioned(node.id, version).map_err(|e| match e {
        crate::graphstore::StoreError::UnknownVersion { version, .. } => {
            DomainError::UnknownVersion {
                kind: "schema",
                id: id.to_owned(),
                version,
            }
        }
        other => other.into(),
    })?;
    Ok(Versioned {
        value: decode(id, &s.properties),
        version: s.version,
        current_version: s.current_version,
        deprecated: s.deprecated,
    })
}

pub fn list(tx: &Transaction, page: Page) -> Result<Paged<Schema>> {
    let none = Properties::new();
    let total = tx.count_nodes(SCHEMA, &none, false);
    let items = tx
        .match_nodes(SCHEMA, &none, page, false)
        .iter()
        .map(|n| {
            let id = n.str(KEY).unwrap_or_default();
            Ok(decode(id, &tx.get_versioned(n.id, None)?.properties))
        })
        .collect::<Result<_>>()?;
    Ok(Paged { items, total })
}
