use std::sync::Arc;

use crate::graphstore::{props, NodeRecord, Page, Properties, StoreError, Transaction, Value};

use super::keys::{DATASET_REF, FREQUENCY, ISOLATE, KEY};
use super::profile;
use super::tsv::{self, ImportReport, RowError};
use super::{require_key, DatasetHandle, DomainError, Isolate, Paged, Result, Versioned};

const PROFILE_LINK: &str = "profile";
const ANCILLARY_PREFIX: &str = "ancillary.";

fn encode_state(isolate: &Isolate) -> Properties {
    let mut state: Properties = isolate
        .ancillary
        .iter()
        .map(|(k, v)| (format!("{ANCILLARY_PREFIX}{k}"), Value::from(v)))
        .collect();
    if let Some(p) = &isolate.profile {
        state.insert(PROFILE_LINK.into(), Value::from(p));
    }
    state
}

fn decode_state(id: &str, state: &Properties) -> Isolate {
    Isolate {
        id: id.to_owned(),
        profile: state
            .get(PROFILE_LINK)
            .and_then(Value::as_str)
            .map(str::to_owned),
        ancillary: state
            .iter()
            .filter_map(|(k, v)| {
                let key = k.strip_prefix(ANCILLARY_PREFIX)?;
                Some((key.to_owned(), v.as_str()?.to_owned()))
            })
            .collect(),
    }
}

fn scope(ds: &DatasetHandle) -> Properties {
    props([(DATASET_REF, Value::from(ds.node().0))])
}

fn find(tx: &Transaction, ds: &DatasetHandle, key: &str) -> Option<Arc<NodeRecord>> {
    let mut filter = scope(ds);
    filter.insert(KEY.into(), key.into());
    tx.find_node(ISOLATE, &filter)
}

/// Adds `delta` to the frequency of profile `key`.
fn bump(tx: &mut Transaction, ds: &DatasetHandle, key: &str, delta: i64) -> Result<()> {
    let node = profile::find(tx, ds, key).ok_or_else(|| DomainError::not_found("profile", key))?;
    let f = profile::frequency_of(&node) as i64 + delta;
    tx.set_node_properties(node.id, props([(FREQUENCY, f.max(0))]))?;
    Ok(())
}

/// Profile the isolate currently counts toward, if it is live and linked.
fn counted_link(tx: &Transaction, node: &NodeRecord) -> Result<Option<String>> {
    if node.is_deprecated() {
        return Ok(None);
    }
    let state = tx.get_versioned(node.id, None)?;
    Ok(state
        .properties
        .get(PROFILE_LINK)
        .and_then(Value::as_str)
        .map(str::to_owned))
}

fn upsert(tx: &mut Transaction, ds: &DatasetHandle, isolate: &Isolate) -> Result<(u32, bool)> {
    require_key("isolate", &isolate.id)?;
    if let Some(p) = &isolate.profile {
        profile::find(tx, ds, p)
            .filter(|n| !n.is_deprecated())
            .ok_or_else(|| DomainError::not_found("profile", p.as_str()))?;
    }
    let (version, created, previous) = match find(tx, ds, &isolate.id) {
        Some(node) => {
            let previous = counted_link(tx, &node)?;
            let v = tx
                .put_versioned(node.id, encode_state(isolate))
                .map_err(|e| match e {
                    StoreError::Deprecated(_) => DomainError::Deprecated {
                        kind: "isolate",
                        id: isolate.id.clone(),
                    },
                    other => other.into(),
                })?;
            (v, false, previous)
        }
        None => {
            let mut identity = scope(ds);
            identity.insert(KEY.into(), Value::from(&isolate.id));
            let (_, v) = tx.create_versioned([ISOLATE], identity, encode_state(isolate))?;
            (v, true, None)
        }
    };
    if previous != isolate.profile {
        if let Some(old) = &previous {
            bump(tx, ds, old, -1)?;
        }
        if let Some(new) = &isolate.profile {
            bump(tx, ds, new, 1)?;
        }
    }
    Ok((version, created))
}

/// Stores a new version of `isolate`, keeping linked-profile frequencies in
/// step. Returns the version number.
pub fn save(tx: &mut Transaction, ds: &DatasetHandle, isolate: &Isolate) -> Result<u32> {
    ds.require_write()?;
    Ok(upsert(tx, ds, isolate)?.0)
}

/// Links an isolate to a profile of the same dataset.
pub fn link(
    tx: &mut Transaction,
    isolate_ds: &DatasetHandle,
    isolate_key: &str,
    profile_ds: &DatasetHandle,
    profile_key: &str,
) -> Result<u32> {
    isolate_ds.require_write()?;
    let node = find(tx, isolate_ds, isolate_key)
        .filter(|n| !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("isolate", isolate_key))?;
    if isolate_ds.node() != profile_ds.node() {
        return Err(DomainError::CrossDatasetLink);
    }
    let mut isolate = decode_state(isolate_key, &tx.get_versioned(node.id, None)?.properties);
    isolate.profile = Some(profile_key.to_owned());
    Ok(upsert(tx, isolate_ds, &isolate)?.0)
}

pub fn get(
    tx: &Transaction,
    ds: &DatasetHandle,
    key: &str,
    version: Option<u32>,
    include_deprecated: bool,
) -> Result<Versioned<Isolate>> {
    let node = find(tx, ds, key)
        .filter(|n| include_deprecated || !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("isolate", key))?;
    let s = tx.get_versioned(node.id, version).map_err(|e| match e {
        StoreError::UnknownVersion { version, .. } => DomainError::UnknownVersion {
            kind: "isolate",
            id: key.to_owned(),
            version,
        },
        other => other.into(),
    })?;
    Ok(Versioned {
        value: decode_state(key, &s.properties),
        version: s.version,
        current_version: s.current_version,
        deprecated: s.deprecated,
    })
}

pub fn list(
    tx: &Transaction,
    ds: &DatasetHandle,
    page: Page,
    include_deprecated: bool,
) -> Result<Paged<Versioned<Isolate>>> {
    let filter = scope(ds);
    let items = tx
        .match_nodes(ISOLATE, &filter, page, include_deprecated)
        .iter()
        .map(|n| get(tx, ds, n.str(KEY).unwrap_or_default(), None, true))
        .collect::<Result<_>>()?;
    Ok(Paged {
        items,
        total: tx.count_nodes(ISOLATE, &filter, include_deprecated),
    })
}

/// Soft-deletes an isolate; its profile stops counting it.
pub fn delete(tx: &mut Transaction, ds: &DatasetHandle, key: &str) -> Result<()> {
    ds.require_write()?;
    let node = find(tx, ds, key)
        .filter(|n| !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("isolate", key))?;
    let linked = counted_link(tx, &node)?;
    tx.soft_delete(node.id)?;
    if let Some(p) = linked {
        bump(tx, ds, &p, -1)?;
    }
    Ok(())
}

pub fn restore(tx: &mut Transaction, ds: &DatasetHandle, key: &str) -> Result<()> {
    ds.require_write()?;
    let node = find(tx, ds, key).ok_or_else(|| DomainError::not_found("isolate", key))?;
    if !node.is_deprecated() {
        return Ok(());
    }
    tx.restore(node.id)?;
    let node = tx.get_node(node.id)?.clone();
    if let Some(p) = counted_link(tx, &node)? {
        bump(tx, ds, &p, 1)?;
    }
    Ok(())
}

/// Upserts isolates from TSV. Existing profile links are kept.
pub fn import(tx: &mut Transaction, ds: &DatasetHandle, text: &str) -> Result<ImportReport> {
    ds.require_write()?;
    let parsed = tsv::parse_isolates(text)?;
    let mut report = ImportReport::default();
    for (line, row) in parsed.rows {
        let outcome = row.map_err(|message| RowError { line, message }).and_then(|mut i| {
            if let Some(existing) = find(tx, ds, &i.id) {
                if let Ok(s) = tx.get_versioned(existing.id, None) {
                    i.profile = decode_state(&i.id, &s.properties).profile;
                }
            }
            upsert(tx, ds, &i).map_err(|e| RowError {
                line,
                message: e.to_string(),
            })
        });
        match outcome {
            Ok((_, true)) => report.created += 1,
            Ok((_, false)) => report.updated += 1,
            Err(e) => report.errors.push(e),
        }
    }
    Ok(report)
}

pub fn export(tx: &Transaction, ds: &DatasetHandle) -> Result<String> {
    let isolates: Vec<Isolate> = list(tx, ds, Page::all(), false)?
        .items
        .into_iter()
        .map(|v| v.value)
        .collect();
    Ok(tsv::format_isolates("id", &isolates))
}
