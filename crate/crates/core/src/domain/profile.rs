use std::sync::Arc;

use crate::graphstore::{props, NodeId, NodeRecord, Page, Properties, StoreError, Transaction, Value};

use super::dataset::ID_COLUMN;
use super::keys::{DATASET_REF, FREQUENCY, KEY, PROFILE};
use super::tsv::{self, ImportReport, RowError};
use super::{require_key, AllelicProfile, DatasetHandle, DomainError, Paged, Result, Versioned};

fn slot_key(i: usize) -> String {
    format!("allele.{}", i + 1)
}

fn encode_state(profile: &AllelicProfile) -> Properties {
    profile
        .alleles
        .iter()
        .enumerate()
        .filter_map(|(i, slot)| slot.as_ref().map(|a| (slot_key(i), Value::from(a))))
        .collect()
}

fn decode_state(id: &str, len: usize, state: &Properties, frequency: u64) -> AllelicProfile {
    AllelicProfile {
        id: id.to_owned(),
        alleles: (0..len)
            .map(|i| state.get(&slot_key(i)).and_then(Value::as_str).map(str::to_owned))
            .collect(),
        frequency,
    }
}

fn scope(ds: &DatasetHandle) -> Properties {
    props([(DATASET_REF, Value::from(ds.node().0))])
}

/// Identity node of a profile, deprecated or not.
pub fn find(tx: &Transaction, ds: &DatasetHandle, key: &str) -> Option<Arc<NodeRecord>> {
    let mut filter = scope(ds);
    filter.insert(KEY.into(), key.into());
    tx.find_node(PROFILE, &filter)
}

pub(crate) fn frequency_of(node: &NodeRecord) -> u64 {
    node.int(FREQUENCY).unwrap_or(0).max(0) as u64
}

fn check_shape(ds: &DatasetHandle, profile: &AllelicProfile) -> Result<()> {
    require_key("profile", &profile.id)?;
    let expected = ds.schema().len();
    if profile.alleles.len() != expected {
        return Err(DomainError::SchemaMismatch {
            id: profile.id.clone(),
            expected,
            got: profile.alleles.len(),
        });
    }
    if let Some(bad) = profile
        .alleles
        .iter()
        .flatten()
        .find(|a| a.is_empty() || a.as_str() == tsv::MISSING || a.contains(['\t', '\n', '\r']))
    {
        return Err(DomainError::Validation(format!(
            "invalid allele identifier {bad:?} in profile '{}'",
            profile.id
        )));
    }
    Ok(())
}

/// Stores a new version of `profile`. Returns `(version, created)`.
fn upsert(tx: &mut Transaction, ds: &DatasetHandle, profile: &AllelicProfile) -> Result<(u32, bool)> {
    check_shape(ds, profile)?;
    match find(tx, ds, &profile.id) {
        Some(node) => {
            let v = tx
                .put_versioned(node.id, encode_state(profile))
                .map_err(|e| match e {
                    StoreError::Deprecated(_) => DomainError::Deprecated {
                        kind: "profile",
                        id: profile.id.clone(),
                    },
                    other => other.into(),
                })?;
            Ok((v, false))
        }
        None => {
            let mut identity = scope(ds);
            identity.insert(KEY.into(), Value::from(&profile.id));
            identity.insert(FREQUENCY.into(), Value::Int(0));
            let (_, v) = tx.create_versioned([PROFILE], identity, encode_state(profile))?;
            Ok((v, true))
        }
    }
}

/// Stores a new version of `profile` and returns its version number.
pub fn save(tx: &mut Transaction, ds: &DatasetHandle, profile: &AllelicProfile) -> Result<u32> {
    ds.require_write()?;
    Ok(upsert(tx, ds, profile)?.0)
}

fn versioned(
    tx: &Transaction,
    ds: &DatasetHandle,
    node: &NodeRecord,
    version: Option<u32>,
) -> Result<Versioned<AllelicProfile>> {
    let key = node.str(KEY).unwrap_or_default();
    let s = tx.get_versioned(node.id, version).map_err(|e| match e {
        StoreError::UnknownVersion { version, .. } => DomainError::UnknownVersion {
            kind: "profile",
            id: key.to_owned(),
            version,
        },
        other => other.into(),
    })?;
    Ok(Versioned {
        value: decode_state(key, ds.schema().len(), &s.properties, frequency_of(node)),
        version: s.version,
        current_version: s.current_version,
        deprecated: s.deprecated,
    })
}

/// Reads one profile, at `version` or the current one.
pub fn get(
    tx: &Transaction,
    ds: &DatasetHandle,
    key: &str,
    version: Option<u32>,
    include_deprecated: bool,
) -> Result<Versioned<AllelicProfile>> {
    let node = find(tx, ds, key)
        .filter(|n| include_deprecated || !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("profile", key))?;
    versioned(tx, ds, &node, version)
}

/// Current states, ordered by creation.
pub fn list(
    tx: &Transaction,
    ds: &DatasetHandle,
    page: Page,
    include_deprecated: bool,
) -> Result<Paged<Versioned<AllelicProfile>>> {
    let filter = scope(ds);
    let items = tx
        .match_nodes(PROFILE, &filter, page, include_deprecated)
        .iter()
        .map(|n| versioned(tx, ds, n, None))
        .collect::<Result<_>>()?;
    Ok(Paged {
        items,
        total: tx.count_nodes(PROFILE, &filter, include_deprecated),
    })
}

pub fn count(tx: &Transaction, ds: &DatasetHandle, include_deprecated: bool) -> usize {
    tx.count_nodes(PROFILE, &scope(ds), include_deprecated)
}

/// Every live profile of the dataset at its current version, with the
/// identity node ids, in creation order.
pub fn load_current(tx: &Transaction, ds: &DatasetHandle) -> Result<Vec<(NodeId, AllelicProfile)>> {
    tx.match_nodes(PROFILE, &scope(ds), Page::all(), false)
        .iter()
        .map(|n| Ok((n.id, versioned(tx, ds, n, None)?.value)))
        .collect()
}

pub fn delete(tx: &mut Transaction, ds: &DatasetHandle, key: &str) -> Result<()> {
    ds.require_write()?;
    let node = find(tx, ds, key)
        .filter(|n| !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("profile", key))?;
    tx.soft_delete(node.id)?;
    Ok(())
}

pub fn restore(tx: &mut Transaction, ds: &DatasetHandle, key: &str) -> Result<()> {
    ds.require_write()?;
    let node = find(tx, ds, key).ok_or_else(|| DomainError::not_found("profile", key))?;
    tx.restore(node.id)?;
    Ok(())
}

/// Upserts every well-formed row as a profile version. Malformed rows are
/// reported by line number and skipped; a header that does not match the
/// schema aborts the whole import.
pub fn import(tx: &mut Transaction, ds: &mut DatasetHandle, text: &str) -> Result<ImportReport> {
    ds.require_write()?;
    let parsed = tsv::parse_profiles(text, &ds.schema().loci)?;
    let mut report = ImportReport::default();
    for (line, row) in parsed.rows {
        let outcome = row.map_err(|message| RowError { line, message }).and_then(|p| {
            upsert(tx, ds, &p).map_err(|e| RowError {
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
    if parsed.id_column != ds.id_column() {
        tx.set_node_properties(ds.node(), props([(ID_COLUMN, parsed.id_column.as_str())]))?;
        ds.set_id_column(&parsed.id_column);
    }
    Ok(report)
}

/// Live profiles at their current version as TSV, sorted by id.
pub fn export(tx: &Transaction, ds: &DatasetHandle) -> Result<String> {
    let profiles: Vec<AllelicProfile> = load_current(tx, ds)?.into_iter().map(|(_, p)| p).collect();
    Ok(tsv::format_profiles(ds.id_column(), &ds.schema().loci, &profiles))
}
