use crate::graphstore::{props, NodeRecord, Page, Properties, StoreError, Transaction, Value};

use super::keys::{ALLELE, KEY, LOCUS, TAXON};
use super::{require_key, Allele, DomainError, Paged, Result, User, Versioned};

fn scope(taxon: &str, locus: &str) -> Properties {
    props([(TAXON, taxon), (LOCUS, locus)])
}

fn find(tx: &Transaction, taxon: &str, locus: &str, id: &str) -> Option<std::sync::Arc<NodeRecord>> {
    let mut filter = scope(taxon, locus);
    filter.insert(KEY.into(), id.into());
    tx.find_node(ALLELE, &filter)
}

fn normalize_sequence(seq: &str) -> Result<String> {
    let upper = seq.trim().to_ascii_uppercase();
    if let Some(bad) = upper.chars().find(|c| !matches!(c, 'A' | 'C' | 'G' | 'T' | 'N')) {
        return Err(DomainError::Validation(format!(
            "invalid nucleotide '{bad}' in allele sequence"
        )));
    }
    Ok(upper)
}

/// Creates or versions an allele. Alleles are shared reference data, so only
/// administrators may write them. Returns the version number.
pub fn save(tx: &mut Transaction, user: &User, allele: &Allele) -> Result<u32> {
    if !user.is_admin() {
        return Err(DomainError::Forbidden("only administrators may edit alleles".into()));
    }
    require_key("taxon", &allele.taxon)?;
    require_key("locus", &allele.locus)?;
    require_key("allele", &allele.id)?;
    let mut state = Properties::new();
    if let Some(seq) = &allele.sequence {
        state.insert("sequence".into(), normalize_sequence(seq)?.into());
    }
    match find(tx, &allele.taxon, &allele.locus, &allele.id) {
        Some(node) => tx.put_versioned(node.id, state).map_err(|e| match e {
            StoreError::Deprecated(_) => DomainError::Deprecated {
                kind: "allele",
                id: allele.id.clone(),
            },
            other => other.into(),
        }),
        None => {
            let mut identity = scope(&allele.taxon, &allele.locus);
            identity.insert(KEY.into(), Value::from(&allele.id));
            Ok(tx.create_versioned([ALLELE], identity, state)?.1)
        }
    }
}

pub fn get(
    tx: &Transaction,
    taxon: &str,
    locus: &str,
    id: &str,
    version: Option<u32>,
) -> Result<Versioned<Allele>> {
    let node = find(tx, taxon, locus, id)
        .filter(|n| !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("allele", id))?;
    let s = tx.get_versioned(node.id, version).map_err(|e| match e {
        StoreError::UnknownVersion { version, .. } => DomainError::UnknownVersion {
            kind: "allele",
            id: id.to_owned(),
            version,
        },
        other => other.into(),
    })?;
    Ok(Versioned {
        value: Allele {
            taxon: taxon.to_owned(),
            locus: locus.to_owned(),
            id: id.to_owned(),
            sequence: s
                .properties
                .get("sequence")
                .and_then(Value::as_str)
                .map(str::to_owned),
        },
        version: s.version,
        current_version: s.current_version,
        deprecated: s.deprecated,
    })
}

pub fn list(tx: &Transaction, taxon: &str, locus: &str, page: Page) -> Result<Paged<Versioned<Allele>>> {
    let filter = scope(taxon, locus);
    let items = tx
        .match_nodes(ALLELE, &filter, page, false)
        .iter()
        .map(|n| get(tx, taxon, locus, n.str(KEY).unwrap_or_default(), None))
        .collect::<Result<_>>()?;
    Ok(Paged {
        items,
        total: tx.count_nodes(ALLELE, &filter, false),
    })
}

pub fn delete(tx: &mut Transaction, user: &User, taxon: &str, locus: &str, id: &str) -> Result<()> {
    if !user.is_admin() {
        return Err(DomainError::Forbidden("only administrators may edit alleles".into()));
    }
    let node = find(tx, taxon, locus, id)
        .filter(|n| !n.is_deprecated())
        .ok_or_else(|| DomainError::not_found("allele", id))?;
    tx.soft_delete(node.id)?;
    Ok(())
}
