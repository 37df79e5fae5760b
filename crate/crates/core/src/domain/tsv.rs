//! Tab-separated profile and isolate files.
//!
//! Profiles: the first column holds the profile id, then one column per
//! schema locus in schema order. `0` or an empty cell is a missing allele;
//! missing alleles are written back as `0`. Isolates: the first column holds
//! the isolate id, remaining columns are ancillary attributes named by the
//! header.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{AllelicProfile, DomainError, Isolate, Result};

pub const MISSING: &str = "0";

/// A row that could not be imported. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub created: usize,
    pub updated: usize,
    pub errors: Vec<RowError>,
}

#[derive(Debug)]
pub struct ParsedFile<T> {
    /// Header cell naming the id column.
    pub id_column: String,
    pub rows: Vec<(usize, std::result::Result<T, String>)>,
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

fn cell_to_slot(cell: &str) -> Option<String> {
    if cell.is_empty() || cell == MISSING {
        None
    } else {
        Some(cell.to_owned())
    }
}

/// Parses a profile file against a schema's loci. A header that does not
/// list exactly `loci` after the id column aborts the parse; bad rows are
/// reported individually.
pub fn parse_profiles(text: &str, loci: &[String]) -> Result<ParsedFile<AllelicProfile>> {
    let mut it = lines(text);
    let header: Vec<&str> = match it.next() {
        Some((_, h)) if !h.is_empty() => h.split('\t').collect(),
        _ => {
            return Err(DomainError::HeaderMismatch {
                expected: loci.to_vec(),
                got: Vec::new(),
            })
        }
    };
    if header[1..] != *loci {
        return Err(DomainError::HeaderMismatch {
            expected: loci.to_vec(),
            got: header[1..].iter().map(|s| (*s).to_owned()).collect(),
        });
    }
    let rows = it
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(line, l)| {
            let cells: Vec<&str> = l.split('\t').collect();
            let row = if cells.len() != loci.len() + 1 {
                Err(format!(
                    "expected {} fields, found {}",
                    loci.len() + 1,
                    cells.len()
                ))
            } else if cells[0].trim().is_empty() {
                Err("empty profile id".to_owned())
            } else {
                Ok(AllelicProfile {
                    id: cells[0].to_owned(),
                    alleles: cells[1..].iter().map(|c| cell_to_slot(c)).collect(),
                    frequency: 0,
                })
            };
            (line, row)
        })
        .collect();
    Ok(ParsedFile {
        id_column: header[0].to_owned(),
        rows,
    })
}

/// Writes profiles sorted by id.
pub fn format_profiles<'a, I>(id_column: &str, loci: &[String], profiles: I) -> String
where
    I: IntoIterator<Item = &'a AllelicProfile>,
{
    let mut sorted: Vec<&AllelicProfile> = profiles.into_iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = String::new();
    out.push_str(id_column);
    for locus in loci {
        out.push('\t');
        out.push_str(locus);
    }
    out.push('\n');
    for p in sorted {
        out.push_str(&p.id);
        for slot in &p.alleles {
            out.push('\t');
            out.push_str(slot.as_deref().unwrap_or(MISSING));
        }
        out.push('\n');
    }
    out
}

/// Canonical form of a well-formed profile file: rows sorted by id, the last
/// row winning for repeated ids, missing cells written as `0`, malformed rows
/// dropped.
pub fn canonicalize_profiles(text: &str, loci: &[String]) -> Result<String> {
    let parsed = parse_profiles(text, loci)?;
    let mut by_id = BTreeMap::new();
    for (_, row) in parsed.rows {
        if let Ok(p) = row {
            by_id.insert(p.id.clone(), p);
        }
    }
    Ok(format_profiles(&parsed.id_column, loci, by_id.values()))
}

/// Parses an isolate file. Empty cells leave the attribute unset.
pub fn parse_isolates(text: &str) -> Result<ParsedFile<Isolate>> {
    let mut it = lines(text);
    let header: Vec<&str> = match it.next() {
        Some((_, h)) if !h.is_empty() => h.split('\t').collect(),
        _ => {
            return Err(DomainError::HeaderMismatch {
                expected: vec!["id".into()],
                got: Vec::new(),
            })
        }
    };
    let keys = &header[1..];
    let mut seen = BTreeSet::new();
    if let Some(dup) = keys.iter().find(|k| !seen.insert(**k)) {
        return Err(DomainError::Validation(format!(
            "duplicate isolate column '{dup}'"
        )));
    }
    let rows = it
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(line, l)| {
            let cells: Vec<&str> = l.split('\t').collect();
            let row = if cells.len() != header.len() {
                Err(format!(
                    "expected {} fields, found {}",
                    header.len(),
                    cells.len()
                ))
            } else if cells[0].trim().is_empty() {
                Err("empty isolate id".to_owned())
            } else {
                Ok(Isolate {
                    id: cells[0].to_owned(),
                    profile: None,
                    ancillary: keys
                        .iter()
                        .zip(&cells[1..])
                        .filter(|(_, v)| !v.is_empty())
                        .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
                        .collect(),
                })
            };
            (line, row)
        })
        .collect();
    Ok(ParsedFile {
        id_column: header[0].to_owned(),
        rows,
    })
}

/// Writes isolates sorted by id; columns are the union of ancillary keys.
pub fn format_isolates<'a, I>(id_column: &str, isolates: I) -> String
where
    I: IntoIterator<Item = &'a Isolate>,
{
    let mut sorted: Vec<&Isolate> = isolates.into_iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let columns: BTreeSet<&str> = sorted
        .iter()
        .flat_map(|i| i.ancillary.keys().map(String::as_str))
        .collect();
    let mut out = String::from(id_column);
    for c in &columns {
        out.push('\t');
        out.push_str(c);
    }
    out.push('\n');
    for i in sorted {
        out.push_str(&i.id);
        for c in &columns {
            out.push('\t');
            out.push_str(i.ancillary.get(*c).map(String::as_str).unwrap_or(""));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loci() -> Vec<String> {
        ["aroE", "gdh", "gki", "recP", "spi", "xpt", "ddl"]
            .map(String::from)
            .to_vec()
    }

    #[test]
    fn zero_and_empty_are_missing() {
        let text = "ST\taroE\tgdh\tgki\trecP\tspi\txpt\tddl\n1\t1\t0\t1\t\t1\t1\t1\n";
        let parsed = parse_profiles(text, &loci()).unwrap();
        let p = parsed.rows[0].1.as_ref().unwrap();
        assert_eq!(p.alleles[1], None);
        assert_eq!(p.alleles[3], None);
        assert_eq!(p.alleles[0].as_deref(), Some("1"));
        assert_eq!(parsed.id_column, "ST");
    }

    #[test]
    fn short_row_reported_with_line() {
        let text = "ST\taroE\tgdh\tgki\trecP\tspi\txpt\tddl\n1\t1\t1\t1\t1\t1\t1\t1\n2\t1\t1\t1\t1\t1\t1\n";
        let parsed = parse_profiles(text, &loci()).unwrap();
        assert!(parsed.rows[0].1.is_ok());
        assert_eq!(parsed.rows[1].0, 3);
        assert!(parsed.rows[1].1.is_err());
    }

    #[test]
    fn header_must_match() {
        let text = "ST\taroE\tgdh\n";
        assert!(matches!(
            parse_profiles(text, &loci()),
            Err(DomainError::HeaderMismatch { .. })
        ));
        assert!(matches!(
            parse_profiles("", &loci()),
            Err(DomainError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn canonical_form_sorts_and_normalizes() {
        let text = "ST\taroE\tgdh\tgki\trecP\tspi\txpt\tddl\r\n\
                    2\t1\t\t1\t1\t1\t1\t1\r\n\
                    10\t2\t2\t2\t2\t2\t2\t2\r\n";
        let canon = canonicalize_profiles(text, &loci()).unwrap();
        assert_eq!(
            canon,
            "ST\taroE\tgdh\tgki\trecP\tspi\txpt\tddl\n\
             10\t2\t2\t2\t2\t2\t2\t2\n\
             2\t1\t0\t1\t1\t1\t1\t1\n"
        );
    }

    #[test]
    fn isolate_columns_round_trip() {
        let text = "id\tcountry\tyear\nI1\tPT\t2020\nI2\t\t2021\n";
        let parsed = parse_isolates(text).unwrap();
        let rows: Vec<Isolate> = parsed.rows.into_iter().map(|(_, r)| r.unwrap()).collect();
        assert!(!rows[1].ancillary.contains_key("country"));
        assert_eq!(format_isolates("id", &rows), text);
    }
}
