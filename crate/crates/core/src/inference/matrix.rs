use std::collections::HashMap;

use crate::domain::AlleleSlot;
use crate::scalar::Distance;

use super::InferenceError;

/// Number of loci at which two profiles differ. A missing slot differs from
/// everything, including another missing slot.
pub fn hamming(a: &[AlleleSlot], b: &[AlleleSlot]) -> Result<usize, InferenceError> {
    if a.len() != b.len() {
        return Err(InferenceError::LengthMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter()
        .zip(b)
        .filter(|(x, y)| x.is_none() || x != y)
        .count())
}

/// Dense symmetric matrix of pairwise distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<D> {
    ids: Vec<String>,
    data: Vec<D>,
}

impl<D: Distance> DistanceMatrix<D> {
    /// Builds a matrix from explicit entries. Panics if `data` is not `n*n`.
    pub fn from_raw(ids: Vec<String>, data: Vec<D>) -> Self {
        assert_eq!(data.len(), ids.len() * ids.len(), "matrix must be square");
        Self { ids, data }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> D {
        self.data[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[D] {
        let n = self.ids.len();
        &self.data[i * n..(i + 1) * n]
    }
}

/// Pairwise Hamming distances. Alleles are interned per locus first so the
/// inner loop compares integers; code 0 marks a missing slot.
pub fn build_matrix<D, P>(profiles: &[P]) -> Result<DistanceMatrix<D>, InferenceError>
where
    D: Distance,
    P: AsRef<crate::domain::AllelicProfile>,
{
    let first = profiles.first().ok_or(InferenceError::Empty)?.as_ref();
    let loci = first.alleles.len();
    let n = profiles.len();

    let mut dictionaries: Vec<HashMap<&str, u32>> = vec![HashMap::new(); loci];
    let mut codes = Vec::with_capacity(n * loci);
    for p in profiles {
        let p = p.as_ref();
        if p.alleles.len() != loci {
            return Err(InferenceError::LengthMismatch { expected: loci, got: p.alleles.len() });
        }
        for (dict, slot) in dictionaries.iter_mut().zip(&p.alleles) {
            let code = match slot {
                None => 0,
                Some(a) => {
                    let next = dict.len() as u32 + 1;
                    *dict.entry(a.as_str()).or_insert(next)
                }
            };
            codes.push(code);
        }
    }

    let mut data = vec![D::zero(); n * n];
    for i in 0..n {
        let a = &codes[i * loci..(i + 1) * loci];
        for j in i + 1..n {
            let b = &codes[j * loci..(j + 1) * loci];
            let d = a.iter().zip(b).filter(|(x, y)| **x == 0 || x != y).count();
            let d = D::from(d).expect("distance exceeds the matrix scalar type");
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix {
        ids: profiles.iter().map(|p| p.as_ref().id.clone()).collect(),
        data,
    })
}
