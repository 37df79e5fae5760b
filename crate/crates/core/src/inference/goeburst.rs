use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::scalar::Distance;

use super::{DistanceMatrix, GoeBurstParams};

/// Tie-break data of one profile: `lv[k-1]` is the number of profiles at
/// distance exactly `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexRank {
    pub lv: Vec<usize>,
    pub frequency: u64,
    pub id: String,
}

pub fn rank_vertices<D: Distance>(
    matrix: &DistanceMatrix<D>,
    lvs: usize,
    frequencies: &[u64],
) -> Vec<VertexRank> {
    assert_eq!(frequencies.len(), matrix.len(), "one frequency per profile");
    (0..matrix.len())
        .map(|v| {
            let mut lv = vec![0; lvs];
            for (u, d) in matrix.row(v).iter().enumerate() {
                let d = d.to_usize().unwrap_or(usize::MAX);
                if u != v && (1..=lvs).contains(&d) {
                    lv[d - 1] += 1;
                }
            }
            VertexRank {
                lv,
                frequency: frequencies[v],
                id: matrix.ids()[v].clone(),
            }
        })
        .collect()
}

/// Founder order: `Less` means `a` ranks above `b` (more SLVs, then DLVs and
/// so on, then higher frequency, then smaller id).
pub fn vertex_compare(a: &VertexRank, b: &VertexRank) -> Ordering {
    b.lv.cmp(&a.lv)
        .then(b.frequency.cmp(&a.frequency))
        .then_with(|| a.id.cmp(&b.id))
}

fn min_max<T: Ord>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// goeBURST edge order over `(distance, u, v)` triples indexed into `ranks`.
pub fn edge_compare<D: Ord>(
    e1: (D, usize, usize),
    e2: (D, usize, usize),
    ranks: &[VertexRank],
    lvs: usize,
) -> Ordering {
    let (d1, a1, b1) = e1;
    let (d2, a2, b2) = e2;
    let (ra, rb, sa, sb) = (&ranks[a1], &ranks[b1], &ranks[a2], &ranks[b2]);
    d1.cmp(&d2)
        .then_with(|| {
            for k in 0..lvs {
                let (lo1, hi1) = min_max(ra.lv[k], rb.lv[k]);
                let (lo2, hi2) = min_max(sa.lv[k], sb.lv[k]);
                let o = hi2.cmp(&hi1).then(lo2.cmp(&lo1));
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
        .then_with(|| {
            let (lo1, hi1) = min_max(ra.frequency, rb.frequency);
            let (lo2, hi2) = min_max(sa.frequency, sb.frequency);
            hi2.cmp(&hi1).then(lo2.cmp(&lo1))
        })
        .then_with(|| {
            let p1 = min_max(ra.id.as_str(), rb.id.as_str());
            let p2 = min_max(sa.id.as_str(), sb.id.as_str());
            p1.cmp(&p2)
        })
        .then_with(|| min_max(a1, b1).cmp(&min_max(a2, b2)))
}

/// Disjoint sets with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Tree edge between matrix indices, directed from the higher ranked end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MstEdge<D> {
    pub from: usize,
    pub to: usize,
    pub distance: D,
}

/// Kruskal over the complete graph, scanning edges in [`edge_compare`] order.
/// Returns the tree edges in the order they were accepted.
pub fn goeburst<D: Distance>(
    matrix: &DistanceMatrix<D>,
    params: GoeBurstParams,
    ranks: &[VertexRank],
) -> Vec<MstEdge<D>> {
    let n = matrix.len();
    let lvs = params.lvs.min(ranks.first().map_or(0, |r| r.lv.len()));
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((matrix.get(i, j), i, j));
        }
    }
    edges.sort_unstable_by(|x, y| edge_compare(*x, *y, ranks, lvs));

    let mut sets = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (d, i, j) in edges {
        if tree.len() + 1 >= n {
            break;
        }
        if sets.union(i, j) {
            let (from, to) = match vertex_compare(&ranks[i], &ranks[j]) {
                Ordering::Greater => (j, i),
                _ => (i, j),
            };
            tree.push(MstEdge { from, to, distance: d });
        }
    }
    tree
}
