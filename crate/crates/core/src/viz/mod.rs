//! Radial tree layout over an inference layer.
//!
//! Each node owns an angular wedge proportional to its leaf count. The root
//! owns the full circle; a child is placed at its wedge midpoint, at edge
//! length distance from its parent. Forests are laid out per component and
//! packed left to right.

pub mod repo;


use std::collections::{BTreeMap, HashMap};

use crate::inference::UnionFind;
use crate::scalar::Coord;

pub use repo::{Coordinate, VisualizationResult};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VizError {
    #[error("edge {0} - {1} closes a cycle")]
    Cycle(String, String),
    #[error("input is not connected ({0} components)")]
    Disconnected(usize),
    #[error("root {0} is not a node of the tree")]
    UnknownRoot(String),
}

/// Rooted tree with node-local indices. `children[v]` is sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutTree<T> {
    pub ids: Vec<String>,
    pub root: usize,
    pub children: Vec<Vec<(usize, T)>>,
    pub leaves: Vec<usize>,
}

impl<T: Coord> LayoutTree<T> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn single(id: impl Into<String>) -> Self {
        Self {
            ids: vec![id.into()],
            root: 0,
            children: vec![vec![]],
            leaves: vec![1],
        }
    }
}

/// Splits `nodes` plus edge endpoints into rooted components. Each root is
/// the member listed first in `ranking`, or the smallest id when no member
/// is ranked. Trees are returned ordered by root id.
pub fn to_forest<T: Coord>(
    nodes: &[String],
    edges: &[(String, String, T)],
    ranking: &[String],
) -> Result<Vec<LayoutTree<T>>, VizError> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for id in nodes.iter().map(String::as_str).chain(edges.iter().flat_map(|(a, b, _)| [a.as_str(), b.as_str()])) {
        let next = index.len();
        index.entry(id).or_insert(next);
    }
    let mut names = vec![""; index.len()];
    for (id, i) in &index {
        names[*i] = id;
    }

    let n = names.len();
    let mut adj: Vec<Vec<(usize, T)>> = vec![vec![]; n];
    let mut sets = UnionFind::new(n);
    for (a, b, w) in edges {
        let (u, v) = (index[a.as_str()], index[b.as_str()]);
        if !sets.union(u, v) {
            return Err(VizError::Cycle(a.clone(), b.clone()));
        }
        adj[u].push((v, *w));
        adj[v].push((u, *w));
    }

    let rank: HashMap<&str, usize> = ranking.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut roots: BTreeMap<usize, usize> = BTreeMap::new();
    for v in 0..n {
        let c = sets.find(v);
        let better = |cur: usize| {
            let key = |x: usize| (rank.get(names[x]).copied().unwrap_or(usize::MAX), names[x]);
            key(v) < key(cur)
        };
        match roots.get(&c) {
            Some(&cur) if !better(cur) => {}
            _ => {
                roots.insert(c, v);
            }
        }
    }

    let mut trees: Vec<LayoutTree<T>> = roots
        .values()
        .map(|&root| rooted(&names, &adj, root))
        .collect();
    trees.sort_by(|a, b| a.ids[a.root].cmp(&b.ids[b.root]));
    Ok(trees)
}

/// Single tree over `nodes` and `edges`, rooted at `root` when given.
pub fn to_tree<T: Coord>(
    nodes: &[String],
    edges: &[(String, String, T)],
    root: Option<&str>,
) -> Result<LayoutTree<T>, VizError> {
    let ranking: Vec<String> = root.into_iter().map(str::to_owned).collect();
    let mut forest = to_forest(nodes, edges, &ranking)?;
    if forest.len() != 1 {
        return Err(VizError::Disconnected(forest.len()));
    }
    let tree = forest.pop().unwrap();
    if let Some(r) = root {
        if tree.ids[tree.root] != r {
            return Err(VizError::UnknownRoot(r.to_owned()));
        }
    }
    Ok(tree)
}

fn rooted<T: Coord>(names: &[&str], adj: &[Vec<(usize, T)>], root: usize) -> LayoutTree<T> {
    // Breadth-first from the root, renumbering into local indices.
    let mut local: HashMap<usize, usize> = HashMap::from([(root, 0)]);
    let mut order = vec![root];
    let mut children: Vec<Vec<(usize, T)>> = vec![];
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        let mut kids: Vec<(usize, T)> = adj[v]
            .iter()
            .filter(|(u, _)| !local.contains_key(u))
            .copied()
            .collect();
        kids.sort_by(|a, b| names[a.0].cmp(names[b.0]));
        let mut mapped = Vec::with_capacity(kids.len());
        for (u, w) in kids {
            let id = order.len();
            local.insert(u, id);
            order.push(u);
            mapped.push((id, w));
        }
        children.push(mapped);
        head += 1;
    }
    // BFS order puts every child after its parent, so a reverse sweep
    // accumulates leaf counts bottom-up.
    let mut leaves = vec![0; order.len()];
    for v in (0..order.len()).rev() {
        leaves[v] = if children[v].is_empty() {
            1
        } else {
            children[v].iter().map(|(c, _)| leaves[*c]).sum()
        };
    }
    LayoutTree {
        ids: order.iter().map(|&v| names[v].to_owned()).collect(),
        root: 0,
        children,
        leaves,
    }
}

/// Angular wedge `[start, end)` of every node, by local index.
pub fn wedges<T: Coord>(tree: &LayoutTree<T>) -> Vec<(T, T)> {
    layout(tree).1
}

/// Position of every node, by local index, with the root at the origin.
pub fn radial_layout<T: Coord>(tree: &LayoutTree<T>) -> Vec<(T, T)> {
    layout(tree).0
}

type Pairs<T> = Vec<(T, T)>;

/// Positions and wedges, indexed like `tree.ids`.
fn layout<T: Coord>(tree: &LayoutTree<T>) -> (Pairs<T>, Pairs<T>) {
    let n = tree.len();
    let zero = T::zero();
    let mut pos = vec![(zero, zero); n];
    let mut wedge = vec![(zero, zero); n];
    if n == 0 {
        return (pos, wedge);
    }
    let total = T::from(tree.leaves[tree.root]).unwrap();
    wedge[tree.root] = (zero, T::TAU());
    let mut stack = vec![tree.root];
    while let Some(v) = stack.pop() {
        let mut start = wedge[v].0;
        for &(c, w) in &tree.children[v] {
            let width = T::TAU() * T::from(tree.leaves[c]).unwrap() / total;
            let theta = start + width / (T::one() + T::one());
            wedge[c] = (start, start + width);
            pos[c] = (pos[v].0 + w * theta.cos(), pos[v].1 + w * theta.sin());
            start = start + width;
            stack.push(c);
        }
    }
    (pos, wedge)
}

/// Lays out every tree and packs them on the x axis: each component is
/// shifted right so that its bounding box starts one unit after the
/// previous one ends. The first component keeps its root at the origin.
pub fn layout_forest<T: Coord>(forest: &[LayoutTree<T>]) -> Vec<(String, T, T)> {
    let mut out = Vec::with_capacity(forest.iter().map(LayoutTree::len).sum());
    let mut cursor: Option<T> = None;
    for tree in forest {
        let pos = radial_layout(tree);
        let min_x = pos.iter().map(|p| p.0).fold(T::infinity(), T::min);
        let max_x = pos.iter().map(|p| p.0).fold(T::neg_infinity(), T::max);
        let shift = match cursor {
            None => T::zero(),
            Some(c) => c - min_x,
        };
        cursor = Some(max_x + shift + T::one());
        out.extend(tree.ids.iter().zip(&pos).map(|(id, p)| (id.clone(), p.0 + shift, p.1)));
    }
    out
}
