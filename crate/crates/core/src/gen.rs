//! Tree generators: random odd-degree trees and exhaustive unlabeled enumeration.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tree::{Graph, RootedTree};

/// Random odd-degree tree on `n` vertices (`n` even, at least 2).
///
/// Starts from a single edge and repeatedly hangs two new leaves on a
/// uniformly chosen vertex. Every odd-degree tree arises this way, since
/// the neighbour of an end of a longest path carries two leaves. Ids are
/// then shuffled and the root is drawn uniformly.
pub fn random_odd_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<RootedTree> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "odd-degree trees have an even number of vertices, got {n}"
        )));
    }
    let mut edges = vec![(0usize, 1usize)];
    let mut count = 2;
    while count < n {
        let v = rng.gen_range(0..count);
        edges.push((v, count));
        edges.push((v, count + 1));
        count += 2;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let edges: Vec<(usize, usize)> = edges.into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
    RootedTree::from_edges(n, rng.gen_range(0..n), &edges)
}

/// Random binary-rooted tree on `n` vertices (`n` even, at least 4).
///
/// Starts from a root with three leaf children and repeatedly gives two
/// children to a uniformly chosen leaf. The root is vertex 0.
pub fn random_binary_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<RootedTree> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "binary-rooted trees have an even number of vertices, at least 4, got {n}"
        )));
    }
    let mut edges = vec![(0usize, 1usize), (0, 2), (0, 3)];
    let mut leaves = vec![1usize, 2, 3];
    while edges.len() + 1 < n {
        let next = edges.len() + 1;
        let v = leaves.swap_remove(rng.gen_range(0..leaves.len()));
        edges.push((v, next));
        edges.push((v, next + 1));
        leaves.extend([next, next + 1]);
    }
    RootedTree::from_edges(n, 0, &edges)
}

/// Vertices that remain after repeatedly stripping all leaves.
fn centres(g: &Graph) -> Vec<usize> {
    let n = g.n();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut layer: Vec<usize> = (0..n).filter(|&v| deg[v] == 1).collect();
    let mut left = n;
    while left > 2 {
        left -= layer.len();
        let mut next = Vec::new();
        for &v in &layer {
            for &u in g.neighbors(v) {
                let u = u as usize;
                deg[u] -= 1;
                if deg[u] == 1 {
                    next.push(u);
                }
            }
        }
        layer = next;
    }
    layer.sort_unstable();
    layer
}

fn ahu(g: &Graph, v: usize, parent: usize) -> String {
    let mut kids: Vec<String> = g
        .neighbors(v)
        .iter()
        .map(|&u| u as usize)
        .filter(|&u| u != parent)
        .map(|u| ahu(g, u, v))
        .collect();
    kids.sort_unstable();
    format!("({})", kids.concat())
}

/// Isomorphism-invariant encoding of a tree.
pub fn canonical_form(g: &Graph) -> String {
    centres(g)
        .into_iter()
        .map(|c| ahu(g, c, usize::MAX))
        .min()
        .unwrap_or_default()
}

/// One representative of every unlabeled odd-degree tree on `n` vertices.
///
/// Representatives are rooted at a centre and labelled in breadth-first
/// order; the list is sorted by canonical form.
pub fn odd_trees(n: usize) -> Result<Vec<RootedTree>> {
    if n < 2 || n % 2 != 0 {
        return Ok(Vec::new());
    }
    let mut level: BTreeMap<String, Graph> = BTreeMap::new();
    let edge = Graph::from_edges(2, &[(0, 1)])?;
    level.insert(canonical_form(&edge), edge);
    for size in (4..=n).step_by(2) {
        let mut next = BTreeMap::new();
        for g in level.values() {
            let base = g.edges();
            for v in 0..g.n() {
                let mut edges = base.clone();
                edges.push((v, size - 2));
                edges.push((v, size - 1));
                let h = Graph::from_edges(size, &edges)?;
                next.entry(canonical_form(&h)).or_insert(h);
            }
        }
        level = next;
    }
    level
        .into_values()
        .map(|g| {
            let root = centres(&g)[0];
            Ok(RootedTree::from_graph(g, root)?.bfs_relabelled().0)
        })
        .collect()
}
