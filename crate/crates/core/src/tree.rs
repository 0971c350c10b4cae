//! Odd-degree graphs and rooted trees.
//!
//! [`Graph`] is the general adjacency view the dynamics engine runs on.
//! [`RootedTree`] adds the rooted vocabulary (parent, children, heights,
//! subtrees) and the active / balky / passive vertex classification.

use std::collections::VecDeque;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Undirected simple graph in compressed adjacency form; every degree is odd.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<u32>,
    nbrs: Vec<u32>,
}

impl Graph {
    /// Builds a graph and rejects self-loops, parallel edges and even degrees.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let g = Self::build_unchecked(n, edges)?;
        g.check_parity()?;
        Ok(g)
    }

    fn build_unchecked(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut deg = vec![0u32; n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at vertex {u}")));
            }
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0u32);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill: Vec<u32> = offsets[..n].to_vec();
        let mut nbrs = vec![0u32; 2 * edges.len()];
        for &(u, v) in edges {
            nbrs[fill[u] as usize] = v as u32;
            fill[u] += 1;
            nbrs[fill[v] as usize] = u as u32;
            fill[v] += 1;
        }
        for v in 0..n {
            let s = &mut nbrs[offsets[v] as usize..offsets[v + 1] as usize];
            s.sort_unstable();
            if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "parallel edges between {v} and {}",
                    w[0]
                )));
            }
        }
        Ok(Graph { offsets, nbrs })
    }

    fn check_parity(&self) -> Result<()> {
        match (0..self.n()).find(|&v| self.degree(v) % 2 == 0) {
            Some(vertex) => Err(Error::DegreeParity {
                vertex,
                degree: self.degree(vertex),
            }),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.nbrs.len() / 2
    }

    /// Neighbours of `v` in ascending id order.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.nbrs[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }

    #[inline]
    pub fn is_leaf(&self, v: usize) -> bool {
        self.degree(v) == 1
    }

    pub fn leaf_neighbor_count(&self, v: usize) -> usize {
        self.neighbors(v)
            .iter()
            .filter(|&&u| self.is_leaf(u as usize))
            .count()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|u| {
                self.neighbors(u)
                    .iter()
                    .filter(move |&&v| (v as usize) > u)
                    .map(move |&v| (u, v as usize))
            })
            .collect()
    }

    /// `|E| - |V|/2`, the classical bound on the stabilisation time.
    /// `|V|` is even whenever every degree is odd.
    pub fn stabilisation_bound(&self) -> usize {
        self.edge_count() - self.n() / 2
    }

    pub(crate) fn csr(&self) -> (&[u32], &[u32]) {
        (&self.offsets, &self.nbrs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexClass {
    Active,
    Balky,
    Passive,
}

/// Classifies `v` by how many of its neighbours are leaves, compared with
/// `(deg - 1) / 2`. Depends only on the graph, never on a root.
pub fn classify(graph: &Graph, v: usize) -> VertexClass {
    let half = (graph.degree(v) - 1) / 2;
    let leaves = graph.leaf_neighbor_count(v);
    match leaves.cmp(&half) {
        std::cmp::Ordering::Less => VertexClass::Active,
        std::cmp::Ordering::Equal => VertexClass::Balky,
        std::cmp::Ordering::Greater => VertexClass::Passive,
    }
}

/// An odd-degree tree with a distinguished root. Immutable once built.
#[derive(Clone, Debug)]
pub struct RootedTree {
    graph: Graph,
    root: usize,
    parent: Vec<u32>,
    child_offsets: Vec<u32>,
    child_list: Vec<u32>,
    order: Vec<u32>,
    depth: Vec<u32>,
    height: Vec<u32>,
    diameter: usize,
    contiguous: bool,
}

impl PartialEq for RootedTree {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.graph == other.graph
    }
}

impl Eq for RootedTree {}

impl RootedTree {
    /// Validates in this order: vertex ids, cycles, connectivity, degree parity.
    pub fn from_edges(n: usize, root: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("tree must have at least one vertex".into()));
        }
        if root >= n {
            return Err(Error::InvalidArgument(format!("root {root} outside 0..{n}")));
        }
        let mut dsu: Vec<usize> = (0..n).collect();
        fn find(d: &mut [usize], mut x: usize) -> usize {
            while d[x] != x {
                d[x] = d[d[x]];
                x = d[x];
            }
            x
        }
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            let (a, b) = (find(&mut dsu, u), find(&mut dsu, v));
            if a == b {
                return Err(Error::Cyclic);
            }
            dsu[a] = b;
        }
        let r = find(&mut dsu, root);
        if let Some(vertex) = (0..n).find(|&v| find(&mut dsu, v) != r) {
            return Err(Error::Disconnected { vertex });
        }
        let graph = Graph::build_unchecked(n, edges)?;
        graph.check_parity()?;
        Ok(Self::from_graph_unchecked(graph, root))
    }

    /// Roots an existing tree graph at `root`.
    pub fn from_graph(graph: Graph, root: usize) -> Result<Self> {
        if root >= graph.n() {
            return Err(Error::InvalidArgument(format!("root {root} outside 0..{}", graph.n())));
        }
        if graph.edge_count() + 1 != graph.n() {
            return Err(Error::InvalidArgument("graph is not a tree".into()));
        }
        Self::from_edges(graph.n(), root, &graph.edges())
    }

    fn from_graph_unchecked(graph: Graph, root: usize) -> Self {
        let n = graph.n();
        let mut parent = vec![NONE; n];
        let mut depth = vec![0u32; n];
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root as u32]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &u in graph.neighbors(v as usize) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    parent[u as usize] = v;
                    depth[u as usize] = depth[v as usize] + 1;
                    queue.push_back(u);
                }
            }
        }
        debug_assert_eq!(order.len(), n);

        let mut child_offsets = Vec::with_capacity(n + 1);
        let mut child_list = Vec::with_capacity(n.saturating_sub(1));
        child_offsets.push(0u32);
        for v in 0..n {
            child_list.extend(
                graph
                    .neighbors(v)
                    .iter()
                    .copied()
                    .filter(|&u| parent[u as usize] == v as u32),
            );
            child_offsets.push(child_list.len() as u32);
        }

        let mut height = vec![0u32; n];
        for &v in order.iter().rev() {
            let p = parent[v as usize];
            if p != NONE {
                height[p as usize] = height[p as usize].max(height[v as usize] + 1);
            }
        }

        let contiguous = order.iter().enumerate().all(|(i, &v)| i == v as usize)
            && (0..n).all(|v| {
                let c = &child_list[child_offsets[v] as usize..child_offsets[v + 1] as usize];
                c.windows(2).all(|w| w[1] == w[0] + 1)
            });

        let diameter = diameter_of(&graph);
        RootedTree {
            graph,
            root,
            parent,
            child_offsets,
            child_list,
            order,
            depth,
            height,
            diameter,
            contiguous,
        }
    }

    /// Perfect k-ary tree of height `h`: the root and every other internal
    /// vertex have degree `k + 1`. Ids are assigned in breadth-first order,
    /// so each vertex's children occupy a contiguous id block.
    pub fn perfect(k: usize, h: usize) -> Result<Self> {
        if k < 2 || k % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "branching factor k = {k} must be even and at least 2"
            )));
        }
        if h < 1 {
            return Err(Error::InvalidArgument("height must be at least 1".into()));
        }
        let n = perfect_tree_size(k, h);
        let mut edges = Vec::with_capacity(n - 1);
        let mut next = 1usize;
        let mut level = vec![0usize];
        for d in 0..h {
            let mut next_level = Vec::with_capacity(level.len() * (k + 1));
            for &v in &level {
                let fan = if d == 0 { k + 1 } else { k };
                for _ in 0..fan {
                    edges.push((v, next));
                    next_level.push(next);
                    next += 1;
                }
            }
            level = next_level;
        }
        debug_assert_eq!(next, n);
        let graph = Graph::build_unchecked(n, &edges)?;
        Ok(Self::from_graph_unchecked(graph, 0))
    }

    /// The same underlying tree rooted elsewhere.
    pub fn reroot(&self, root: usize) -> Self {
        Self::from_graph_unchecked(self.graph.clone(), root)
    }

    #[inline]
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    #[inline]
    pub fn root(&self) -> usize {
        self.root
    }

    #[inline]
    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NONE => None,
            p => Some(p as usize),
        }
    }

    #[inline]
    pub fn children(&self, v: usize) -> &[u32] {
        &self.child_list[self.child_offsets[v] as usize..self.child_offsets[v + 1] as usize]
    }

    /// Id range of `v`'s children when ids follow breadth-first order.
    #[inline]
    pub fn child_range(&self, v: usize) -> Option<Range<usize>> {
        if !self.contiguous {
            return None;
        }
        let c = self.children(v);
        Some(match (c.first(), c.last()) {
            (Some(&a), Some(&b)) => a as usize..b as usize + 1,
            _ => 0..0,
        })
    }

    /// True when ids are in breadth-first order with contiguous child blocks.
    #[inline]
    pub fn is_bfs_labelled(&self) -> bool {
        self.contiguous
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.graph.degree(v)
    }

    /// Graph leaf (degree one). The root may be one.
    #[inline]
    pub fn is_leaf(&self, v: usize) -> bool {
        self.graph.is_leaf(v)
    }

    /// Distance to the farthest leaf below `v`; zero exactly for childless vertices.
    #[inline]
    pub fn height(&self, v: usize) -> usize {
        self.height[v] as usize
    }

    #[inline]
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v] as usize
    }

    /// Longest leaf-to-leaf distance, in edges.
    #[inline]
    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn tree_height(&self) -> usize {
        self.height(self.root)
    }

    pub fn bfs_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.order.iter().map(|&v| v as usize)
    }

    pub fn class(&self, v: usize) -> VertexClass {
        classify(&self.graph, v)
    }

    pub fn classes(&self) -> Vec<VertexClass> {
        (0..self.n()).map(|v| self.class(v)).collect()
    }

    /// Vertices of the subtree below and including `v`, in preorder.
    pub fn subtree(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v as u32];
        while let Some(x) = stack.pop() {
            out.push(x as usize);
            stack.extend(self.children(x as usize).iter().rev());
        }
        out
    }

    /// Membership mask of the subtree below and including `v`.
    pub fn subtree_mask(&self, v: usize) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        for u in self.subtree(v) {
            mask[u] = true;
        }
        mask
    }

    /// Whether `u` lies in the subtree of `v` (including `u == v`).
    pub fn is_descendant(&self, u: usize, v: usize) -> bool {
        let mut x = u;
        loop {
            if x == v {
                return true;
            }
            if self.depth[x] <= self.depth[v] {
                return false;
            }
            x = self.parent[x] as usize;
        }
    }

    /// Vertex path from `a` to `b`, both ends included.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let (mut x, mut y) = (a, b);
        let mut left = Vec::new();
        let mut right = Vec::new();
        while self.depth[x] > self.depth[y] {
            left.push(x);
            x = self.parent[x] as usize;
        }
        while self.depth[y] > self.depth[x] {
            right.push(y);
            y = self.parent[y] as usize;
        }
        while x != y {
            left.push(x);
            right.push(y);
            x = self.parent[x] as usize;
            y = self.parent[y] as usize;
        }
        left.push(x);
        left.extend(right.into_iter().rev());
        left
    }

    /// Parent-child edges in breadth-first order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.bfs_order()
            .flat_map(|v| self.children(v).iter().map(move |&c| (v, c as usize)))
            .collect()
    }

    /// Copy with ids reassigned in breadth-first order from the root.
    /// Returns the copy and the map from old ids to new ids.
    pub fn bfs_relabelled(&self) -> (RootedTree, Vec<usize>) {
        let mut map = vec![0usize; self.n()];
        for (i, v) in self.bfs_order().enumerate() {
            map[v] = i;
        }
        let edges: Vec<(usize, usize)> =
            self.edges().into_iter().map(|(u, v)| (map[u], map[v])).collect();
        let graph = Graph::build_unchecked(self.n(), &edges).expect("relabelled tree is valid");
        (Self::from_graph_unchecked(graph, 0), map)
    }

    /// Every internal non-root vertex has two children and the root has three.
    pub fn check_binary_rooted(&self) -> Result<()> {
        for v in 0..self.n() {
            let c = self.children(v).len();
            let want = if v == self.root { 3 } else { 2 };
            if c != 0 && c != want {
                return Err(Error::NotBinary(format!(
                    "vertex {v} has {c} children, expected {want}"
                )));
            }
        }
        if self.children(self.root).is_empty() {
            return Err(Error::NotBinary("root has no children".into()));
        }
        Ok(())
    }

    /// Branching factor `k` if this is a perfect k-ary tree.
    pub fn perfect_arity(&self) -> Option<usize> {
        let k = self.children(self.root).len().checked_sub(1)?;
        if k < 2 || self.n() != perfect_tree_size(k, self.tree_height()) {
            return None;
        }
        let h = self.tree_height();
        let ok = (0..self.n()).all(|v| {
            let c = self.children(v).len();
            if v == self.root {
                true
            } else if c == 0 {
                self.depth(v) == h
            } else {
                c == k
            }
        });
        ok.then_some(k)
    }
}

/// `1 + (k+1)(k^h - 1)/(k - 1)`.
pub fn perfect_tree_size(k: usize, h: usize) -> usize {
    1 + (k + 1) * (k.pow(h as u32) - 1) / (k - 1)
}

fn diameter_of(graph: &Graph) -> usize {
    fn farthest(graph: &Graph, src: usize) -> (usize, usize) {
        let mut dist = vec![u32::MAX; graph.n()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        let mut last = (src, 0);
        while let Some(v) = queue.pop_front() {
            last = (v, dist[v] as usize);
            for &u in graph.neighbors(v) {
                if dist[u as usize] == u32::MAX {
                    dist[u as usize] = dist[v] + 1;
                    queue.push_back(u as usize);
                }
            }
        }
        last
    }
    let (a, _) = farthest(graph, 0);
    farthest(graph, a).1
}
