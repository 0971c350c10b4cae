//! Exact worst-case stabilisation time of a tree.
//!
//! A candidate path `v_1 .. v_n` has every vertex but the last active and
//! the last one active or balky. Its score is `n`, plus one when `v_n` is
//! adjacent to a leaf. The worst-case stabilisation time over all initial
//! opinions equals the best score, and an explicit initial vector attains it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_budget, Error, Result};
use crate::lanes::{Enumeration, LaneKernel, LaneSim};
use crate::opinion::OpinionVector;
use crate::tree::{Graph, RootedTree, VertexClass};

const NEG: i64 = i64::MIN / 4;

/// Default cap on `|V|` for exhaustive enumeration.
pub const DEFAULT_BRUTE_FORCE_VERTICES: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidatePath {
    pub vertices: Vec<usize>,
    pub n: usize,
    pub end_adjacent_to_leaf: bool,
    pub t_value: usize,
}

impl CandidatePath {
    /// Validates `vertices` as an admissible path of `tree`.
    pub fn new(tree: &RootedTree, vertices: Vec<usize>) -> Result<Self> {
        let g = tree.graph();
        let Some(&last) = vertices.last() else {
            return Err(Error::InadmissiblePath("empty path".into()));
        };
        let mut seen = vec![false; g.n()];
        for (i, &v) in vertices.iter().enumerate() {
            if v >= g.n() {
                return Err(Error::InadmissiblePath(format!("vertex {v} out of range")));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InadmissiblePath(format!("vertex {v} repeats")));
            }
            if i > 0 && !g.neighbors(vertices[i - 1]).contains(&(v as u32)) {
                return Err(Error::InadmissiblePath(format!(
                    "{} and {v} are not adjacent",
                    vertices[i - 1]
                )));
            }
        }
        for &v in &vertices[..vertices.len() - 1] {
            if tree.class(v) != VertexClass::Active {
                return Err(Error::InadmissiblePath(format!(
                    "interior vertex {v} is {:?}, not active",
                    tree.class(v)
                )));
            }
        }
        if tree.class(last) == VertexClass::Passive {
            return Err(Error::InadmissiblePath(format!("end vertex {last} is passive")));
        }
        let end_adjacent_to_leaf = g.leaf_neighbor_count(last) > 0;
        let n = vertices.len();
        Ok(CandidatePath {
            vertices,
            n,
            end_adjacent_to_leaf,
            t_value: n + end_adjacent_to_leaf as usize,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WorstCaseReport {
    pub tau: usize,
    pub argmax: CandidatePath,
    pub witness: Option<OpinionVector>,
    /// Vertex count of the longest all-active path starting at each active vertex.
    pub per_vertex_bound: BTreeMap<usize, usize>,
}

/// Values of a path-extension recurrence on every directed edge.
///
/// `down[w]` is the value entering `w` from its parent, `up[w]` the value
/// entering `parent(w)` from `w`. `val(w, m)` combines `w` with the best
/// value `m` among its other neighbours.
struct Directed {
    down: Vec<i64>,
    up: Vec<i64>,
}

impl Directed {
    fn compute(tree: &RootedTree, val: impl Fn(usize, i64) -> i64) -> Self {
        let n = tree.n();
        let order: Vec<usize> = tree.bfs_order().collect();
        let mut down = vec![NEG; n];
        for &w in order.iter().rev() {
            let m = tree.children(w).iter().map(|&c| down[c as usize]).max().unwrap_or(NEG);
            down[w] = val(w, m);
        }
        let mut up = vec![NEG; n];
        for &p in &order {
            let from_above = tree.parent(p).map_or(NEG, |_| up[p]);
            let kids = tree.children(p);
            let (mut b1, mut b2, mut arg) = (NEG, NEG, usize::MAX);
            for &c in kids {
                let d = down[c as usize];
                if d > b1 {
                    b2 = b1;
                    b1 = d;
                    arg = c as usize;
                } else if d > b2 {
                    b2 = d;
                }
            }
            for &c in kids {
                let c = c as usize;
                let sib = if c == arg { b2 } else { b1 };
                up[c] = val(p, from_above.max(sib));
            }
        }
        Directed { down, up }
    }

    /// Value entering `x` from its neighbour `from`.
    fn entering(&self, tree: &RootedTree, x: usize, from: usize) -> i64 {
        if tree.parent(x) == Some(from) {
            self.down[x]
        } else {
            self.up[from]
        }
    }

    fn best_around(&self, tree: &RootedTree, v: usize, skip: Option<usize>) -> i64 {
        tree.graph()
            .neighbors(v)
            .iter()
            .map(|&x| x as usize)
            .filter(|&x| Some(x) != skip)
            .map(|x| self.entering(tree, x, v))
            .max()
            .unwrap_or(NEG)
    }
}

/// `L(v)` for every active vertex.
pub fn per_vertex_bound(tree: &RootedTree) -> BTreeMap<usize, usize> {
    let classes = tree.classes();
    let active = |w: usize| classes[w] == VertexClass::Active;
    let dp = Directed::compute(tree, |w, m| if active(w) { 1 + m.max(0) } else { 0 });
    (0..tree.n())
        .filter(|&v| active(v))
        .map(|v| (v, 1 + dp.best_around(tree, v, None).max(0) as usize))
        .collect()
}

/// Worst-case stabilisation time with the lexicographically smallest optimal path.
///
/// Linear time. The witness is attached when `with_witness` is set.
pub fn worst_case_tau(tree: &RootedTree) -> Result<WorstCaseReport> {
    worst_case(tree, true)
}

pub fn worst_case(tree: &RootedTree, with_witness: bool) -> Result<WorstCaseReport> {
    if tree.n() < 5 {
        return Err(Error::TooSmall(tree.n()));
    }
    let g = tree.graph();
    let classes = tree.classes();
    let leafadj: Vec<i64> = (0..g.n()).map(|v| (g.leaf_neighbor_count(v) > 0) as i64).collect();
    let stop = |w: usize| {
        if classes[w] == VertexClass::Passive {
            NEG
        } else {
            1 + leafadj[w]
        }
    };
    let val = |w: usize, m: i64| {
        let go = if classes[w] == VertexClass::Active { 1 + m } else { NEG };
        stop(w).max(go)
    };
    let dp = Directed::compute(tree, val);
    let start: Vec<i64> = (0..g.n())
        .map(|v| val(v, dp.best_around(tree, v, None)))
        .collect();
    let best = *start.iter().max().expect("tree is non-empty");
    if best <= 0 {
        return Err(Error::Invariant("no admissible path".into()));
    }

    let v1 = start.iter().position(|&s| s == best).expect("maximum is attained");
    let mut path = vec![v1];
    let mut prev = None;
    loop {
        let u = *path.last().expect("path is non-empty");
        let len = path.len() as i64;
        if len - 1 + stop(u) == best {
            break;
        }
        debug_assert_eq!(classes[u], VertexClass::Active);
        let next = g
            .neighbors(u)
            .iter()
            .map(|&x| x as usize)
            .filter(|&x| Some(x) != prev)
            .find(|&x| len + dp.entering(tree, x, u) == best)
            .ok_or_else(|| Error::Invariant("argmax path walk lost the optimum".into()))?;
        prev = Some(u);
        path.push(next);
    }
    let argmax = CandidatePath::new(tree, path)?;
    debug_assert_eq!(argmax.t_value as i64, best);
    let witness = if with_witness {
        Some(worst_case_witness(tree, &argmax)?)
    } else {
        None
    };
    Ok(WorstCaseReport {
        tau: best as usize,
        argmax,
        witness,
        per_vertex_bound: per_vertex_bound(tree),
    })
}

/// Initial opinions under which `v_i` first disagrees with its start at time `i + 1`.
pub fn worst_case_witness(tree: &RootedTree, q: &CandidatePath) -> Result<OpinionVector> {
    let q = CandidatePath::new(tree, q.vertices.clone())?;
    let path = &q.vertices;
    let t = tree.reroot(*path.last().expect("validated path is non-empty"));
    let mut x = OpinionVector::uniform(t.n(), true);
    let fill = |x: &mut OpinionVector, v: usize| {
        for u in t.subtree(v) {
            x.set(u, false);
        }
    };
    for i in 1..path.len() {
        let v = path[i];
        let quota = (t.degree(v) - 1) / 2;
        let picked: Vec<usize> = t
            .children(v)
            .iter()
            .map(|&c| c as usize)
            .filter(|&c| c != path[i - 1] && !t.is_leaf(c))
            .take(quota)
            .collect();
        if picked.len() < quota {
            return Err(Error::InadmissiblePath(format!(
                "vertex {v} has too few non-leaf children off the path"
            )));
        }
        for c in picked {
            fill(&mut x, c);
        }
    }
    for &c in t.children(path[0]) {
        for &g in t.children(c as usize) {
            fill(&mut x, g as usize);
        }
    }
    Ok(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct BruteForceReport {
    pub tau: usize,
    pub argmax: OpinionVector,
    pub instances: u64,
}

/// Exhaustive maximum of the stabilisation time over all initial vectors.
///
/// Vertex 0 is pinned to `+1` (negation leaves `tau` unchanged), so
/// `2^(n-1)` vectors are simulated, 64 per batch, sharded across the rayon
/// pool. The reported argmax is the first optimum in enumeration order.
pub fn brute_force_tau(graph: &Graph, max_vertices: usize) -> Result<BruteForceReport> {
    let n = graph.n();
    check_budget(1u128 << n, 1u128 << max_vertices.min(126))?;
    if n > 63 {
        return Err(Error::InvalidArgument(format!("{n} vertices is beyond exhaustive reach")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty graph".into()));
    }
    let mut base = OpinionVector::uniform(n, false);
    base.set(0, true);
    let e = Enumeration::new(base, (1..n).collect());
    let kernel = LaneKernel::new(graph);
    let (tau, index) = (0..e.chunks())
        .into_par_iter()
        .map(|c| -> Result<(usize, u64)> {
            let (init, valid) = e.lane_init(c);
            let mut sim = LaneSim::new(&kernel, init, valid);
            sim.run_to_stable()?;
            let mut best = (0usize, u64::MAX);
            for j in 0..64 {
                if valid >> j & 1 == 1 {
                    let tau = sim.tau(j).expect("lane is stable");
                    if tau > best.0 || best.1 == u64::MAX {
                        best = (tau, c * 64 + j as u64);
                    }
                }
            }
            Ok(best)
        })
        .try_reduce(
            || (0, u64::MAX),
            |a, b| {
                Ok(match a.0.cmp(&b.0) {
                    std::cmp::Ordering::Greater => a,
                    std::cmp::Ordering::Less => b,
                    std::cmp::Ordering::Equal => (a.0, a.1.min(b.1)),
                })
            },
        )?;
    Ok(BruteForceReport {
        tau,
        argmax: e.assignment(index),
        instances: e.total(),
    })
}
