//! Synchronous majority dynamics on odd-degree graphs.
//!
//! Every vertex replaces its opinion by the sign of the sum of its
//! neighbours' opinions. Odd degrees make the sum non-zero, so the update is
//! total. Every finite trajectory eventually has period at most two; the
//! stabilisation time `tau` is the first `t` with `x[t + 2] == x[t]`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::opinion::OpinionVector;
use crate::tree::{Graph, RootedTree};

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
enum Topology {
    /// Arbitrary adjacency.
    Csr { offsets: Vec<u32>, nbrs: Vec<u32> },
    /// Breadth-first labelled tree: each vertex sees its parent and a
    /// contiguous block of children, counted with one popcount.
    Blocks {
        parent: Vec<u32>,
        first_child: Vec<u32>,
        end_child: Vec<u32>,
    },
}

/// Precomputed update rule for one graph; shareable across threads.
#[derive(Clone, Debug)]
pub struct Kernel {
    n: usize,
    edges: usize,
    degree: Vec<u32>,
    topo: Topology,
}

impl Kernel {
    pub fn new(graph: &Graph) -> Self {
        let (offsets, nbrs) = graph.csr();
        Kernel {
            n: graph.n(),
            edges: graph.edge_count(),
            degree: (0..graph.n()).map(|v| graph.degree(v) as u32).collect(),
            topo: Topology::Csr {
                offsets: offsets.to_vec(),
                nbrs: nbrs.to_vec(),
            },
        }
    }

    /// Uses the child-block layout when the tree is breadth-first labelled.
    pub fn for_tree(tree: &RootedTree) -> Self {
        if !tree.is_bfs_labelled() {
            return Self::new(tree.graph());
        }
        let n = tree.n();
        let mut parent = vec![NONE; n];
        let mut first_child = vec![0u32; n];
        let mut end_child = vec![0u32; n];
        for v in 0..n {
            if let Some(p) = tree.parent(v) {
                parent[v] = p as u32;
            }
            let r = tree.child_range(v).expect("bfs labelled");
            first_child[v] = r.start as u32;
            end_child[v] = r.end as u32;
        }
        Kernel {
            n,
            edges: tree.graph().edge_count(),
            degree: (0..n).map(|v| tree.degree(v) as u32).collect(),
            topo: Topology::Blocks {
                parent,
                first_child,
                end_child,
            },
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `|E| - |V|/2`.
    pub fn stabilisation_bound(&self) -> usize {
        self.edges - self.n / 2
    }

    fn check_len(&self, state: &OpinionVector) -> Result<()> {
        if state.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: state.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn positive_neighbours(&self, src: &OpinionVector, v: usize) -> u32 {
        match &self.topo {
            Topology::Csr { offsets, nbrs } => nbrs
                [offsets[v] as usize..offsets[v + 1] as usize]
                .iter()
                .map(|&u| src.get(u as usize) as u32)
                .sum(),
            Topology::Blocks {
                parent,
                first_child,
                end_child,
            } => {
                let up = match parent[v] {
                    NONE => 0,
                    p => src.get(p as usize) as u32,
                };
                up + src.count_positive_in(first_child[v] as usize, end_child[v] as usize)
            }
        }
    }

    /// Writes the successor of `src` into `dst` (both of length `n`).
    pub fn step_into(&self, src: &OpinionVector, dst: &mut OpinionVector) {
        debug_assert_eq!(src.len(), self.n);
        debug_assert_eq!(dst.len(), self.n);
        let words = dst.words_mut();
        for (wi, out) in words.iter_mut().enumerate() {
            let base = wi << 6;
            let end = (base + 64).min(self.n);
            let mut acc = 0u64;
            for v in base..end {
                let pos = self.positive_neighbours(src, v);
                // odd degree: 2 * pos never equals the degree
                if 2 * pos > self.degree[v] {
                    acc |= 1 << (v - base);
                }
            }
            *out = acc;
        }
    }

    pub fn step(&self, src: &OpinionVector) -> Result<OpinionVector> {
        self.check_len(src)?;
        let mut dst = OpinionVector::uniform(self.n, false);
        self.step_into(src, &mut dst);
        Ok(dst)
    }
}

/// One synchronous update.
pub fn step(graph: &Graph, state: &OpinionVector) -> Result<OpinionVector> {
    Kernel::new(graph).step(state)
}

/// A running trajectory: the last three states, optional full history and
/// per-vertex flip times. A flip of `v` at time `s >= 2` means
/// `x[s](v) != x[s - 2](v)`.
#[derive(Clone, Debug)]
pub struct Trajectory<'k> {
    kernel: &'k Kernel,
    t: usize,
    window: [OpinionVector; 3],
    history: Option<Vec<OpinionVector>>,
    first_flip: Vec<u32>,
    last_flip: [Vec<u32>; 2],
    tau: Option<usize>,
}

impl<'k> Trajectory<'k> {
    pub fn new(kernel: &'k Kernel, init: OpinionVector, keep_history: bool) -> Result<Self> {
        kernel.check_len(&init)?;
        let n = kernel.n();
        let blank = OpinionVector::uniform(n, false);
        Ok(Trajectory {
            kernel,
            t: 0,
            history: keep_history.then(|| vec![init.clone()]),
            window: [init, blank.clone(), blank],
            first_flip: vec![NONE; n],
            last_flip: [vec![NONE; n], vec![NONE; n]],
            tau: None,
        })
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    /// `x[t]`.
    #[inline]
    pub fn current(&self) -> &OpinionVector {
        &self.window[self.t % 3]
    }

    /// `x[s]`, if still in the window or in the retained history.
    pub fn state(&self, s: usize) -> Option<&OpinionVector> {
        if s <= self.t && s + 2 >= self.t {
            return Some(&self.window[s % 3]);
        }
        self.history.as_ref().and_then(|h| h.get(s))
    }

    pub fn history(&self) -> Option<&[OpinionVector]> {
        self.history.as_deref()
    }

    /// Computes `x[t + 1]`.
    pub fn advance(&mut self) {
        let s = self.t + 1;
        let [a, b, c] = &mut self.window;
        let (src, dst) = match self.t % 3 {
            0 => (&*a, b),
            1 => (&*b, c),
            _ => (&*c, a),
        };
        self.kernel.step_into(src, dst);
        self.t = s;
        if s >= 2 {
            let new = &self.window[s % 3];
            let old = &self.window[(s - 2) % 3];
            let mut any = false;
            for (wi, (x, y)) in new.words().iter().zip(old.words()).enumerate() {
                let mut diff = x ^ y;
                any |= diff != 0;
                while diff != 0 {
                    let v = (wi << 6) + diff.trailing_zeros() as usize;
                    diff &= diff - 1;
                    if self.first_flip[v] == NONE {
                        self.first_flip[v] = s as u32;
                    }
                    self.last_flip[s & 1][v] = s as u32;
                }
            }
            if !any && self.tau.is_none() {
                self.tau = Some(s - 2);
            }
        }
        if let Some(h) = &mut self.history {
            h.push(self.window[s % 3].clone());
        }
    }

    /// Advances until period two is reached, returning `tau`.
    ///
    /// Fails with [`Error::Invariant`] if `tau` would exceed `|E| - |V|/2`,
    /// which the period-two theorem rules out.
    pub fn run_to_stable(&mut self) -> Result<usize> {
        let bound = self.kernel.stabilisation_bound();
        while self.tau.is_none() {
            if self.t >= bound + 2 {
                return Err(Error::Invariant(format!(
                    "no period-two state after {} steps (bound {bound})",
                    self.t
                )));
            }
            self.advance();
        }
        Ok(self.tau.unwrap())
    }

    /// Advances to at least time `s`.
    pub fn run_to(&mut self, s: usize) {
        while self.t < s {
            self.advance();
        }
    }

    #[inline]
    pub fn tau(&self) -> Option<usize> {
        self.tau
    }

    pub fn first_flip(&self, v: usize) -> Option<usize> {
        opt(self.first_flip[v])
    }

    pub fn last_flip(&self, v: usize) -> Option<usize> {
        match (opt(self.last_flip[0][v]), opt(self.last_flip[1][v])) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    /// Latest flip of `v` at a time with the given parity (0 even, 1 odd).
    pub fn last_flip_with_parity(&self, v: usize, parity: usize) -> Option<usize> {
        opt(self.last_flip[parity & 1][v])
    }

    /// Whether `x[s](v) == x[s + 2](v)` for every `s >= t` of `t`'s parity.
    /// Only meaningful once the trajectory has stabilised.
    pub fn is_t_stable(&self, v: usize, t: usize) -> bool {
        debug_assert!(self.tau.is_some(), "trajectory not yet stabilised");
        match self.last_flip_with_parity(v, t) {
            Some(f) => f < t + 2,
            None => true,
        }
    }

    pub fn into_result(self) -> Result<StabilisationResult> {
        let tau = self.tau.ok_or_else(|| Error::Invariant("trajectory not stabilised".into()))?;
        Ok(StabilisationResult {
            tau,
            stable_even: self.window[tau % 3].clone(),
            stable_odd: self.window[(tau + 1) % 3].clone(),
            steps_executed: self.t,
            first_flip: self.first_flip.iter().map(|&x| opt(x)).collect(),
            last_flip: (0..self.first_flip.len())
                .map(|v| match (opt(self.last_flip[0][v]), opt(self.last_flip[1][v])) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                })
                .collect(),
            history: self.history,
        })
    }
}

#[inline]
fn opt(x: u32) -> Option<usize> {
    (x != NONE).then_some(x as usize)
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilisationResult {
    pub tau: usize,
    /// `x[tau]`.
    pub stable_even: OpinionVector,
    /// `x[tau + 1]`.
    pub stable_odd: OpinionVector,
    pub steps_executed: usize,
    pub first_flip: Vec<Option<usize>>,
    pub last_flip: Vec<Option<usize>>,
    #[serde(skip)]
    pub history: Option<Vec<OpinionVector>>,
}

/// Simulates until `x[tau + 2] == x[tau]`.
pub fn stabilise(graph: &Graph, init: &OpinionVector) -> Result<StabilisationResult> {
    stabilise_with(&Kernel::new(graph), init, false)
}

pub fn stabilise_tree(tree: &RootedTree, init: &OpinionVector) -> Result<StabilisationResult> {
    stabilise_with(&Kernel::for_tree(tree), init, false)
}

pub fn stabilise_with(
    kernel: &Kernel,
    init: &OpinionVector,
    keep_history: bool,
) -> Result<StabilisationResult> {
    let mut traj = Trajectory::new(kernel, init.clone(), keep_history)?;
    traj.run_to_stable()?;
    traj.into_result()
}

/// Whether `v` is `t`-stable: its opinion is constant over all times
/// `s >= t` of the same parity as `t`.
pub fn is_t_stable(graph: &Graph, init: &OpinionVector, v: usize, t: usize) -> Result<bool> {
    let kernel = Kernel::new(graph);
    let mut traj = Trajectory::new(&kernel, init.clone(), false)?;
    traj.run_to_stable()?;
    Ok(traj.is_t_stable(v, t))
}

/// Sets `+1` on `positive`, `-1` on `negative`, and reports whether every
/// vertex is 0-stationary, i.e. `x[1] == x[0]`.
pub fn is_stable_partition(graph: &Graph, positive: &[usize], negative: &[usize]) -> Result<bool> {
    let n = graph.n();
    let mut seen = vec![false; n];
    for &v in positive.iter().chain(negative) {
        if v >= n {
            return Err(Error::InvalidArgument(format!("vertex {v} outside 0..{n}")));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidArgument(format!(
                "vertex {v} appears twice; not a partition"
            )));
        }
    }
    if let Some(v) = seen.iter().position(|&s| !s) {
        return Err(Error::InvalidArgument(format!(
            "vertex {v} is in neither part; not a partition"
        )));
    }
    let mut init = OpinionVector::uniform(n, false);
    for &v in positive {
        init.set(v, true);
    }
    Ok(step(graph, &init)? == init)
}

/// Writes `t,vertex,opinion` rows for every state of a trajectory.
pub fn write_trace_csv<W: Write>(history: &[OpinionVector], mut w: W) -> Result<()> {
    writeln!(w, "t,vertex,opinion")?;
    for (t, state) in history.iter().enumerate() {
        for v in 0..state.len() {
            writeln!(w, "{t},{v},{}", state.sign(v))?;
        }
    }
    Ok(())
}

/// One `+-` string per time step.
pub fn write_trace_compact<W: Write>(history: &[OpinionVector], mut w: W) -> Result<()> {
    for state in history {
        writeln!(w, "{state}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> RootedTree {
        RootedTree::from_edges(4, 0, &[(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    fn double_star() -> RootedTree {
        RootedTree::from_edges(6, 0, &[(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)]).unwrap()
    }

    fn ov(s: &str) -> OpinionVector {
        s.parse().unwrap()
    }

    #[test]
    fn star_step() {
        let t = star();
        let next = step(t.graph(), &ov("-++-")).unwrap();
        assert_eq!(next, ov("+---"));
    }

    #[test]
    fn all_positive_is_fixed() {
        let t = RootedTree::perfect(4, 3).unwrap();
        let all = OpinionVector::uniform(t.n(), true);
        assert_eq!(Kernel::for_tree(&t).step(&all).unwrap(), all);
        assert_eq!(step(t.graph(), &all).unwrap(), all);
    }

    #[test]
    fn perfect_binary_height_one_step() {
        let t = RootedTree::perfect(2, 1).unwrap();
        assert_eq!(step(t.graph(), &ov("-+++")).unwrap(), ov("+---"));
    }

    #[test]
    fn block_and_csr_kernels_agree() {
        let t = RootedTree::perfect(2, 5).unwrap();
        let blocks = Kernel::for_tree(&t);
        let csr = Kernel::new(t.graph());
        let mut x = OpinionVector::from_bools(&(0..t.n()).map(|i| (i * 37 + 11) % 7 < 3).collect::<Vec<_>>());
        for _ in 0..10 {
            let a = blocks.step(&x).unwrap();
            assert_eq!(a, csr.step(&x).unwrap());
            x = a;
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let t = star();
        let err = step(t.graph(), &ov("+++")).unwrap_err();
        assert_eq!(err.code(), "INIT_LENGTH_MISMATCH");
    }

    #[test]
    fn uniform_start_has_tau_zero() {
        let t = RootedTree::perfect(2, 3).unwrap();
        for pos in [true, false] {
            let r = stabilise_tree(&t, &OpinionVector::uniform(t.n(), pos)).unwrap();
            assert_eq!(r.tau, 0);
        }
    }

    #[test]
    fn star_two_cycle() {
        let t = star();
        let r = stabilise(t.graph(), &ov("-+++")).unwrap();
        assert_eq!(r.tau, 0);
        assert_eq!(r.stable_even, ov("-+++"));
        assert_eq!(r.stable_odd, ov("+---"));
        // centre: -1 at even steps, +1 at odd steps
        assert!(is_t_stable(t.graph(), &ov("-+++"), 0, 0).unwrap());
        assert!(is_t_stable(t.graph(), &ov("-+++"), 0, 1).unwrap());
    }

    #[test]
    fn passive_vertices_are_zero_stationary() {
        let t = double_star();
        for idx in 0..64u64 {
            let x = OpinionVector::from_index(6, idx);
            for v in [0, 1] {
                assert!(is_t_stable(t.graph(), &x, v, 0).unwrap());
                assert!(is_t_stable(t.graph(), &x, v, 1).unwrap());
            }
        }
    }

    #[test]
    fn stable_after_tau() {
        let t = RootedTree::perfect(2, 4).unwrap();
        let x = OpinionVector::from_bools(&(0..t.n()).map(|i| (i * 13 + 5) % 3 == 0).collect::<Vec<_>>());
        let k = Kernel::for_tree(&t);
        let mut tr = Trajectory::new(&k, x, true).unwrap();
        let tau = tr.run_to_stable().unwrap();
        for v in 0..t.n() {
            assert!(tr.is_t_stable(v, tau + 2));
            assert!(tr.is_t_stable(v, tau));
        }
        let h = tr.history().unwrap();
        assert_eq!(h.len(), tau + 3);
        assert_eq!(h[tau], h[tau + 2]);
        if tau > 0 {
            assert_ne!(h[tau - 1], h[tau + 1]);
        }
    }

    #[test]
    fn stable_partitions() {
        let ds = double_star();
        assert!(is_stable_partition(ds.graph(), &[0, 1, 2, 3, 4, 5], &[]).unwrap());
        assert!(is_stable_partition(ds.graph(), &[0, 2, 3], &[1, 4, 5]).unwrap());
        let s = star();
        assert!(!is_stable_partition(s.graph(), &[1], &[0, 2, 3]).unwrap());
        assert!(is_stable_partition(s.graph(), &[1], &[0, 2]).is_err());
        assert!(is_stable_partition(s.graph(), &[1, 0], &[0, 2, 3]).is_err());
    }

    #[test]
    fn trace_formats() {
        let hist = vec![ov("+-"), ov("-+")];
        let mut buf = Vec::new();
        write_trace_csv(&hist, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,vertex,opinion\n0,0,1\n0,1,-1\n1,0,-1\n1,1,1\n"
        );
        let mut buf = Vec::new();
        write_trace_compact(&hist, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "+-\n-+\n");
    }
}
