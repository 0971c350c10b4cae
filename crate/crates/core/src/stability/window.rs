//! Exact quantification over extensions through bounded opinion sequences.
//!
//! A vertex `v` meets the rest of the tree only through its parent `u`.
//! Over a window of times `0..=L`, every extension of `ξ0|T_v` induces one
//! sequence of opinions of `u`, and conversely a `u`-sequence is realisable
//! exactly when the branches hanging off `u` (other than `T_v`) can produce
//! sequences that make `u` follow it. Realisable sequences of a branch are
//! computed bottom-up: `Outputs_w(d)` is the set of sequences vertex `w` can
//! show when its parent shows `d`, over all initial opinions below `w`.
//!
//! Sequences are bit masks: bit `s` is the opinion at time `s` (`1` for
//! `+1`). For a vertex `x` with `k` children and parent sequence `d`, the
//! update at time `s < L` holds iff at most `k/2 - 1 + [d_s = x_{s+1}]`
//! children disagree with `x_{s+1}` at time `s`. Child disagreement counts
//! are summed per position in base `k/2 + 1`; sums that exceed `k/2`
//! anywhere can never be admissible and are dropped.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::opinion::OpinionVector;
use crate::tree::RootedTree;

use super::driven::DrivenSubtree;

/// Largest supported window length `L`.
pub const MAX_WINDOW: usize = 13;

/// Cap on sequences times count states for a single vertex table.
pub const WINDOW_BUDGET: u128 = 1 << 28;

/// Per-position digit arithmetic for summed disagreement counts.
#[derive(Clone, Debug)]
struct Counts {
    len: usize,
    base: usize,
    pow: Vec<usize>,
}

impl Counts {
    fn new(len: usize, children: usize) -> Self {
        let base = children / 2 + 1;
        let pow = (0..=len).map(|s| base.pow(s as u32)).collect();
        Counts { len, base, pow }
    }

    fn states(&self) -> usize {
        self.pow[self.len]
    }

    /// `a` plus the 0/1 vector `m`, unless some digit would pass `base - 1`.
    #[inline]
    fn add(&self, a: usize, m: u32) -> Option<usize> {
        if self.base == 2 {
            return (a as u32 & m == 0).then_some(a | m as usize);
        }
        let mut out = a;
        let mut bits = m;
        while bits != 0 {
            let s = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if (a / self.pow[s]) % self.base == self.base - 1 {
                return None;
            }
            out += self.pow[s];
        }
        Some(out)
    }

    /// State index of the per-position disagreement allowance for agreement mask `a`.
    fn allowance(&self, children: usize, a: u32) -> Option<usize> {
        let full = (1u32 << self.len) - 1;
        if children == 0 {
            return (a == full).then_some(0);
        }
        let floor = children / 2 - 1;
        let mut idx = 0;
        for s in 0..self.len {
            idx += (floor + ((a >> s) & 1) as usize) * self.pow[s];
        }
        Some(idx)
    }

    /// Marks every state that dominates a marked state, position by position.
    fn up_close(&self, table: &mut [bool]) {
        for s in 0..self.len {
            let p = self.pow[s];
            for idx in 0..table.len() {
                if !table[idx] && (idx / p) % self.base > 0 && table[idx - p] {
                    table[idx] = true;
                }
            }
        }
    }
}

/// Minimal elements (under inclusion) of the disagreement masks of `row`
/// against `x`.
fn minimal_masks(row: &[u64], x: u32, len: usize) -> Vec<u32> {
    let full = (1u32 << len) - 1;
    let target = x >> 1;
    let mut present = vec![false; 1 << len];
    for (w, &word) in row.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let c = (w * 64 + bits.trailing_zeros() as usize) as u32;
            bits &= bits - 1;
            present[((c ^ target) & full) as usize] = true;
        }
    }
    let mut below = present.clone();
    for s in 0..len {
        for m in 0..below.len() {
            if m >> s & 1 == 1 && below[m ^ (1 << s)] {
                below[m] = true;
            }
        }
    }
    (0..1u32 << len)
        .filter(|&m| {
            present[m as usize]
                && (0..len).all(|s| m >> s & 1 == 0 || !below[(m ^ (1 << s)) as usize])
        })
        .collect()
}

/// Up-closed table of disagreement-count vectors achievable by the given
/// children while their parent shows `x`.
fn achievable(children: &[&Outputs], x: u32, counts: &Counts) -> Vec<bool> {
    let mut table = vec![false; counts.states()];
    let mut cur = vec![0usize];
    for child in children {
        let masks = minimal_masks(&child.rows[x as usize], x, counts.len);
        let mut seen = vec![false; counts.states()];
        let mut next = Vec::new();
        for &a in &cur {
            for &m in &masks {
                if let Some(b) = counts.add(a, m) {
                    if !std::mem::replace(&mut seen[b], true) {
                        next.push(b);
                    }
                }
            }
        }
        cur = next;
    }
    for a in cur {
        table[a] = true;
    }
    counts.up_close(&mut table);
    table
}

/// `rows[d]` is the set of sequences (a bitset) a vertex can show when its
/// parent shows `d`.
#[derive(Debug)]
pub struct Outputs {
    rows: Vec<Vec<u64>>,
}

impl Outputs {
    fn build(children: &[&Outputs], len: usize) -> Self {
        let seqs = 1usize << (len + 1);
        let words = seqs.div_ceil(64);
        let counts = Counts::new(len, children.len());
        let full = (1u32 << len) - 1;
        let allow: Vec<Option<usize>> = (0..=full)
            .map(|a| counts.allowance(children.len(), a))
            .collect();
        let columns: Vec<Vec<u64>> = (0..seqs as u32)
            .into_par_iter()
            .map(|x| {
                let table = achievable(children, x, &counts);
                let mut col = vec![0u64; words];
                for d in 0..seqs as u32 {
                    let a = !(d ^ (x >> 1)) & full;
                    if allow[a as usize].is_some_and(|i| table[i]) {
                        col[d as usize / 64] |= 1 << (d % 64);
                    }
                }
                col
            })
            .collect();
        let mut rows = vec![vec![0u64; words]; seqs];
        for (x, col) in columns.iter().enumerate() {
            for (d, row) in rows.iter_mut().enumerate() {
                if col[d / 64] >> (d % 64) & 1 == 1 {
                    row[x / 64] |= 1 << (x % 64);
                }
            }
        }
        Outputs { rows }
    }

    #[inline]
    pub fn contains(&self, driver: u32, x: u32) -> bool {
        self.rows[driver as usize][x as usize / 64] >> (x % 64) & 1 == 1
    }

    fn members(&self, driver: u32) -> impl Iterator<Item = u32> + '_ {
        self.rows[driver as usize].iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                (bits != 0).then(|| {
                    let b = bits.trailing_zeros();
                    bits &= bits - 1;
                    (w * 64) as u32 + b
                })
            })
        })
    }
}

/// What every extension of a fixed `ξ0|T_v` can make `v` do over the window.
#[derive(Clone, Debug)]
pub struct WindowEval {
    /// `v`'s sequence for each parent sequence.
    pub vseq: Vec<u32>,
    /// `words[c][s]`: `v`'s opinion at time `s` in the lanes of chunk `c`.
    pub words: Vec<Vec<u64>>,
    /// Realisable parent sequences, as a bitset.
    pub realisable: Vec<u64>,
}

impl WindowEval {
    pub fn is_realisable(&self, u: u32) -> bool {
        self.realisable[u as usize / 64] >> (u % 64) & 1 == 1
    }

    pub fn realisable_iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.vseq.len() as u32).filter(|&u| self.is_realisable(u))
    }
}

/// Precomputed realisability of parent sequences for a fixed `(tree, v, L)`.
pub struct WindowModel {
    tree: RootedTree,
    v: usize,
    u: usize,
    len: usize,
    sub: DrivenSubtree,
    /// Rerooted at `u`; children of each vertex away from `u`.
    rerooted: RootedTree,
    outputs: Vec<Option<Arc<Outputs>>>,
    others: Vec<usize>,
    /// Bit `a` of row `x`: the other branches can make the parent go from
    /// `x` given agreement mask `a` between `v` and the parent's next values.
    root_ok: Vec<u64>,
    row_words: usize,
}

impl std::fmt::Debug for WindowModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WindowModel")
            .field("v", &self.v)
            .field("u", &self.u)
            .field("len", &self.len)
            .finish()
    }
}

impl WindowModel {
    /// Window `0..=len` for vertex `v` (not the root) of `tree`.
    pub fn new(tree: &RootedTree, v: usize, len: usize) -> Result<Self> {
        let u = tree
            .parent(v)
            .ok_or_else(|| Error::InvalidArgument("the root has no parent".into()))?;
        if len == 0 || len > MAX_WINDOW {
            return Err(Error::InvalidArgument(format!(
                "window length {len} outside 1..={MAX_WINDOW}"
            )));
        }
        let rerooted = tree.reroot(u);
        let in_sub = tree.subtree_mask(v);
        let widest = (0..tree.n())
            .filter(|&w| !in_sub[w])
            .map(|w| rerooted.children(w).len())
            .max()
            .unwrap_or(0);
        let cost = (1u128 << (len + 1)) * ((widest / 2 + 1) as u128).pow(len as u32);
        crate::error::check_budget(cost, WINDOW_BUDGET)?;
        let order: Vec<usize> = rerooted.bfs_order().collect();
        let mut shape: Vec<String> = vec![String::new(); tree.n()];
        let mut memo: HashMap<String, Arc<Outputs>> = HashMap::new();
        let mut outputs: Vec<Option<Arc<Outputs>>> = vec![None; tree.n()];
        for &w in order.iter().rev() {
            if w == u || in_sub[w] {
                continue;
            }
            let mut keys: Vec<&str> = rerooted
                .children(w)
                .iter()
                .map(|&c| shape[c as usize].as_str())
                .collect();
            keys.sort_unstable();
            let key = format!("({})", keys.concat());
            let out = match memo.get(&key) {
                Some(o) => o.clone(),
                None => {
                    let kids: Vec<&Outputs> = rerooted
                        .children(w)
                        .iter()
                        .map(|&c| outputs[c as usize].as_deref().expect("children come first"))
                        .collect();
                    let o = Arc::new(Outputs::build(&kids, len));
                    memo.insert(key.clone(), o.clone());
                    o
                }
            };
            outputs[w] = Some(out);
            shape[w] = key;
        }
        let others: Vec<usize> = rerooted
            .children(u)
            .iter()
            .map(|&c| c as usize)
            .filter(|&c| c != v)
            .collect();
        let root_counts = Counts::new(len, others.len());
        let kids: Vec<&Outputs> = others
            .iter()
            .map(|&w| outputs[w].as_deref().expect("branch outputs computed"))
            .collect();
        let full = (1u32 << len) - 1;
        let allow: Vec<Option<usize>> = (0..=full)
            .map(|a| root_counts.allowance(others.len(), a))
            .collect();
        let row_words = (1usize << len).div_ceil(64);
        let root_ok: Vec<u64> = (0..1u32 << (len + 1))
            .into_par_iter()
            .flat_map_iter(|x| {
                let table = achievable(&kids, x, &root_counts);
                let mut row = vec![0u64; row_words];
                for (a, idx) in allow.iter().enumerate() {
                    if idx.is_some_and(|i| table[i]) {
                        row[a / 64] |= 1 << (a % 64);
                    }
                }
                row
            })
            .collect();
        Ok(WindowModel {
            tree: tree.clone(),
            v,
            u,
            len,
            sub: DrivenSubtree::new(tree, v),
            rerooted,
            outputs,
            others,
            root_ok,
            row_words,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn subtree(&self) -> &DrivenSubtree {
        &self.sub
    }

    pub fn sequences(&self) -> usize {
        1 << (self.len + 1)
    }

    /// Runs `T_v` from `local` under every parent sequence, 64 sequences per
    /// chunk. `visit(chunk, s, words, lanes)` sees the lane state at each
    /// time `s`; lane `j` of chunk `c` carries parent sequence `64c + j`.
    pub(crate) fn drive_lanes(
        &self,
        local: &OpinionVector,
        mut visit: impl FnMut(usize, usize, &[u64], u64),
    ) {
        let seqs = self.sequences();
        let m = self.sub.len();
        let init: Vec<u64> = local.iter().map(|b| if b { !0 } else { 0 }).collect();
        let mut cur = vec![0u64; m];
        let mut next = vec![0u64; m];
        for chunk in 0..seqs.div_ceil(64) {
            let count = (seqs - chunk * 64).min(64);
            let lanes = if count == 64 { !0 } else { (1u64 << count) - 1 };
            cur.copy_from_slice(&init);
            visit(chunk, 0, &cur, lanes);
            for s in 0..self.len {
                self.sub.step_lanes(&cur, lane_bit(s, chunk), &mut next);
                std::mem::swap(&mut cur, &mut next);
                visit(chunk, s + 1, &cur, lanes);
            }
        }
    }

    /// Evaluates every parent sequence against `local`, a state of `T_v` in
    /// the local order of [`Self::subtree`].
    pub fn evaluate(&self, local: &OpinionVector) -> WindowEval {
        self.evaluate_with(local, |_, _, _, _| {})
    }

    /// [`Self::evaluate`], also passing every lane state to `visit` as in
    /// [`Self::drive_lanes`].
    pub(crate) fn evaluate_with(
        &self,
        local: &OpinionVector,
        mut visit: impl FnMut(usize, usize, &[u64], u64),
    ) -> WindowEval {
        let seqs = self.sequences();
        let mut vseq = vec![0u32; seqs];
        let mut vwords = vec![Vec::with_capacity(self.len + 1); seqs.div_ceil(64)];
        self.drive_lanes(local, |chunk, s, words, lanes| {
            visit(chunk, s, words, lanes);
            vwords[chunk].push(words[0]);
            let mut bits = lanes;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                vseq[chunk * 64 + j] |= ((words[0] >> j & 1) as u32) << s;
            }
        });
        let full = (1u32 << self.len) - 1;
        let mut realisable = vec![0u64; seqs.div_ceil(64)];
        for (u, &vs) in vseq.iter().enumerate() {
            let a = !(vs ^ (u as u32 >> 1)) & full;
            let row = &self.root_ok[u * self.row_words..];
            if row[a as usize / 64] >> (a % 64) & 1 == 1 {
                realisable[u / 64] |= 1 << (u % 64);
            }
        }
        WindowEval {
            vseq,
            words: vwords,
            realisable,
        }
    }

    /// The parent's sequence over the window under the full initial vector `x0`.
    pub fn actual_parent_sequence(&self, x0: &OpinionVector) -> Result<u32> {
        let kernel = crate::dynamics::Kernel::for_tree(&self.tree);
        let mut x = x0.clone();
        let mut seq = x.get(self.u) as u32;
        for s in 1..=self.len {
            x = kernel.step(&x)?;
            seq |= (x.get(self.u) as u32) << s;
        }
        Ok(seq)
    }

    /// A whole-tree initial vector that restricts to `local` on `T_v` and
    /// makes the parent show `useq`. `useq` must be realisable.
    pub fn extension(&self, local: &OpinionVector, useq: u32, eval: &WindowEval) -> Result<OpinionVector> {
        if !eval.is_realisable(useq) {
            return Err(Error::Invariant(format!("sequence {useq:#b} is not realisable")));
        }
        let mut x = OpinionVector::uniform(self.tree.n(), false);
        for (i, &g) in self.sub.global.iter().enumerate() {
            x.set(g, local.get(i));
        }
        x.set(self.u, useq & 1 == 1);
        let vs = eval.vseq[useq as usize];
        let kids: Vec<(usize, &Outputs)> = self
            .others
            .iter()
            .map(|&w| (w, self.outputs[w].as_deref().expect("branch outputs")))
            .collect();
        let picks = self
            .pick_children(&kids, useq, vs)
            .ok_or_else(|| Error::Invariant("no branch sequences for a realisable parent".into()))?;
        for ((w, _), seq) in kids.iter().zip(picks) {
            self.realise(*w, seq, useq, &mut x)?;
        }
        Ok(x)
    }

    fn realise(&self, w: usize, seq: u32, driver: u32, x: &mut OpinionVector) -> Result<()> {
        x.set(w, seq & 1 == 1);
        let kids: Vec<(usize, &Outputs)> = self
            .rerooted
            .children(w)
            .iter()
            .map(|&c| (c as usize, self.outputs[c as usize].as_deref().expect("outputs")))
            .collect();
        let picks = self
            .pick_children(&kids, seq, driver)
            .ok_or_else(|| Error::Invariant(format!("vertex {w} cannot realise its sequence")))?;
        for ((c, _), s) in kids.iter().zip(picks) {
            self.realise(*c, s, seq, x)?;
        }
        Ok(())
    }

    /// Child sequences consistent with `x` following `driver` plus the children.
    fn pick_children(&self, kids: &[(usize, &Outputs)], x: u32, driver: u32) -> Option<Vec<u32>> {
        let len = self.len;
        let full = (1u32 << len) - 1;
        let k = kids.len();
        let agree = !(driver ^ (x >> 1)) & full;
        let budget: Vec<i32> = (0..len)
            .map(|s| k as i32 / 2 - 1 + (agree >> s & 1) as i32)
            .collect();
        if k == 0 {
            return (agree == full).then(Vec::new);
        }
        let cands: Vec<Vec<(u32, u32)>> = kids
            .iter()
            .map(|(_, o)| {
                let mut by_mask: HashMap<u32, u32> = HashMap::new();
                for c in o.members(x) {
                    by_mask.entry((c ^ (x >> 1)) & full).or_insert(c);
                }
                let mut v: Vec<(u32, u32)> = by_mask.into_iter().map(|(m, c)| (m, c)).collect();
                v.sort_unstable_by_key(|&(m, c)| (m.count_ones(), c));
                v
            })
            .collect();
        let mut used = vec![0i32; len];
        let mut chosen = Vec::with_capacity(k);
        fn dfs(
            i: usize,
            cands: &[Vec<(u32, u32)>],
            budget: &[i32],
            used: &mut [i32],
            chosen: &mut Vec<u32>,
        ) -> bool {
            if i == cands.len() {
                return true;
            }
            for &(m, c) in &cands[i] {
                let fits = (0..budget.len()).all(|s| m >> s & 1 == 0 || used[s] < budget[s]);
                if !fits {
                    continue;
                }
                for (s, u) in used.iter_mut().enumerate() {
                    *u += (m >> s & 1) as i32;
                }
                chosen.push(c);
                if dfs(i + 1, cands, budget, used, chosen) {
                    return true;
                }
                chosen.pop();
                for (s, u) in used.iter_mut().enumerate() {
                    *u -= (m >> s & 1) as i32;
                }
            }
            false
        }
        dfs(0, &cands, &budget, &mut used, &mut chosen).then_some(chosen)
    }
}

/// Bit `s` of the lane index within `chunk`, replicated across the word.
#[inline]
fn lane_bit(s: usize, chunk: usize) -> u64 {
    const PATTERNS: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    if s < 6 {
        PATTERNS[s]
    } else if chunk >> (s - 6) & 1 == 1 {
        !0
    } else {
        0
    }
}
