//! The subtree `T_v` simulated on its own, with the parent's opinion
//! supplied from outside at every step.

use crate::error::{Error, Result};
use crate::lanes::{maj3, majority};
use crate::opinion::OpinionVector;
use crate::tree::RootedTree;

/// `T_v` with local ids in preorder; local 0 is `v`.
#[derive(Clone, Debug)]
pub struct DrivenSubtree {
    /// Global id of each local vertex.
    pub global: Vec<usize>,
    nbrs: Vec<Vec<u32>>,
}

impl DrivenSubtree {
    pub fn new(tree: &RootedTree, v: usize) -> Self {
        let global = tree.subtree(v);
        let mut local = vec![u32::MAX; tree.n()];
        for (i, &g) in global.iter().enumerate() {
            local[g] = i as u32;
        }
        let nbrs = global
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let mut nb: Vec<u32> = tree.children(g).iter().map(|&c| local[c as usize]).collect();
                if i > 0 {
                    nb.push(local[tree.parent(g).expect("non-root vertex has a parent")]);
                }
                nb
            })
            .collect();
        DrivenSubtree { global, nbrs }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.global.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    /// Restriction of a whole-tree vector to `T_v`, in local order.
    pub fn restrict(&self, x: &OpinionVector) -> OpinionVector {
        let bits: Vec<bool> = self.global.iter().map(|&g| x.get(g)).collect();
        OpinionVector::from_bools(&bits)
    }

    /// One lane-packed step; `parent` is the outside opinion at the current time.
    #[inline]
    pub fn step_lanes(&self, src: &[u64], parent: u64, dst: &mut [u64]) {
        for (i, out) in dst.iter_mut().enumerate() {
            let nb = &self.nbrs[i];
            if i > 0 && nb.len() == 3 {
                let (a, b, c) = (src[nb[0] as usize], src[nb[1] as usize], src[nb[2] as usize]);
                *out = maj3(a, b, c);
                continue;
            }
            if i > 0 && nb.len() == 1 {
                *out = src[nb[0] as usize];
                continue;
            }
            let ext = (i == 0).then_some(parent);
            let count = nb.len() + ext.is_some() as usize;
            *out = majority(nb.iter().map(|&u| src[u as usize]).chain(ext), count);
        }
    }

    /// States at times `0..=steps` when the parent shows `driver(s)` at time `s`.
    pub fn trajectory(
        &self,
        init: &OpinionVector,
        steps: usize,
        driver: impl Fn(usize) -> bool,
    ) -> Vec<OpinionVector> {
        let mut cur: Vec<u64> = init.iter().map(|b| b as u64).collect();
        let mut next = vec![0u64; self.len()];
        let mut out = Vec::with_capacity(steps + 1);
        out.push(init.clone());
        for s in 0..steps {
            self.step_lanes(&cur, driver(s) as u64, &mut next);
            std::mem::swap(&mut cur, &mut next);
            let bits: Vec<bool> = cur.iter().map(|&w| w & 1 == 1).collect();
            out.push(OpinionVector::from_bools(&bits));
        }
        out
    }

    /// Whether `v` keeps its opinion at every even time when the parent is
    /// held at `v`'s own initial opinion forever.
    ///
    /// This is weak stability of `v` with respect to `state` (the canonical
    /// extension freezes every vertex outside `T_v`).
    pub fn weakly_stable(&self, state: &OpinionVector) -> Result<bool> {
        let words: Vec<u64> = state.iter().map(|b| if b { !0 } else { 0 }).collect();
        Ok(self.weakly_stable_lanes(&words, !0)? & 1 == 1)
    }

    /// Lane-packed [`Self::weakly_stable`]: bit `j` of the result answers lane `j`.
    pub fn weakly_stable_lanes(&self, init: &[u64], valid: u64) -> Result<u64> {
        let m = self.len();
        let c = init[0];
        let mut bufs = [init.to_vec(), vec![0u64; m], vec![0u64; m]];
        let mut broken = 0u64;
        let mut settled = 0u64;
        let cap = 2 * m + 8;
        let mut t = 0;
        while settled & valid != valid {
            if t > cap {
                return Err(Error::Invariant(format!(
                    "driven subtree of {m} vertices not periodic after {cap} steps"
                )));
            }
            let [a, b, cbuf] = &mut bufs;
            let (src, dst) = match t % 3 {
                0 => (&*a, b),
                1 => (&*b, cbuf),
                _ => (&*cbuf, a),
            };
            self.step_lanes(src, c, dst);
            t += 1;
            let now = &bufs[t % 3];
            if t % 2 == 0 {
                broken |= now[0] ^ c;
            }
            if t >= 2 {
                let old = &bufs[(t - 2) % 3];
                let diff = now.iter().zip(old).fold(0u64, |acc, (x, y)| acc | (x ^ y));
                settled |= !diff;
            }
        }
        Ok(!broken & valid)
    }
}
