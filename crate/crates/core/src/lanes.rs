//! Bit-sliced simulation of 64 independent instances at once.
//!
//! Word `v` of a lane state holds the opinion of vertex `v` in each of 64
//! instances (bit `j` is instance `j`). One update is a handful of bitwise
//! operations per vertex: a copy for degree one, the majority-of-three
//! identity for degree three, and a bit-sliced counter otherwise.

use crate::error::{Error, Result};
use crate::opinion::OpinionVector;
use crate::tree::Graph;

/// `maj(a, b, c) = ab | bc | ac`.
#[inline(always)]
pub fn maj3(a: u64, b: u64, c: u64) -> u64 {
    (a & b) | (c & (a | b))
}

/// Lane-wise majority of an odd number of words.
pub fn majority<I: IntoIterator<Item = u64>>(inputs: I, count: usize) -> u64 {
    debug_assert!(count % 2 == 1);
    let bits = (usize::BITS - count.leading_zeros()) as usize;
    let mut ctr = [0u64; 64];
    for w in inputs {
        let mut carry = w;
        for c in ctr.iter_mut().take(bits) {
            let s = *c ^ carry;
            carry &= *c;
            *c = s;
            if carry == 0 {
                break;
            }
        }
    }
    at_least(&ctr[..bits], count.div_ceil(2))
}

/// Lanes whose bit-sliced counter is `>= k`.
#[inline]
pub(crate) fn at_least(ctr: &[u64], k: usize) -> u64 {
    let mut gt = 0u64;
    let mut eq = !0u64;
    for i in (0..ctr.len()).rev() {
        if (k >> i) & 1 == 1 {
            eq &= ctr[i];
        } else {
            gt |= eq & ctr[i];
            eq &= !ctr[i];
        }
    }
    if k >> ctr.len() != 0 {
        return 0;
    }
    gt | eq
}

#[derive(Clone, Debug)]
pub struct LaneKernel {
    offsets: Vec<u32>,
    nbrs: Vec<u32>,
    edges: usize,
}

impl LaneKernel {
    pub fn new(graph: &Graph) -> Self {
        let (offsets, nbrs) = graph.csr();
        LaneKernel {
            offsets: offsets.to_vec(),
            nbrs: nbrs.to_vec(),
            edges: graph.edge_count(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn stabilisation_bound(&self) -> usize {
        self.edges - self.n() / 2
    }

    #[inline]
    pub fn step_into(&self, src: &[u64], dst: &mut [u64]) {
        for (v, out) in dst.iter_mut().enumerate() {
            let nb = &self.nbrs[self.offsets[v] as usize..self.offsets[v + 1] as usize];
            *out = match *nb {
                [a] => src[a as usize],
                [a, b, c] => maj3(src[a as usize], src[b as usize], src[c as usize]),
                _ => majority(nb.iter().map(|&u| src[u as usize]), nb.len()),
            };
        }
    }
}

/// 64 trajectories advanced in lock step.
#[derive(Clone, Debug)]
pub struct LaneSim<'k> {
    kernel: &'k LaneKernel,
    t: usize,
    bufs: [Vec<u64>; 3],
    valid: u64,
    stable: u64,
    tau: [u32; 64],
}

impl<'k> LaneSim<'k> {
    /// `valid` selects the lanes that carry real instances.
    pub fn new(kernel: &'k LaneKernel, init: Vec<u64>, valid: u64) -> Self {
        debug_assert_eq!(init.len(), kernel.n());
        let n = kernel.n();
        LaneSim {
            kernel,
            t: 0,
            bufs: [init, vec![0; n], vec![0; n]],
            valid,
            stable: 0,
            tau: [u32::MAX; 64],
        }
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn valid(&self) -> u64 {
        self.valid
    }

    /// Lane words at time `t`.
    #[inline]
    pub fn current(&self) -> &[u64] {
        &self.bufs[self.t % 3]
    }

    /// Lane words at time `s` for `t - 2 <= s <= t`.
    #[inline]
    pub fn state(&self, s: usize) -> &[u64] {
        debug_assert!(s <= self.t && s + 2 >= self.t);
        &self.bufs[s % 3]
    }

    /// Lanes that changed at vertex `v` between `t - 2` and `t`.
    #[inline]
    pub fn flips(&self, v: usize) -> u64 {
        if self.t < 2 {
            return 0;
        }
        self.bufs[self.t % 3][v] ^ self.bufs[(self.t - 2) % 3][v]
    }

    pub fn advance(&mut self) {
        let s = self.t + 1;
        let [a, b, c] = &mut self.bufs;
        let (src, dst) = match self.t % 3 {
            0 => (&*a, b),
            1 => (&*b, c),
            _ => (&*c, a),
        };
        self.kernel.step_into(src, dst);
        self.t = s;
        if s >= 2 {
            let new = &self.bufs[s % 3];
            let old = &self.bufs[(s - 2) % 3];
            let diff = new.iter().zip(old).fold(0u64, |acc, (x, y)| acc | (x ^ y));
            let mut fresh = self.valid & !self.stable & !diff;
            self.stable |= fresh;
            while fresh != 0 {
                let j = fresh.trailing_zeros() as usize;
                fresh &= fresh - 1;
                self.tau[j] = (s - 2) as u32;
            }
        }
    }

    #[inline]
    pub fn all_stable(&self) -> bool {
        self.stable & self.valid == self.valid
    }

    /// Stabilisation time of lane `j`, once known.
    pub fn tau(&self, j: usize) -> Option<usize> {
        (self.stable >> j & 1 == 1).then_some(self.tau[j] as usize)
    }

    pub fn run_to_stable(&mut self) -> Result<()> {
        let bound = self.kernel.stabilisation_bound();
        while !self.all_stable() {
            if self.t >= bound + 2 {
                return Err(Error::Invariant(format!(
                    "lane trajectories not periodic after {} steps (bound {bound})",
                    self.t
                )));
            }
            self.advance();
        }
        Ok(())
    }
}

/// Bit `b` of the lane index, replicated across the 64 lanes of a word.
const LANE_BITS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// All assignments of the `free` vertices on top of a fixed `base`.
///
/// Assignment `i` gives `free[b]` the opinion `+1` iff bit `b` of `i` is set.
/// Chunk `c` packs assignments `64c .. 64c + 63` into lanes.
#[derive(Clone, Debug)]
pub struct Enumeration {
    base: OpinionVector,
    free: Vec<usize>,
}

impl Enumeration {
    pub fn new(base: OpinionVector, free: Vec<usize>) -> Self {
        assert!(free.len() < 64, "at most 63 free vertices");
        Enumeration { base, free }
    }

    pub fn total(&self) -> u64 {
        1u64 << self.free.len()
    }

    pub fn chunks(&self) -> u64 {
        self.total().div_ceil(64)
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn valid_mask(&self, chunk: u64) -> u64 {
        let remaining = self.total() - chunk * 64;
        if remaining >= 64 {
            !0
        } else {
            (1u64 << remaining) - 1
        }
    }

    pub fn lane_init(&self, chunk: u64) -> (Vec<u64>, u64) {
        let mut words: Vec<u64> = self
            .base
            .iter()
            .map(|b| if b { !0 } else { 0 })
            .collect();
        for (b, &v) in self.free.iter().enumerate() {
            words[v] = if b < 6 {
                LANE_BITS[b]
            } else if (chunk >> (b - 6)) & 1 == 1 {
                !0
            } else {
                0
            };
        }
        (words, self.valid_mask(chunk))
    }

    pub fn assignment(&self, index: u64) -> OpinionVector {
        let mut x = self.base.clone();
        for (b, &v) in self.free.iter().enumerate() {
            x.set(v, (index >> b) & 1 == 1);
        }
        x
    }
}

/// Packs up to 64 opinion vectors into lane words.
pub fn pack(states: &[OpinionVector]) -> (Vec<u64>, u64) {
    assert!(states.len() <= 64 && !states.is_empty());
    let n = states[0].len();
    let mut words = vec![0u64; n];
    for (j, s) in states.iter().enumerate() {
        for (v, w) in words.iter_mut().enumerate() {
            *w |= (s.get(v) as u64) << j;
        }
    }
    let valid = if states.len() == 64 { !0 } else { (1u64 << states.len()) - 1 };
    (words, valid)
}

/// Extracts lane `j` as an opinion vector.
pub fn unpack(words: &[u64], j: usize) -> OpinionVector {
    let bits: Vec<bool> = words.iter().map(|w| (w >> j) & 1 == 1).collect();
    OpinionVector::from_bools(&bits)
}
