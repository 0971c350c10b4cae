use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::{Error, Result};

/// One opinion per vertex, packed 64 to a word. A set bit is `+1`.
///
/// Bits past `len` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct OpinionVector {
    words: Vec<u64>,
    len: usize,
}

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl OpinionVector {
    pub fn uniform(len: usize, positive: bool) -> Self {
        let mut v = OpinionVector {
            words: vec![if positive { u64::MAX } else { 0 }; words_for(len)],
            len,
        };
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::uniform(bits.len(), false);
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.words[i >> 6] |= 1 << (i & 63);
            }
        }
        v
    }

    /// Entries must be `1` or `-1`.
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        let mut v = Self::uniform(signs.len(), false);
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => v.set(i, true),
                -1 => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "opinion {other} at vertex {i} is not +1 or -1"
                    )))
                }
            }
        }
        Ok(v)
    }

    /// Vertex `v` gets bit `v` of `index`; only meaningful for `len <= 64`.
    pub fn from_index(len: usize, index: u64) -> Self {
        debug_assert!(len <= 64);
        let mut v = Self::uniform(len, false);
        if len > 0 {
            v.words[0] = if len == 64 { index } else { index & ((1 << len) - 1) };
        }
        v
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::uniform(len, false);
        for w in &mut v.words {
            *w = rng.next_u64();
        }
        v.clear_tail();
        v
    }

    fn clear_tail(&mut self) {
        let r = self.len & 63;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, v: usize) -> bool {
        debug_assert!(v < self.len);
        (self.words[v >> 6] >> (v & 63)) & 1 == 1
    }

    #[inline]
    pub fn sign(&self, v: usize) -> i8 {
        if self.get(v) {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn set(&mut self, v: usize, positive: bool) {
        debug_assert!(v < self.len);
        let mask = 1u64 << (v & 63);
        if positive {
            self.words[v >> 6] |= mask;
        } else {
            self.words[v >> 6] &= !mask;
        }
    }

    #[inline]
    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn negated(&self) -> Self {
        let mut v = OpinionVector {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        v.clear_tail();
        v
    }

    pub fn count_positive(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of `+1` entries among positions `start..end`.
    #[inline]
    pub fn count_positive_in(&self, start: usize, end: usize) -> u32 {
        if start >= end {
            return 0;
        }
        let (sw, ew) = (start >> 6, (end - 1) >> 6);
        let lo = !0u64 << (start & 63);
        let hi = !0u64 >> (63 - ((end - 1) & 63));
        if sw == ew {
            return (self.words[sw] & lo & hi).count_ones();
        }
        let mut n = (self.words[sw] & lo).count_ones() + (self.words[ew] & hi).count_ones();
        for w in &self.words[sw + 1..ew] {
            n += w.count_ones();
        }
        n
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |v| self.get(v))
    }

    /// Vertices at which `self` and `other` differ.
    pub fn diff_positions(&self, other: &Self) -> Vec<usize> {
        (0..self.len.min(other.len))
            .filter(|&v| self.get(v) != other.get(v))
            .collect()
    }
}

impl fmt::Display for OpinionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '+' } else { '-' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for OpinionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OpinionVector({self})")
    }
}

impl FromStr for OpinionVector {
    type Err = Error;

    /// Parses the opinion-file body: one character per vertex over `{+,-}`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim_end_matches(['\n', '\r']);
        let mut bits = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '+' => bits.push(true),
                '-' => bits.push(false),
                other => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("unexpected character {other:?} at column {}", i + 1),
                    })
                }
            }
        }
        Ok(Self::from_bools(&bits))
    }
}

impl serde::Serialize for OpinionVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
