//! Stability of a vertex relative to the initial opinions of its subtree.
//!
//! For a non-root vertex `v` with subtree `T_v`, an *extension* of a vector
//! on `T_v` is any whole-tree vector that agrees with it on `T_v`.
//!
//! * weakly `t`-stable: `v` is 0-stable under some extension of `x[t]|T_v`;
//! * strongly `t`-stable: under every extension of `x[0]|T_v`, `v` is
//!   `t`-stable with the same opinion at time `t`;
//! * `(<=t)`-stable: under every extension, `v` holds its time-`t` opinion at
//!   every earlier time of the same parity;
//! * 1-close to stability: under every extension in which `v` changes its
//!   opinion at some even time, `v` is weakly stable at the first such time.
//!
//! Weak stability is decided through the canonical extension (everything
//! outside `T_v` set to `x[t](v)`). The universal predicates are decided
//! either by enumerating extensions or, when that is too large, exactly
//! through [`window::WindowModel`].

mod driven;
pub mod window;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Kernel, Trajectory};
use crate::error::{check_budget, Error, Result};
use crate::lanes::{Enumeration, LaneKernel};
use crate::opinion::OpinionVector;
use crate::tree::RootedTree;
use crate::worstcase::worst_case_tau;

pub use driven::DrivenSubtree;
pub use window::{WindowEval, WindowModel};

/// Default cap on the number of enumerated extensions.
pub const DEFAULT_EXTENSION_BUDGET: u128 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StabilityKind {
    Weak(usize),
    Strong(usize),
    LeT(usize),
    OneClose,
}

impl StabilityKind {
    pub fn name(&self) -> &'static str {
        match self {
            StabilityKind::Weak(_) => "weak",
            StabilityKind::Strong(_) => "strong",
            StabilityKind::LeT(_) => "le-t",
            StabilityKind::OneClose => "one-close",
        }
    }

    pub fn time(&self) -> Option<usize> {
        match *self {
            StabilityKind::Weak(t) | StabilityKind::Strong(t) | StabilityKind::LeT(t) => Some(t),
            StabilityKind::OneClose => None,
        }
    }

    /// Parses `weak`, `strong`, `le-t` or `one-close`; `t` is required by all but the last.
    pub fn parse(name: &str, t: Option<usize>) -> Result<Self> {
        let need = |t: Option<usize>| {
            t.ok_or_else(|| Error::InvalidArgument(format!("kind {name} needs a time")))
        };
        Ok(match name {
            "weak" => StabilityKind::Weak(need(t)?),
            "strong" => StabilityKind::Strong(need(t)?),
            "le-t" => StabilityKind::LeT(need(t)?),
            "one-close" => StabilityKind::OneClose,
            _ => return Err(Error::InvalidArgument(format!("unknown stability kind {name:?}"))),
        })
    }
}

/// How a verdict was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// One simulation of the canonical extension.
    Canonical,
    /// Every extension simulated.
    BruteForce,
    /// Realisable parent-opinion sequences over a bounded window.
    Window,
}

/// Which exact engine the universal predicates may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    /// Enumeration when within budget, otherwise the window engine.
    #[default]
    Auto,
    BruteForce,
    Window,
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Largest number of extensions to enumerate.
    pub budget: u128,
    pub strategy: Strategy,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            budget: DEFAULT_EXTENSION_BUDGET,
            strategy: Strategy::Auto,
        }
    }
}

/// Outcome of a stability decision.
///
/// For weak stability the certificate is the canonical extension; for the
/// other kinds it is a violating extension, present exactly when the
/// verdict is false.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityVerdict {
    pub kind: StabilityKind,
    pub vertex: usize,
    pub verdict: bool,
    pub method: Method,
    pub certificate: Option<OpinionVector>,
}

#[derive(Serialize)]
struct VerdictJson<'a> {
    kind: &'static str,
    vertex: usize,
    t: Option<usize>,
    verdict: bool,
    method: Method,
    certificate: Option<&'a OpinionVector>,
}

impl Serialize for StabilityVerdict {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VerdictJson {
            kind: self.kind.name(),
            vertex: self.vertex,
            t: self.kind.time(),
            verdict: self.verdict,
            method: self.method,
            certificate: self.certificate.as_ref(),
        }
        .serialize(s)
    }
}

impl StabilityVerdict {
    /// Re-derives the verdict from the certificate by plain simulation.
    ///
    /// Returns `false` if the certificate does not extend `x0` on `T_v`, or
    /// fails to exhibit what the verdict claims.
    pub fn replay(&self, tree: &RootedTree, x0: &OpinionVector) -> Result<bool> {
        let v = self.vertex;
        let mask = tree.subtree_mask(v);
        let kernel = Kernel::for_tree(tree);
        match (self.kind, &self.certificate) {
            (StabilityKind::Weak(t), Some(cert)) => {
                let xt = state_at(&kernel, x0, t)?;
                if *cert != canonical_extension(tree, &xt, v) {
                    return Ok(false);
                }
                Ok(zero_stable(&kernel, cert, v)? == self.verdict)
            }
            (StabilityKind::Weak(_), None) => Ok(false),
            (_, None) => Ok(self.verdict),
            (_, Some(_)) if self.verdict => Ok(false),
            (kind, Some(cert)) => {
                if (0..tree.n()).any(|w| mask[w] && cert.get(w) != x0.get(w)) {
                    return Ok(false);
                }
                let mut traj = Trajectory::new(&kernel, cert.clone(), true)?;
                traj.run_to_stable()?;
                let horizon = traj.tau().unwrap_or(0) + 3;
                traj.run_to(horizon.max(kind.time().unwrap_or(0) + 3));
                let hist = traj.history().expect("history kept");
                let at = |s: usize| hist[s].get(v);
                Ok(match kind {
                    StabilityKind::Strong(t) => {
                        let reference = state_at(&kernel, x0, t)?.get(v);
                        !traj.is_t_stable(v, t) || at(t) != reference
                    }
                    StabilityKind::LeT(t) => (t % 2..t).step_by(2).any(|s| at(s) != at(t)),
                    StabilityKind::OneClose => {
                        match (2..hist.len()).step_by(2).find(|&s| at(s) != at(0)) {
                            Some(ft) => {
                                let canon = canonical_extension(tree, &hist[ft], v);
                                !zero_stable(&kernel, &canon, v)?
                            }
                            None => false,
                        }
                    }
                    StabilityKind::Weak(_) => unreachable!(),
                })
            }
        }
    }
}

fn state_at(kernel: &Kernel, x0: &OpinionVector, t: usize) -> Result<OpinionVector> {
    let mut x = x0.clone();
    for _ in 0..t {
        x = kernel.step(&x)?;
    }
    Ok(x)
}

/// Whether `x[s](v) = x[0](v)` at every even `s`, by simulation to period two.
fn zero_stable(kernel: &Kernel, x0: &OpinionVector, v: usize) -> Result<bool> {
    let mut traj = Trajectory::new(kernel, x0.clone(), false)?;
    traj.run_to_stable()?;
    Ok(traj.is_t_stable(v, 0))
}

fn check_vertex(tree: &RootedTree, x0: &OpinionVector, v: usize) -> Result<()> {
    if x0.len() != tree.n() {
        return Err(Error::LengthMismatch {
            expected: tree.n(),
            got: x0.len(),
        });
    }
    if v >= tree.n() {
        return Err(Error::InvalidArgument(format!("vertex {v} out of range")));
    }
    if v == tree.root() {
        return Err(Error::InvalidArgument("the root has no stability notion".into()));
    }
    Ok(())
}

/// `state` on `T_v` and the constant `state(v)` everywhere else.
pub fn canonical_extension(tree: &RootedTree, state: &OpinionVector, v: usize) -> OpinionVector {
    let mask = tree.subtree_mask(v);
    let c = state.get(v);
    let bits: Vec<bool> = (0..tree.n()).map(|w| if mask[w] { state.get(w) } else { c }).collect();
    OpinionVector::from_bools(&bits)
}

/// Weak `t`-stability of `v`, through one simulation of the canonical extension.
pub fn is_weakly_t_stable(
    tree: &RootedTree,
    x0: &OpinionVector,
    v: usize,
    t: usize,
) -> Result<StabilityVerdict> {
    check_vertex(tree, x0, v)?;
    tree.check_binary_rooted()?;
    let kernel = Kernel::for_tree(tree);
    let xt = state_at(&kernel, x0, t)?;
    let canon = canonical_extension(tree, &xt, v);
    Ok(StabilityVerdict {
        kind: StabilityKind::Weak(t),
        vertex: v,
        verdict: zero_stable(&kernel, &canon, v)?,
        method: Method::Canonical,
        certificate: Some(canon),
    })
}

/// Weak stability of `v` with respect to a whole-tree `state`, simulating
/// only `T_v` (outside the subtree the canonical extension is frozen).
pub fn weakly_stable_state(tree: &RootedTree, state: &OpinionVector, v: usize) -> Result<bool> {
    let sub = DrivenSubtree::new(tree, v);
    sub.weakly_stable(&sub.restrict(state))
}

/// Weak stability of `v` for the state `y` (only `y|T_v` matters), read
/// through two other characterisations by enumerating every extension:
///
/// * some extension makes `v` 0-stable;
/// * for every extension and odd `k <= max_k`, if the parent shows `y(v)`
///   at every odd time up to `k`, then `v` shows `y(v)` at time `k + 1`.
pub fn weak_definitions(
    tree: &RootedTree,
    y: &OpinionVector,
    v: usize,
    max_k: usize,
    budget: u128,
) -> Result<(bool, bool)> {
    check_vertex(tree, y, v)?;
    let u = tree.parent(v).expect("checked non-root");
    let mask = tree.subtree_mask(v);
    let free: Vec<usize> = (0..tree.n()).filter(|&w| !mask[w]).collect();
    if free.len() >= 64 {
        return Err(Error::BudgetExceeded {
            required: u128::MAX,
            budget,
        });
    }
    check_budget(1u128 << free.len(), budget)?;
    let kernel = LaneKernel::new(tree.graph());
    let steps = (kernel.stabilisation_bound() + 2).max(max_k + 1);
    let en = Enumeration::new(y.clone(), free);
    let (some_stable, violated) = (0..en.chunks())
        .into_par_iter()
        .map(|c| {
            let (mut cur, valid) = en.lane_init(c);
            let mut next = vec![0u64; cur.len()];
            let v0 = cur[v];
            let mut broken = 0u64;
            let mut premise = !0u64;
            let mut violated = 0u64;
            for s in 1..=steps {
                kernel.step_into(&cur, &mut next);
                std::mem::swap(&mut cur, &mut next);
                if s % 2 == 1 {
                    if s <= max_k {
                        premise &= !(cur[u] ^ v0);
                    }
                } else {
                    broken |= cur[v] ^ v0;
                    if s - 1 <= max_k {
                        violated |= premise & (cur[v] ^ v0);
                    }
                }
            }
            (!broken & valid != 0, violated & valid != 0)
        })
        .reduce(|| (false, false), |a, b| (a.0 || b.0, a.1 || b.1));
    Ok((some_stable, !violated))
}

/// A prepared decision procedure for one universal predicate at one vertex.
///
/// Construction picks the engine and does all per-tree precomputation, so
/// that [`Self::holds`] can be called for many subtree states.
pub struct ExtensionDecider {
    tree: RootedTree,
    kernel: Kernel,
    v: usize,
    kind: StabilityKind,
    method: Method,
    sub: DrivenSubtree,
    free: Vec<usize>,
    lanes: LaneKernel,
    brute_len: usize,
    window: Option<WindowModel>,
}

impl std::fmt::Debug for ExtensionDecider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtensionDecider")
            .field("v", &self.v)
            .field("kind", &self.kind)
            .field("method", &self.method)
            .finish()
    }
}

/// Worst-case stabilisation time of the host, or the general bound for tiny trees.
fn host_horizon(tree: &RootedTree) -> Result<usize> {
    if tree.n() >= 5 {
        Ok(worst_case_tau(tree)?.tau)
    } else {
        Ok(tree.graph().stabilisation_bound())
    }
}

impl ExtensionDecider {
    pub fn new(tree: &RootedTree, v: usize, kind: StabilityKind, opts: Options) -> Result<Self> {
        check_vertex(tree, &OpinionVector::uniform(tree.n(), false), v)?;
        match kind {
            StabilityKind::Weak(_) => {
                return Err(Error::InvalidArgument(
                    "weak stability is decided canonically".into(),
                ))
            }
            StabilityKind::LeT(t) if t < 2 => {
                return Err(Error::InvalidArgument(format!(
                    "(<=t)-stability needs t >= 2, got {t}"
                )))
            }
            StabilityKind::Strong(_) | StabilityKind::OneClose => {
                tree.check_binary_rooted()?;
                if tree.is_leaf(v) {
                    return Err(Error::InvalidArgument(format!("vertex {v} is a leaf")));
                }
            }
            StabilityKind::LeT(_) => {}
        }
        let mask = tree.subtree_mask(v);
        let free: Vec<usize> = (0..tree.n()).filter(|&w| !mask[w]).collect();
        let required = if free.len() < 127 {
            1u128 << free.len()
        } else {
            u128::MAX
        };
        let bound = tree.graph().stabilisation_bound();
        let brute_len = match kind {
            StabilityKind::Strong(t) => t.max(bound) + 2,
            StabilityKind::LeT(t) => t,
            _ => bound + 2,
        };
        let enumerable = free.len() < 64 && required <= opts.budget;
        let use_window = match opts.strategy {
            Strategy::Auto => !enumerable,
            Strategy::Window => true,
            Strategy::BruteForce => {
                check_budget(required, opts.budget)?;
                false
            }
        };
        let window = if use_window {
            let len = match kind {
                StabilityKind::Strong(t) => t.max(host_horizon(tree)?) + 2,
                StabilityKind::LeT(t) => t,
                _ => host_horizon(tree)? + 2,
            };
            if len > window::MAX_WINDOW {
                return Err(Error::BudgetExceeded {
                    required,
                    budget: opts.budget,
                });
            }
            Some(WindowModel::new(tree, v, len)?)
        } else {
            None
        };
        Ok(ExtensionDecider {
            tree: tree.clone(),
            kernel: Kernel::for_tree(tree),
            v,
            kind,
            method: if window.is_some() {
                Method::Window
            } else {
                Method::BruteForce
            },
            sub: DrivenSubtree::new(tree, v),
            free,
            lanes: LaneKernel::new(tree.graph()),
            brute_len,
            window,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn subtree(&self) -> &DrivenSubtree {
        &self.sub
    }

    /// Whether the predicate holds for the subtree state `local` (in the
    /// local order of [`Self::subtree`]).
    pub fn holds(&self, local: &OpinionVector) -> Result<bool> {
        let mut x0 = OpinionVector::uniform(self.tree.n(), false);
        for (i, &g) in self.sub.global.iter().enumerate() {
            x0.set(g, local.get(i));
        }
        Ok(self.search(&x0, None)?.is_none())
    }

    /// [`Self::holds`], additionally requiring `v` to show `value` at the
    /// predicate's time under every extension.
    pub fn holds_with_value(&self, local: &OpinionVector, value: bool) -> Result<bool> {
        let mut x0 = OpinionVector::uniform(self.tree.n(), false);
        for (i, &g) in self.sub.global.iter().enumerate() {
            x0.set(g, local.get(i));
        }
        Ok(self.search(&x0, Some(value))?.is_none())
    }

    /// Full decision for the whole-tree vector `x0`, with a certificate on failure.
    pub fn decide(&self, x0: &OpinionVector) -> Result<StabilityVerdict> {
        check_vertex(&self.tree, x0, self.v)?;
        let certificate = match self.search(x0, None)? {
            None => None,
            Some(Counter::Index(i)) => {
                Some(Enumeration::new(x0.clone(), self.free.clone()).assignment(i))
            }
            Some(Counter::Sequence(u, eval)) => {
                let model = self.window.as_ref().expect("window engine");
                let local = self.sub.restrict(x0);
                Some(model.extension(&local, u, &eval)?)
            }
        };
        Ok(StabilityVerdict {
            kind: self.kind,
            vertex: self.v,
            verdict: certificate.is_none(),
            method: self.method,
            certificate,
        })
    }

    /// The opinion every extension must give `v` at time `t`, as a lane word:
    /// `pin` if given, else for strong stability `v`'s opinion under `x0`.
    fn reference(&self, x0: &OpinionVector, pin: Option<bool>) -> Result<Option<u64>> {
        let value = match (self.kind, pin) {
            (_, Some(b)) => Some(b),
            (StabilityKind::Strong(t), None) => Some(state_at(&self.kernel, x0, t)?.get(self.v)),
            _ => None,
        };
        Ok(value.map(|b| if b { !0 } else { 0 }))
    }

    /// Lanes whose sequence of `v` opinions (`seq[s]` at time `s`) violates a
    /// sequence-only predicate.
    fn sequence_failures(&self, seq: &[u64], reference: Option<u64>) -> u64 {
        let len = seq.len() - 1;
        let pinned = |t: usize| reference.map_or(0, |r| seq[t] ^ r);
        match self.kind {
            StabilityKind::Strong(t) => {
                let mut f = pinned(t);
                for s in (t..=len.saturating_sub(2)).step_by(2) {
                    if s + 2 <= len {
                        f |= seq[s] ^ seq[s + 2];
                    }
                }
                f
            }
            StabilityKind::LeT(t) => (t % 2..t)
                .step_by(2)
                .fold(pinned(t), |f, s| f | (seq[s] ^ seq[t])),
            _ => 0,
        }
    }

    fn search(&self, x0: &OpinionVector, pin: Option<bool>) -> Result<Option<Counter>> {
        let reference = self.reference(x0, pin)?;
        match &self.window {
            None => self.search_brute(x0, reference),
            Some(model) => self.search_window(model, x0, reference),
        }
    }

    fn search_brute(&self, x0: &OpinionVector, reference: Option<u64>) -> Result<Option<Counter>> {
        let en = Enumeration::new(x0.clone(), self.free.clone());
        let v = self.v;
        let found = (0..en.chunks())
            .into_par_iter()
            .map(|c| -> Result<Option<u64>> {
                let (mut cur, valid) = en.lane_init(c);
                let mut next = vec![0u64; cur.len()];
                let mut seq = Vec::with_capacity(self.brute_len + 1);
                seq.push(cur[v]);
                let mut fail = 0u64;
                let mut flipped = 0u64;
                for s in 1..=self.brute_len {
                    self.lanes.step_into(&cur, &mut next);
                    std::mem::swap(&mut cur, &mut next);
                    seq.push(cur[v]);
                    if self.kind == StabilityKind::OneClose && s % 2 == 0 {
                        let fresh = valid & !flipped & (cur[v] ^ seq[0]);
                        if fresh != 0 {
                            let words: Vec<u64> = self.sub.global.iter().map(|&g| cur[g]).collect();
                            fail |= fresh & !self.sub.weakly_stable_lanes(&words, fresh)?;
                            flipped |= fresh;
                        }
                    }
                }
                fail = (fail | self.sequence_failures(&seq, reference)) & valid;
                Ok((fail != 0).then(|| c * 64 + fail.trailing_zeros() as u64))
            })
            .find_map_first(|r| r.transpose());
        found.transpose().map(|o| o.map(Counter::Index))
    }

    fn search_window(
        &self,
        model: &WindowModel,
        x0: &OpinionVector,
        reference: Option<u64>,
    ) -> Result<Option<Counter>> {
        let local = self.sub.restrict(x0);
        let chunks = model.sequences().div_ceil(64);
        let mut close = vec![0u64; chunks];
        let mut flipped = vec![0u64; chunks];
        let mut start = vec![0u64; chunks];
        let mut error = None;
        let one_close = self.kind == StabilityKind::OneClose;
        let eval = model.evaluate_with(&local, |c, s, words, lanes| {
            if !one_close {
                return;
            }
            if s == 0 {
                start[c] = words[0];
            } else if s % 2 == 0 {
                let fresh = lanes & !flipped[c] & (words[0] ^ start[c]);
                if fresh != 0 {
                    match self.sub.weakly_stable_lanes(words, fresh) {
                        Ok(ok) => close[c] |= fresh & !ok,
                        Err(e) => error = Some(e),
                    }
                    flipped[c] |= fresh;
                }
            }
        });
        if let Some(e) = error {
            return Err(e);
        }
        if eval.realisable.iter().all(|&w| w == 0) {
            return Err(Error::Invariant("no realisable parent sequence".into()));
        }
        for c in 0..chunks {
            let fail = (close[c] | self.sequence_failures(&eval.words[c], reference)) & eval.realisable[c];
            if fail != 0 {
                let u = (c * 64) as u32 + fail.trailing_zeros();
                return Ok(Some(Counter::Sequence(u, eval)));
            }
        }
        Ok(None)
    }
}

enum Counter {
    Index(u64),
    Sequence(u32, WindowEval),
}

/// Strong `t`-stability of `v`.
pub fn is_strongly_t_stable(
    tree: &RootedTree,
    x0: &OpinionVector,
    v: usize,
    t: usize,
    opts: Options,
) -> Result<StabilityVerdict> {
    check_vertex(tree, x0, v)?;
    ExtensionDecider::new(tree, v, StabilityKind::Strong(t), opts)?.decide(x0)
}

/// `(<=t)`-stability of `v`; `t >= 2`.
pub fn is_le_t_stable(
    tree: &RootedTree,
    x0: &OpinionVector,
    v: usize,
    t: usize,
    opts: Options,
) -> Result<StabilityVerdict> {
    check_vertex(tree, x0, v)?;
    ExtensionDecider::new(tree, v, StabilityKind::LeT(t), opts)?.decide(x0)
}

/// Whether `v` is 1-close to stability.
pub fn is_one_close_to_stability(
    tree: &RootedTree,
    x0: &OpinionVector,
    v: usize,
    opts: Options,
) -> Result<StabilityVerdict> {
    check_vertex(tree, x0, v)?;
    ExtensionDecider::new(tree, v, StabilityKind::OneClose, opts)?.decide(x0)
}

/// Dispatches on `kind`.
pub fn decide(
    tree: &RootedTree,
    x0: &OpinionVector,
    v: usize,
    kind: StabilityKind,
    opts: Options,
) -> Result<StabilityVerdict> {
    match kind {
        StabilityKind::Weak(t) => is_weakly_t_stable(tree, x0, v, t),
        _ => {
            check_vertex(tree, x0, v)?;
            ExtensionDecider::new(tree, v, kind, opts)?.decide(x0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h3() -> RootedTree {
        RootedTree::perfect(2, 3).unwrap()
    }

    fn brute() -> Options {
        Options {
            strategy: Strategy::BruteForce,
            ..Options::default()
        }
    }

    fn win() -> Options {
        Options {
            strategy: Strategy::Window,
            ..Options::default()
        }
    }

    #[test]
    fn leaves_are_weakly_stable() {
        let t = h3();
        let x = OpinionVector::from_index(t.n(), 0x2b_5c3a);
        for v in 10..22 {
            for s in 0..4 {
                let r = is_weakly_t_stable(&t, &x, v, s).unwrap();
                assert!(r.verdict);
                assert!(r.replay(&t, &x).unwrap());
            }
        }
    }

    #[test]
    fn weak_rejects_the_root() {
        let t = h3();
        let x = OpinionVector::uniform(t.n(), true);
        assert!(matches!(
            is_weakly_t_stable(&t, &x, 0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn strong_grandchild_cases() {
        let t = h3();
        let mut x = OpinionVector::uniform(t.n(), false);
        x.set(1, true);
        for opts in [brute(), win()] {
            let r = is_strongly_t_stable(&t, &x, 1, 0, opts).unwrap();
            assert!(!r.verdict);
            assert!(r.replay(&t, &x).unwrap());
            let mut y = x.clone();
            // 10 is below child 4, 12 below child 5
            y.set(10, true);
            y.set(12, true);
            let r = is_strongly_t_stable(&t, &y, 1, 0, opts).unwrap();
            assert!(r.verdict, "{opts:?}");
        }
    }

    #[test]
    fn height_one_strong_stability() {
        let t = h3();
        // vertex 4 has leaf children 10 and 11
        for idx in [0u64, 0x1234, 0x3f_ffff, 0x400, 0x800] {
            let x = OpinionVector::from_index(t.n(), idx);
            let agree = x.get(10) == x.get(11);
            for s in 0..4 {
                let r = is_strongly_t_stable(&t, &x, 4, s, Options::default()).unwrap();
                assert_eq!(r.verdict, s % 2 == 0 || agree, "x={x} t={s}");
                assert!(r.replay(&t, &x).unwrap());
            }
        }
    }

    #[test]
    fn le_t_cases() {
        let t = h3();
        let mut x = OpinionVector::uniform(t.n(), false);
        for w in t.subtree(1) {
            x.set(w, true);
        }
        assert!(is_le_t_stable(&t, &x, 1, 2, Options::default()).unwrap().verdict);
        assert!(matches!(
            is_le_t_stable(&t, &x, 1, 1, Options::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn engines_agree_on_height_two_subjects() {
        let t = h3();
        let kinds = [
            StabilityKind::Strong(0),
            StabilityKind::Strong(1),
            StabilityKind::Strong(2),
            StabilityKind::Strong(3),
            StabilityKind::LeT(2),
            StabilityKind::LeT(3),
            StabilityKind::LeT(4),
            StabilityKind::OneClose,
        ];
        for kind in kinds {
            let b = ExtensionDecider::new(&t, 1, kind, brute()).unwrap();
            let w = ExtensionDecider::new(&t, 1, kind, win()).unwrap();
            assert_eq!(w.method(), Method::Window);
            for idx in 0..128u64 {
                let local = OpinionVector::from_index(7, idx);
                assert_eq!(
                    b.holds(&local).unwrap(),
                    w.holds(&local).unwrap(),
                    "{kind:?} state {local}"
                );
            }
        }
    }

    #[test]
    fn window_certificates_replay() {
        let t = h3();
        let w = ExtensionDecider::new(&t, 1, StabilityKind::OneClose, win()).unwrap();
        let s = ExtensionDecider::new(&t, 1, StabilityKind::Strong(2), win()).unwrap();
        let mut failures = 0;
        for idx in 0..64u64 {
            let x = OpinionVector::from_index(t.n(), idx.wrapping_mul(0x9E37_79B9) & 0x3f_ffff);
            for d in [&w, &s] {
                let r = d.decide(&x).unwrap();
                failures += !r.verdict as usize;
                assert!(r.replay(&t, &x).unwrap());
            }
        }
        assert!(failures > 0);
    }

    #[test]
    fn definitions_agree_at_height_two() {
        let t = RootedTree::perfect(2, 2).unwrap();
        for v in 1..t.n() {
            let m = t.subtree(v).len();
            for idx in 0..1u64 << m {
                let mut y = OpinionVector::uniform(t.n(), false);
                for (b, w) in t.subtree(v).into_iter().enumerate() {
                    y.set(w, idx >> b & 1 == 1);
                }
                let canon = weakly_stable_state(&t, &y, v).unwrap();
                let (one, three) = weak_definitions(&t, &y, v, 9, 1 << 20).unwrap();
                assert_eq!((one, three), (canon, canon), "v={v} y={y}");
            }
        }
    }
}
