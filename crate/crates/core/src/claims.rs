//! Randomized property suites for the structural facts about majority
//! dynamics on trees and about weak stability.
//!
//! Each claim is an implication. An instance is one random tree with one
//! random initial vector; every tuple (vertices, times) in the instance that
//! meets the hypotheses is checked. An instance counts as satisfied when at
//! least one tuple met the hypotheses.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{stabilise_with, Kernel, Trajectory};
use crate::error::Result;
use crate::gen::{random_binary_tree, random_odd_tree};
use crate::opinion::OpinionVector;
use crate::probe::trial_rng;
use crate::stability::{DrivenSubtree, ExtensionDecider, Options, StabilityKind};
use crate::tree::{RootedTree, VertexClass};
use crate::worstcase::{brute_force_tau, per_vertex_bound, worst_case_tau, DEFAULT_BRUTE_FORCE_VERTICES};

/// Claims checked on random odd-degree trees.
pub const ODD_TREE_CLAIMS: [&str; 5] = [
    "period-two",
    "negation",
    "flip-propagation",
    "balky-property",
    "active-bound",
];

/// Claims checked on random binary-rooted trees.
pub const BINARY_TREE_CLAIMS: [&str; 6] = [
    "maintain-weak-value",
    "maintain-weak-stability",
    "weak-grandparent",
    "weak-rising",
    "weak-stabilization",
    "one-far-stabilization",
];

/// Checks of the worst-case formula against exhaustive search.
pub const WORST_CASE_CLAIMS: [&str; 2] = ["worst-case-formula", "witness-exactness"];

#[derive(Clone, Debug, Serialize)]
pub struct ClaimsConfig {
    pub instances: u64,
    pub seed: u64,
    /// Largest odd-degree tree drawn (even, at least 6).
    pub max_odd_vertices: usize,
    /// Largest binary-rooted tree drawn (even, at least 6).
    pub max_binary_vertices: usize,
}

impl Default for ClaimsConfig {
    fn default() -> Self {
        ClaimsConfig {
            instances: 10_000,
            seed: 0,
            max_odd_vertices: 40,
            max_binary_vertices: 18,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ClaimReport {
    pub id: &'static str,
    pub instances: u64,
    /// Instances where the hypotheses held for at least one tuple.
    pub satisfied: u64,
    /// Tuples checked over all instances.
    pub checks: u64,
    pub violations: u64,
    /// Description of the first violating tuple, by instance index.
    pub first_violation: Option<String>,
}

impl ClaimReport {
    /// No violations and more than `min_satisfied` satisfied instances.
    pub fn passed(&self, min_satisfied: u64) -> bool {
        self.violations == 0 && self.satisfied > min_satisfied
    }
}

#[derive(Clone, Debug, Default)]
struct Tally {
    satisfied: u64,
    checks: u64,
    violations: u64,
    first: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
            if self.first.is_none() {
                self.first = Some(what());
            }
        }
    }

    fn close(mut self, instance: u64) -> Self {
        self.satisfied = (self.checks > 0) as u64;
        if let Some(f) = &mut self.first {
            *f = format!("instance {instance}: {f}");
        }
        self
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.satisfied += other.satisfied;
        self.checks += other.checks;
        self.violations += other.violations;
        if self.first.is_none() {
            self.first = other.first;
        }
        self
    }
}

/// Runs both suites; reports are in the order of [`ODD_TREE_CLAIMS`]
/// followed by [`BINARY_TREE_CLAIMS`].
pub fn check_claims(cfg: &ClaimsConfig) -> Result<Vec<ClaimReport>> {
    let mut out = run_suite(cfg, &ODD_TREE_CLAIMS, |i| odd_instance(cfg, i))?;
    out.extend(run_suite(cfg, &BINARY_TREE_CLAIMS, |i| binary_instance(cfg, i))?);
    Ok(out)
}

fn run_suite<F>(cfg: &ClaimsConfig, ids: &[&'static str], run: F) -> Result<Vec<ClaimReport>>
where
    F: Fn(u64) -> Result<Vec<Tally>> + Sync,
{
    let blank = || vec![Tally::default(); ids.len()];
    let totals = (0..cfg.instances)
        .into_par_iter()
        .map(|i| run(i).map(|ts| ts.into_iter().map(|t| t.close(i)).collect::<Vec<_>>()))
        .try_reduce(blank, |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()))?;
    Ok(reports(ids, cfg.instances, totals))
}

/// Why the worst-case witness of `tree` misbehaves, if it does: its
/// stabilisation time must equal the formula, and along the optimal path
/// `v_1 .. v_n` the vertex `v_i` must hold `+1` up to time `i` and `-1` at
/// time `i + 1`.
pub fn witness_defect(tree: &RootedTree) -> Result<Option<String>> {
    let r = worst_case_tau(tree)?;
    let w = r.witness.as_ref().expect("witness requested");
    let res = stabilise_with(&Kernel::for_tree(tree), w, true)?;
    if res.tau != r.tau {
        return Ok(Some(format!("witness stabilises at {} instead of {}", res.tau, r.tau)));
    }
    let hist = res.history.as_ref().expect("history kept");
    for (i, &v) in r.argmax.vertices.iter().enumerate() {
        let i = i + 1;
        if let Some(t) = (0..=i).find(|&t| !hist[t].get(v)) {
            return Ok(Some(format!("v_{i} = {v} is -1 at time {t}")));
        }
        if hist[i + 1].get(v) {
            return Ok(Some(format!("v_{i} = {v} is +1 at time {}", i + 1)));
        }
    }
    Ok(None)
}

/// Formula against brute force, and witness exactness, on every tree given.
pub fn check_worst_case(trees: &[RootedTree]) -> Result<Vec<ClaimReport>> {
    let tallies = trees
        .par_iter()
        .enumerate()
        .map(|(i, tree)| -> Result<Vec<Tally>> {
            let mut formula = Tally::default();
            let wc = worst_case_tau(tree)?.tau;
            let bf = brute_force_tau(tree.graph(), DEFAULT_BRUTE_FORCE_VERTICES)?.tau;
            formula.check(wc == bf, || format!("formula {wc}, brute force {bf}"));
            let mut witness = Tally::default();
            let defect = witness_defect(tree)?;
            witness.check(defect.is_none(), || defect.unwrap_or_default());
            Ok(vec![formula.close(i as u64), witness.close(i as u64)])
        })
        .try_reduce(
            || vec![Tally::default(); 2],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
        )?;
    Ok(reports(&WORST_CASE_CLAIMS, trees.len() as u64, tallies))
}

fn reports(ids: &[&'static str], instances: u64, totals: Vec<Tally>) -> Vec<ClaimReport> {
    ids.iter()
        .zip(totals)
        .map(|(&id, t)| ClaimReport {
            id,
            instances,
            satisfied: t.satisfied,
            checks: t.checks,
            violations: t.violations,
            first_violation: t.first,
        })
        .collect()
}

fn history(tree: &RootedTree, x0: &OpinionVector) -> Result<(usize, Vec<OpinionVector>)> {
    let kernel = Kernel::for_tree(tree);
    let mut traj = Trajectory::new(&kernel, x0.clone(), true)?;
    let tau = traj.run_to_stable()?;
    traj.run_to(tau + 3);
    let mut h = traj.history().expect("history kept").to_vec();
    h.truncate(tau + 4);
    Ok((tau, h))
}

fn odd_instance(cfg: &ClaimsConfig, i: u64) -> Result<Vec<Tally>> {
    let mut rng = trial_rng(cfg.seed, i);
    let n = 2 * rng.gen_range(3..=cfg.max_odd_vertices.max(6) / 2);
    let tree = random_odd_tree(n, &mut rng)?;
    let x0 = OpinionVector::random(n, &mut rng);
    let (tau, h) = history(&tree, &x0)?;
    let g = tree.graph();
    let mut out = vec![Tally::default(); ODD_TREE_CLAIMS.len()];

    let bound = g.stabilisation_bound();
    out[0].check(tau <= bound && h[tau + 2] == h[tau] && h[tau + 3] == h[tau + 1], || {
        format!("tau {tau}, bound {bound}")
    });

    let (ntau, nh) = history(&tree, &x0.negated())?;
    let mirrored = ntau == tau && nh.iter().zip(&h).all(|(a, b)| *a == b.negated());
    out[1].check(mirrored, || format!("tau {tau} vs {ntau} under negation"));

    for t in 1..=tau {
        for v in 0..n {
            let x = h[t + 2].get(v);
            if x == h[t].get(v) {
                continue;
            }
            let ok = g
                .neighbors(v)
                .iter()
                .any(|&u| h[t + 1].get(u as usize) == x && h[t - 1].get(u as usize) != x);
            out[2].check(ok, || format!("vertex {v} flips at {} with no driving neighbour", t + 2));
        }
    }

    for v in (0..n).filter(|&v| tree.class(v) == VertexClass::Balky) {
        for &u in g.neighbors(v) {
            let u = u as usize;
            if g.is_leaf(u) {
                continue;
            }
            for s in 0..=tau + 1 {
                if h[s].get(v) == h[s + 1].get(u) {
                    out[3].check(h[s + 2].get(v) == h[s].get(v), || {
                        format!("balky {v}, neighbour {u}, time {s}")
                    });
                }
            }
        }
    }

    for (v, l) in per_vertex_bound(&tree) {
        for s in l..=tau + 1 {
            out[4].check(h[s + 2].get(v) == h[s].get(v), || {
                format!("active {v} with L = {l} flips at {}", s + 2)
            });
        }
    }
    Ok(out)
}

/// Lazily decided 1-closeness per vertex.
struct OneClose<'a> {
    tree: &'a RootedTree,
    x0: &'a OpinionVector,
    memo: Vec<Option<bool>>,
}

impl OneClose<'_> {
    fn get(&mut self, v: usize) -> Result<bool> {
        if let Some(b) = self.memo[v] {
            return Ok(b);
        }
        let d = ExtensionDecider::new(self.tree, v, StabilityKind::OneClose, Options::default())?;
        let b = d.decide(self.x0)?.verdict;
        self.memo[v] = Some(b);
        Ok(b)
    }
}

fn binary_instance(cfg: &ClaimsConfig, i: u64) -> Result<Vec<Tally>> {
    let mut rng = trial_rng(!cfg.seed, i);
    let n = 2 * rng.gen_range(3..=cfg.max_binary_vertices.max(6) / 2);
    let tree = random_binary_tree(n, &mut rng)?;
    let x0 = OpinionVector::random(n, &mut rng);
    let (tau, h) = history(&tree, &x0)?;
    let last = tau + 3;
    let root = tree.root();
    let subs: Vec<Option<DrivenSubtree>> = (0..n)
        .map(|v| (v != root).then(|| DrivenSubtree::new(&tree, v)))
        .collect();
    // weak[t][v]: v is weakly stable with respect to x[t]
    let weak: Vec<Vec<bool>> = h
        .iter()
        .map(|x| {
            subs.iter()
                .map(|s| match s {
                    Some(s) => s.weakly_stable(&s.restrict(x)),
                    None => Ok(false),
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;
    // constant at every time from t on with t's parity
    let stable_from = |v: usize, t: usize| (t..=last).step_by(2).all(|s| h[s].get(v) == h[t].get(v));
    let mut out = vec![Tally::default(); BINARY_TREE_CLAIMS.len()];

    for v in (0..n).filter(|&v| v != root) {
        let u = tree.parent(v).expect("non-root");
        for t1 in 0..last {
            if !weak[t1][v] {
                continue;
            }
            let c = h[t1].get(v);
            let mut t2 = t1 + 2;
            while t2 <= last && h[t2 - 1].get(u) == c {
                out[0].check(h[t2].get(v) == c, || format!("vertex {v}, times {t1} to {t2}"));
                t2 += 2;
            }
            let mut t2 = t1 + 2;
            while t2 <= last && h[t2].get(v) == c {
                out[1].check(weak[t2][v], || format!("vertex {v}, times {t1} to {t2}"));
                t2 += 2;
            }
        }
        for &w in tree.children(v) {
            let w = w as usize;
            for t in 0..last {
                if weak[t][w] && h[t + 1].get(v) == h[t].get(w) {
                    out[3].check(weak[t + 1][v], || format!("vertex {v}, child {w}, time {t}"));
                }
            }
            for &g in tree.children(w) {
                let g = g as usize;
                for t in 0..=last {
                    if weak[t][g] && h[t].get(v) == h[t].get(g) {
                        out[2].check(weak[t][v], || format!("vertex {v}, grandchild {g}, time {t}"));
                    }
                }
            }
        }
    }

    let mut close = OneClose {
        tree: &tree,
        x0: &x0,
        memo: vec![None; n],
    };
    for a in 0..n {
        for b in 0..n {
            if a == b || tree.is_descendant(a, b) || tree.is_descendant(b, a) {
                continue;
            }
            let p = tree.path(a, b);
            let d = p.len() - 1;
            if d % 2 != 0 {
                continue;
            }
            if a < b {
                for t in 0..=last {
                    let xi = h[t].get(a);
                    let hyp = weak[t][a] && weak[t][b] && p.iter().step_by(2).all(|&w| h[t].get(w) == xi);
                    if hyp {
                        for &w in p.iter().step_by(2) {
                            out[4].check(stable_from(w, t), || format!("path {a}..{b}, vertex {w}, time {t}"));
                        }
                    }
                }
            }
            one_far(&tree, &h, &weak, &p, &mut close, &mut out[5], &stable_from)?;
        }
    }
    Ok(out)
}

fn one_far(
    tree: &RootedTree,
    h: &[OpinionVector],
    weak: &[Vec<bool>],
    p: &[usize],
    close: &mut OneClose,
    tally: &mut Tally,
    stable_from: &dyn Fn(usize, usize) -> bool,
) -> Result<()> {
    let (a, b) = (p[0], p[p.len() - 1]);
    let d = p.len() - 1;
    let last = h.len() - 1;
    let (xa, xb) = (h[0].get(a), h[0].get(b));
    if xa == xb || tree.is_leaf(a) || tree.is_leaf(b) || !weak[0][a] || !weak[0][b] {
        return Ok(());
    }
    let mut premise_ready = false;
    for t in (0..=last).step_by(2) {
        if h[t].get(a) != xa || h[t].get(b) != xb {
            break;
        }
        // interior even vertices read xa up to some point, then xb
        let inner: Vec<bool> = (2..d).step_by(2).map(|i| h[t].get(p[i])).collect();
        let split = inner.iter().take_while(|&&x| x == xa).count();
        if inner[split..].iter().any(|&x| x != xb) {
            continue;
        }
        if !premise_ready {
            if !close.get(a)? || !close.get(b)? {
                return Ok(());
            }
            premise_ready = true;
        }
        for s in (t..=last).step_by(2) {
            for i in (2..d).step_by(2) {
                let x = h[s].get(p[i]);
                let ok = x == h[s].get(p[i - 2]) || x == h[s].get(p[i + 2]);
                tally.check(ok, || format!("path {a}..{b}, vertex {}, times {t}, {s}", p[i]));
            }
            tally.check(weak[s][b] || stable_from(b, s), || {
                format!("path {a}..{b}, end {b} neither weakly nor plainly stable at {s}")
            });
        }
    }
    Ok(())
}
