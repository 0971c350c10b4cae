//! Stability probabilities, the fixed point `q`, and stabilisation-time
//! experiments on perfect trees.
//!
//! A probability about a vertex of height `h` is evaluated in the smallest
//! perfect host that contains such a non-root vertex: the tree of height
//! `h + 1`, with the subject at vertex 1 (a child of the root).
//!
//! Monte Carlo trial `i` under master seed `m` draws from a ChaCha8 stream
//! seeded with [`trial_seed`]`(m, i)`, so results do not depend on the
//! number of workers or on scheduling.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_budget, Error, Result};
use crate::io::{f17, f17_opt};
use crate::lanes::{pack, Enumeration, LaneKernel, LaneSim};
use crate::opinion::OpinionVector;
use crate::stability::{self, DrivenSubtree, ExtensionDecider, StabilityKind};
use crate::tree::{perfect_tree_size, RootedTree};

/// Default cap on `2^|T_v|` for exact enumeration.
pub const DEFAULT_EXACT_BUDGET: u128 = 1 << 20;

/// Largest tree `mc_tau` will allocate.
pub const MAX_MC_VERTICES: usize = 1 << 26;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `i`: `splitmix64(master ^ splitmix64(i))`.
pub fn trial_seed(master: u64, i: u64) -> u64 {
    splitmix64(master ^ splitmix64(i))
}

pub fn trial_rng(master: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(master, i))
}

/// The event whose probability is estimated, for a uniformly random `x[0]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Weakly 0-stable (binary host).
    WeakZero,
    /// Strongly `t`-stable (binary host).
    Strong(usize),
    /// 1-close to stability (binary host).
    OneClose,
    /// `(<=t)`-stable with opinion `value` at time `t` (k-ary host).
    LeT { k: usize, t: usize, value: bool },
}

impl Target {
    pub fn symbol(&self) -> &'static str {
        match self {
            Target::WeakZero => "p_w(0,h,v)",
            Target::Strong(_) => "p_s(t,h,v)",
            Target::OneClose => "P(1-close)",
            Target::LeT { .. } => "p(<=t,xi)",
        }
    }

    pub fn time(&self) -> Option<usize> {
        match *self {
            Target::WeakZero => Some(0),
            Target::Strong(t) | Target::LeT { t, .. } => Some(t),
            Target::OneClose => None,
        }
    }

    pub fn arity(&self) -> usize {
        match *self {
            Target::LeT { k, .. } => k,
            _ => 2,
        }
    }

    /// The minimal host for a subject of height `h`.
    pub fn host(&self, h: usize) -> Result<RootedTree> {
        RootedTree::perfect(self.arity(), h + 1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProbMethod {
    /// Exact when `2^|T_v|` fits the exact budget, Monte Carlo otherwise.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug)]
pub struct EstimateConfig {
    pub method: ProbMethod,
    pub trials: u64,
    pub seed: u64,
    pub exact_budget: u128,
    pub extensions: stability::Options,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            method: ProbMethod::Auto,
            trials: 100_000,
            seed: 0,
            exact_budget: DEFAULT_EXACT_BUDGET,
            extensions: stability::Options::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbEstimate {
    pub target: &'static str,
    pub k: usize,
    pub subject_height: usize,
    pub t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<i8>,
    #[serde(serialize_with = "f17")]
    pub value: f64,
    pub method: EstimateKind,
    /// Decision engine for each subtree state.
    pub engine: stability::Method,
    /// Number of subtree states evaluated.
    pub trials: u64,
    pub successes: u64,
    /// `2^|T_v|` for exact values, which are `successes / denominator`.
    pub denominator: Option<u64>,
    /// Three standard errors (Monte Carlo only).
    #[serde(serialize_with = "f17_opt")]
    pub ci_halfwidth: Option<f64>,
    pub seed: Option<u64>,
}

impl ProbEstimate {
    /// Standard error of a Monte Carlo estimate, zero for exact values.
    pub fn sigma(&self) -> f64 {
        match self.method {
            EstimateKind::Exact => 0.0,
            EstimateKind::MonteCarlo => {
                let p = self.value;
                (p * (1.0 - p) / self.trials as f64).sqrt()
            }
        }
    }
}

enum Evaluator {
    Weak(DrivenSubtree),
    Extension(ExtensionDecider, Option<bool>),
}

impl Evaluator {
    fn new(target: Target, host: &RootedTree, opts: stability::Options) -> Result<Self> {
        let v = 1;
        Ok(match target {
            Target::WeakZero => Evaluator::Weak(DrivenSubtree::new(host, v)),
            Target::Strong(t) => Evaluator::Extension(
                ExtensionDecider::new(host, v, StabilityKind::Strong(t), opts)?,
                None,
            ),
            Target::OneClose => Evaluator::Extension(
                ExtensionDecider::new(host, v, StabilityKind::OneClose, opts)?,
                None,
            ),
            Target::LeT { t, value, .. } => Evaluator::Extension(
                ExtensionDecider::new(host, v, StabilityKind::LeT(t), opts)?,
                Some(value),
            ),
        })
    }

    fn engine(&self) -> stability::Method {
        match self {
            Evaluator::Weak(_) => stability::Method::Canonical,
            Evaluator::Extension(d, _) => d.method(),
        }
    }

    fn holds(&self, local: &OpinionVector) -> Result<bool> {
        match self {
            Evaluator::Weak(sub) => sub.weakly_stable(local),
            Evaluator::Extension(d, None) => d.holds(local),
            Evaluator::Extension(d, Some(value)) => d.holds_with_value(local, *value),
        }
    }
}

/// Probability of `target` for a vertex of height `h` in its minimal host.
pub fn estimate_probability(target: Target, h: usize, cfg: &EstimateConfig) -> Result<ProbEstimate> {
    if matches!(target, Target::Strong(_) | Target::OneClose) && h == 0 {
        return Err(Error::InvalidArgument("the subject must not be a leaf".into()));
    }
    let host = target.host(h)?;
    let m = subject_size(target.arity(), h);
    let states = if m < 127 { 1u128 << m } else { u128::MAX };
    let exact = match cfg.method {
        ProbMethod::Exact => {
            check_budget(states, cfg.exact_budget)?;
            true
        }
        ProbMethod::Auto => states <= cfg.exact_budget,
        ProbMethod::MonteCarlo => false,
    };
    if !exact && cfg.trials == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one trial".into()));
    }
    let eval = Evaluator::new(target, &host, cfg.extensions)?;
    let (trials, successes) = if exact {
        (states as u64, count_exact(&eval, m)?)
    } else {
        (cfg.trials, count_sampled(&eval, m, cfg.trials, cfg.seed)?)
    };
    let value = successes as f64 / trials as f64;
    let mut est = ProbEstimate {
        target: target.symbol(),
        k: target.arity(),
        subject_height: h,
        t: target.time(),
        xi: match target {
            Target::LeT { value, .. } => Some(if value { 1 } else { -1 }),
            _ => None,
        },
        value,
        method: if exact {
            EstimateKind::Exact
        } else {
            EstimateKind::MonteCarlo
        },
        engine: eval.engine(),
        trials,
        successes,
        denominator: exact.then_some(trials),
        ci_halfwidth: None,
        seed: (!exact).then_some(cfg.seed),
    };
    if !exact {
        est.ci_halfwidth = Some(3.0 * est.sigma());
    }
    Ok(est)
}

/// Vertices in the subtree of a height-`h` vertex of a perfect `k`-ary tree.
fn subject_size(k: usize, h: usize) -> usize {
    (0..=h).map(|d| k.pow(d as u32)).sum()
}

fn count_exact(eval: &Evaluator, m: usize) -> Result<u64> {
    match eval {
        Evaluator::Weak(sub) => {
            let en = Enumeration::new(OpinionVector::uniform(m, false), (0..m).collect());
            (0..en.chunks())
                .into_par_iter()
                .map(|c| {
                    let (words, valid) = en.lane_init(c);
                    Ok(sub.weakly_stable_lanes(&words, valid)?.count_ones() as u64)
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))
        }
        _ => (0..1u64 << m)
            .into_par_iter()
            .map(|i| Ok(eval.holds(&OpinionVector::from_index(m, i))? as u64))
            .try_reduce(|| 0, |a, b| Ok(a + b)),
    }
}

fn count_sampled(eval: &Evaluator, m: usize, trials: u64, seed: u64) -> Result<u64> {
    let draw = |i: u64| OpinionVector::random(m, &mut trial_rng(seed, i));
    match eval {
        Evaluator::Weak(sub) => (0..trials.div_ceil(64))
            .into_par_iter()
            .map(|b| {
                let states: Vec<OpinionVector> = (b * 64..(b * 64 + 64).min(trials)).map(draw).collect();
                let (words, valid) = pack(&states);
                Ok(sub.weakly_stable_lanes(&words, valid)?.count_ones() as u64)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b)),
        _ => (0..trials)
            .into_par_iter()
            .map(|i| Ok(eval.holds(&draw(i))? as u64))
            .try_reduce(|| 0, |a, b| Ok(a + b)),
    }
}

/// `P(v is (<=t)-stable and x[t](v) = xi)` for a height-2 vertex of the
/// perfect `k`-ary tree, by Monte Carlo.
pub fn le_t_positive_check(k: usize, t: usize, xi: bool, trials: u64, seed: u64) -> Result<ProbEstimate> {
    if !(2..=4).contains(&k) || k % 2 != 0 {
        return Err(Error::InvalidArgument(format!("k must be 2 or 4, got {k}")));
    }
    if !(2..=4).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in 2..=4, got {t}")));
    }
    let cfg = EstimateConfig {
        method: ProbMethod::MonteCarlo,
        trials,
        seed,
        ..EstimateConfig::default()
    };
    estimate_probability(Target::LeT { k, t, value: xi }, 2, &cfg)
}

pub fn p1(x: f64) -> f64 {
    (0.25 + x * x / 4.0).powi(2)
}

pub fn p2(x: f64) -> f64 {
    (1.0 - (1.0 - x * x) / 4.0).powi(2)
}

pub fn p3(x: f64) -> f64 {
    (0.5 + x / 2.0).powi(4) - (0.25 + x * x / 4.0).powi(2)
}

/// `P(x) = P1(x) + P2(x) P3(x)`.
pub fn p_poly(x: f64) -> f64 {
    p1(x) + p2(x) * p3(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointResult {
    #[serde(serialize_with = "f17")]
    pub q: f64,
    #[serde(serialize_with = "f17")]
    pub residual: f64,
    #[serde(serialize_with = "f17")]
    pub tolerance: f64,
    #[serde(serialize_with = "f17")]
    pub p_at_zero: f64,
    #[serde(serialize_with = "f17")]
    pub p_at_upper: f64,
    /// `(lo, hi)` after each bisection step.
    pub bracket: Vec<Bracket>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bracket {
    #[serde(serialize_with = "f17")]
    pub lo: f64,
    #[serde(serialize_with = "f17")]
    pub hi: f64,
}

/// Smallest positive solution of `x = P(x)`, by bisection on `[1/16, 3/40]`.
pub fn fixed_point_q(tolerance: f64) -> Result<FixedPointResult> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tolerance}")));
    }
    let f = |x: f64| p_poly(x) - x;
    let (mut lo, mut hi) = (1.0 / 16.0, 3.0 / 40.0);
    if f(lo) <= 0.0 || f(hi) >= 0.0 {
        return Err(Error::Invariant(format!(
            "[1/16, 3/40] does not bracket x = P(x): f(lo) = {}, f(hi) = {}",
            f(lo),
            f(hi)
        )));
    }
    let mut bracket = Vec::new();
    let mut q = 0.5 * (lo + hi);
    for _ in 0..200 {
        q = 0.5 * (lo + hi);
        if q <= lo || q >= hi {
            break;
        }
        if f(q) > 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        bracket.push(Bracket { lo, hi });
        if f(q).abs() <= tolerance && hi - lo <= tolerance {
            break;
        }
    }
    let residual = f(q).abs();
    if residual > tolerance {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tolerance:e} is below the attainable residual {residual:e}"
        )));
    }
    Ok(FixedPointResult {
        q,
        residual,
        tolerance,
        p_at_zero: p_poly(0.0),
        p_at_upper: p_poly(3.0 / 40.0),
        bracket,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Quantiles {
    #[serde(serialize_with = "f17")]
    pub p05: f64,
    #[serde(serialize_with = "f17")]
    pub p25: f64,
    #[serde(serialize_with = "f17")]
    pub p75: f64,
    #[serde(serialize_with = "f17")]
    pub p95: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioStats {
    #[serde(serialize_with = "f17")]
    pub mean: f64,
    #[serde(serialize_with = "f17")]
    pub median: f64,
    #[serde(serialize_with = "f17")]
    pub min: f64,
    #[serde(serialize_with = "f17")]
    pub max: f64,
}

/// Stabilisation times of uniformly random initial vectors on a perfect tree.
#[derive(Clone, Debug, Serialize)]
pub struct McSummary {
    pub k: usize,
    pub h: usize,
    /// Diameter `2h`.
    pub d: usize,
    pub vertices: usize,
    pub trials: u64,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub taus: Vec<usize>,
    #[serde(serialize_with = "f17")]
    pub mean: f64,
    #[serde(serialize_with = "f17")]
    pub median: f64,
    pub quantiles: Quantiles,
    pub max: usize,
    /// Count of trials per value of `tau`.
    pub histogram: BTreeMap<usize, u64>,
    /// Statistics of `tau / D`.
    pub ratio: RatioStats,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(&next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

impl McSummary {
    /// Summary statistics recomputed from the per-trial data.
    pub fn from_taus(k: usize, h: usize, seed: u64, seeds: Vec<u64>, taus: Vec<usize>) -> Self {
        let d = 2 * h;
        let mut sorted: Vec<f64> = taus.iter().map(|&t| t as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len().max(1) as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let mut histogram = BTreeMap::new();
        for &t in &taus {
            *histogram.entry(t).or_insert(0) += 1;
        }
        let q = |p| quantile(&sorted, p);
        let ratio: Vec<f64> = sorted.iter().map(|&t| t / d as f64).collect();
        McSummary {
            k,
            h,
            d,
            vertices: perfect_tree_size(k, h),
            trials: taus.len() as u64,
            seed,
            seeds,
            mean,
            median: q(0.5),
            quantiles: Quantiles {
                p05: q(0.05),
                p25: q(0.25),
                p75: q(0.75),
                p95: q(0.95),
            },
            max: taus.iter().copied().max().unwrap_or(0),
            histogram,
            ratio: RatioStats {
                mean: mean / d as f64,
                median: quantile(&ratio, 0.5),
                min: ratio.first().copied().unwrap_or(f64::NAN),
                max: ratio.last().copied().unwrap_or(f64::NAN),
            },
            taus,
        }
    }

    /// `trial,seed,tau` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,seed,tau")?;
        for (i, (s, t)) in self.seeds.iter().zip(&self.taus).enumerate() {
            writeln!(w, "{i},{s},{t}")?;
        }
        Ok(())
    }
}

/// `trials` simulations of the perfect `k`-ary tree of height `h` from
/// uniform random initial vectors, 64 at a time.
pub fn mc_tau(k: usize, h: usize, trials: u64, seed: u64) -> Result<McSummary> {
    let n = perfect_tree_size(k, h);
    check_budget(n as u128, MAX_MC_VERTICES as u128)?;
    let tree = RootedTree::perfect(k, h)?;
    let kernel = LaneKernel::new(tree.graph());
    let batches: Vec<Vec<usize>> = (0..trials.div_ceil(64))
        .into_par_iter()
        .map(|b| {
            let ids: Vec<u64> = (b * 64..(b * 64 + 64).min(trials)).collect();
            let states: Vec<OpinionVector> = ids
                .iter()
                .map(|&i| OpinionVector::random(n, &mut trial_rng(seed, i)))
                .collect();
            let (words, valid) = pack(&states);
            let mut sim = LaneSim::new(&kernel, words, valid);
            sim.run_to_stable()?;
            Ok((0..ids.len()).map(|j| sim.tau(j).expect("stabilised")).collect())
        })
        .collect::<Result<_>>()?;
    let taus: Vec<usize> = batches.into_iter().flatten().collect();
    let seeds = (0..trials).map(|i| trial_seed(seed, i)).collect();
    Ok(McSummary::from_taus(k, h, seed, seeds, taus))
}
