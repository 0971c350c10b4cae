use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use majlab::claims::{self, ClaimReport, ClaimsConfig};
use majlab::dynamics::{stabilise_with, write_trace_compact, write_trace_csv, Kernel};
use majlab::gen::{odd_trees, random_binary_tree, random_odd_tree};
use majlab::io::{load_graph, load_opinions, load_tree, save_tree};
use majlab::probe::{self, EstimateConfig, ProbMethod, Target};
use majlab::stability::{self, Options, StabilityKind, Strategy};
use majlab::worstcase::{brute_force_tau, worst_case};
use majlab::{Error, OpinionVector, RootedTree};
use serde::Serialize;
use serde_json::json;

mod config;

use config::{Artifact, InitSource, RunConfig, TreeSource};

#[derive(Parser)]
#[command(name = "majlab", version, about = "Majority dynamics on odd-degree trees")]
struct Cli {
    /// Worker threads for parallel sharding (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Master seed for every random choice.
    #[arg(long, global = true, env = "MAJLAB_SEED", default_value_t = 0)]
    seed: u64,

    /// Write the artifact here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a tree file: a perfect k-ary tree or a random tree.
    Gen(GenArgs),
    /// Run the dynamics to period two.
    Simulate(SimulateArgs),
    /// Exact worst-case stabilisation time with an optimal path and witness.
    WorstCase(WorstCaseArgs),
    /// Exhaustive maximum of the stabilisation time.
    BruteForce(BruteForceArgs),
    /// Decide a stability notion for one vertex.
    Stability(StabilityArgs),
    /// Exact or Monte Carlo probability of a stability event.
    Prob(ProbArgs),
    /// Stabilisation times of random initial vectors on a perfect tree.
    McTau(McTauArgs),
    /// Smallest positive fixed point of the recursion polynomial.
    FixedPoint(FixedPointArgs),
    /// Run every invariant suite and report pass/fail per claim.
    CheckClaims(CheckClaimsArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Branching factor of a perfect tree.
    #[arg(long, requires = "h", conflicts_with_all = ["random", "binary"])]
    k: Option<usize>,
    /// Height of a perfect tree.
    #[arg(long, requires = "k")]
    h: Option<usize>,
    /// Random odd-degree tree with this many vertices.
    #[arg(long, conflicts_with = "binary")]
    random: Option<usize>,
    /// Random binary-rooted tree with this many vertices.
    #[arg(long)]
    binary: Option<usize>,
}

#[derive(Args)]
struct TreeArg {
    /// Tree file.
    #[arg(long)]
    tree: PathBuf,
}

#[derive(Args)]
struct InitArg {
    /// Opinion file; uniform random under --seed when absent.
    #[arg(long)]
    init: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Csv,
    Compact,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    tree: TreeArg,
    #[command(flatten)]
    init: InitArg,
    /// Also write the full trajectory to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    trace_format: TraceFormat,
}

#[derive(Args)]
struct WorstCaseArgs {
    #[command(flatten)]
    tree: TreeArg,
    /// Skip the witness vector.
    #[arg(long)]
    no_witness: bool,
}

#[derive(Args)]
struct BruteForceArgs {
    /// Tree or graph file.
    #[arg(long)]
    tree: PathBuf,
    /// Refuse graphs with more vertices than this.
    #[arg(long, default_value_t = majlab::worstcase::DEFAULT_BRUTE_FORCE_VERTICES)]
    max_vertices: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Weak,
    Strong,
    LeT,
    OneClose,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    BruteForce,
    Window,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::BruteForce => Strategy::BruteForce,
            StrategyArg::Window => Strategy::Window,
        }
    }
}

#[derive(Args)]
struct ExtensionArgs {
    /// Largest number of extensions enumerated outright.
    #[arg(long, default_value_t = stability::DEFAULT_EXTENSION_BUDGET)]
    budget: u128,
    #[arg(long, value_enum, default_value = "auto")]
    strategy: StrategyArg,
}

impl ExtensionArgs {
    fn options(&self) -> Options {
        Options {
            budget: self.budget,
            strategy: self.strategy.into(),
        }
    }
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    tree: TreeArg,
    #[command(flatten)]
    init: InitArg,
    #[arg(long)]
    vertex: usize,
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Time; required by every kind except one-close.
    #[arg(long)]
    t: Option<usize>,
    #[command(flatten)]
    ext: ExtensionArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Exact,
    Mc,
}

#[derive(Args)]
struct ProbArgs {
    #[arg(long, value_enum)]
    target: KindArg,
    /// Height of the subject vertex.
    #[arg(long)]
    h: usize,
    /// Time (strong and le-t; weak is always time 0).
    #[arg(long)]
    t: Option<usize>,
    /// Branching factor (le-t only; the others are binary).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Opinion at time t (le-t only): +1 or -1.
    #[arg(long, default_value = "+1", allow_hyphen_values = true)]
    xi: String,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Largest number of subtree states enumerated in exact mode.
    #[arg(long, default_value_t = probe::DEFAULT_EXACT_BUDGET)]
    exact_budget: u128,
    #[command(flatten)]
    ext: ExtensionArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct McTauArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    h: usize,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// `json` for the summary, `csv` for the per-trial rows.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Also write the per-trial rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FixedPointArgs {
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args)]
struct CheckClaimsArgs {
    /// Random instances per claim.
    #[arg(long, default_value_t = 10_000)]
    instances: u64,
    /// Satisfied instances each claim needs beyond this count.
    #[arg(long, default_value_t = 1_000)]
    min_satisfied: u64,
    /// Largest tree in the exhaustive worst-case suite.
    #[arg(long, default_value_t = 12)]
    max_exhaustive: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: INVALID_ARGUMENT: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> majlab::Result<()> {
    let out = cli.output.as_deref();
    let mut cfg = RunConfig::new(cli.command.name(), out);
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, cli.seed, cfg, out),
        Command::Simulate(a) => cmd_simulate(a, cli.seed, cfg, out),
        Command::WorstCase(a) => {
            let tree = read_tree(&a.tree.tree)?;
            cfg.tree = Some(TreeSource::file(&a.tree.tree));
            cfg.param("witness", !a.no_witness);
            let r = worst_case(&tree, !a.no_witness)?;
            let result = json!({
                "tau": r.tau,
                "path": r.argmax.vertices,
                "t_value": r.argmax.t_value,
                "witness": r.witness,
                "per_vertex_bound": r.per_vertex_bound,
            });
            emit(out, &Artifact::new(&cfg, None, result))
        }
        Command::BruteForce(a) => {
            let g = load_graph(BufReader::new(open(&a.tree)?))?;
            cfg.tree = Some(TreeSource::file(&a.tree));
            cfg.param("max_vertices", a.max_vertices);
            let r = brute_force_tau(&g, a.max_vertices)?;
            emit(out, &Artifact::new(&cfg, None, r))
        }
        Command::Stability(a) => cmd_stability(a, cli.seed, cfg, out),
        Command::Prob(a) => cmd_prob(a, cli.seed, cfg, out),
        Command::McTau(a) => cmd_mc_tau(a, cli.seed, cfg, out),
        Command::FixedPoint(a) => {
            cfg.param("tol", a.tol);
            let r = probe::fixed_point_q(a.tol)?;
            emit(out, &Artifact::new(&cfg, None, r))
        }
        Command::CheckClaims(a) => cmd_check_claims(a, cli.seed, cfg, out),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Simulate(_) => "simulate",
            Command::WorstCase(_) => "worst-case",
            Command::BruteForce(_) => "brute-force",
            Command::Stability(_) => "stability",
            Command::Prob(_) => "prob",
            Command::McTau(_) => "mc-tau",
            Command::FixedPoint(_) => "fixed-point",
            Command::CheckClaims(_) => "check-claims",
        }
    }
}

fn open(path: &Path) -> majlab::Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn create(path: &Path) -> majlab::Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(BufWriter::new(f))
}

fn read_tree(path: &Path) -> majlab::Result<RootedTree> {
    load_tree(BufReader::new(open(path)?))
}

fn sink(out: Option<&Path>) -> majlab::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: Serialize>(out: Option<&Path>, artifact: &Artifact<T>) -> majlab::Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, artifact).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// `x[0]` from `--init`, or uniform under the master seed.
fn initial(
    init: &InitArg,
    n: usize,
    seed: u64,
    cfg: &mut RunConfig,
) -> majlab::Result<(OpinionVector, Option<u64>)> {
    match &init.init {
        Some(p) => {
            cfg.init = Some(InitSource::file(p));
            Ok((load_opinions(BufReader::new(open(p)?), n)?, None))
        }
        None => {
            cfg.init = Some(InitSource::Uniform { seed });
            Ok((OpinionVector::random(n, &mut probe::trial_rng(seed, 0)), Some(seed)))
        }
    }
}

fn cmd_gen(a: &GenArgs, seed: u64, mut cfg: RunConfig, out: Option<&Path>) -> majlab::Result<()> {
    let mut rng = probe::trial_rng(seed, 0);
    let (tree, used_seed) = match (a.k, a.h, a.random, a.binary) {
        (Some(k), Some(h), None, None) => {
            cfg.tree = Some(TreeSource::Generator { kind: "perfect", k: Some(k), h: Some(h), n: None });
            (RootedTree::perfect(k, h)?, None)
        }
        (None, None, Some(n), None) => {
            cfg.tree = Some(TreeSource::Generator { kind: "random-odd", k: None, h: None, n: Some(n) });
            (random_odd_tree(n, &mut rng)?, Some(seed))
        }
        (None, None, None, Some(n)) => {
            cfg.tree = Some(TreeSource::Generator { kind: "random-binary", k: None, h: None, n: Some(n) });
            (random_binary_tree(n, &mut rng)?, Some(seed))
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give --k and --h, or --random N, or --binary N".into(),
            ))
        }
    };
    let mut w = sink(out)?;
    let header = Artifact::new(&cfg, used_seed, ());
    writeln!(w, "# majlab {} generated_at={}", header.version, header.generated_at)?;
    writeln!(w, "# config {}", serde_json::to_string(&cfg).map_err(io::Error::from)?)?;
    save_tree(&tree, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, seed: u64, mut cfg: RunConfig, out: Option<&Path>) -> majlab::Result<()> {
    let tree = read_tree(&a.tree.tree)?;
    cfg.tree = Some(TreeSource::file(&a.tree.tree));
    let (x0, used_seed) = initial(&a.init, tree.n(), seed, &mut cfg)?;
    if let Some(p) = &a.trace {
        cfg.param("trace", p.display().to_string());
    }
    let kernel = Kernel::for_tree(&tree);
    let res = stabilise_with(&kernel, &x0, a.trace.is_some())?;
    if let (Some(p), Some(h)) = (&a.trace, &res.history) {
        let w = create(p)?;
        match a.trace_format {
            TraceFormat::Csv => write_trace_csv(h, w)?,
            TraceFormat::Compact => write_trace_compact(h, w)?,
        }
    }
    let result = json!({ "init": x0, "result": res });
    emit(out, &Artifact::new(&cfg, used_seed, result))
}

fn cmd_stability(a: &StabilityArgs, seed: u64, mut cfg: RunConfig, out: Option<&Path>) -> majlab::Result<()> {
    let tree = read_tree(&a.tree.tree)?;
    cfg.tree = Some(TreeSource::file(&a.tree.tree));
    let (x0, used_seed) = initial(&a.init, tree.n(), seed, &mut cfg)?;
    let kind = StabilityKind::parse(kind_name(a.kind), a.t)?;
    cfg.param("vertex", a.vertex);
    cfg.param("kind", kind.name());
    cfg.param("t", a.t);
    cfg.param("strategy", strategy_name(a.ext.strategy));
    cfg.budget = Some(a.ext.budget);
    let verdict = stability::decide(&tree, &x0, a.vertex, kind, a.ext.options())?;
    emit(out, &Artifact::new(&cfg, used_seed, verdict))
}

fn cmd_prob(a: &ProbArgs, seed: u64, mut cfg: RunConfig, out: Option<&Path>) -> majlab::Result<()> {
    let need_t = || {
        a.t.ok_or_else(|| Error::InvalidArgument("this target needs --t".into()))
    };
    let value = match a.xi.as_str() {
        "+1" | "+" | "1" => true,
        "-1" | "-" => false,
        other => return Err(Error::InvalidArgument(format!("--xi must be +1 or -1, got {other:?}"))),
    };
    let target = match a.target {
        KindArg::Weak => {
            if a.t.is_some_and(|t| t != 0) {
                return Err(Error::InvalidArgument("weak probabilities are at time 0".into()));
            }
            Target::WeakZero
        }
        KindArg::Strong => Target::Strong(need_t()?),
        KindArg::OneClose => Target::OneClose,
        KindArg::LeT => Target::LeT { k: a.k, t: need_t()?, value },
    };
    if a.k != 2 && !matches!(target, Target::LeT { .. }) {
        return Err(Error::InvalidArgument("only le-t accepts --k other than 2".into()));
    }
    let method = match a.method {
        MethodArg::Auto => ProbMethod::Auto,
        MethodArg::Exact => ProbMethod::Exact,
        MethodArg::Mc => ProbMethod::MonteCarlo,
    };
    cfg.param("target", kind_name(a.target));
    cfg.param("h", a.h);
    cfg.param("t", target.time());
    cfg.param("k", target.arity());
    if matches!(target, Target::LeT { .. }) {
        cfg.param("xi", if value { 1 } else { -1 });
    }
    cfg.param("method", method_name(a.method));
    cfg.param("strategy", strategy_name(a.ext.strategy));
    cfg.param("exact_budget", a.exact_budget);
    cfg.trials = Some(a.trials);
    cfg.budget = Some(a.ext.budget);
    let ecfg = EstimateConfig {
        method,
        trials: a.trials,
        seed,
        exact_budget: a.exact_budget,
        extensions: a.ext.options(),
    };
    let est = probe::estimate_probability(target, a.h, &ecfg)?;
    let used_seed = est.seed;
    emit(out, &Artifact::new(&cfg, used_seed, est))
}

fn cmd_mc_tau(a: &McTauArgs, seed: u64, mut cfg: RunConfig, out: Option<&Path>) -> majlab::Result<()> {
    cfg.tree = Some(TreeSource::Generator { kind: "perfect", k: Some(a.k), h: Some(a.h), n: None });
    cfg.init = Some(InitSource::Uniform { seed });
    cfg.trials = Some(a.trials);
    cfg.format = if a.format == Format::Csv { "csv" } else { "json" };
    if let Some(p) = &a.csv {
        cfg.param("csv", p.display().to_string());
    }
    let summary = probe::mc_tau(a.k, a.h, a.trials, seed)?;
    if let Some(p) = &a.csv {
        let mut w = create(p)?;
        summary.write_csv(&mut w)?;
        w.flush()?;
    }
    match a.format {
        Format::Csv => {
            let mut w = sink(out)?;
            summary.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Format::Json => emit(out, &Artifact::new(&cfg, Some(seed), summary)),
    }
}

#[derive(Serialize)]
struct ClaimLine {
    #[serde(flatten)]
    report: ClaimReport,
    passed: bool,
}

fn cmd_check_claims(a: &CheckClaimsArgs, seed: u64, mut cfg: RunConfig, out: Option<&Path>) -> majlab::Result<()> {
    cfg.param("instances", a.instances);
    cfg.param("min_satisfied", a.min_satisfied);
    cfg.param("max_exhaustive", a.max_exhaustive);
    let ccfg = ClaimsConfig {
        instances: a.instances,
        seed,
        ..ClaimsConfig::default()
    };
    let mut trees = Vec::new();
    for n in (6..=a.max_exhaustive).step_by(2) {
        trees.extend(odd_trees(n)?);
    }
    let mut reports: Vec<(ClaimReport, u64)> = claims::check_worst_case(&trees)?
        .into_iter()
        .map(|r| (r, 0))
        .collect();
    reports.extend(claims::check_claims(&ccfg)?.into_iter().map(|r| (r, a.min_satisfied)));
    let lines: Vec<ClaimLine> = reports
        .into_iter()
        .map(|(report, min)| ClaimLine {
            passed: report.passed(min),
            report,
        })
        .collect();
    let failed: Vec<&str> = lines.iter().filter(|l| !l.passed).map(|l| l.report.id).collect();
    emit(out, &Artifact::new(&cfg, Some(seed), &lines))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant(format!("claims failed: {}", failed.join(", "))))
    }
}

fn kind_name(k: KindArg) -> &'static str {
    match k {
        KindArg::Weak => "weak",
        KindArg::Strong => "strong",
        KindArg::LeT => "le-t",
        KindArg::OneClose => "one-close",
    }
}

fn strategy_name(s: StrategyArg) -> &'static str {
    match s {
        StrategyArg::Auto => "auto",
        StrategyArg::BruteForce => "brute-force",
        StrategyArg::Window => "window",
    }
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Auto => "auto",
        MethodArg::Exact => "exact",
        MethodArg::Mc => "mc",
    }
}
