use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;

use metric_mst::cycle_graph::CycleGraph;
use metric_mst::experiment::{
    emit_report, run_experiment, run_one, verify_artifacts, write_report, ExperimentConfig, ExperimentError, InstanceSource,
    ReportFormat,
};
use metric_mst::hierarchy::HierarchyLevels;
use metric_mst::metric::{random_band_metric, uniform_plane_metric, MetricInstance};
use metric_mst::oracle::exact_mst;
use metric_mst::pipeline::{target_hierarchy, Executor, PipelineConfig};
use metric_mst::reduction::{
    inverse_epsilon, pad_to_power, solve_one_vs_two, ExactMstOracle, MstOracle, PairDiagnostic, PipelineOracle,
    ReductionConfig, Verdict,
};
use metric_mst::rng::{Key, Stream};
use metric_mst::tree::SpanningTree;

const WORKERS_ENV: &str = "METRIC_MST_WORKERS";
const REDUCE_MAX_N: usize = 243;

#[derive(Parser)]
#[command(name = "metric-mst", version, about = "Approximate metric MST in a simulated MPC cluster")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a metric instance (and a cycle-graph sidecar for cycle instances).
    Gen(GenArgs),
    /// Run the pipeline over seeds and report one row per run.
    Run(RunArgs),
    /// Sweep epsilon and check round ledgers against their closed form.
    Bench(BenchArgs),
    /// Re-check dumped trees and hierarchies.
    Verify(VerifyArgs),
    /// Decide one cycle vs two with an MST routine as a black box.
    Reduce(ReduceArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Uniform points in the unit square.
    #[arg(long, group = "kind")]
    points: Option<usize>,
    /// Weights drawn from [lo, 2 lo].
    #[arg(long, group = "kind")]
    band: Option<usize>,
    /// Comma-separated cycle lengths of a (1,2)-metric.
    #[arg(long, group = "kind", value_delimiter = ',')]
    cycles: Option<Vec<usize>>,
    /// Comma-separated path lengths (vertex counts) added to the cycles.
    #[arg(long, value_delimiter = ',', requires = "cycles")]
    paths: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100.0)]
    scale: f64,
    #[arg(long, default_value_t = 10)]
    lo: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Randomly relabel the vertices of a cycle instance.
    #[arg(long, requires = "cycles")]
    shuffle: bool,
    /// Metric file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cycle-graph sidecar file.
    #[arg(long, requires = "cycles")]
    sidecar: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecutorArg {
    Direct,
    Sim,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Jsonl => ReportFormat::Jsonl,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, value_enum)]
    executor: Option<ExecutorArg>,
    #[arg(long)]
    enforce_space: bool,
    #[arg(long)]
    alpha_override: Option<u64>,
    #[arg(long)]
    boruvka_rounds: Option<u64>,
    #[arg(long)]
    compress_rounds: Option<u64>,
    #[arg(long, default_value_t = 1)]
    repetitions: u32,
    /// Experiment config (JSON); flags given alongside override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct RunArgs {
    /// Metric file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    common: PipelineArgs,
    /// Tree of a single run.
    #[arg(long)]
    tree_out: Option<PathBuf>,
    /// Round ledger (JSON) of a single run.
    #[arg(long)]
    ledger_out: Option<PathBuf>,
    /// Target hierarchy of a single run.
    #[arg(long)]
    hierarchy_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Metric file; otherwise uniform points.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of uniform points when no input is given.
    #[arg(long, default_value_t = 64)]
    points: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
    epsilon_sweep: Vec<f64>,
    #[command(flatten)]
    common: PipelineArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    metric: PathBuf,
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Level-cap base; taken from the hierarchy if absent.
    #[arg(long)]
    alpha: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Calibrated,
    Asymptotic,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Exact,
    Pipeline,
}

#[derive(Args)]
struct ReduceArgs {
    /// Cycle-graph sidecar file.
    #[arg(long)]
    input: PathBuf,
    /// Must be the inverse of an integer.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "calibrated")]
    preset: PresetArg,
    #[arg(long, value_enum, default_value = "exact")]
    oracle: OracleArg,
    /// Per-pair diagnostics CSV.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

/// An invariant failed; exits with 1 rather than 2.
#[derive(Debug)]
struct Violation(String);

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Violation {}

fn lift(e: ExperimentError) -> anyhow::Error {
    if e.is_invariant() {
        Violation(e.to_string()).into()
    } else {
        e.into()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(a) => gen(a),
        Cmd::Run(a) => run(a),
        Cmd::Bench(a) => bench(a),
        Cmd::Verify(a) => verify(a),
        Cmd::Reduce(a) => reduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Violation>() => {
            eprintln!("invariant violation: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let metric = if let Some(n) = a.points {
        uniform_plane_metric(n, a.scale, a.seed)
    } else if let Some(n) = a.band {
        random_band_metric(n, a.lo, a.seed)
    } else if let Some(cycles) = &a.cycles {
        let paths = a.paths.as_deref().unwrap_or(&[]);
        if paths.iter().any(|&p| p < 2) {
            anyhow::bail!("a path needs at least 2 vertices");
        }
        let edges: Vec<usize> = paths.iter().map(|p| p - 1).collect();
        let mut g = CycleGraph::from_lengths(cycles, &edges)?;
        if a.shuffle {
            let mut perm: Vec<u32> = (0..g.n() as u32).collect();
            perm.shuffle(&mut Key::new(a.seed, Stream::Relabel).rng());
            g = g.relabel(&perm);
        }
        if let Some(p) = &a.sidecar {
            fs::write(p, g.to_sidecar()).with_context(|| format!("writing {}", p.display()))?;
        }
        g.to_metric()
    } else {
        bail!("one of --points, --band or --cycles is required");
    };
    write_out(a.out.as_deref(), &metric.to_text())?;
    Ok(())
}

fn experiment_config(common: &PipelineArgs, instances: Vec<InstanceSource>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if !instances.is_empty() {
        cfg.instances = instances;
    }
    if common.config.is_none() || common.seeds != 1 || common.seed != 0 {
        if common.seeds == 0 {
            bail!("--seeds must be at least 1");
        }
        cfg.seeds = (common.seed..common.seed + common.seeds).collect();
    }
    let p: &mut PipelineConfig = &mut cfg.pipeline;
    if let Some(e) = common.epsilon {
        p.epsilon = e;
    }
    if let Some(d) = common.delta {
        p.delta = d;
    }
    if let Some(x) = common.executor {
        p.executor = match x {
            ExecutorArg::Direct => Executor::Direct,
            ExecutorArg::Sim => Executor::Sim,
        };
    }
    p.enforce_space |= common.enforce_space;
    p.alpha_override = common.alpha_override.or(p.alpha_override);
    p.boruvka_rounds = common.boruvka_rounds.or(p.boruvka_rounds);
    p.compress_rounds = common.compress_rounds.or(p.compress_rounds);
    p.validate()?;
    cfg.repetitions = common.repetitions.max(cfg.repetitions);
    if let Ok(w) = std::env::var(WORKERS_ENV) {
        cfg.workers = w.parse().with_context(|| format!("{WORKERS_ENV} must be a positive integer"))?;
    }
    Ok(cfg)
}

fn report(rows: &[metric_mst::experiment::ReportRow], common: &PipelineArgs, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    match &common.out {
        Some(p) => write_report(rows, common.format.into(), p, cfg).map_err(lift),
        None => emit_report(rows, common.format.into(), io::stdout().lock()).map_err(lift),
    }
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let instances = a.input.iter().map(|p| InstanceSource::File { path: p.clone() }).collect();
    let cfg = experiment_config(&a.common, instances)?;
    let dumps = a.tree_out.is_some() || a.ledger_out.is_some() || a.hierarchy_out.is_some();
    if !dumps {
        let rows = run_experiment(&cfg).map_err(lift)?;
        return report(&rows, &a.common, &cfg);
    }
    if cfg.instances.len() != 1 || cfg.seeds.len() != 1 || !cfg.epsilons.is_empty() {
        bail!("artifact dumps need exactly one instance, seed and epsilon");
    }
    let src = &cfg.instances[0];
    let metric = src.load().map_err(lift)?;
    let pc = cfg.pipeline.clone().with_seed(cfg.seeds[0]);
    let exact = exact_mst(&metric).total_weight();
    let (out, row) = run_one(&src.id(), &metric, &pc, exact, cfg.repetitions).map_err(lift)?;
    if let Some(p) = &a.tree_out {
        write_out(Some(p), &out.tree.to_text())?;
    }
    if let Some(p) = &a.ledger_out {
        write_out(Some(p), &serde_json::to_string_pretty(&out.ledger.to_json())?)?;
    }
    if let Some(p) = &a.hierarchy_out {
        write_out(Some(p), &target_hierarchy(&metric, &pc).to_text())?;
    }
    report(&[row], &a.common, &cfg)
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let instances = vec![match &a.input {
        Some(p) => InstanceSource::File { path: p.clone() },
        None => InstanceSource::Plane { n: a.points, scale: 100.0, seed: a.common.seed },
    }];
    let mut cfg = experiment_config(&a.common, instances)?;
    cfg.epsilons = a.epsilon_sweep.clone();
    let rows = run_experiment(&cfg).map_err(lift)?;
    report(&rows, &a.common, &cfg)?;
    let off: Vec<String> = rows
        .iter()
        .filter(|r| r.rounds_total != r.closed_form_total)
        .map(|r| format!("seed {} epsilon {}: ledger {} vs closed form {}", r.seed, r.epsilon, r.rounds_total, r.closed_form_total))
        .collect();
    if !off.is_empty() {
        return Err(Violation(off.join("; ")).into());
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> anyhow::Result<()> {
    let metric = MetricInstance::from_text(&read(&a.metric)?).with_context(|| format!("parsing {}", a.metric.display()))?;
    let tree = SpanningTree::from_text(&read(&a.tree)?).with_context(|| format!("parsing {}", a.tree.display()))?;
    let hierarchy = match &a.hierarchy {
        Some(p) => Some(HierarchyLevels::from_text(&read(p)?).with_context(|| format!("parsing {}", p.display()))?),
        None => None,
    };
    let bad = verify_artifacts(&metric, &tree, hierarchy.as_ref(), a.alpha);
    if bad.is_empty() {
        println!("ok");
        Ok(())
    } else {
        Err(Violation(bad.join("\n")).into())
    }
}

#[derive(serde::Serialize)]
struct DiagnosticRow {
    cycle_len: usize,
    u1: u32,
    u2: u32,
    v1: u32,
    v2: u32,
    label: String,
    samples: u32,
    attempts: u32,
    ambiguous: bool,
    near: bool,
    group_sizes: String,
    p_ranges: String,
}

fn diagnostic_row(d: &PairDiagnostic) -> DiagnosticRow {
    let sizes: Vec<String> = d.groups.iter().map(|g| g.0.to_string()).collect();
    let ranges: Vec<String> = d.groups.iter().map(|g| format!("{:.4}-{:.4}", g.1, g.2)).collect();
    DiagnosticRow {
        cycle_len: d.cycle_len,
        u1: d.u1,
        u2: d.u2,
        v1: d.v1,
        v2: d.v2,
        label: d.label.map_or_else(|| if d.ambiguous { "ambiguous".into() } else { "screened".into() }, |l| l.to_string()),
        samples: d.samples,
        attempts: d.attempts,
        ambiguous: d.ambiguous,
        near: d.near,
        group_sizes: sizes.join(";"),
        p_ranges: ranges.join(";"),
    }
}

fn reduce(a: ReduceArgs) -> anyhow::Result<()> {
    let graph = CycleGraph::from_sidecar(&read(&a.input)?).with_context(|| format!("parsing {}", a.input.display()))?;
    let k = inverse_epsilon(a.epsilon)?;
    let padded = pad_to_power(&graph, k)?.n();
    if padded > REDUCE_MAX_N {
        bail!("padded size {padded} exceeds {REDUCE_MAX_N}; all pairs are tested, so larger inputs are refused");
    }
    let cfg = match a.preset {
        PresetArg::Calibrated => ReductionConfig::calibrated(),
        PresetArg::Asymptotic => ReductionConfig::asymptotic(a.epsilon),
    };
    let oracle: Box<dyn MstOracle> = match a.oracle {
        OracleArg::Exact => Box::new(ExactMstOracle::new(a.epsilon)),
        OracleArg::Pipeline => Box::new(PipelineOracle { config: PipelineConfig::default().with_epsilon(a.epsilon).with_seed(a.seed) }),
    };
    let solved = solve_one_vs_two(oracle.as_ref(), &graph, a.epsilon, &cfg, Key::new(a.seed, Stream::Relabel))?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "verdict {}", if solved.verdict == Verdict::OneCycle { "one_cycle" } else { "two_cycles" })?;
    let order: Vec<String> = solved.order.iter().map(u32::to_string).collect();
    writeln!(stdout, "order {}", order.join(" "))?;
    writeln!(stdout, "padded_n {}", solved.padded_n)?;
    if let Some(f) = &solved.failure {
        writeln!(stdout, "failure {f}")?;
    }
    if let Some(p) = &a.diagnostics {
        let mut w = csv::Writer::from_path(p).with_context(|| format!("writing {}", p.display()))?;
        for d in solved.attempt.iter().flat_map(|o| &o.diagnostics) {
            w.serialize(diagnostic_row(d))?;
        }
        w.flush()?;
    }
    Ok(())
}
