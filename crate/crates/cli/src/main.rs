//! `meshcast`: plan multicasts, simulate and sweep configurations, and check
//! invariants from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 failed invariant
//! check, 3 deadlock watchdog trip.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use meshcast_core::check::run_checks;
use meshcast_core::config::WorkloadSpec;
use meshcast_core::engine::DeadlockReport;
use meshcast_core::metrics::sweep_from_reports;
use meshcast_core::partition::basic_cost;
use meshcast_core::report::{write_csv, write_json, SweepSummary};
use meshcast_core::routing::{planned_cost, ApproachRouting};
use meshcast_core::workload::load_trace;
use meshcast_core::{
    dpm_partition, exact_optimal_partition, plan, CostModel, Error, FinalPartition, MeshConfig, NodeCoord,
    PlanOptions, PlannerKind, RoutePlan, RunConfig, StatsReport, SweepResult,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "meshcast", version, about = "Multicast planning and wormhole simulation for 2D-mesh NoCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one multicast and print the plan as JSON.
    Plan(PlanArgs),
    /// Run one simulation and write its report.
    Sim(SimArgs),
    /// Run every planner over the configured rate ladder.
    Sweep(SweepArgs),
    /// Check routing and partitioning invariants.
    Check(CheckArgs),
    /// Parse a trace file and summarise it.
    ValidateTrace(TraceArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// JSON instance file: {"mesh": "8x8", "src": {"x": 3, "y": 3}, "dests": [...]}.
    #[arg(long, conflicts_with_all = ["src", "dests"])]
    instance: Option<PathBuf>,
    #[arg(long, default_value = "8x8")]
    mesh: MeshConfig,
    /// Source as `x,y`.
    #[arg(long)]
    src: Option<NodeCoord>,
    /// Destinations as `x,y`, separated by spaces or `;`.
    #[arg(long, num_args = 1.., value_delimiter = ';')]
    dests: Vec<NodeCoord>,
    #[arg(long, default_value = "dpm")]
    algo: PlannerKind,
    /// `include-approach-leg` or `from-representative`.
    #[arg(long, default_value = "include-approach-leg", value_parser = parse_kebab::<CostModel>)]
    cost_model: CostModel,
    /// `hamiltonian` or `xy`.
    #[arg(long, default_value = "hamiltonian", value_parser = parse_kebab::<ApproachRouting>)]
    approach: ApproachRouting,
    /// Also run the exhaustive partition search and report the gap.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct SimArgs {
    config: PathBuf,
    #[arg(long)]
    planner: Option<PlannerKind>,
    /// Injection rate (synthetic workloads only).
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the configuration's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Planners, comma separated; the first is the comparison baseline.
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<PlannerKind>>,
    /// Destination ranges as `lo-hi`, comma separated; defaults to the
    /// configured range.
    #[arg(long, value_delimiter = ',', value_parser = parse_range)]
    ranges: Option<Vec<[usize; 2]>>,
    /// Runs executed concurrently.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Configuration file; the defaults are checked when omitted.
    config: Option<PathBuf>,
    /// Random partition instances per check.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TraceArgs {
    trace: PathBuf,
    #[arg(long, default_value = "8x8")]
    mesh: MeshConfig,
}

fn parse_kebab<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> Result<[usize; 2], String> {
    let (lo, hi) = s.split_once('-').ok_or_else(|| format!("expected `lo-hi`, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
    Ok([p(lo)?, p(hi)?])
}

enum Failure {
    Usage(anyhow::Error),
    Invariant(String),
    Deadlock(Box<DeadlockReport>),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        if let Some(Error::Deadlock(report)) = e.downcast_ref::<Error>() {
            return Failure::Deadlock(report.clone());
        }
        Failure::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::from(e))
    }
}

type Outcome = Result<(), Failure>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Instance {
    #[serde(default = "default_mesh")]
    mesh: String,
    src: NodeCoord,
    dests: Vec<NodeCoord>,
}

fn default_mesh() -> String {
    "8x8".into()
}

#[derive(Serialize)]
struct OracleGap {
    exact: u32,
    dpm: u32,
    basic: u32,
    gap: u32,
}

#[derive(Serialize)]
struct PlanOutput {
    planner: PlannerKind,
    mesh: String,
    source: NodeCoord,
    destinations: Vec<NodeCoord>,
    cost_model: CostModel,
    approach: ApproachRouting,
    #[serde(skip_serializing_if = "Option::is_none")]
    partition: Option<FinalPartition>,
    plan: RoutePlan,
    planned_cost: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleGap>,
}

fn cmd_plan(a: PlanArgs) -> Outcome {
    let (mesh, src, dests) = match &a.instance {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let inst: Instance =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            (inst.mesh.parse::<MeshConfig>()?, inst.src, inst.dests)
        }
        None => {
            let src = a.src.ok_or_else(|| anyhow!("--src is required without --instance"))?;
            (a.mesh, src, a.dests.clone())
        }
    };
    let options = PlanOptions {
        cost_model: a.cost_model,
        approach: a.approach,
    };
    let route = plan(a.algo, &mesh, &dests, src, options)?;
    let partition = match a.algo {
        PlannerKind::Dpm => Some(dpm_partition(&mesh, &dests, src, a.cost_model)?),
        _ => None,
    };
    let oracle = if a.oracle {
        let dpm = dpm_partition(&mesh, &dests, src, a.cost_model)?.total_cost();
        let (exact, _) = exact_optimal_partition(&mesh, &dests, src, a.cost_model)?;
        let basic = basic_cost(&mesh, &dests, src, a.cost_model)?;
        eprintln!("gap: {}", dpm - exact);
        Some(OracleGap {
            exact,
            dpm,
            basic,
            gap: dpm - exact,
        })
    } else {
        None
    };
    let out = PlanOutput {
        planner: a.algo,
        mesh: mesh.to_string(),
        source: src,
        destinations: dests,
        cost_model: a.cost_model,
        approach: a.approach,
        partition,
        planned_cost: planned_cost(&route)?,
        plan: route,
        oracle,
    };
    write_json(std::io::stdout().lock(), &out)?;
    Ok(())
}

/// Loads `path` and applies the flags shared by `sim` and `sweep`.
fn load_config(path: &Path, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    if !path.is_file() {
        bail!("configuration file {} not found", path.display());
    }
    let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    Ok(cfg)
}

fn create_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> meshcast_core::Result<()>) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn cmd_sim(a: SimArgs) -> Outcome {
    let mut cfg = load_config(&a.config, a.seed)?;
    if let Some(p) = a.planner {
        cfg.sim.planner = p;
    }
    if a.rate.is_some() && matches!(cfg.workload, WorkloadSpec::Trace(_)) {
        return Err(Failure::Usage(anyhow!("--rate needs a synthetic workload")));
    }
    if let (Some(r), WorkloadSpec::Synthetic(t)) = (a.rate, &mut cfg.workload) {
        t.injection_rate = r;
    }
    cfg.validate()?;
    let out = a.out.unwrap_or_else(|| cfg.output_dir.clone());
    create_out(&out)?;
    let report = cfg.run(cfg.sim.planner, None)?;
    write_file(&out.join("sim.csv"), |w| write_csv(w, std::slice::from_ref(&report)))?;
    write_file(&out.join("sim.json"), |w| write_json(w, &report))?;
    println!(
        "{}: {} messages, {} deliveries, avg latency {}, energy {:.1} -> {}",
        report.planner,
        report.messages,
        report.deliveries,
        report
            .avg_delivery_latency
            .map_or_else(|| "n/a".to_string(), |l| format!("{l:.2}")),
        report.energy,
        out.display()
    );
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Outcome {
    let mut cfg = load_config(&a.config, a.seed)?;
    if let Some(algos) = a.algos {
        cfg.planners = algos;
    }
    let WorkloadSpec::Synthetic(traffic) = cfg.workload.clone() else {
        return Err(Failure::Usage(anyhow!("sweep needs a synthetic workload")));
    };
    if cfg.rates.is_empty() {
        return Err(Failure::Usage(anyhow!("the configuration has an empty rate ladder")));
    }
    let ranges = a.ranges.unwrap_or(vec![traffic.dest_range]);
    let configs: Vec<RunConfig> = ranges
        .iter()
        .map(|&r| {
            let mut c = cfg.clone();
            c.workload = WorkloadSpec::Synthetic(meshcast_core::TrafficConfig { dest_range: r, ..traffic });
            c.validate().map(|_| c)
        })
        .collect::<meshcast_core::Result<_>>()?;

    let (planners, rates) = (&cfg.planners, &cfg.rates);
    let jobs: Vec<(usize, PlannerKind, f64)> = (0..configs.len())
        .flat_map(|i| planners.iter().flat_map(move |&p| rates.iter().map(move |&r| (i, p, r))))
        .collect();
    let threads = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .context("starting worker threads")?;
    // `collect` keeps job order, so output does not depend on scheduling.
    let reports: Vec<StatsReport> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, p, r)| configs[i].run(p, Some(r)))
            .collect::<meshcast_core::Result<_>>()
    })?;

    let per_range = cfg.planners.len() * cfg.rates.len();
    let mut summaries = Vec::new();
    for (i, chunk) in reports.chunks(per_range).enumerate() {
        let sweeps: Vec<SweepResult> = chunk
            .chunks(cfg.rates.len())
            .zip(&cfg.planners)
            .map(|(rs, &p)| sweep_from_reports(p, cfg.rates.clone(), rs.to_vec(), configs[i].saturation_factor))
            .collect();
        summaries.push(SweepSummary::new(sweeps)?);
    }

    let out = a.out.unwrap_or_else(|| cfg.output_dir.clone());
    create_out(&out)?;
    write_file(&out.join("sweep.csv"), |w| write_csv(w, &reports))?;
    write_file(&out.join("sweep.json"), |w| write_json(w, &summaries))?;
    let stdout = std::io::stdout();
    let mut so = stdout.lock();
    for (s, range) in summaries.iter().zip(&ranges) {
        for sw in &s.sweeps {
            let sat = sw
                .saturation_rate
                .map_or_else(|| "not reached".to_string(), |r| format!("{r}"));
            writeln!(so, "range {}-{} {}: saturation {sat}", range[0], range[1], sw.planner).ok();
        }
    }
    writeln!(so, "{} runs -> {}", reports.len(), out.display()).ok();
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Outcome {
    let cfg = match &a.config {
        Some(p) => load_config(p, None)?,
        None => RunConfig::default(),
    };
    let outcomes = run_checks(&cfg.sim, a.instances, a.seed);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    if failed > 0 {
        return Err(Failure::Invariant(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}

fn cmd_validate_trace(a: TraceArgs) -> Outcome {
    let events = load_trace(&a.trace, &a.mesh).with_context(|| format!("reading {}", a.trace.display()))?;
    let deliveries: usize = events.iter().map(|e| e.dsts.len()).sum();
    let multicast = events.iter().filter(|e| e.dsts.len() > 1).count();
    let span = match (events.first(), events.last()) {
        (Some(f), Some(l)) => format!("cycles {}..={}", f.cycle, l.cycle),
        _ => "no events".to_string(),
    };
    println!(
        "{}: {} messages ({multicast} multicast), {deliveries} deliveries, {span} on {}",
        a.trace.display(),
        events.len(),
        a.mesh
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check(a) => cmd_check(a),
        Command::ValidateTrace(a) => cmd_validate_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Deadlock(report)) => {
            eprintln!("error: deadlock watchdog tripped\n{report}");
            ExitCode::from(3)
        }
    }
}
