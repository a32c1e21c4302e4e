//! Command-line front end. Machine-readable output goes to stdout, diagnostics
//! to stderr.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::baselines::{run_baseline, write_comparison_csv, BaselineKind, ComparisonRow};
use crate::objective::{
    LatencyBreakdown, Scenario, SplitPlan, BITS_PER_MBPS, BYTES_PER_MB, HZ_PER_GHZ,
};
use crate::optimizer::{
    enumerate_space, lmos_with, OptimizeError, OptimizedObjective, ParetoFront, RankingStrategy,
};
use crate::profile::{
    builtin_profile, derive_costs, load_profile, profile_to_json, save_profile, ModelProfile,
};
use crate::splitrt::{run_edge, ComputeMode, SplitServer};
use crate::sweep::{
    latency_curve, run_sweep, write_curve_csv, write_sweep_csv, Parameter, ParameterGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;
pub const EXIT_PROTOCOL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Network(String),
    #[error("{0}")]
    Protocol(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Network(_) => EXIT_NETWORK,
            CliError::Protocol(_) => EXIT_PROTOCOL,
        }
    }
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::NoFeasibleSplit(_) => CliError::Infeasible(e.to_string()),
            OptimizeError::Profile(_) => usage(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "splitplan",
    version,
    about = "Plan where to split a CNN between an edge device and a server"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Built-in model (alexnet, vgg13, vgg16, vgg19, mobilenetv2, synthetic-N).
    #[arg(long, required_unless_present = "profile", conflicts_with = "profile")]
    pub model: Option<String>,
    /// Profile JSON file.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

impl ModelArgs {
    pub fn load(&self) -> Result<ModelProfile, CliError> {
        match (&self.model, &self.profile) {
            (Some(name), _) => builtin_profile(name).map_err(usage),
            (None, Some(path)) => {
                load_profile(path).map_err(|e| usage(format!("{}: {e}", path.display())))
            }
            (None, None) => Err(usage("one of --model or --profile is required")),
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct ScenarioArgs {
    /// Scenario JSON file; flags below override its values.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub bandwidth_mbps: Option<f64>,
    #[arg(long)]
    pub edge_cores: Option<u32>,
    #[arg(long)]
    pub edge_clock_ghz: Option<f64>,
    /// Edge storage limit (1 MB = 10^6 bytes).
    #[arg(long)]
    pub storage_mb: Option<f64>,
    #[arg(long)]
    pub server_cores: Option<u32>,
    #[arg(long)]
    pub server_clock_ghz: Option<f64>,
    #[arg(long)]
    pub dtype_bytes: Option<u64>,
    /// Do not charge transmission when every layer runs on the edge.
    #[arg(long)]
    pub no_tx_at_full_edge: bool,
}

impl ScenarioArgs {
    pub fn build(&self) -> Result<Scenario, CliError> {
        let mut s = match &self.scenario {
            Some(path) => {
                Scenario::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => Scenario::default(),
        };
        if let Some(v) = self.bandwidth_mbps {
            s.link.bandwidth_bps = v * BITS_PER_MBPS;
        }
        if let Some(v) = self.edge_cores {
            s.edge.cores = v;
        }
        if let Some(v) = self.edge_clock_ghz {
            s.edge.clock_hz = v * HZ_PER_GHZ;
        }
        if let Some(v) = self.storage_mb {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(usage(format!(
                    "--storage-mb must be a non-negative number, got {v}"
                )));
            }
            s.edge.storage_bytes = Some((v * BYTES_PER_MB as f64).round() as u64);
        }
        if let Some(v) = self.server_cores {
            s.server.cores = v;
        }
        if let Some(v) = self.server_clock_ghz {
            s.server.clock_hz = v * HZ_PER_GHZ;
        }
        if let Some(v) = self.dtype_bytes {
            s.dtype_bytes = v;
        }
        if self.no_tx_at_full_edge {
            s.tx_at_full_edge = false;
        }
        s.validate().map_err(usage)?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Optimize {
    /// Maximize edge memory under a latency bound.
    #[default]
    Memory,
    /// Minimize latency under a memory bound.
    Latency,
}

impl From<Optimize> for OptimizedObjective {
    fn from(o: Optimize) -> Self {
        match o {
            Optimize::Memory => OptimizedObjective::Memory,
            Optimize::Latency => OptimizedObjective::Latency,
        }
    }
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// knee, paper, min-latency or weighted:LAMBDA.
    #[arg(long, default_value = "knee", value_parser = parse_strategy)]
    pub strategy: RankingStrategy,
    /// Objective held by the constrained subproblem during the sweep.
    #[arg(long, value_enum, default_value_t = Optimize::Memory)]
    pub optimize: Optimize,
}

fn parse_strategy(s: &str) -> Result<RankingStrategy, String> {
    s.parse()
}

fn parse_parameter(s: &str) -> Result<Parameter, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select one split point.
    Plan {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        rank: RankArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Print the whole Pareto front.
    Front {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        rank: RankArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Latency decomposition at every split point.
    Curve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Re-plan across a range of one scenario parameter.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// bandwidth, edge_cores, edge_clock, edge_storage, server_cores or server_clock.
        #[arg(long, value_parser = parse_parameter)]
        param: Parameter,
        /// Comma-separated ascending values; defaults to the built-in grid.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value = "knee", value_parser = parse_strategy)]
        strategy: RankingStrategy,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare the planner against the LOA, ECO, SCO and RS baselines.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        rank: RankArgs,
        /// Seed for the random-split baseline.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the server half of split execution.
    Serve {
        #[arg(long)]
        listen: String,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Busy-wait the predicted compute time for every layer.
        #[arg(long)]
        emulate_compute: bool,
        /// Exit after this many sessions.
        #[arg(long)]
        sessions: Option<usize>,
    },
    /// Run the edge half of split execution against a server.
    RunEdge {
        #[arg(long)]
        server: String,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Number of layers to run on the edge.
        #[arg(long)]
        x1: usize,
        #[arg(long)]
        emulate_compute: bool,
    },
    /// Write a built-in model's profile as JSON.
    GenProfile {
        #[arg(long)]
        model: String,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_out(
    out: &Option<PathBuf>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut file =
                File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            f(&mut file).map_err(|e| usage(format!("{}: {e}", path.display())))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(usage)
        }
    }
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn ranked_front(
    profile: &ModelProfile,
    scenario: &Scenario,
    rank: &RankArgs,
) -> Result<ParetoFront, CliError> {
    let space = enumerate_space(profile, scenario)?;
    Ok(lmos_with(&space, rank.optimize.into()).rank(rank.strategy))
}

fn plan(
    model: &ModelArgs,
    scenario: &ScenarioArgs,
    rank: &RankArgs,
    format: Format,
) -> Result<(), CliError> {
    let profile = model.load()?;
    let scenario = scenario.build()?;
    let front = ranked_front(&profile, &scenario, rank)?;
    let chosen = *front
        .selected()
        .ok_or_else(|| CliError::Infeasible("empty Pareto front".into()))?;
    let table = derive_costs(&profile, &scenario).map_err(usage)?;
    let b = LatencyBreakdown::of(chosen.plan, &table, &scenario);
    write_out(&None, |w| match format {
        Format::Json => {
            let v = json!({
                "model": profile.name,
                "x1": chosen.plan.x1(),
                "x2": chosen.plan.x2(),
                "total_layers": chosen.plan.total_layers(),
                "f1_s": chosen.eval.latency(),
                "f2_bytes": chosen.eval.memory(),
                "t_edge_s": b.t_edge,
                "t_tx_s": b.t_tx,
                "t_server_s": b.t_server,
                "strategy": rank.strategy.to_string(),
                "front_size": front.len(),
            });
            writeln!(w, "{v}")
        }
        Format::Csv => {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["model", "x1", "x2", "f1_s", "f2_bytes", "strategy"])
                .map_err(csv_io)?;
            c.write_record([
                profile.name.clone(),
                chosen.plan.x1().to_string(),
                chosen.plan.x2().to_string(),
                chosen.eval.latency().to_string(),
                chosen.eval.memory().to_string(),
                rank.strategy.to_string(),
            ])
            .map_err(csv_io)?;
            c.flush()
        }
    })
}

fn front(
    model: &ModelArgs,
    scenario: &ScenarioArgs,
    rank: &RankArgs,
    format: Format,
) -> Result<(), CliError> {
    let profile = model.load()?;
    let scenario = scenario.build()?;
    let front = ranked_front(&profile, &scenario, rank)?;
    let selected = front.selected().map(|p| p.plan);
    write_out(&None, |w| match format {
        Format::Json => w.write_all(front.to_json_lines().as_bytes()),
        Format::Csv => {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["x1", "x2", "f1_s", "f2_bytes", "selected"])
                .map_err(csv_io)?;
            for m in front.members() {
                c.write_record([
                    m.plan.x1().to_string(),
                    m.plan.x2().to_string(),
                    m.eval.latency().to_string(),
                    m.eval.memory().to_string(),
                    (selected == Some(m.plan)).to_string(),
                ])
                .map_err(csv_io)?;
            }
            c.flush()
        }
    })
}

fn curve(model: &ModelArgs, scenario: &ScenarioArgs, format: Format) -> Result<(), CliError> {
    let profile = model.load()?;
    let scenario = scenario.build()?;
    let rows = latency_curve(&profile, &scenario).map_err(usage)?;
    write_out(&None, |w| match format {
        Format::Csv => write_curve_csv(&rows, w).map_err(csv_io),
        Format::Json => {
            for r in &rows {
                let v = json!({
                    "x1": r.x1,
                    "t_edge_s": r.t_edge,
                    "t_tx_s": r.t_tx,
                    "t_server_s": r.t_server,
                    "total_s": r.total,
                });
                writeln!(w, "{v}")?;
            }
            Ok(())
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    model: &ModelArgs,
    scenario: &ScenarioArgs,
    param: Parameter,
    values: &Option<Vec<f64>>,
    strategy: RankingStrategy,
    out: &Option<PathBuf>,
    format: Format,
) -> Result<(), CliError> {
    let profile = model.load()?;
    let base = scenario.build()?;
    let values = values.clone().unwrap_or_else(|| param.default_values());
    let grid = ParameterGrid::new(param, values, base).map_err(usage)?;
    let records = run_sweep(&profile, &grid, strategy);
    for r in &records {
        if let Err(reason) = &r.outcome {
            eprintln!("{}={}: {reason}", r.parameter.name(), r.value);
        }
    }
    write_out(out, |w| match format {
        Format::Csv => write_sweep_csv(&records, w).map_err(csv_io),
        Format::Json => {
            for r in &records {
                let p = r.outcome.as_ref().ok();
                let v = json!({
                    "parameter": r.parameter.name(),
                    "value": r.value,
                    "x1": p.map(|p| p.plan.x1()),
                    "fraction": r.fraction(),
                    "f1_s": p.map(|p| p.eval.latency()),
                    "f2_bytes": p.map(|p| p.eval.memory()),
                    "strategy": r.strategy.to_string(),
                });
                writeln!(w, "{v}")?;
            }
            Ok(())
        }
    })
}

fn compare(
    model: &ModelArgs,
    scenario: &ScenarioArgs,
    rank: &RankArgs,
    seed: u64,
    format: Format,
) -> Result<(), CliError> {
    let profile = model.load()?;
    let scenario = scenario.build()?;
    let table = derive_costs(&profile, &scenario).map_err(usage)?;
    let space = enumerate_space(&profile, &scenario)?;
    let total = table.total_layers();
    let mut rows = Vec::new();
    if let Some(p) = lmos_with(&space, rank.optimize.into())
        .rank(rank.strategy)
        .selected()
    {
        rows.push(ComparisonRow::new(
            "lmos",
            &profile.name,
            p.plan,
            &table,
            &scenario,
        ));
    }
    for kind in [
        BaselineKind::Loa,
        BaselineKind::Eco,
        BaselineKind::Sco,
        BaselineKind::Rs(seed),
    ] {
        match run_baseline(kind, &space, total) {
            Ok(plan) => rows.push(ComparisonRow::new(
                kind.label(),
                &profile.name,
                plan,
                &table,
                &scenario,
            )),
            Err(e) => eprintln!("{}: {e}", kind.label()),
        }
    }
    write_out(&None, |w| match format {
        Format::Csv => write_comparison_csv(&rows, w).map_err(csv_io),
        Format::Json => {
            for r in &rows {
                let v = json!({
                    "approach": r.approach,
                    "model": r.model,
                    "x1": r.x1,
                    "f1_s": r.f1_s,
                    "f2_bytes": r.f2_bytes,
                });
                writeln!(w, "{v}")?;
            }
            Ok(())
        }
    })
}

fn serve(
    listen: &str,
    model: &ModelArgs,
    scenario: &ScenarioArgs,
    emulate: bool,
    sessions: Option<usize>,
) -> Result<(), CliError> {
    let profile = model.load()?;
    let scenario = scenario.build()?;
    let compute = if emulate {
        ComputeMode::Emulated
    } else {
        ComputeMode::Synthetic
    };
    let server = SplitServer::bind(listen, profile, scenario, compute)
        .map_err(|e| CliError::Network(format!("cannot listen on {listen}: {e}")))?;
    let addr = server
        .local_addr()
        .map_err(|e| CliError::Network(e.to_string()))?;
    eprintln!("listening on {addr}");
    let net = |e: io::Error| CliError::Network(e.to_string());
    match sessions {
        Some(n) => {
            for _ in 0..n {
                server.serve_one().map_err(net)?;
            }
            Ok(())
        }
        None => server.serve().map_err(net),
    }
}

fn run_edge_cmd(
    addr: &str,
    model: &ModelArgs,
    scenario: &ScenarioArgs,
    x1: usize,
    emulate: bool,
) -> Result<(), CliError> {
    let profile = model.load()?;
    let scenario = scenario.build()?;
    let plan = SplitPlan::new(x1, profile.total_layers()).map_err(usage)?;
    let compute = if emulate {
        ComputeMode::Emulated
    } else {
        ComputeMode::Synthetic
    };
    let report = run_edge(addr, &profile, &scenario, plan, compute).map_err(|e| {
        if e.is_network() {
            CliError::Network(e.to_string())
        } else {
            CliError::Protocol(e.to_string())
        }
    })?;
    let text = serde_json::to_string(&report).map_err(usage)?;
    write_out(&None, |w| writeln!(w, "{text}"))?;
    if report.matches {
        Ok(())
    } else {
        Err(CliError::Protocol(format!(
            "digest mismatch: got {}, expected {}",
            report.digest, report.expected_digest
        )))
    }
}

fn gen_profile(model: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    let profile = builtin_profile(model).map_err(usage)?;
    match out {
        Some(path) => {
            save_profile(&profile, path).map_err(|e| usage(format!("{}: {e}", path.display())))
        }
        None => {
            let text = serde_json::to_string_pretty(&profile_to_json(&profile)).map_err(usage)?;
            write_out(&None, |w| writeln!(w, "{text}"))
        }
    }
}

/// Executes a parsed command.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Plan {
            model,
            scenario,
            rank,
            format,
        } => plan(model, scenario, rank, *format),
        Command::Front {
            model,
            scenario,
            rank,
            format,
        } => front(model, scenario, rank, *format),
        Command::Curve {
            model,
            scenario,
            format,
        } => curve(model, scenario, *format),
        Command::Sweep {
            model,
            scenario,
            param,
            values,
            strategy,
            out,
            format,
        } => sweep(model, scenario, *param, values, *strategy, out, *format),
        Command::Compare {
            model,
            scenario,
            rank,
            seed,
            format,
        } => compare(model, scenario, rank, *seed, *format),
        Command::Serve {
            listen,
            model,
            scenario,
            emulate_compute,
            sessions,
        } => serve(listen, model, scenario, *emulate_compute, *sessions),
        Command::RunEdge {
            server,
            model,
            scenario,
            x1,
            emulate_compute,
        } => run_edge_cmd(server, model, scenario, *x1, *emulate_compute),
        Command::GenProfile { model, out } => gen_profile(model, out),
    }
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
