use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use flexbus_core::scenario::CASES;
use flexbus_core::{builtin_case, run, validate_scenario, Error, ScenarioSpec, Summary, Trace};

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_COLLAPSE: u8 = 3;

/// DC bus microgrid simulator with multi-node droop flexible control.
#[derive(Debug, Parser)]
#[command(name = "flexbus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario file or a built-in case.
    Run(RunArgs),
    /// Check a scenario file and list every violation.
    Validate { scenario: PathBuf },
    /// Describe the built-in cases.
    Cases,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(required_unless_present = "case", conflicts_with = "case")]
    scenario: Option<PathBuf>,
    /// Built-in case number (1, 2 or 3).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    case: Option<u32>,
    /// Trace CSV path [default: <name>.csv].
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Summary JSON path [default: <name>.summary.json].
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Also write whitespace-separated columns for gnuplot.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    /// Override the time step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the end time (s).
    #[arg(long)]
    t_end: Option<f64>,
    /// Override the random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the report.
    #[arg(long)]
    quiet: bool,
}

/// A failed command: exit code plus message for stderr.
struct Failure(u8, String);

type CmdResult = Result<u8, Failure>;

fn load(path: &Path) -> Result<ScenarioSpec, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure(EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    ScenarioSpec::from_json(&text).map_err(|e| match e {
        Error::Json(ref j) if j.to_string().starts_with("unknown field") => {
            Failure(EXIT_INVALID, format!("{}: {j}", path.display()))
        }
        other => Failure(EXIT_IO, format!("{}: {other}", path.display())),
    })
}

fn check(spec: &ScenarioSpec) -> Result<(), Failure> {
    let violations = validate_scenario(spec);
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = violations.iter().map(ToString::to_string).collect();
    Err(Failure(EXIT_INVALID, lines.join("\n")))
}

fn cmd_validate(path: &Path) -> CmdResult {
    check(&load(path)?)?;
    Ok(0)
}

struct OutputPaths {
    trace: PathBuf,
    summary: PathBuf,
    gnuplot: Option<PathBuf>,
}

impl OutputPaths {
    fn new(args: &RunArgs, name: &str) -> Result<Self, Failure> {
        let paths = Self {
            trace: args.trace.clone().unwrap_or_else(|| format!("{name}.csv").into()),
            summary: args.summary.clone().unwrap_or_else(|| format!("{name}.summary.json").into()),
            gnuplot: args.gnuplot.clone(),
        };
        let all: Vec<&PathBuf> = [Some(&paths.trace), Some(&paths.summary), paths.gnuplot.as_ref()]
            .into_iter()
            .flatten()
            .collect();
        for (i, a) in all.iter().enumerate() {
            if all[..i].iter().any(|b| same_path(a, b)) {
                return Err(Failure(EXIT_INVALID, format!("output path {} used twice", a.display())));
            }
        }
        Ok(paths)
    }
}

fn same_path(a: &Path, b: &Path) -> bool {
    let normal = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    normal(a).components().eq(normal(b).components())
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(|e| Failure(EXIT_IO, format!("{e:#}")))
}

fn cmd_run(args: &RunArgs) -> CmdResult {
    let mut spec = match (&args.scenario, args.case) {
        (_, Some(n)) => builtin_case(n).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?,
        (Some(path), None) => load(path)?,
        (None, None) => unreachable!("clap requires a scenario or a case"),
    };
    if let Some(dt) = args.dt {
        spec.dt = dt;
    }
    if let Some(t_end) = args.t_end {
        spec.t_end = t_end;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    check(&spec)?;
    let out = OutputPaths::new(args, &spec.name)?;

    let (trace, summary) = run(&spec).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
    write(&out.trace, &trace.to_csv())?;
    write(&out.summary, &summary.to_json())?;
    if let Some(path) = &out.gnuplot {
        write(path, &trace.to_gnuplot())?;
    }
    if !args.quiet {
        print!("{}", report(&trace, &summary, &out));
    }
    Ok(if summary.is_collapsed() { EXIT_COLLAPSE } else { 0 })
}

fn report(trace: &Trace, s: &Summary, out: &OutputPaths) -> String {
    let mut r = format!("scenario   {}\nsteps      {}\n", s.scenario, s.steps);
    match s.final_bus_v {
        Some(u) => r += &format!("final bus  {u:.3} V\n"),
        None => r += "final bus  -\n",
    }
    if let Some(t) = s.collapsed_at_s {
        r += &format!("COLLAPSED  at t = {t:.3} s (no droop node left)\n");
    }
    r += "steady power:\n";
    for (p, kind) in s.steady_power.iter().zip(&trace.node_kinds) {
        r += &format!("  {:<8} {:<8} {:>9.3} kW\n", p.node, kind.label(), p.p_kw);
    }
    r += &format!("trips: {}\n", s.trips.len());
    for t in &s.trips {
        r += &format!("  t = {:.3} s  u = {:.3} V  du = {:+.3} V\n", t.t, t.u, t.delta_u);
    }
    r += &format!("dispatches: {}\n", s.dispatches.len());
    for d in &s.dispatches {
        r += &format!("  t = {:.3} s  {:<8} {:+.3} kW\n", d.t_s, d.node, d.delta_p_kw);
    }
    if s.total_deficit_kw > 0.0 {
        r += &format!("unallocated {:.3} kW\n", s.total_deficit_kw);
    }
    for text in &s.rejected_commands {
        r += &format!("rejected: {text}\n");
    }
    if s.dropped_messages > 0 {
        r += &format!("dropped messages: {}\n", s.dropped_messages);
    }
    r += &format!("trace      {}\nsummary    {}\n", out.trace.display(), out.summary.display());
    if let Some(g) = &out.gnuplot {
        r += &format!("gnuplot    {}\n", g.display());
    }
    r
}

fn cases_text() -> String {
    let mut r = String::new();
    for info in &CASES {
        let spec = builtin_case(info.number).expect("built-in case");
        let params: Vec<String> = spec
            .nodes
            .iter()
            .map(|n| {
                let mut p = format!("{} {} kW k={}", n.kind.label(), n.p_rated, n.k);
                if let Some(soc) = n.soc_pct {
                    p += &format!(" SOC {soc}");
                }
                p
            })
            .collect();
        let modes: Vec<String> = spec
            .nodes
            .iter()
            .map(|n| format!("{} {}", n.kind.label(), n.initial_mode.code()))
            .collect();
        r += &format!("Case {}: {}\n", info.number, info.title);
        r += &format!("  parameters: {}\n", params.join(", "));
        r += &format!("  bus: {} V nominal, trip at +/-{} V\n", spec.bus.u_nominal, spec.bus.du_set);
        r += &format!("  modes: {}\n", modes.join(", "));
        r += &format!("  conditions: {}\n", info.conditions);
        r += &format!("  expected: {}\n\n", info.expected);
    }
    r
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::Cases => {
            print!("{}", cases_text());
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, message)) => {
            eprintln!("{message}");
            ExitCode::from(code)
        }
    }
}
