use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evlin::algorithms::{by_name, default_workload, FacBase};
use evlin::explorer::{distinct_histories, enumerate_runs, find_non_linearizable, find_stable_node, prefix_safety_scan, ExplorationReport};
use evlin::runtime::parse_schedule;
use evlin::{format_trace, parse_trace, run, CheckError, Checker, Schedule, TypeSpec};

mod demo;

#[derive(Parser)]
#[command(name = "evlin")]
#[command(about = "Simulate, check and explore eventually linearizable objects")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an algorithm under a schedule and emit its trace
    Run(RunArgs),
    /// Check a trace for weak consistency and t-linearizability
    Check(CheckArgs),
    /// Enumerate schedules and search the execution tree
    Explore(ExploreArgs),
    /// Run the end-to-end recipes for each construction
    Demo(DemoArgs),
}

#[derive(Args)]
struct AlgoArgs {
    /// ev-consensus | ev-tas | 2fac | direct-fac | universal:<spec>
    #[arg(long)]
    algo: String,

    /// Number of processes
    #[arg(long, default_value_t = 2)]
    procs: usize,

    /// Operations per process
    #[arg(long, default_value_t = 1)]
    ops: usize,

    /// FAC base object: atomic-fac | chaos-fac:<k>
    #[arg(long)]
    base: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    algo: AlgoArgs,

    /// rr | seed:<u64> | file:<path>
    #[arg(long, default_value = "rr")]
    schedule: String,

    /// Write the trace here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Trace file to check
    #[arg(long)]
    trace: PathBuf,

    /// Sequential type: register | consensus | tas | faa | fac
    #[arg(long = "type")]
    ty: String,

    /// Only decide t-linearizability for this t
    #[arg(long)]
    t: Option<usize>,

    /// Maximum number of operations to search
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Find {
    Nonlin,
    Stable,
    PrefixSafety,
}

#[derive(Args)]
struct ExploreArgs {
    #[command(flatten)]
    algo: AlgoArgs,

    /// Maximum scheduler ticks
    #[arg(long)]
    depth: usize,

    #[arg(long, value_enum)]
    find: Find,

    /// Ticks explored below each stable candidate (defaults to depth + 8)
    #[arg(long)]
    horizon: Option<usize>,

    /// t for the prefix-safety scan
    #[arg(long, default_value_t = 0)]
    t: usize,

    /// Maximum number of stable candidates reported
    #[arg(long, default_value_t = 10)]
    limit: usize,
}

#[derive(Args)]
struct DemoArgs {
    /// Print the recipe names without running them
    #[arg(long)]
    list: bool,

    /// Swap in a known-broken implementation to check that recipes notice
    #[arg(long, hide = true)]
    inject_fault: Option<demo::Fault>,
}

/// Outcome of a command that did not succeed.
enum Failure {
    /// Bad flags or unreadable input: exit 2.
    Usage(String),
    /// The command ran and its expectation did not hold: exit 1.
    Negative,
}

type CmdResult = Result<(), Failure>;

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::Explore(a) => cmd_explore(a),
        Command::Demo(a) => demo::run(a.list, a.inject_fault),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn algorithm(a: &AlgoArgs) -> Result<evlin::AlgorithmInstance, Failure> {
    let base = a.base.as_deref().map(FacBase::parse).transpose().map_err(usage)?;
    by_name(&a.algo, a.procs, base).map_err(usage)
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let alg = algorithm(&a.algo)?;
    let (schedule, seed, source) = if a.schedule == "rr" {
        (Schedule::RoundRobin, None, "inline")
    } else if let Some(s) = a.schedule.strip_prefix("seed:") {
        let seed: u64 = s.parse().map_err(|_| usage(format!("bad seed `{s}`")))?;
        (Schedule::Seeded { seed, crash: None }, Some(seed), "inline")
    } else if let Some(path) = a.schedule.strip_prefix("file:") {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?;
        (Schedule::Tokens(parse_schedule(&text).map_err(usage)?), None, "file")
    } else {
        return Err(usage(format!("unknown schedule `{}` (expected rr, seed:<u64> or file:<path>)", a.schedule)));
    };
    let workload = default_workload(&alg, a.algo.ops);
    let out = run(&alg, &workload, &schedule).map_err(usage)?;
    let seed = seed.map_or("none".to_string(), |s| s.to_string());
    let mut text = format!("# algo={} procs={} seed={seed} schedule={source}", alg.name, alg.procs);
    if let Some(b) = &a.algo.base {
        text.push_str(&format!(" base={b}"));
    }
    text.push('\n');
    text.push_str(&format_trace(&out.history));
    match a.out {
        Some(path) => fs::write(&path, text).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> CmdResult {
    let spec = TypeSpec::builtin(&a.ty).map_err(usage)?;
    let text = fs::read_to_string(&a.trace).map_err(|e| usage(format!("{}: {e}", a.trace.display())))?;
    let history = parse_trace(&text).map_err(usage)?;
    let mut checker = Checker::new(spec);
    if let Some(cap) = a.cap {
        checker = checker.with_cap(cap);
    }
    let report = match checker.check_eventual(&history) {
        Ok(r) => r,
        Err(CheckError::TooLarge { ops, cap }) => {
            println!("TOO_LARGE: {ops} operations exceed cap {cap}");
            return Err(Failure::Negative);
        }
        Err(e) => return Err(usage(e)),
    };
    print!("{}", report.render());
    let mut ok = report.weakly_consistent;
    if let Some(t) = a.t {
        let lin = checker.check_t_linearizable(&history, t).map_err(usage)?.is_some();
        println!("T_LINEARIZABLE({t}): {}", if lin { "yes" } else { "no" });
        ok &= lin;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}

fn cmd_explore(a: ExploreArgs) -> CmdResult {
    let alg = algorithm(&a.algo)?;
    let workload = default_workload(&alg, a.algo.ops);
    let stats = enumerate_runs(&alg, &workload, a.depth, |_, _| {}).map_err(usage)?;
    let mut report = ExplorationReport {
        algorithm: alg.name.clone(),
        depth: a.depth,
        nodes: stats.nodes,
        histories_checked: distinct_histories(&alg, &workload, a.depth).map_err(usage)?.len(),
        ..Default::default()
    };
    let ok = match a.find {
        Find::Nonlin => {
            report.counterexamples.extend(find_non_linearizable(&alg, &workload, a.depth).map_err(usage)?);
            !report.counterexamples.is_empty()
        }
        Find::Stable => {
            let horizon = a.horizon.unwrap_or(a.depth + 8);
            report.horizon = Some(horizon);
            report.stable = find_stable_node(&alg, &workload, a.depth, horizon, a.limit).map_err(usage)?;
            !report.stable.is_empty()
        }
        Find::PrefixSafety => {
            report.violations = prefix_safety_scan(&alg, &workload, a.depth, a.t).map_err(usage)?;
            report.violations.is_empty()
        }
    };
    print!("{}", report.render());
    if matches!(a.find, Find::Nonlin) && report.counterexamples.is_empty() {
        println!("NONE");
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}
