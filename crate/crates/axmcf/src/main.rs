use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use axmcf::config::{self, ExperimentKind, FileConfig, Overrides};
use axmcf::{commands, AppError};

/// Finite difference solver for mean curvature flow of surfaces of
/// revolution. Experiments read an optional TOML config; flags override
/// file values and the AXMCF_OUT_DIR variable overrides the output
/// directory.
#[derive(Parser)]
#[command(name = "axmcf", version)]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for all artifact files
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for the randomized suites
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct SchemeArgs {
    /// Number of grid segments J (the curve carries J+1 nodes)
    #[arg(long, value_name = "J")]
    segments: Option<usize>,
    /// Time step rule: h, h2, or fixed:<value>
    #[arg(long, value_name = "MODE")]
    dt_mode: Option<String>,
    /// Evolve until this time
    #[arg(long, value_name = "T")]
    final_time: Option<f64>,
    /// Stop after this many steps even before the final time
    #[arg(long, value_name = "N")]
    max_steps: Option<usize>,
}

#[derive(Args, Default)]
struct RunArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Initial surface: sphere:<r>, limacon:<a>, cones:<deg>[:<top>:<bottom>],
    /// csv:<file>, or shrinker:<intersections>
    #[arg(long, value_name = "SPEC")]
    initial: Option<String>,
    /// Snapshot schedule: none, every:<k>, or at:<t1,t2,...>
    #[arg(long, value_name = "WHEN")]
    snapshots: Option<String>,
    /// Count self-intersections every this many steps (0 = never)
    #[arg(long, value_name = "K")]
    intersections_every: Option<usize>,
}

#[derive(Args, Default)]
struct SweepArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Comma-separated doubling list of segment counts, e.g. 32,64,128
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    segment_list: Option<Vec<usize>>,
    /// Initial sphere radius for the exact solution
    #[arg(long, value_name = "R")]
    radius: Option<f64>,
    /// Worker threads for sweep members (0 = all cores)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args, Default)]
struct SearchArgs {
    /// Self-intersection count the profile must have
    #[arg(long, value_name = "N")]
    intersections: Option<usize>,
    /// Bisection bracket lo,hi for the starting height
    #[arg(long, value_name = "LO,HI", value_parser = parse_pair)]
    bracket: Option<(f64, f64)>,
    /// Arclength step of the shooting integrator
    #[arg(long, value_name = "DS")]
    ds: Option<f64>,
    /// Segments of the resampled profile curve
    #[arg(long, value_name = "J")]
    segments: Option<usize>,
    /// Scan lo,hi,samples for sign-change brackets before the search
    #[arg(long, value_name = "LO,HI,N", value_parser = parse_scan)]
    scan: Option<(f64, f64, usize)>,
}

#[derive(Args, Default)]
struct DiagArgs {
    /// Random grid functions to draw
    #[arg(long, value_name = "N")]
    cases: Option<usize>,
    /// Largest segment count in the randomized suites
    #[arg(long, value_name = "J")]
    max_segments: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one initial surface, recording snapshots and observables
    Run(RunArgs),
    /// Error-convergence sweep against the exact shrinking sphere
    EocSweep(SweepArgs),
    /// Scheme-residual sweep on the exact solution
    ConsistencySweep(SweepArgs),
    /// Bisection search for a self-shrinking profile curve
    ShrinkerSearch(SearchArgs),
    /// Exact-identity fuzz suites and solver cross-checks
    Diagnostics(DiagArgs),
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected two comma-separated numbers".into());
    }
    let a = parts[0].trim().parse().map_err(|_| format!("bad number '{}'", parts[0]))?;
    let b = parts[1].trim().parse().map_err(|_| format!("bad number '{}'", parts[1]))?;
    Ok((a, b))
}

fn parse_scan(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected lo,hi,samples".into());
    }
    let lo = parts[0].trim().parse().map_err(|_| format!("bad number '{}'", parts[0]))?;
    let hi = parts[1].trim().parse().map_err(|_| format!("bad number '{}'", parts[1]))?;
    let n = parts[2].trim().parse().map_err(|_| format!("bad count '{}'", parts[2]))?;
    Ok((lo, hi, n))
}

fn overrides(cli: &Cli) -> Overrides {
    let mut over = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Run(a) => {
            over.segments = a.scheme.segments;
            over.dt_mode = a.scheme.dt_mode.clone();
            over.final_time = a.scheme.final_time;
            over.max_steps = a.scheme.max_steps;
            over.initial = a.initial.clone();
            over.snapshots = a.snapshots.clone();
            over.intersections_every = a.intersections_every;
        }
        Command::EocSweep(a) | Command::ConsistencySweep(a) => {
            over.segments = a.scheme.segments;
            over.dt_mode = a.scheme.dt_mode.clone();
            over.final_time = a.scheme.final_time;
            over.max_steps = a.scheme.max_steps;
            over.segment_list = a.segment_list.clone();
            over.radius = a.radius;
            over.threads = a.threads;
        }
        Command::ShrinkerSearch(a) => {
            over.intersections = a.intersections;
            over.bracket = a.bracket;
            over.ds = a.ds;
            over.segments = a.segments;
            over.scan = a.scan;
        }
        Command::Diagnostics(a) => {
            over.cases = a.cases;
            over.max_segments = a.max_segments;
        }
    }
    over
}

fn main() {
    let cli = Cli::parse();
    let kind = match cli.command {
        Command::Run(_) => ExperimentKind::Run,
        Command::EocSweep(_) => ExperimentKind::EocSweep,
        Command::ConsistencySweep(_) => ExperimentKind::ConsistencySweep,
        Command::ShrinkerSearch(_) => ExperimentKind::ShrinkerSearch,
        Command::Diagnostics(_) => ExperimentKind::Diagnostics,
    };
    let over = overrides(&cli);

    let started = Instant::now();
    let outcome = load_and_run(&cli, kind, &over);
    // Timing goes to stderr only; the artifact files stay reproducible.
    eprintln!("elapsed {:.3}s", started.elapsed().as_secs_f64());

    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_and_run(cli: &Cli, kind: ExperimentKind, over: &Overrides) -> Result<(), AppError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = config::resolve(kind, file, over)?;
    eprintln!("writing to {}", cfg.output_dir.display());
    commands::execute(&cfg)
}
