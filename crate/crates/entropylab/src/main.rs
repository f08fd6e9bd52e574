use clap::{Args, Parser, Subcommand};
use entropylab::config::{CommandKind, FileConfig, Format, Overrides, Settings};
use entropylab::report::{write_atomic, Envelope};
use entropylab::{run, selftest, LabError};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "entropylab",
    version,
    about = "Dyadic entropy-bump experiments: bump constants, operator norms, inequality ratios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bump constants and root entropies for a weight pair
    Constants(RunArgs),
    /// Operator-norm estimates with testing and embedding constants
    Norm(RunArgs),
    /// One inequality checker on one instance
    Verify(RunArgs),
    /// Annealing search for instances with large checker ratios
    Search(RunArgs),
    /// Materialize a weight spec to row-major leaf densities
    Gen(RunArgs),
    /// Check the frozen fixture suite against the live implementation
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report here (atomically) instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed for randomized routines; required by norm, verify and search
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (fallback: ENTROPYLAB_THREADS)
    #[arg(long)]
    threads: Option<usize>,
    /// Integrability exponent, in (1, inf)
    #[arg(long)]
    p: Option<f64>,
    /// Bump parameter, positive
    #[arg(long)]
    delta: Option<f64>,
    /// Dyadic depth of the model
    #[arg(long)]
    depth: Option<u32>,
    /// Ambient dimension, 1 or 2
    #[arg(long)]
    dimension: Option<u32>,
    /// Random iteration starts for norm estimation
    #[arg(long)]
    trials: Option<u32>,
    /// Annealing proposals for search
    #[arg(long)]
    budget: Option<u64>,
    /// Inequality to check: max, separated, joint-sum or ap-ainfty
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Fixture file overriding the embedded set
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Worker threads (fallback: ENTROPYLAB_THREADS)
    #[arg(long)]
    threads: Option<usize>,
}

fn env_threads() -> Result<Option<usize>, LabError> {
    match std::env::var("ENTROPYLAB_THREADS") {
        Ok(text) => text
            .parse()
            .map(Some)
            .map_err(|_| LabError::Config(format!("ENTROPYLAB_THREADS: not a thread count: `{text}`"))),
        Err(_) => Ok(None),
    }
}

fn run_report(kind: CommandKind, args: RunArgs) -> Result<ExitCode, LabError> {
    let file = match &args.config {
        Some(path) => Some(FileConfig::parse(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let flags = Overrides {
        target: args.target,
        p: args.p,
        delta: args.delta,
        dimension: args.dimension,
        depth: args.depth,
        trials: args.trials,
        budget: args.budget,
        seed: args.seed,
        out: args.out,
        format: args.format,
        threads: args.threads,
    };
    let settings = Settings::merge(kind, file, flags, env_threads()?)?;
    let start = Instant::now();
    let body = run::execute(&settings)?;
    let envelope = Envelope::new(kind.name(), start.elapsed().as_millis() as u64, body);
    let text = envelope.render(settings.format)?;
    match &settings.out {
        Some(path) => write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn run_selftest(args: SelftestArgs) -> Result<ExitCode, LabError> {
    let threads = match args.threads {
        Some(t) => t,
        None => env_threads()?.unwrap_or(1),
    };
    let file = match selftest::load_fixtures(args.fixtures.as_deref()) {
        Ok(file) => file,
        Err(message) => {
            eprintln!("selftest: {message}");
            return Ok(ExitCode::from(1));
        }
    };
    let results = selftest::run_fixtures(&file, threads);
    for result in &results {
        println!("{}", result.line());
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    if failed == 0 {
        println!("selftest: {} fixtures ok", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("selftest: {failed} of {} fixtures failed", results.len());
        Ok(ExitCode::from(1))
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, LabError> {
    match cli.command {
        Command::Constants(args) => run_report(CommandKind::Constants, args),
        Command::Norm(args) => run_report(CommandKind::Norm, args),
        Command::Verify(args) => run_report(CommandKind::Verify, args),
        Command::Search(args) => run_report(CommandKind::Search, args),
        Command::Gen(args) => run_report(CommandKind::Gen, args),
        Command::Selftest(args) => run_selftest(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}
