use clap::{Args, Parser, Subcommand};
use rbal_core::experiment::{self, load_config};
use rbal_core::{DecisionProcess, Error, ErrorKind, Experiment, ExperimentConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Risk-based active learning experiments.
///
/// Exit codes: 0 success, 1 validation error, 2 numeric failure, 3 I/O failure.
#[derive(Parser, Debug)]
#[command(name = "rbal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the configured synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Active learning plus random baseline over all repetitions; writes every export.
    Run(RunArgs),
    /// Random-baseline runs only.
    Baseline(RunArgs),
    /// Rebuild learning_curve.csv from the traces.csv of a previous run.
    Curves(CurvesArgs),
    /// EVPI grid and class summaries of the first repetition's initial model.
    EvpiMap(RunArgs),
    /// Check the four-state worked example (MEU, MEU with observation, EVPI).
    VerifyExample(VerifyArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Dataset file; defaults to dataset.csv in the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides data.synthetic.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides outputs.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = true)]
struct CurvesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding traces.csv; overrides outputs.directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Take the decision tables from this config instead of the built-in example.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load(args: &RunArgs) -> Result<(Experiment, PathBuf), Error> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.outputs.directory = out.clone();
    }
    let dir = cfg.outputs.directory.clone();
    Ok((Experiment::new(cfg)?, dir))
}

fn generate(args: &GenerateArgs) -> Result<(), Error> {
    let mut cfg = load_config(&args.config)?;
    if let (Some(seed), Some(spec)) = (args.seed, cfg.data.synthetic.as_mut()) {
        spec.seed = seed;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.outputs.directory.join("dataset.csv"));
    let rows = experiment::generate(&cfg, &out)?;
    println!("{}: {rows} rows", out.display());
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let (exp, dir) = load(args)?;
    let report = experiment::run(&exp, &dir)?;
    let mc = &report.result;
    let queries: Vec<usize> = mc.repetitions.iter().map(|r| r.active.queries()).collect();
    let mean = queries.iter().sum::<usize>() as f64 / queries.len() as f64;
    eprintln!(
        "{} repetitions, mean active queries {mean:.1}, final accuracy active {:.4} random {:.4}",
        mc.repetitions.len(),
        final_mean(mc.repetitions.iter().map(|r| &r.active.accuracy)),
        final_mean(mc.repetitions.iter().map(|r| &r.random.accuracy)),
    );
    println!("{}", dir.display());
    Ok(())
}

fn final_mean<'a>(traces: impl Iterator<Item = &'a Vec<f64>>) -> f64 {
    let last: Vec<f64> = traces.filter_map(|t| t.last().copied()).collect();
    last.iter().sum::<f64>() / last.len().max(1) as f64
}

fn baseline(args: &RunArgs) -> Result<(), Error> {
    let (exp, dir) = load(args)?;
    experiment::baseline(&exp, &dir)?;
    println!("{}", dir.display());
    Ok(())
}

fn curves(args: &CurvesArgs) -> Result<(), Error> {
    let dir = match (&args.out, &args.config) {
        (Some(out), _) => out.clone(),
        (None, Some(config)) => load_config(config)?.outputs.directory,
        (None, None) => unreachable!("clap requires one of --config or --out"),
    };
    let (active, random) = experiment::curves(&dir)?;
    eprintln!(
        "{} active and {} random traces",
        active.repetitions, random.repetitions
    );
    println!("{}", dir.join(rbal_core::export::CURVE_FILE).display());
    Ok(())
}

fn evpi_map(args: &RunArgs) -> Result<(), Error> {
    let (exp, dir) = load(args)?;
    let grid = experiment::evpi_map(&exp, &dir)?;
    eprintln!(
        "{} cells, max EVPI {:.6}, inspection cost {}",
        grid.values.len(),
        grid.max(),
        exp.config.decision.inspection_cost()
    );
    println!("{}", dir.join(rbal_core::export::GRID_INITIAL_FILE).display());
    Ok(())
}

fn verify_example(args: &VerifyArgs) -> Result<bool, Error> {
    let dp = match &args.config {
        Some(path) => decision_only(path)?,
        None => DecisionProcess::synthetic_example(),
    };
    let checks = experiment::verify_example(&dp)?;
    for c in &checks {
        println!(
            "{:<12} expected {:>8} got {:<22} delta {:+.3e} {}",
            c.name,
            c.expected,
            c.actual,
            c.delta(),
            if c.passed() { "PASS" } else { "FAIL" }
        );
    }
    let ok = checks.iter().all(|c| c.passed());
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn decision_only(path: &Path) -> Result<DecisionProcess, Error> {
    let cfg: ExperimentConfig = load_config(path)?;
    Ok(cfg.decision)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Baseline(a) => baseline(a),
        Command::Curves(a) => curves(a),
        Command::EvpiMap(a) => evpi_map(a),
        Command::VerifyExample(a) => match verify_example(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(ErrorKind::Numeric.exit_code() as u8),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
