use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use qsplit::harness::{emit_csv, emit_svg, read_csv, run_experiment, write_csv, Backend, ConvergenceReport, ExperimentConfig};
use qsplit::lowdisc::{
    discrepancy_bound, measure_decomposition, wasserstein_bound, DiscrepancySweep, RadicalInverseSequence, SignSequence,
};

/// Exit status when some rows of a sweep failed but the rest were written.
const PARTIAL_FAILURE: u8 = 2;
const THREADS_VAR: &str = "QSPLIT_THREADS";

#[derive(Parser)]
#[command(name = "qsplit", version, about = "Quasi-random operator splitting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Radical-inverse points, signs, discrepancy or measure decomposition.
    Seq(SeqArgs),
    /// Convergence sweep on random bounded matrices.
    Linear(LinearArgs),
    /// Convergence sweep on the periodic Allen–Cahn equation.
    AllenCahn(AllenCahnArgs),
    /// Summarise a CSV report and optionally plot it.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    /// `n,z,xi,S_n` per point.
    Points,
    /// Same columns as `points`.
    Signs,
    /// `N,Dstar,bound` for every prefix length.
    Discrepancy,
    /// `N,S_N,tv_residual,W1,bound` for every prefix length with `τ = 1/N`.
    Decomposition,
}

#[derive(Args)]
struct SeqArgs {
    #[arg(long, default_value_t = 2)]
    base: u32,
    #[arg(long, short = 'n', default_value_t = 16)]
    count: usize,
    /// Skip this many points before the first one used.
    #[arg(long, default_value_t = 0)]
    offset: u64,
    #[arg(long, value_enum, default_value = "points")]
    emit: Emit,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Key-value config file; flags override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set taus=2^-4..2^-6`. Repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Horizon.
    #[arg(long = "T", value_name = "T")]
    horizon: Option<String>,
    /// Time steps: a power range `2^-4..2^-8` or a comma list.
    #[arg(long)]
    taus: Option<String>,
    /// Comma list of qr, rand, lie, strang.
    #[arg(long)]
    policies: Option<String>,
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Radical-inverse base of the qr driver.
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    offset: Option<String>,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write a log-log plot.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct LinearArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Matrix dimension.
    #[arg(long)]
    m: Option<String>,
    /// Number of operators.
    #[arg(long)]
    p: Option<String>,
}

#[derive(Args)]
struct AllenCahnArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Points per side of the periodic grid.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    /// `none` or `shear`; shear adds a third, advective operator.
    #[arg(long)]
    flow: Option<String>,
    /// Comma list of l2, w12.
    #[arg(long)]
    norms: Option<String>,
    /// Step of the reference solver.
    #[arg(long)]
    tau_ref: Option<String>,
    /// Largest accepted reference self-convergence gap, or `off`.
    #[arg(long)]
    gate: Option<String>,
    /// RK4 substeps per advection step.
    #[arg(long)]
    substeps: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in", value_name = "FILE.csv")]
    input: PathBuf,
    #[arg(long, value_name = "FILE.svg")]
    svg: Option<PathBuf>,
}

/// A fatal error; always exits with status 1.
#[derive(Debug)]
struct Fatal(String);

impl From<qsplit::Error> for Fatal {
    fn from(e: qsplit::Error) -> Self {
        Fatal(e.to_string())
    }
}

impl From<io::Error> for Fatal {
    fn from(e: io::Error) -> Self {
        Fatal(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::FAILURE,
            };
        }
    };
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(code) => code,
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn configure_threads() -> Result<(), Fatal> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Fatal(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Fatal(format!("cannot build thread pool: {e}")))
}

fn dispatch(command: Command) -> Result<ExitCode, Fatal> {
    match command {
        Command::Seq(args) => sequence(&args).map(|()| ExitCode::SUCCESS),
        Command::Linear(args) => {
            let extra = [("m", &args.m), ("p", &args.p)];
            sweep(Backend::Linear, &args.sweep, &extra)
        }
        Command::AllenCahn(args) => {
            let extra = [
                ("grid", &args.grid),
                ("nu", &args.nu),
                ("flow", &args.flow),
                ("norms", &args.norms),
                ("tau_ref", &args.tau_ref),
                ("gate", &args.gate),
                ("substeps", &args.substeps),
            ];
            sweep(Backend::AllenCahn, &args.sweep, &extra)
        }
        Command::Report(args) => report(&args).map(|()| ExitCode::SUCCESS),
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Fatal> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Fatal(format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sequence(args: &SeqArgs) -> Result<(), Fatal> {
    let points: Vec<f64> = RadicalInverseSequence::with_offset(args.base, args.offset)?.take(args.count).collect();
    let signs = SignSequence::from_sequence(RadicalInverseSequence::with_offset(args.base, args.offset)?, args.count)?;
    let mut out = output(args.out.as_ref())?;
    match args.emit {
        Emit::Points | Emit::Signs => {
            writeln!(out, "n,z,xi,S_n")?;
            for (k, (z, xi)) in points.iter().zip(signs.signs()).enumerate() {
                writeln!(out, "{},{z},{xi},{}", args.offset + k as u64 + 1, signs.partial_sums()[k + 1])?;
            }
        }
        Emit::Discrepancy => {
            writeln!(out, "N,Dstar,bound")?;
            let mut sweep = DiscrepancySweep::new();
            for (k, &z) in points.iter().enumerate() {
                sweep.push(z);
                let d = sweep.discrepancy().expect("non-empty");
                writeln!(out, "{},{d:e},{:e}", k + 1, discrepancy_bound(args.base, k + 1))?;
            }
        }
        Emit::Decomposition => {
            writeln!(out, "N,S_N,tv_residual,W1,bound")?;
            for n in 1..=args.count {
                let prefix = SignSequence::from_signs(signs.signs()[..n].to_vec());
                let tau = 1.0 / n as f64;
                let d = measure_decomposition(&prefix, tau, &[1.0])?;
                let w1 = d.wasserstein(1.0).map(|w| format!("{w:e}")).unwrap_or_default();
                writeln!(out, "{n},{},{},{w1},{:e}", prefix.total(), d.tv_residual, wasserstein_bound(args.base, tau, n))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn resolve_config(
    backend: Backend,
    args: &SweepArgs,
    extra: &[(&str, &Option<String>)],
) -> Result<ExperimentConfig, Fatal> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
            // A backend line in the file wins over this default, and is then
            // checked against the subcommand.
            let config = ExperimentConfig::parse(&format!("backend = {}\n{text}", backend.name()))
                .map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
            if config.backend != backend {
                return Err(Fatal(format!(
                    "{} describes a {} experiment, not {}",
                    path.display(),
                    config.backend.name(),
                    backend.name()
                )));
            }
            config
        }
        None => ExperimentConfig::desk(backend),
    };
    let common = [
        ("horizon", &args.horizon),
        ("taus", &args.taus),
        ("policies", &args.policies),
        ("ensemble", &args.ensemble),
        ("seed", &args.seed),
        ("base", &args.base),
        ("offset", &args.offset),
    ];
    for &(key, value) in common.iter().chain(extra) {
        if let Some(v) = value {
            config.set(key, v)?;
        }
    }
    for pair in &args.overrides {
        let (key, value) =
            pair.split_once('=').ok_or_else(|| Fatal(format!("--set expects KEY=VALUE, got `{pair}`")))?;
        if key.trim() == "backend" {
            return Err(Fatal("the backend is chosen by the subcommand".into()));
        }
        config.set(key.trim(), value)?;
    }
    config.validate()?;
    Ok(config)
}

fn sweep(backend: Backend, args: &SweepArgs, extra: &[(&str, &Option<String>)]) -> Result<ExitCode, Fatal> {
    let config = resolve_config(backend, args, extra)?;
    if args.print_config {
        print!("{}", config.canonical());
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("config {}: {} policies x {} steps", config.hash(), config.policies.len(), config.taus.len());
    let report = run_experiment(&config)?;
    match &args.out {
        Some(path) => emit_csv(&report, path)?,
        None => {
            let stdout = io::stdout().lock();
            write_csv(&report, stdout).map_err(|e| Fatal(format!("writing CSV to stdout: {e}")))?;
        }
    }
    if let Some(path) = &args.svg {
        emit_svg(&report, path)?;
    }
    summarize(&report);
    if let Some(gap) = report.reference_gap {
        eprintln!("reference self-convergence gap {gap:.3e}");
    }
    for f in &report.failures {
        eprintln!("failed: {} at tau {:e}: {}", f.policy, f.tau, f.message);
    }
    Ok(ExitCode::from(exit_status(&report)))
}

fn exit_status(report: &ConvergenceReport) -> u8 {
    if report.is_complete() { 0 } else { PARTIAL_FAILURE }
}

fn summarize(report: &ConvergenceReport) {
    for s in &report.fits {
        let note = if s.fit.degenerate { " (errors at round-off)" } else { "" };
        eprintln!("{:>7} {:<4} slope {:.3}{note}", s.policy, s.norm, s.fit.slope);
    }
}

fn report(args: &ReportArgs) -> Result<(), Fatal> {
    let report = read_csv(&args.input)?;
    println!("config {}: {} rows", report.config_hash, report.rows.len());
    for s in &report.fits {
        println!("{:>7} {:<4} slope {:.3} (residual {:.3})", s.policy, s.norm, s.fit.slope, s.fit.residual);
    }
    if let Some(path) = &args.svg {
        emit_svg(&report, path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
