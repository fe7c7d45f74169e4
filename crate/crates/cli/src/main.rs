use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use elastica::energy::{discrete_energy, elastica_energy};
use elastica::geometry::{angles_from_chain, AngleVector, Chain, Perturbed};
use elastica::io::{angle_from_csv, angle_to_csv, angles_from_json, emit_svg, parse_eps, parse_perturbation, CurveSpec, Shape};
use elastica::minimize::{jensen_bound, multi_start, write_starts_csv, MinimizeOptions};
use elastica::potential::PotentialSpec;
use elastica::recovery::{convergence_study, inscribe};
use elastica::smoothing::{project_to_closed, smooth_constrained_with, DEFAULT_SAMPLES};
use elastica::verify::{render_table, run_all};

/// Discrete bending energies of closed chains and their elastica limit.
#[derive(Parser, Debug)]
#[command(name = "elastica", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate an energy.
    #[command(subcommand)]
    Energy(EnergyCommand),
    /// Minimize the discrete energy from random admissible starts.
    Minimize(MinimizeArgs),
    /// Inscribe equilateral chains in a curve and tabulate the energy gap.
    Recover(RecoverArgs),
    /// Replace a sampled angle function by a closed C2 one nearby.
    Smooth(SmoothArgs),
    /// Close a perturbed circle with two bump corrections.
    Project(ProjectArgs),
    /// Inspect a chain.
    #[command(subcommand)]
    Chain(ChainCommand),
    /// Run every acceptance check and print the pass/fail table.
    VerifyAll(VerifyArgs),
}

fn potential_arg(s: &str) -> std::result::Result<PotentialSpec, String> {
    PotentialSpec::by_name(s).map_err(|e| e.to_string())
}

fn curve_arg(s: &str) -> std::result::Result<CurveSpec, String> {
    CurveSpec::parse(s).map_err(|e| e.to_string())
}

/// Steps of a `--eps` sweep.
#[derive(Clone, Debug)]
struct Sweep(Vec<f64>);

fn eps_arg(s: &str) -> std::result::Result<Sweep, String> {
    parse_eps(s).map(Sweep).map_err(|e| e.to_string())
}

fn single_eps_arg(s: &str) -> std::result::Result<f64, String> {
    match eps_arg(s)?.0.as_slice() {
        [eps] => Ok(*eps),
        _ => Err(format!("expected a single step 1/N, got '{s}'")),
    }
}

fn perturbation_arg(s: &str) -> std::result::Result<(f64, u32), String> {
    parse_perturbation(s).map_err(|e| e.to_string())
}

fn positive_arg(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args, Debug)]
struct PotentialArg {
    /// canonical, log-cosine or stiff.
    #[arg(long, default_value = "canonical", value_parser = potential_arg)]
    potential: PotentialSpec,
}

#[derive(Subcommand, Debug)]
enum EnergyCommand {
    /// Discrete energy of an angle vector read from JSON.
    Discrete {
        #[arg(long)]
        angles: PathBuf,
        /// Step `1/N`; defaults to the reciprocal of the vector length.
        #[arg(long, value_parser = single_eps_arg)]
        eps: Option<f64>,
        #[command(flatten)]
        potential: PotentialArg,
    },
    /// Elastica energy of a limit curve.
    Elastica {
        #[arg(long, default_value = "circle", value_parser = curve_arg)]
        curve: CurveSpec,
        #[command(flatten)]
        potential: PotentialArg,
    },
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Projected-gradient stopping tolerance.
    #[arg(long, default_value_t = 1e-8, value_parser = positive_arg)]
    tol: f64,
    #[command(flatten)]
    potential: PotentialArg,
    /// Write the per-start table here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    /// circle, perturbed:a=<r>,m=<k> or file:<path>.
    #[arg(long, default_value = "circle", value_parser = curve_arg)]
    curve: CurveSpec,
    /// `1/N` or a halving sweep `1/A..1/B`.
    #[arg(long, default_value = "1/16..1/256", value_parser = eps_arg)]
    eps: Sweep,
    #[command(flatten)]
    potential: PotentialArg,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Curve with the chain of the first step drawn on top.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SmoothArgs {
    /// `s,theta` CSV of a closed angle function.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = positive_arg)]
    delta: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// `a=<r>,m=<k>`.
    #[arg(long, value_parser = perturbation_arg)]
    expr: (f64, u32),
    #[arg(long)]
    out: PathBuf,
    /// Rows written to the output CSV, minus one.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

#[derive(Subcommand, Debug)]
enum ChainCommand {
    /// Summary of a chain read from JSON.
    Show {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        potential: PotentialArg,
    },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Shorter recovery sweep, 1/8..1/64.
    #[arg(long)]
    quick: bool,
}

/// A numerical check that ran but did not pass.
#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ELASTICA_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().with_context(|| format!("ELASTICA_THREADS='{value}'"))?;
    if n == 0 {
        bail!("ELASTICA_THREADS must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_stdout(path: Option<&Path>, body: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(body)?;
            Ok(())
        }
    }
}

fn energy(cmd: EnergyCommand) -> Result<()> {
    match cmd {
        EnergyCommand::Discrete { angles, eps, potential } => {
            let a: AngleVector = angles_from_json(&read(&angles)?)?;
            let e = discrete_energy(&a, eps.unwrap_or(a.eps()), &potential.potential)?;
            println!("{e}");
        }
        EnergyCommand::Elastica { curve, potential } => {
            let c = curve.build()?;
            println!("{}", elastica_energy(&c, &potential.potential));
        }
    }
    Ok(())
}

fn minimize(args: MinimizeArgs) -> Result<()> {
    let p = args.potential.potential;
    let opts = MinimizeOptions { tol: args.tol, ..MinimizeOptions::default() };
    let rows = multi_start(args.n, args.starts, args.seed, &p, &opts)?;
    let mut buf = Vec::new();
    write_starts_csv(&rows, &mut buf)?;
    write_or_stdout(args.csv.as_deref(), &buf)?;
    let bound = jensen_bound(args.n, 1.0 / args.n as f64, &p)?;
    let worst = rows.iter().map(|r| r.gap_to_jensen.abs()).fold(0.0, f64::max);
    eprintln!("jensen bound {bound:.6}, worst gap {worst:.6e}, {} starts", rows.len());
    if let Some(r) = rows.iter().find(|r| !r.converged) {
        return Err(CheckFailed(format!(
            "start {} did not converge: energy {:.6}, gap {:.6e}",
            r.start_id, r.final_energy, r.gap_to_jensen
        ))
        .into());
    }
    Ok(())
}

fn recover(args: RecoverArgs) -> Result<()> {
    let p = args.potential.potential;
    let eps = args.eps.0;
    let curve = args.curve.build()?;
    let study = convergence_study(&curve, &eps, &p)?;
    let mut buf = Vec::new();
    study.write_csv(&mut buf)?;
    write_or_stdout(args.csv.as_deref(), &buf)?;
    if let Some(svg) = args.svg {
        let ins = inscribe(&curve, eps[0])?;
        emit_svg(&[Shape::Curve(&curve), Shape::Polygon(ins.chain.points())], &svg)?;
    }
    Ok(())
}

fn smooth(args: SmoothArgs) -> Result<()> {
    let theta = angle_from_csv(&read(&args.input)?)?;
    let r = smooth_constrained_with(theta.as_ref(), args.delta, args.samples)?;
    fs::write(&args.out, r.angle.to_csv()).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(svg) = args.svg {
        emit_svg(&[Shape::Curve(&r.curve)], &svg)?;
    }
    println!(
        "width {:.6} amplitude {:.6} delta1 {:.6e} delta2 {:.6e} h1 distance {:.6e}",
        r.width, r.amplitude, r.delta1, r.delta2, r.h1_distance
    );
    Ok(())
}

fn project(args: ProjectArgs) -> Result<()> {
    if args.samples < 4 {
        bail!("--samples must be at least 4");
    }
    let (amplitude, mode) = args.expr;
    let curve = project_to_closed(Arc::new(Perturbed { amplitude, mode }))?;
    fs::write(&args.out, angle_to_csv(&curve, args.samples)).with_context(|| format!("writing {}", args.out.display()))?;
    let (c, s) = curve.closure_integrals();
    println!("closure residual ({c:.3e}, {s:.3e})");
    Ok(())
}

fn chain(cmd: ChainCommand) -> Result<()> {
    match cmd {
        ChainCommand::Show { input, svg, potential } => {
            let chain = Chain::from_json(&read(&input)?)?;
            let a = angles_from_chain(&chain)?;
            let e = discrete_energy(&a, chain.eps(), &potential.potential)?;
            let (c, s) = a.closure_residual();
            println!("links {}", chain.n());
            println!("eps {:.6}", chain.eps());
            println!("closure residual ({c:.3e}, {s:.3e})");
            println!("energy {e:.6}");
            if let Some(path) = svg {
                emit_svg(&[Shape::Polygon(chain.points())], &path)?;
            }
        }
    }
    Ok(())
}

fn verify_all(args: VerifyArgs) -> Result<()> {
    let results = run_all(args.quick);
    print!("{}", render_table(&results));
    let failing: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.line()).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed(failing.join("\n")).into())
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Energy(cmd) => energy(cmd),
        Command::Minimize(args) => minimize(args),
        Command::Recover(args) => recover(args),
        Command::Smooth(args) => smooth(args),
        Command::Project(args) => project(args),
        Command::Chain(cmd) => chain(cmd),
        Command::VerifyAll(args) => verify_all(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<CheckFailed>().is_some() {
                eprintln!("check failed:\n{e}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}
