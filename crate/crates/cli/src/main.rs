//! Command line front end: analytic threshold queries, curve export,
//! equivalence certification, instance generation, single solves and Monte
//! Carlo phase diagrams.
//!
//! Exit codes: 0 success, 1 runtime/assertion failure, 2 usage error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use l1phase_core::harness::{self, EnsembleSpec, NonzeroLaw, SolverKind};
use l1phase_core::solvers::{amp_solve, basis_pursuit_solve, omp_solve, RecoveryOutcome};
use l1phase_core::thresholds::{self, Method};
use l1phase_core::{SolverOptions, Tolerance};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "l1phase",
    version,
    about = "Weak phase-transition curves and sparse recovery experiments for random underdetermined systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the weak threshold beta_w at a single alpha
    Threshold {
        /// Aspect ratio m/n in (0, 1]
        #[arg(long)]
        alpha: f64,
        /// geom | fund | amp | all
        #[arg(long, default_value = "all")]
        method: String,
        /// Root/maximizer tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Compute a threshold curve over an alpha grid and write it as CSV
    Curve {
        /// Grid as start:stop:step, e.g. 0.05:0.95:0.05
        #[arg(long)]
        grid: String,
        /// geom | fund | amp
        #[arg(long)]
        method: String,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Certify that the three characterizations agree on a grid
    Equivalence {
        #[arg(long, default_value = "0.05:0.95:0.05")]
        grid: String,
        /// Maximum allowed pairwise deviation
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Generate a random planted instance and write it as JSON
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        /// standard-normal | rademacher
        #[arg(long, default_value = "standard-normal")]
        law: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a stored instance with one solver
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// amp | bp | omp
        #[arg(long)]
        solver: String,
        /// Run the dual-certificate check (basis pursuit only)
        #[arg(long, default_value_t = false)]
        certify: bool,
    },
    /// Run a Monte Carlo phase diagram and write it as CSV
    Phase {
        #[arg(long)]
        n: usize,
        /// Alpha grid as start:stop:step
        #[arg(long = "alpha-grid")]
        alpha_grid: String,
        /// Beta grid as start:stop:step (absolute, or multiples of
        /// beta_w(alpha) with --relative)
        #[arg(long = "beta-grid")]
        beta_grid: String,
        /// Interpret the beta grid as multiples of the analytic threshold
        #[arg(long, default_value_t = false)]
        relative: bool,
        #[arg(long)]
        trials: usize,
        /// amp | bp | omp
        #[arg(long)]
        solver: String,
        #[arg(long)]
        seed: u64,
        /// standard-normal | rademacher
        #[arg(long, default_value = "standard-normal")]
        law: String,
        /// Worker threads (defaults to the number of cores)
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CmdError {
    Usage(String),
    Runtime(String),
    /// Checks ran but did not pass (e.g. equivalence beyond tolerance).
    Failed,
}

impl From<l1phase_core::Error> for CmdError {
    fn from(e: l1phase_core::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CmdError> {
    Err(CmdError::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Failed) => ExitCode::from(1),
    }
}

fn run(command: Command) -> Result<(), CmdError> {
    match command {
        Command::Threshold { alpha, method, tol } => cmd_threshold(alpha, &method, tol),
        Command::Curve { grid, method, out, tol } => cmd_curve(&grid, &method, &out, tol),
        Command::Equivalence { grid, tol } => cmd_equivalence(&grid, tol),
        Command::Gen { n, m, k, seed, law, out } => cmd_gen(n, m, k, seed, &law, &out),
        Command::Solve { instance, solver, certify } => cmd_solve(&instance, &solver, certify),
        Command::Phase {
            n,
            alpha_grid,
            beta_grid,
            relative,
            trials,
            solver,
            seed,
            law,
            threads,
            out,
        } => cmd_phase(n, &alpha_grid, &beta_grid, relative, trials, &solver, seed, &law, threads, &out),
    }
}

fn check_alpha_flag(alpha: f64) -> Result<(), CmdError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return usage(format!("--alpha must lie in (0, 1], got {alpha}"));
    }
    Ok(())
}

fn make_tolerance(tol: f64) -> Result<Tolerance, CmdError> {
    Tolerance::new(tol, 1e-12, 300).map_err(|e| CmdError::Usage(e.to_string()))
}

/// Parses `start:stop:step` into an inclusive grid; locale-independent.
fn parse_grid(s: &str) -> Result<Vec<f64>, CmdError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return usage(format!("grid must be start:stop:step, got {s:?}"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CmdError::Usage(format!("grid has non-numeric fields: {s:?}")))?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !start.is_finite() || !stop.is_finite() || !(step > 0.0) {
        return usage(format!("grid requires finite bounds and step > 0, got {s:?}"));
    }
    if stop < start {
        return usage(format!("grid stop {stop} below start {start}"));
    }
    let count = ((stop - start) / step + 1.5).floor() as usize;
    let grid: Vec<f64> = (0..count)
        .map(|i| start + step * i as f64)
        .filter(|v| *v <= stop + 1e-9 * step)
        .collect();
    if grid.is_empty() {
        return usage(format!("grid {s:?} is empty"));
    }
    Ok(grid)
}

fn parse_method(s: &str) -> Result<Method, CmdError> {
    Method::parse(s).map_err(|_| CmdError::Usage(format!("unknown method {s:?}, expected geom|fund|amp")))
}

fn parse_solver(s: &str) -> Result<SolverKind, CmdError> {
    SolverKind::parse(s).map_err(|_| CmdError::Usage(format!("unknown solver {s:?}, expected amp|bp|omp")))
}

fn parse_law(s: &str) -> Result<NonzeroLaw, CmdError> {
    NonzeroLaw::parse(s)
        .map_err(|_| CmdError::Usage(format!("unknown law {s:?}, expected standard-normal|rademacher")))
}

fn cmd_threshold(alpha: f64, method: &str, tol: f64) -> Result<(), CmdError> {
    check_alpha_flag(alpha)?;
    let tolerance = make_tolerance(tol)?;
    let methods: Vec<Method> = if method == "all" {
        Method::ALL.to_vec()
    } else {
        vec![parse_method(method)?]
    };
    let mut points = Vec::new();
    for m in methods {
        points.push(thresholds::threshold_point(m, alpha, &tolerance)?);
    }
    let mut out = std::io::stdout().lock();
    harness::write_curve_csv(&mut out, &points, None).map_err(|e| CmdError::Runtime(e.to_string()))?;
    Ok(())
}

fn cmd_curve(grid: &str, method: &str, out: &PathBuf, tol: f64) -> Result<(), CmdError> {
    let alphas = parse_grid(grid)?;
    for &a in &alphas {
        check_alpha_flag(a)?;
    }
    let m = parse_method(method)?;
    let tolerance = make_tolerance(tol)?;
    let curve = thresholds::compute_curve(m, &alphas, &tolerance)?;
    let comment = format!(
        "l1phase {VERSION} curve --grid {grid} --method {method} --tol {tol:e} --out {}",
        out.display()
    );
    harness::save_curve_csv(out, curve.points(), Some(&comment))?;
    println!("wrote {} points to {}", curve.len(), out.display());
    Ok(())
}

fn cmd_equivalence(grid: &str, tol: f64) -> Result<(), CmdError> {
    let alphas = parse_grid(grid)?;
    for &a in &alphas {
        check_alpha_flag(a)?;
    }
    if !(tol > 0.0) {
        return usage(format!("--tol must be positive, got {tol}"));
    }
    let report = thresholds::verify_equivalence(&alphas, &Tolerance::new(1e-10, 1e-12, 300)?, tol)?;
    println!("{report}");
    if report.pass() {
        Ok(())
    } else {
        Err(CmdError::Failed)
    }
}

fn cmd_gen(n: usize, m: usize, k: usize, seed: u64, law: &str, out: &PathBuf) -> Result<(), CmdError> {
    if n == 0 || m == 0 || m > n || k > m {
        return usage(format!("need 1 <= m <= n and k <= m, got n = {n}, m = {m}, k = {k}"));
    }
    let law = parse_law(law)?;
    let spec = EnsembleSpec {
        n,
        alpha: m as f64 / n as f64,
        beta: k as f64 / n as f64,
        nonzero_law: law,
        master_seed: seed,
    };
    let instance = harness::sample_instance(&spec, 0)?;
    harness::save_instance_json(out, &instance)?;
    println!("wrote {}x{} instance (k = {k}, seed = {seed}) to {}", m, n, out.display());
    Ok(())
}

fn summarize(solver: &str, inst: &l1phase_core::ProblemInstance, out: &RecoveryOutcome) -> String {
    let mut line = format!(
        "solver={solver} n={} m={} iterations={} residual_norm={:.6e} converged={}",
        inst.cols(),
        inst.rows(),
        out.iterations,
        out.residual_norm,
        out.converged
    );
    if let Some(rel) = out.rel_error {
        line.push_str(&format!(" rel_error={rel:.6e}"));
    }
    if let Some(cert) = out.certified_optimal {
        line.push_str(&format!(" certified_optimal={cert}"));
    }
    line
}

fn cmd_solve(instance: &PathBuf, solver: &str, certify: bool) -> Result<(), CmdError> {
    let kind = parse_solver(solver)?;
    let inst = harness::load_instance_json(instance)?;
    let outcome = match kind {
        SolverKind::Amp => amp_solve(
            &inst,
            &SolverOptions { max_iter: 6000, conv_tol: 1e-9, ..Default::default() },
        )?,
        SolverKind::BasisPursuit => {
            basis_pursuit_solve(&inst, &SolverOptions { certify, ..Default::default() })?
        }
        SolverKind::Omp => {
            let k = match inst.sparsity {
                Some(k) if k >= 1 => k,
                _ => return usage("omp needs an instance with recorded sparsity k >= 1"),
            };
            omp_solve(&inst, k)?
        }
    };
    println!("{}", summarize(kind.token(), &inst, &outcome));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_phase(
    n: usize,
    alpha_grid: &str,
    beta_grid: &str,
    relative: bool,
    trials: usize,
    solver: &str,
    seed: u64,
    law: &str,
    threads: Option<usize>,
    out: &PathBuf,
) -> Result<(), CmdError> {
    if n == 0 || trials == 0 {
        return usage(format!("--n and --trials must be positive, got n = {n}, trials = {trials}"));
    }
    let kind = parse_solver(solver)?;
    let law_parsed = parse_law(law)?;
    let alphas = parse_grid(alpha_grid)?;
    for &a in &alphas {
        check_alpha_flag(a)?;
    }
    let beta_in = parse_grid(beta_grid)?;
    if let Some(t) = threads {
        if t == 0 {
            return usage("--threads must be positive");
        }
    }

    let comment = format!(
        "l1phase {VERSION} phase --n {n} --alpha-grid {alpha_grid} --beta-grid {beta_grid}{} --trials {trials} --solver {solver} --seed {seed} --law {law}",
        if relative { " --relative" } else { "" }
    );

    let work = move || -> Result<harness::PhaseDiagram, l1phase_core::Error> {
        let template = EnsembleSpec {
            n,
            alpha: alphas[0],
            beta: 0.0,
            nonzero_law: law_parsed,
            master_seed: seed,
        };
        if relative {
            // per-alpha absolute grids; cells carry their resolved beta
            let tol = Tolerance::new(1e-10, 1e-12, 300)?;
            let mut cells = Vec::new();
            for &alpha in &alphas {
                let bw = thresholds::beta_w_fundamental(alpha, &tol)?.beta_w;
                let betas: Vec<f64> = beta_in.iter().map(|m| m * bw).collect();
                let d = harness::estimate_phase_diagram(&[alpha], &betas, &template, kind, trials)?;
                cells.extend(d.cells);
            }
            Ok(harness::PhaseDiagram {
                solver: kind,
                n,
                master_seed: seed,
                version: l1phase_core::VERSION.to_string(),
                cells,
            })
        } else {
            harness::estimate_phase_diagram(&alphas, &beta_in, &template, kind, trials)
        }
    };

    let diagram = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CmdError::Runtime(e.to_string()))?
            .install(work),
        None => work(),
    }?;

    harness::save_diagram_csv(out, &diagram, Some(&comment))?;
    println!("wrote {} cells to {}", diagram.cells.len(), out.display());
    std::io::stdout().flush().ok();
    Ok(())
}
