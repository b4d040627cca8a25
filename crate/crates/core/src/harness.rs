//! Seeded Gaussian ensembles, Monte Carlo phase diagrams, empirical threshold
//! estimation, and CSV/JSON persistence.
//!
//! Every random quantity is drawn from a stream derived by hashing
//! `(master_seed, alpha, beta, trial_index)`, so any single trial is
//! reproducible in isolation and results are independent of the parallel
//! schedule.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::solvers::{
    amp_solve, basis_pursuit_solve, omp_solve, ProblemInstance, RecoveryOutcome, SolverOptions,
};
use crate::thresholds::{Method, ThresholdPoint};

/// Relative l2 error below which a trial counts as exact recovery.
pub const SUCCESS_REL_TOL: f64 = 1e-4;

/// Distribution of the planted nonzero magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonzeroLaw {
    StandardNormal,
    Rademacher,
}

impl NonzeroLaw {
    pub fn token(&self) -> &'static str {
        match self {
            NonzeroLaw::StandardNormal => "standard-normal",
            NonzeroLaw::Rademacher => "rademacher",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard-normal" => Ok(NonzeroLaw::StandardNormal),
            "rademacher" => Ok(NonzeroLaw::Rademacher),
            other => Err(Error::Spec(format!(
                "unknown nonzero law {other:?}, expected standard-normal|rademacher"
            ))),
        }
    }
}

/// Which recovery algorithm a cell or diagram used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Amp,
    BasisPursuit,
    Omp,
}

impl SolverKind {
    pub fn token(&self) -> &'static str {
        match self {
            SolverKind::Amp => "amp",
            SolverKind::BasisPursuit => "bp",
            SolverKind::Omp => "omp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "amp" => Ok(SolverKind::Amp),
            "bp" => Ok(SolverKind::BasisPursuit),
            "omp" => Ok(SolverKind::Omp),
            other => {
                Err(Error::Spec(format!("unknown solver {other:?}, expected amp|bp|omp")))
            }
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// Parameters of one random ensemble cell.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub nonzero_law: NonzeroLaw,
    pub master_seed: u64,
}

impl EnsembleSpec {
    /// Number of measurements `m = round(alpha n)`.
    pub fn m(&self) -> usize {
        (self.alpha * self.n as f64).round() as usize
    }

    /// Planted sparsity `k = round(beta n)`.
    pub fn k(&self) -> usize {
        (self.beta * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Spec("n must be positive".into()));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::Spec(format!(
                "alpha/beta must be finite and beta >= 0, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        let (m, k) = (self.m(), self.k());
        if m < 1 {
            return Err(Error::Spec(format!("m = round(alpha n) = {m} must be >= 1")));
        }
        if m > self.n {
            return Err(Error::Spec(format!("m = {m} exceeds n = {}", self.n)));
        }
        if k > m {
            return Err(Error::Spec(format!("k = {k} exceeds m = {m}")));
        }
        Ok(())
    }
}

/// One grid cell of a phase diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub alpha: f64,
    pub beta: f64,
    pub trials: usize,
    pub successes: usize,
    /// Mean relative error over trials that produced an estimate; NaN when
    /// every trial errored.
    pub mean_rel_error: f64,
}

impl PhaseCell {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        self.successes as f64 / self.trials as f64
    }
}

/// A rectangular grid of Monte Carlo cells plus reproduction metadata.
#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub solver: SolverKind,
    pub n: usize,
    pub master_seed: u64,
    pub version: String,
    /// Row-major: alpha outer, beta inner.
    pub cells: Vec<PhaseCell>,
}

// Per-trial stream: ChaCha keyed by a hash of the coordinates, so trials are
// independent of each other and of execution order.
fn trial_rng(spec: &EnsembleSpec, trial_index: usize) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(b"l1phase-trial-v1");
    h.update(spec.master_seed.to_le_bytes());
    h.update(spec.alpha.to_bits().to_le_bytes());
    h.update(spec.beta.to_bits().to_le_bytes());
    h.update((trial_index as u64).to_le_bytes());
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}

/// Draws one problem instance: `A` with i.i.d. N(0,1) entries, a uniformly
/// placed size-`k` support with uniform signs, magnitudes per the nonzero
/// law, and `y = A x` computed exactly. Deterministic in
/// `(spec, trial_index)`.
pub fn sample_instance(spec: &EnsembleSpec, trial_index: usize) -> Result<ProblemInstance> {
    spec.validate()?;
    let (n, m, k) = (spec.n, spec.m(), spec.k());
    let mut rng = trial_rng(spec, trial_index);

    let mut entries = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        entries.push(rng.sample::<f64, _>(StandardNormal));
    }
    let a = DMatrix::from_row_slice(m, n, &entries);

    let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let signs: Vec<i8> = (0..k).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    let mut x = DVector::zeros(n);
    for (pos, &idx) in support.iter().enumerate() {
        let mag = match spec.nonzero_law {
            NonzeroLaw::StandardNormal => rng.sample::<f64, _>(StandardNormal).abs(),
            NonzeroLaw::Rademacher => 1.0,
        };
        x[idx] = f64::from(signs[pos]) * mag;
    }
    let y = &a * &x;

    let mut inst = ProblemInstance::new(a, y)?.with_truth(x, k)?;
    inst.support = Some(support);
    inst.signs = Some(signs);
    inst.seed = Some(spec.master_seed);
    Ok(inst)
}

fn cell_solver_options(kind: SolverKind, amp_theta: Option<f64>) -> SolverOptions {
    match kind {
        SolverKind::Amp => SolverOptions {
            max_iter: 6000,
            conv_tol: 1e-9,
            threshold_multiplier: amp_theta,
            ..Default::default()
        },
        // success classification needs ~1e-5 accuracy, not certificate-grade
        SolverKind::BasisPursuit => SolverOptions {
            max_iter: 20_000,
            conv_tol: 1e-7,
            ..Default::default()
        },
        SolverKind::Omp => SolverOptions::default(),
    }
}

fn run_trial(
    spec: &EnsembleSpec,
    kind: SolverKind,
    trial: usize,
    options: &SolverOptions,
) -> Result<RecoveryOutcome> {
    let inst = sample_instance(spec, trial)?;
    match kind {
        SolverKind::Amp => amp_solve(&inst, options),
        SolverKind::BasisPursuit => basis_pursuit_solve(&inst, options),
        SolverKind::Omp => omp_solve(&inst, spec.k()),
    }
}

/// Runs `trials` independent recoveries of one cell. A trial succeeds when
/// its relative error is at most [`SUCCESS_REL_TOL`]; solver errors count as
/// failures (conservative). Aggregation is performed in trial order whatever
/// the parallel schedule, so the cell is bit-reproducible.
pub fn run_cell(spec: &EnsembleSpec, solver: SolverKind, trials: usize) -> Result<PhaseCell> {
    spec.validate()?;
    if trials < 1 {
        return Err(Error::Spec("trials must be >= 1".into()));
    }

    if spec.k() == 0 {
        // the zero vector is recovered exactly by every solver
        return Ok(PhaseCell {
            alpha: spec.alpha,
            beta: spec.beta,
            trials,
            successes: trials,
            mean_rel_error: 0.0,
        });
    }

    let amp_theta = match solver {
        SolverKind::Amp => {
            let alpha = spec.m() as f64 / spec.n as f64;
            Some(crate::thresholds::beta_w_amp(alpha, &crate::special::Tolerance::default())?.1)
        }
        _ => None,
    };
    let options = cell_solver_options(solver, amp_theta);

    let results: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| match run_trial(spec, solver, t, &options) {
            Ok(out) => out.rel_error,
            Err(_) => None,
        })
        .collect();

    let mut successes = 0;
    let mut err_sum = 0.0;
    let mut err_count = 0usize;
    for rel in &results {
        if let Some(r) = rel {
            if *r <= SUCCESS_REL_TOL {
                successes += 1;
            }
            err_sum += r;
            err_count += 1;
        }
    }
    Ok(PhaseCell {
        alpha: spec.alpha,
        beta: spec.beta,
        trials,
        successes,
        mean_rel_error: if err_count == 0 { f64::NAN } else { err_sum / err_count as f64 },
    })
}

/// Fills a rectangular `(alpha, beta)` grid of cells. Deterministic given the
/// template's master seed; each cell derives its own streams from its
/// coordinates.
pub fn estimate_phase_diagram(
    alpha_grid: &[f64],
    beta_grid: &[f64],
    template: &EnsembleSpec,
    solver: SolverKind,
    trials: usize,
) -> Result<PhaseDiagram> {
    // validate the whole grid before any work
    for &alpha in alpha_grid {
        for &beta in beta_grid {
            let spec = EnsembleSpec { alpha, beta, ..*template };
            spec.validate().map_err(|e| {
                Error::Spec(format!("cell (alpha = {alpha}, beta = {beta}): {e}"))
            })?;
        }
    }
    let mut cells = Vec::with_capacity(alpha_grid.len() * beta_grid.len());
    for &alpha in alpha_grid {
        for &beta in beta_grid {
            let spec = EnsembleSpec { alpha, beta, ..*template };
            cells.push(run_cell(&spec, solver, trials)?);
        }
    }
    Ok(PhaseDiagram {
        solver,
        n: template.n,
        master_seed: template.master_seed,
        version: crate::VERSION.to_string(),
        cells,
    })
}

/// Empirical transition estimate with its probe history.
#[derive(Debug, Clone)]
pub struct EmpiricalThreshold {
    pub beta_hat: f64,
    /// Final bisection bracket `(below, above)`.
    pub bracket: (f64, f64),
    /// Every probed `(beta, success_rate)` in probe order.
    pub probes: Vec<(f64, f64)>,
    /// Set when probes are noisier than binomial noise explains or the probe
    /// budget is degenerate.
    pub warning: bool,
}

/// Bisects the empirical 50% success level in `beta` at fixed `alpha`.
///
/// `beta = 0` counts as success rate 1 by construction; the upper end starts
/// at `k = m`. Probes are recorded; inversions beyond ~2.5 binomial standard
/// errors set the warning flag but keep the bisection bracket.
pub fn empirical_threshold(
    alpha: f64,
    solver: SolverKind,
    n: usize,
    trials_per_probe: usize,
    tol_beta: f64,
    nonzero_law: NonzeroLaw,
    master_seed: u64,
) -> Result<EmpiricalThreshold> {
    if n == 0 || trials_per_probe == 0 {
        return Err(Error::Spec("n and trials_per_probe must be positive".into()));
    }
    if tol_beta < 1.0 / n as f64 {
        return Err(Error::Spec(format!(
            "tol_beta = {tol_beta} finer than the sparsity resolution 1/n = {}",
            1.0 / n as f64
        )));
    }
    let template =
        EnsembleSpec { n, alpha, beta: 0.0, nonzero_law, master_seed };
    template.validate()?;
    let m = template.m();

    let mut probes: Vec<(f64, f64)> = Vec::new();
    let mut probe = |beta: f64| -> Result<f64> {
        let spec = EnsembleSpec { beta, ..template };
        let cell = run_cell(&spec, solver, trials_per_probe)?;
        let rate = cell.success_rate();
        probes.push((beta, rate));
        Ok(rate)
    };

    let mut lo = 0.0_f64; // rate 1 by construction
    let mut hi = m as f64 / n as f64;
    let mut warning = trials_per_probe < 10;

    if probe(hi)? >= 0.5 {
        // no transition below k = m at this resolution
        return Ok(EmpiricalThreshold { beta_hat: hi, bracket: (lo, hi), probes, warning: true });
    }
    while hi - lo > 2.0 * tol_beta {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // flag success-rate inversions that binomial noise cannot explain
    let se = (0.25 / trials_per_probe as f64).sqrt();
    let mut sorted = probes.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[1].1 > w[0].1 + 5.0 * se {
            warning = true;
        }
    }

    Ok(EmpiricalThreshold { beta_hat: 0.5 * (lo + hi), bracket: (lo, hi), probes, warning })
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

const CURVE_HEADER: &str = "alpha,beta_w,method,residual";
const DIAGRAM_HEADER: &str = "alpha,beta,n,trials,successes,mean_rel_error,solver,seed";

fn fmt_f64(v: f64) -> String {
    // 17 significant digits: lossless f64 round trip
    format!("{v:.16e}")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a float, got {field:?}"),
    })
}

fn parse_int(field: &str, line: usize) -> Result<u64> {
    field.trim().parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected an integer, got {field:?}"),
    })
}

/// Writes threshold points as CSV (`alpha,beta_w,method,residual`, floats at
/// 17 significant digits). `comment` lines, if any, are prefixed with `# `.
pub fn write_curve_csv<W: Write>(
    w: &mut W,
    points: &[ThresholdPoint],
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "{CURVE_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(p.alpha),
            fmt_f64(p.beta_w),
            p.method.token(),
            fmt_f64(p.residual)
        )?;
    }
    Ok(())
}

/// Reads a curve CSV produced by [`write_curve_csv`]; comments are skipped.
pub fn read_curve_csv<R: BufRead>(r: R) -> Result<Vec<ThresholdPoint>> {
    let mut points = Vec::new();
    let mut saw_header = false;
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if trimmed != CURVE_HEADER {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected header {CURVE_HEADER:?}, got {trimmed:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let method = Method::parse(fields[2].trim()).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse { line: line_no, message },
            other => other,
        })?;
        points.push(ThresholdPoint {
            alpha: parse_f64(fields[0], line_no)?,
            beta_w: parse_f64(fields[1], line_no)?,
            method,
            residual: parse_f64(fields[3], line_no)?,
        });
    }
    if !saw_header {
        return Err(Error::Parse { line: 0, message: "missing curve header".into() });
    }
    Ok(points)
}

/// Writes a phase diagram as CSV
/// (`alpha,beta,n,trials,successes,mean_rel_error,solver,seed`).
pub fn write_diagram_csv<W: Write>(
    w: &mut W,
    diagram: &PhaseDiagram,
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "{DIAGRAM_HEADER}")?;
    for c in &diagram.cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(c.alpha),
            fmt_f64(c.beta),
            diagram.n,
            c.trials,
            c.successes,
            fmt_f64(c.mean_rel_error),
            diagram.solver.token(),
            diagram.master_seed
        )?;
    }
    Ok(())
}

/// Reads a diagram CSV produced by [`write_diagram_csv`]. The `n`, `solver`
/// and `seed` columns must be uniform across rows.
pub fn read_diagram_csv<R: BufRead>(r: R) -> Result<PhaseDiagram> {
    let mut cells = Vec::new();
    let mut meta: Option<(usize, SolverKind, u64)> = None;
    let mut saw_header = false;
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if trimmed != DIAGRAM_HEADER {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected header {DIAGRAM_HEADER:?}, got {trimmed:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let n = parse_int(fields[2], line_no)? as usize;
        let solver = SolverKind::parse(fields[6].trim()).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let seed = parse_int(fields[7], line_no)?;
        match &meta {
            None => meta = Some((n, solver, seed)),
            Some((n0, s0, seed0)) => {
                if *n0 != n || *s0 != solver || *seed0 != seed {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "inconsistent n/solver/seed across rows".into(),
                    });
                }
            }
        }
        cells.push(PhaseCell {
            alpha: parse_f64(fields[0], line_no)?,
            beta: parse_f64(fields[1], line_no)?,
            trials: parse_int(fields[3], line_no)? as usize,
            successes: parse_int(fields[4], line_no)? as usize,
            mean_rel_error: parse_f64(fields[5], line_no)?,
        });
    }
    if !saw_header {
        return Err(Error::Parse { line: 0, message: "missing diagram header".into() });
    }
    let (n, solver, master_seed) = meta.unwrap_or((0, SolverKind::BasisPursuit, 0));
    Ok(PhaseDiagram { solver, n, master_seed, version: crate::VERSION.to_string(), cells })
}

/// Saves a curve to a file; see [`write_curve_csv`].
pub fn save_curve_csv(path: &Path, points: &[ThresholdPoint], comment: Option<&str>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_curve_csv(&mut w, points, comment)
}

/// Loads a curve from a file; see [`read_curve_csv`].
pub fn load_curve_csv(path: &Path) -> Result<Vec<ThresholdPoint>> {
    read_curve_csv(BufReader::new(File::open(path)?))
}

/// Saves a diagram to a file; see [`write_diagram_csv`].
pub fn save_diagram_csv(path: &Path, diagram: &PhaseDiagram, comment: Option<&str>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_diagram_csv(&mut w, diagram, comment)
}

/// Loads a diagram from a file; see [`read_diagram_csv`].
pub fn load_diagram_csv(path: &Path) -> Result<PhaseDiagram> {
    read_diagram_csv(BufReader::new(File::open(path)?))
}

// On-disk instance schema: matrix is row-major.
#[derive(serde::Serialize, serde::Deserialize)]
struct InstanceFile {
    n: usize,
    m: usize,
    k: usize,
    seed: Option<u64>,
    matrix: Vec<f64>,
    y: Vec<f64>,
    #[serde(default)]
    x_true: Option<Vec<f64>>,
    #[serde(default)]
    support: Option<Vec<usize>>,
    #[serde(default)]
    signs: Option<Vec<i8>>,
}

/// Serializes an instance as JSON (`n, m, k, seed, matrix, y, x_true,
/// support, signs`; matrix row-major).
pub fn write_instance_json<W: Write>(w: &mut W, instance: &ProblemInstance) -> Result<()> {
    let (m, n) = (instance.rows(), instance.cols());
    let mut matrix = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            matrix.push(instance.matrix[(i, j)]);
        }
    }
    let k = instance
        .sparsity
        .or_else(|| instance.truth.as_ref().map(|t| t.iter().filter(|&&v| v != 0.0).count()))
        .unwrap_or(0);
    let file = InstanceFile {
        n,
        m,
        k,
        seed: instance.seed,
        matrix,
        y: instance.measurements.iter().copied().collect(),
        x_true: instance.truth.as_ref().map(|t| t.iter().copied().collect()),
        support: instance.support.clone(),
        signs: instance.signs.clone(),
    };
    serde_json::to_writer(w, &file)?;
    Ok(())
}

/// Deserializes an instance written by [`write_instance_json`].
pub fn read_instance_json<R: std::io::Read>(r: R) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_reader(r)?;
    if file.matrix.len() != file.m * file.n {
        return Err(Error::Spec(format!(
            "matrix has {} entries, expected m*n = {}",
            file.matrix.len(),
            file.m * file.n
        )));
    }
    if file.y.len() != file.m {
        return Err(Error::Spec(format!("y has {} entries, expected m = {}", file.y.len(), file.m)));
    }
    let a = DMatrix::from_row_slice(file.m, file.n, &file.matrix);
    let y = DVector::from_vec(file.y);
    let mut inst = ProblemInstance::new(a, y)?;
    if let Some(xt) = file.x_true {
        if xt.len() != file.n {
            return Err(Error::Spec(format!(
                "x_true has {} entries, expected n = {}",
                xt.len(),
                file.n
            )));
        }
        inst = inst.with_truth(DVector::from_vec(xt), file.k)?;
    } else {
        inst.sparsity = Some(file.k);
    }
    inst.support = file.support;
    inst.signs = file.signs;
    inst.seed = file.seed;
    Ok(inst)
}

/// Saves an instance to a JSON file.
pub fn save_instance_json(path: &Path, instance: &ProblemInstance) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_instance_json(&mut w, instance)
}

/// Loads an instance from a JSON file.
pub fn load_instance_json(path: &Path) -> Result<ProblemInstance> {
    read_instance_json(BufReader::new(File::open(path)?))
}
