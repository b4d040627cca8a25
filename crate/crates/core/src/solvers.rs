//! Sparse recovery solvers: AMP, basis pursuit, OMP, a brute-force l1 oracle
//! for desk-scale verification, and a dual-certificate optimality check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::special::Tolerance;
use crate::thresholds;

/// A concrete system `A x = y`, optionally with the planted sparse truth.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub matrix: DMatrix<f64>,
    pub measurements: DVector<f64>,
    pub truth: Option<DVector<f64>>,
    pub sparsity: Option<usize>,
    /// Support indices of the planted truth, when known.
    pub support: Option<Vec<usize>>,
    /// Signs (+1/-1) of the planted nonzeros, when known.
    pub signs: Option<Vec<i8>>,
    /// Seed the instance was derived from, when sampled by the harness.
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn new(matrix: DMatrix<f64>, measurements: DVector<f64>) -> Result<Self> {
        let inst = Self {
            matrix,
            measurements,
            truth: None,
            sparsity: None,
            support: None,
            signs: None,
            seed: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_truth(mut self, truth: DVector<f64>, sparsity: usize) -> Result<Self> {
        self.truth = Some(truth);
        self.sparsity = Some(sparsity);
        self.validate()?;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Aspect ratio `m/n`.
    pub fn alpha(&self) -> f64 {
        self.rows() as f64 / self.cols() as f64
    }

    /// Sparsity fraction `k/n`, when `k` is recorded.
    pub fn beta(&self) -> Option<f64> {
        self.sparsity.map(|k| k as f64 / self.cols() as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.rows(), self.cols());
        if m > n {
            return Err(Error::Spec(format!("instance requires m <= n, got {m} x {n}")));
        }
        if self.measurements.len() != m {
            return Err(Error::Spec(format!(
                "measurement length {} does not match m = {m}",
                self.measurements.len()
            )));
        }
        if let Some(t) = &self.truth {
            if t.len() != n {
                return Err(Error::Spec(format!("truth length {} does not match n = {n}", t.len())));
            }
            let resid = (&self.matrix * t - &self.measurements).norm();
            if resid > 1e-10 * self.measurements.norm().max(1e-300) {
                return Err(Error::Spec(format!(
                    "measurements are not A * truth: residual {resid:e}"
                )));
            }
            if let Some(k) = self.sparsity {
                let nnz = t.iter().filter(|&&v| v != 0.0).count();
                if nnz != k {
                    return Err(Error::Spec(format!("truth has {nnz} nonzeros, expected k = {k}")));
                }
            }
        }
        Ok(())
    }

    fn rel_error(&self, estimate: &DVector<f64>) -> Option<f64> {
        self.truth.as_ref().map(|t| {
            let tn = t.norm();
            if tn == 0.0 {
                // relative error is undefined against a zero truth; report the
                // absolute estimate norm instead
                estimate.norm()
            } else {
                (estimate - t).norm() / tn
            }
        })
    }
}

/// Knobs shared by the iterative solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Relative iterate-change stopping threshold.
    pub conv_tol: f64,
    /// Feasibility requirement relative to `max(|y|, 1)`.
    pub feas_tol: f64,
    /// Overrides the AMP threshold multiplier; `None` uses the
    /// state-evolution-optimal `z*(alpha)`.
    pub threshold_multiplier: Option<f64>,
    /// Run the dual-certificate check on the basis pursuit output.
    pub certify: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            conv_tol: 1e-10,
            feas_tol: 1e-9,
            threshold_multiplier: None,
            certify: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::Spec("max_iter must be >= 1".into()));
        }
        if !(self.conv_tol > 0.0) || !(self.feas_tol > 0.0) {
            return Err(Error::Spec("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Solver output: the estimate plus convergence bookkeeping.
#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    pub estimate: DVector<f64>,
    pub iterations: usize,
    /// `|A x_hat - y|_2`.
    pub residual_norm: f64,
    /// `|x_hat - x_true|_2 / |x_true|_2` when the truth is recorded.
    pub rel_error: Option<f64>,
    pub converged: bool,
    /// Dual-certificate verdict when requested; `Some(false)` is inconclusive.
    pub certified_optimal: Option<bool>,
}

/// Componentwise soft threshold `sign(v) * max(|v| - tau, 0)`.
pub fn soft_threshold(v: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("soft_threshold requires tau >= 0, got {tau}")));
    }
    Ok(v.map(|x| {
        let mag = x.abs() - tau;
        if mag > 0.0 {
            mag.copysign(x)
        } else {
            0.0
        }
    }))
}

/// Average derivative of the soft threshold at `v`: the fraction of
/// components with `|v_i| > tau`.
pub fn avg_threshold_derivative(v: &DVector<f64>, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!(
            "avg_threshold_derivative requires tau >= 0, got {tau}"
        )));
    }
    if v.is_empty() {
        return Ok(0.0);
    }
    let count = v.iter().filter(|&&x| x.abs() > tau).count();
    Ok(count as f64 / v.len() as f64)
}

const DIVERGENCE_WINDOW: usize = 50;
const DIVERGENCE_FACTOR: f64 = 10.0;
// Above the transition the residual plateaus at the state-evolution fixed
// point; stop burning iterations once it stops improving. Convergent runs
// shrink the residual by orders of magnitude per window, so they are
// untouched.
const STAGNATION_WINDOW: usize = 500;
const STAGNATION_FACTOR: f64 = 0.999;

/// Approximate message passing with optimally tuned soft thresholding.
///
/// Iterates `x <- eta(A^T z + x; tau)` with the Onsager-corrected residual
/// `z <- y - A x + (1/alpha) z_prev * Avg(eta')`, where the derivative average
/// is taken at the previous iteration's argument. The threshold schedule is
/// `tau_t = theta * |z_t|_2 / sqrt(m)` with `theta = z*(alpha)` from the state
/// evolution maximizer unless overridden.
///
/// The ensemble convention is N(0,1) entries for `A`; the iteration wants
/// unit-norm columns, so `A` and `y` are rescaled by `1/sqrt(m)` internally
/// (the solution is unchanged).
pub fn amp_solve(instance: &ProblemInstance, options: &SolverOptions) -> Result<RecoveryOutcome> {
    options.validate()?;
    instance.validate()?;
    let m = instance.rows();
    let n = instance.cols();
    let alpha = instance.alpha();
    let scale = 1.0 / (m as f64).sqrt();

    let theta = match options.threshold_multiplier {
        Some(t) => {
            if !(t >= 0.0) {
                return Err(Error::Domain(format!("threshold multiplier must be >= 0, got {t}")));
            }
            t
        }
        None => thresholds::beta_w_amp(alpha, &Tolerance::default())?.1,
    };

    let a = instance.matrix.scale(scale);
    let y = instance.measurements.scale(scale);

    let mut x = DVector::zeros(n);
    let mut z = y.clone();
    let mut z_prev = DVector::zeros(m);
    let mut deriv_avg = 0.0;
    let mut z_norms: Vec<f64> = Vec::new();
    let mut best_norm = f64::INFINITY;
    let mut last_improvement = 0usize;
    let mut iterations = 0;
    let mut converged = false;

    for t in 0..options.max_iter {
        if t > 0 {
            // Onsager-corrected residual
            z = &y - &a * &x + z_prev.scale(deriv_avg / alpha);
        }
        let z_norm = z.norm();
        z_norms.push(z_norm);
        if z_norm < best_norm * STAGNATION_FACTOR {
            best_norm = z_norm;
            last_improvement = t;
        }
        if t - last_improvement >= STAGNATION_WINDOW {
            iterations = t + 1;
            break;
        }
        if z_norms.len() > DIVERGENCE_WINDOW {
            let old = z_norms[z_norms.len() - 1 - DIVERGENCE_WINDOW];
            if z_norm > DIVERGENCE_FACTOR * old && z_norm > z_norms[0] {
                let tail: Vec<String> = z_norms[z_norms.len().saturating_sub(8)..]
                    .iter()
                    .map(|v| format!("{v:.3e}"))
                    .collect();
                return Err(Error::Divergence(format!(
                    "residual grew {DIVERGENCE_FACTOR}x over {DIVERGENCE_WINDOW} iterations at t = {t}; recent norms [{}]",
                    tail.join(", ")
                )));
            }
        }
        let tau = theta * z_norm * scale;
        let arg = self_adjoint_tv(&a, &z) + &x;
        let x_next = soft_threshold(&arg, tau)?;
        deriv_avg = avg_threshold_derivative(&arg, tau)?;
        z_prev = z.clone();

        let change = (&x_next - &x).norm() / x.norm().max(1.0);
        x = x_next;
        iterations = t + 1;
        if change <= options.conv_tol {
            converged = true;
            break;
        }
    }

    let residual_norm = (&instance.matrix * &x - &instance.measurements).norm();
    Ok(RecoveryOutcome {
        rel_error: instance.rel_error(&x),
        estimate: x,
        iterations,
        residual_norm,
        converged,
        certified_optimal: None,
    })
}

// A^T z without materializing the transpose.
fn self_adjoint_tv(a: &DMatrix<f64>, z: &DVector<f64>) -> DVector<f64> {
    a.tr_mul(z)
}

const ADMM_RELAX: f64 = 1.8;
const ADMM_BALANCE_EVERY: usize = 50;
const ADMM_BALANCE_FACTOR: f64 = 10.0;

/// Basis pursuit `min |x|_1 s.t. A x = y` by operator splitting.
///
/// ADMM on the splitting (affine feasibility) + (l1), with the projection
/// using a cached Cholesky factorization of `A A^T`, over-relaxation and
/// residual balancing. The returned iterate is the projection of the final
/// sparse iterate, so it is feasible to machine precision; optimality is the
/// certificate's job, not the iteration's.
pub fn basis_pursuit_solve(
    instance: &ProblemInstance,
    options: &SolverOptions,
) -> Result<RecoveryOutcome> {
    options.validate()?;
    instance.validate()?;
    let a = &instance.matrix;
    let y = &instance.measurements;
    let (m, n) = (instance.rows(), instance.cols());

    let y_norm = y.norm();
    if y_norm == 0.0 {
        // the zero vector is feasible with minimal norm
        let outcome = RecoveryOutcome {
            rel_error: instance.rel_error(&DVector::zeros(n)),
            estimate: DVector::zeros(n),
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
            certified_optimal: None,
        };
        return finish_bp(instance, options, outcome);
    }

    if m == n {
        // singleton feasible set: x = A^{-1} y
        let lu = a.clone().lu();
        let x = lu
            .solve(y)
            .ok_or_else(|| Error::RankDeficient("square system matrix is singular".into()))?;
        let residual_norm = (a * &x - y).norm();
        let outcome = RecoveryOutcome {
            rel_error: instance.rel_error(&x),
            estimate: x,
            iterations: 1,
            residual_norm,
            converged: true,
            certified_optimal: None,
        };
        return finish_bp(instance, options, outcome);
    }

    let gram = a * a.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("A A^T is not positive definite; A lacks full row rank".into()))?;

    let scale = y_norm / (m as f64).sqrt();
    let ys = y.scale(1.0 / scale);

    // projection onto {v : A v = ys}
    let project = |v: &DVector<f64>| -> DVector<f64> {
        let w = a * v - &ys;
        let u = chol.solve(&w);
        v - self_adjoint_tv(a, &u)
    };

    let mut x;
    let mut z = DVector::<f64>::zeros(n);
    let mut u = DVector::<f64>::zeros(n);
    let mut rho = 1.0_f64;
    let mut iterations = options.max_iter;
    let mut converged = false;

    for it in 0..options.max_iter {
        x = project(&(&z - &u));
        let x_relaxed = x.scale(ADMM_RELAX) + z.scale(1.0 - ADMM_RELAX);
        let z_old = z.clone();
        let w = &x_relaxed + &u;
        z = soft_threshold(&w, 1.0 / rho)?;
        u = w - &z;

        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_old).norm();
        let ref_norm = z.norm().max(1.0);
        if primal <= options.conv_tol * ref_norm && dual <= options.conv_tol * ref_norm {
            iterations = it + 1;
            converged = true;
            break;
        }
        if (it + 1) % ADMM_BALANCE_EVERY == 0 {
            if primal > ADMM_BALANCE_FACTOR * dual {
                rho = (rho * 2.0).min(1e4);
                u.scale_mut(0.5);
            } else if dual > ADMM_BALANCE_FACTOR * primal {
                rho = (rho / 2.0).max(1e-4);
                u.scale_mut(2.0);
            }
        }
    }

    let estimate = project(&z).scale(scale);
    let residual_norm = (a * &estimate - y).norm();
    if !converged {
        return Err(Error::Convergence {
            context: format!(
                "basis pursuit did not converge within {} iterations (conv_tol {:e})",
                options.max_iter, options.conv_tol
            ),
            iterations: options.max_iter,
            best: residual_norm,
        });
    }
    if residual_norm > options.feas_tol * y_norm.max(1.0) {
        return Err(Error::Convergence {
            context: format!("basis pursuit feasibility {residual_norm:e} above tolerance"),
            iterations,
            best: residual_norm,
        });
    }
    let outcome = RecoveryOutcome {
        rel_error: instance.rel_error(&estimate),
        estimate,
        iterations,
        residual_norm,
        converged,
        certified_optimal: None,
    };
    finish_bp(instance, options, outcome)
}

fn finish_bp(
    instance: &ProblemInstance,
    options: &SolverOptions,
    mut outcome: RecoveryOutcome,
) -> Result<RecoveryOutcome> {
    if options.certify {
        let verdict = certify_l1_optimality(instance, &outcome.estimate, 1e-6)?;
        outcome.certified_optimal = Some(verdict);
    }
    Ok(outcome)
}

/// Orthogonal matching pursuit: `k` rounds of greedy column selection by
/// residual correlation with a least-squares refit on the grown support.
/// Correlation ties break toward the lowest index.
pub fn omp_solve(instance: &ProblemInstance, k: usize) -> Result<RecoveryOutcome> {
    instance.validate()?;
    let a = &instance.matrix;
    let y = &instance.measurements;
    let (m, n) = (instance.rows(), instance.cols());
    if k < 1 || k > m {
        return Err(Error::Domain(format!("omp requires 1 <= k <= m, got k = {k}, m = {m}")));
    }

    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut selected = vec![false; n];
    let mut residual = y.clone();
    let mut coeffs = DVector::<f64>::zeros(0);
    let y_scale = y.norm().max(1.0);

    for _ in 0..k {
        let mut best_idx = usize::MAX;
        let mut best_corr = -1.0;
        for j in 0..n {
            if selected[j] {
                continue;
            }
            let corr = a.column(j).dot(&residual).abs();
            if corr > best_corr {
                best_corr = corr;
                best_idx = j;
            }
        }
        support.push(best_idx);
        selected[best_idx] = true;

        let sub = a.select_columns(support.iter());
        // least-squares refit by normal equations; supports are small and
        // Gaussian columns keep the Gram matrix well conditioned
        let gram = sub.tr_mul(&sub);
        let rhs = sub.tr_mul(y);
        coeffs = gram
            .cholesky()
            .ok_or_else(|| {
                Error::Numerical(format!("singular least-squares refit on support {support:?}"))
            })?
            .solve(&rhs);
        residual = y - &sub * &coeffs;
        if residual.norm() <= 1e-13 * y_scale {
            break;
        }
    }

    let mut x = DVector::zeros(n);
    for (pos, &idx) in support.iter().enumerate() {
        x[idx] = coeffs[pos];
    }
    let residual_norm = residual.norm();
    Ok(RecoveryOutcome {
        rel_error: instance.rel_error(&x),
        estimate: x,
        iterations: support.len(),
        residual_norm,
        converged: true,
        certified_optimal: None,
    })
}

const ORACLE_MAX_N: usize = 16;
const ORACLE_MAX_M: usize = 8;
const ORACLE_TIE_TOL: f64 = 1e-9;

/// Brute-force l1 oracle: enumerates every support of size `m`, solves each
/// invertible square subsystem, and returns the feasible candidate of minimal
/// l1 norm (an l1 minimizer over an affine set is attained at a point with at
/// most `m` nonzeros). `unique` is false when two distinct candidates tie
/// within 1e-9.
///
/// Guarded to `n <= 16`, `m <= 8`.
pub fn l1_oracle_bruteforce(instance: &ProblemInstance) -> Result<(DVector<f64>, bool)> {
    instance.validate()?;
    let (m, n) = (instance.rows(), instance.cols());
    if n > ORACLE_MAX_N || m > ORACLE_MAX_M {
        return Err(Error::SizeGuard(format!(
            "brute-force oracle limited to n <= {ORACLE_MAX_N}, m <= {ORACLE_MAX_M}; got {m} x {n}"
        )));
    }
    let a = &instance.matrix;
    let y = &instance.measurements;
    let y_scale = y.norm().max(1.0);

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut unique = true;

    // lexicographic enumeration of all supports of size m
    let mut support: Vec<usize> = (0..m).collect();
    loop {
        let sub = a.select_columns(support.iter());
        if let Some(sol) = sub.clone().lu().solve(y) {
            if (&sub * &sol - y).norm() <= 1e-8 * y_scale {
                let mut candidate = DVector::zeros(n);
                for (pos, &idx) in support.iter().enumerate() {
                    candidate[idx] = sol[pos];
                }
                let norm = candidate.iter().map(|v| v.abs()).sum::<f64>();
                match &mut best {
                    None => best = Some((norm, candidate)),
                    Some((best_norm, best_vec)) => {
                        if norm < *best_norm - ORACLE_TIE_TOL {
                            *best_norm = norm;
                            *best_vec = candidate;
                            unique = true;
                        } else if (norm - *best_norm).abs() <= ORACLE_TIE_TOL {
                            if (&candidate - &*best_vec).amax() > ORACLE_TIE_TOL {
                                unique = false;
                                if norm < *best_norm {
                                    *best_norm = norm;
                                    *best_vec = candidate;
                                }
                            }
                        }
                    }
                }
            }
        }
        if !next_combination(&mut support, n) {
            break;
        }
    }
    let (_, x) =
        best.ok_or_else(|| Error::RankDeficient("no invertible support subsystem found".into()))?;
    Ok((x, unique))
}

// Advances a sorted index combination to its lexicographic successor;
// returns false after the last one.
fn next_combination(support: &mut [usize], n: usize) -> bool {
    let m = support.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        if support[i] != i + n - m {
            support[i] += 1;
            for j in i + 1..m {
                support[j] = support[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

const CERT_POCS_MAX_ITER: usize = 2000;

/// One-sided l1 optimality certificate for a feasible `x_hat`.
///
/// Searches for a dual vector `nu` with `(A^T nu)_i = sign(x_hat_i)` on the
/// support and `|(A^T nu)_j| <= 1 + tol` off it. Starts from the least-squares
/// (minimum-norm) solution of the support equations; if the off-support bound
/// fails there, alternating projections refine `nu` toward the certificate
/// polytope. `true` implies `x_hat` is optimal; `false` is inconclusive.
pub fn certify_l1_optimality(
    instance: &ProblemInstance,
    x_hat: &DVector<f64>,
    tol: f64,
) -> Result<bool> {
    instance.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("certify tolerance must be positive, got {tol}")));
    }
    let a = &instance.matrix;
    let y = &instance.measurements;
    let feas = (a * x_hat - y).norm();
    if feas > tol * y.norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "x_hat infeasible: |A x - y| = {feas:e} exceeds {tol:e} * max(|y|, 1)"
        )));
    }

    let cut = tol * x_hat.amax().max(1.0);
    let support: Vec<usize> = (0..x_hat.len()).filter(|&i| x_hat[i].abs() > cut).collect();
    if support.is_empty() {
        // x_hat ~ 0 and feasible: zero has minimal norm
        return Ok(true);
    }
    let signs = DVector::from_iterator(support.len(), support.iter().map(|&i| x_hat[i].signum()));
    let off: Vec<usize> = (0..x_hat.len()).filter(|&i| x_hat[i].abs() <= cut).collect();

    let sub = a.select_columns(support.iter());
    // minimum-norm least-squares solution of A_S^T nu = signs
    let svd = sub.transpose().svd(true, true);
    let mut nu = svd
        .solve(&signs, 1e-12)
        .map_err(|e| Error::Numerical(format!("dual certificate least squares: {e}")))?;
    if (sub.tr_mul(&nu) - &signs).amax() > tol {
        // support equations unsatisfiable: x_hat cannot be optimal
        return Ok(false);
    }
    if off.is_empty() {
        return Ok(true);
    }

    let off_bound = |nu: &DVector<f64>| -> f64 {
        off.iter().map(|&j| a.column(j).dot(nu).abs()).fold(0.0, f64::max)
    };
    if off_bound(&nu) <= 1.0 + tol {
        return Ok(true);
    }

    // alternating projections between the support-equation affine set and the
    // off-support slabs; converges to a certificate whenever one exists
    let gram = sub.tr_mul(&sub);
    let chol = match gram.cholesky() {
        Some(c) => c,
        None => return Ok(false),
    };
    let col_norms: Vec<f64> = off.iter().map(|&j| a.column(j).norm_squared()).collect();
    for _ in 0..CERT_POCS_MAX_ITER {
        for (pos, &j) in off.iter().enumerate() {
            let v = a.column(j).dot(&nu);
            if v.abs() > 1.0 {
                let excess = v - v.signum();
                nu -= a.column(j).scale(excess / col_norms[pos]);
            }
        }
        let defect = sub.tr_mul(&nu) - &signs;
        let corr = chol.solve(&defect);
        nu -= &sub * corr;
        if off_bound(&nu) <= 1.0 + tol {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn gaussian_instance(
        n: usize,
        m: usize,
        k: usize,
        seed: u64,
    ) -> ProblemInstance {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x = DVector::zeros(n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(k) {
            let mag: f64 = rng.sample::<f64, _>(StandardNormal);
            x[i] = mag.abs().max(1e-3) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        let y = &a * &x;
        ProblemInstance::new(a, y).unwrap().with_truth(x, k).unwrap()
    }

    #[test]
    fn soft_threshold_componentwise() {
        let v = DVector::from_vec(vec![2.0, -0.5, -3.0]);
        let out = soft_threshold(&v, 1.0).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0, -2.0]);
        let id = soft_threshold(&v, 0.0).unwrap();
        assert_eq!(id.as_slice(), v.as_slice());
        assert!(soft_threshold(&v, -0.1).is_err());
    }

    #[test]
    fn soft_threshold_firm_identity_and_nonexpansive() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..100 {
            let u = DVector::from_fn(20, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = DVector::from_fn(20, |_, _| rng.sample::<f64, _>(StandardNormal));
            let tau: f64 = rng.gen::<f64>() * 2.0;
            let su = soft_threshold(&u, tau).unwrap();
            let sv = soft_threshold(&v, tau).unwrap();
            assert!((&su - &sv).norm() <= (&u - &v).norm() + 1e-12);
            // firm shrinkage identity eta(v; tau) = v - clamp(v, -tau, tau)
            for i in 0..20 {
                let clamped = u[i].clamp(-tau, tau);
                assert_eq!(su[i], u[i] - clamped);
            }
        }
    }

    #[test]
    fn avg_derivative_counts() {
        let v = DVector::from_vec(vec![2.0, -0.5, -3.0]);
        assert!((avg_threshold_derivative(&v, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(avg_threshold_derivative(&v, 0.0).unwrap(), 1.0);
        let z = DVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(avg_threshold_derivative(&z, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn amp_zero_fixed_point() {
        let inst = gaussian_instance(30, 15, 0, 3);
        let opts = SolverOptions { max_iter: 10, conv_tol: 1e-9, ..Default::default() };
        let out = amp_solve(&inst, &opts).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        assert_eq!(out.estimate.norm(), 0.0);
    }

    #[test]
    fn amp_success_regime_seed7() {
        // n = 200, alpha = 0.5, beta = 0.5 * beta_w(0.5) -> k = 19
        let inst = gaussian_instance(200, 100, 19, 7);
        let opts = SolverOptions { max_iter: 3000, conv_tol: 1e-9, ..Default::default() };
        let out = amp_solve(&inst, &opts).unwrap();
        assert!(out.rel_error.unwrap() <= 1e-4, "rel_error = {:?}", out.rel_error);
    }

    #[test]
    fn amp_deterministic() {
        let inst = gaussian_instance(80, 40, 8, 11);
        let opts = SolverOptions {
            max_iter: 500,
            conv_tol: 1e-9,
            threshold_multiplier: Some(1.1),
            ..Default::default()
        };
        let a = amp_solve(&inst, &opts).unwrap();
        let b = amp_solve(&inst, &opts).unwrap();
        assert_eq!(a.estimate.as_slice(), b.estimate.as_slice());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn bp_square_invertible() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x_true = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &a * &x_true;
        let inst = ProblemInstance::new(a, y).unwrap();
        let out = basis_pursuit_solve(&inst, &SolverOptions::default()).unwrap();
        assert!((out.estimate - x_true).norm() <= 1e-8);
    }

    #[test]
    fn bp_matches_oracle_small() {
        let inst = gaussian_instance(12, 6, 1, 3);
        let opts = SolverOptions { certify: true, ..Default::default() };
        let out = basis_pursuit_solve(&inst, &opts).unwrap();
        let (oracle, unique) = l1_oracle_bruteforce(&inst).unwrap();
        assert!(unique);
        assert!((&out.estimate - &oracle).amax() <= 1e-6);
        assert_eq!(out.certified_optimal, Some(true));
        // minimality against the planted feasible point
        let l1 = |v: &DVector<f64>| v.iter().map(|t| t.abs()).sum::<f64>();
        assert!(l1(&out.estimate) <= l1(inst.truth.as_ref().unwrap()) + 1e-6);
    }

    #[test]
    fn bp_zero_measurements() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(4, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let inst = ProblemInstance::new(a, DVector::zeros(4)).unwrap();
        let out = basis_pursuit_solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(out.estimate.norm(), 0.0);
        assert!(out.converged);
    }

    #[test]
    fn bp_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let inst = ProblemInstance::new(a, y).unwrap();
        assert!(matches!(
            basis_pursuit_solve(&inst, &SolverOptions::default()),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn omp_orthonormal_exact() {
        let n = 10;
        let a = DMatrix::<f64>::identity(n, n);
        let mut x = DVector::zeros(n);
        x[2] = 1.5;
        x[7] = -0.25;
        let y = &a * &x;
        let inst = ProblemInstance::new(a, y).unwrap().with_truth(x, 2).unwrap();
        let out = omp_solve(&inst, 2).unwrap();
        assert!(out.rel_error.unwrap() <= 1e-12);
    }

    #[test]
    fn omp_residual_orthogonality() {
        let inst = gaussian_instance(100, 50, 3, 11);
        let out = omp_solve(&inst, 3).unwrap();
        assert!(out.rel_error.unwrap() <= 1e-8);
        let r = &inst.matrix * &out.estimate - &inst.measurements;
        for (i, v) in out.estimate.iter().enumerate() {
            if *v != 0.0 {
                assert!(inst.matrix.column(i).dot(&r).abs() <= 1e-10 * inst.measurements.norm());
            }
        }
        let nnz = out.estimate.iter().filter(|&&v| v != 0.0).count();
        assert!(nnz <= 3);
    }

    #[test]
    fn omp_domain_checks() {
        let inst = gaussian_instance(12, 6, 1, 3);
        assert!(omp_solve(&inst, 0).is_err());
        assert!(omp_solve(&inst, 7).is_err());
    }

    #[test]
    fn oracle_guards_and_edges() {
        let big = gaussian_instance(32, 6, 1, 3);
        assert!(matches!(l1_oracle_bruteforce(&big), Err(Error::SizeGuard(_))));

        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x_true = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &a * &x_true;
        let inst = ProblemInstance::new(a, y).unwrap();
        let (x, unique) = l1_oracle_bruteforce(&inst).unwrap();
        assert!(unique);
        assert!((x - x_true).norm() <= 1e-8);

        let a = DMatrix::from_fn(3, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let inst = ProblemInstance::new(a, DVector::zeros(3)).unwrap();
        let (x, unique) = l1_oracle_bruteforce(&inst).unwrap();
        assert_eq!(x.norm(), 0.0);
        assert!(unique);
    }

    #[test]
    fn oracle_returns_planted_minimum() {
        // a planted 1-sparse vector has strictly minimal l1 norm generically
        let inst = gaussian_instance(10, 5, 1, 23);
        let (x, unique) = l1_oracle_bruteforce(&inst).unwrap();
        assert!(unique);
        assert!((x - inst.truth.clone().unwrap()).amax() <= 1e-8);
    }

    #[test]
    fn certify_positive_and_negative() {
        let inst = gaussian_instance(12, 6, 2, 31);
        let (oracle, unique) = l1_oracle_bruteforce(&inst).unwrap();
        if unique {
            assert!(certify_l1_optimality(&inst, &oracle, 1e-6).unwrap());
        }

        // perturb away from optimality while staying feasible
        let a = &inst.matrix;
        let gram = (a * a.transpose()).cholesky().unwrap();
        let mut pert = DVector::from_fn(12, |i, _| ((i * 7 + 3) % 5) as f64 - 2.0);
        let w = gram.solve(&(a * &pert));
        pert -= a.tr_mul(&w);
        let candidate = &oracle + pert.scale(3.0 / pert.norm().max(1e-12));
        assert!(!certify_l1_optimality(&inst, &candidate, 1e-6).unwrap());
    }

    #[test]
    fn certify_square_vacuous() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let a = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &a * &x;
        let inst = ProblemInstance::new(a, y).unwrap();
        assert!(certify_l1_optimality(&inst, &x, 1e-6).unwrap());
    }

    #[test]
    fn certify_infeasible_precondition() {
        let inst = gaussian_instance(12, 6, 1, 3);
        let bad = DVector::from_element(12, 10.0);
        assert!(matches!(
            certify_l1_optimality(&inst, &bad, 1e-6),
            Err(Error::Precondition(_))
        ));
    }
}
