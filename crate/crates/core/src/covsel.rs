//! Sample covariance and (weighted, constrained) graphical-lasso precision
//! estimation.
//!
//! The solver is the column-wise block coordinate descent of the graphical
//! lasso: the working covariance `W` is updated one row/column at a time by
//! solving a weighted lasso with coordinate descent. Entries with an infinite
//! penalty are treated as hard zeros; inside the solver they receive a finite
//! penalty of `1e6 · max|S|` and are set to exactly zero afterwards.

use nalgebra::{Cholesky, DMatrix};
use thiserror::Error;

use crate::graph::{pairs, AdjacencyMatrix, MaskPartition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CovselError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("ill-posed problem: {0}")]
    IllPosed(String),
    #[error("solver did not converge after {iterations} sweeps (kkt residual {residual:.3e}, relative objective change {objective_change:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        objective_change: f64,
    },
    #[error("estimate is not positive definite even after ridge regularization")]
    NotPositiveDefinite,
}

/// `n × k` matrix whose columns are i.i.d. zero-mean observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    x: DMatrix<f64>,
}

impl ObservationSet {
    pub fn new(x: DMatrix<f64>) -> Result<Self, CovselError> {
        if x.ncols() == 0 || x.nrows() == 0 {
            return Err(CovselError::InvalidInput(
                "need at least one variable and one sample".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CovselError::InvalidInput("non-finite observation".into()));
        }
        Ok(ObservationSet { x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// New observation set made of the given columns (repeats allowed).
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self, CovselError> {
        if cols.iter().any(|&c| c >= self.k()) {
            return Err(CovselError::InvalidInput("column index out of range".into()));
        }
        Self::new(self.x.select_columns(cols))
    }
}

/// `S = X Xᵀ / k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance(pub DMatrix<f64>);

impl SampleCovariance {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn sample_covariance(obs: &ObservationSet) -> SampleCovariance {
    let x = obs.matrix();
    let mut s = x * x.transpose() / obs.k() as f64;
    // exact symmetry regardless of summation order
    let n = s.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    SampleCovariance(s)
}

/// Per-entry nonnegative penalty weights with a zero diagonal. An infinite
/// weight marks a hard zero constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix(DMatrix<f64>);

impl PenaltyMatrix {
    pub fn zeros(n: usize) -> Self {
        PenaltyMatrix(DMatrix::zeros(n, n))
    }

    /// The same penalty on every off-diagonal entry.
    pub fn uniform(n: usize, lambda: f64) -> Result<Self, CovselError> {
        let mut p = Self::zeros(n);
        for (i, j) in pairs(n) {
            p.set(i, j, lambda)?;
        }
        Ok(p)
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, CovselError> {
        if m.nrows() != m.ncols() {
            return Err(CovselError::InvalidInput("penalty matrix must be square".into()));
        }
        let n = m.nrows();
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(CovselError::InvalidInput("penalty diagonal must be zero".into()));
            }
            for j in 0..n {
                let v = m[(i, j)];
                if v.is_nan() || v < 0.0 || v != m[(j, i)] {
                    return Err(CovselError::InvalidInput(format!(
                        "penalty ({i}, {j}) must be symmetric and nonnegative"
                    )));
                }
            }
        }
        Ok(PenaltyMatrix(m))
    }

    pub fn set(&mut self, i: usize, j: usize, lambda: f64) -> Result<(), CovselError> {
        if i == j || lambda.is_nan() || lambda < 0.0 {
            return Err(CovselError::InvalidInput(format!(
                "invalid penalty {lambda} at ({i}, {j})"
            )));
        }
        self.0[(i, j)] = lambda;
        self.0[(j, i)] = lambda;
        Ok(())
    }

    pub fn hard_zero(&mut self, i: usize, j: usize) -> Result<(), CovselError> {
        self.set(i, j, f64::INFINITY)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

/// Symmetric positive-definite precision estimate, exactly zero on
/// `zero_set`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    theta: DMatrix<f64>,
    zero_set: Vec<(usize, usize)>,
    pub sweeps: usize,
    pub kkt_residual: f64,
}

impl PrecisionEstimate {
    /// Wraps a known precision matrix (e.g. a synthesized ground truth).
    /// Checks symmetry and positive definiteness; `zero_set` is the
    /// off-diagonal zero pattern.
    pub fn from_matrix(theta: DMatrix<f64>) -> Result<Self, CovselError> {
        let n = theta.nrows();
        if theta.ncols() != n {
            return Err(CovselError::InvalidInput("precision must be square".into()));
        }
        for (i, j) in pairs(n) {
            if theta[(i, j)] != theta[(j, i)] {
                return Err(CovselError::InvalidInput(format!(
                    "precision not symmetric at ({i}, {j})"
                )));
            }
        }
        if Cholesky::new(theta.clone()).is_none() {
            return Err(CovselError::NotPositiveDefinite);
        }
        let zero_set = pairs(n).filter(|&(i, j)| theta[(i, j)] == 0.0).collect();
        Ok(PrecisionEstimate {
            theta,
            zero_set,
            sweeps: 0,
            kkt_residual: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.theta.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.theta[(i, j)]
    }

    /// Pairs `(i, j)`, `i < j`, constrained (or known) to be zero.
    pub fn zero_set(&self) -> &[(usize, usize)] {
        &self.zero_set
    }

    pub fn is_constrained_zero(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.zero_set.binary_search(&key).is_ok()
    }

    /// Off-diagonal support, `1[Θ_ij != 0]`.
    pub fn support(&self) -> AdjacencyMatrix {
        let n = self.n();
        let mut a = AdjacencyMatrix::empty(n);
        for (i, j) in pairs(n) {
            a.set_edge(i, j, self.theta[(i, j)] != 0.0);
        }
        a
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.theta
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative objective change that ends the outer sweeps.
    pub tol: f64,
    /// Bound on the stationarity residual, relative to `max|S|`.
    pub kkt_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            kkt_tol: 1e-8,
            max_iter: 500,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

const HARD_PENALTY_SCALE: f64 = 1e6;
const INNER_MAX_ITER: usize = 10_000;

/// Maximizes `log det Θ − tr(SΘ) − Σ_ij Λ_ij |Θ_ij|` over positive-definite
/// `Θ`.
pub fn weighted_glasso(
    s: &SampleCovariance,
    lambda: &PenaltyMatrix,
    opts: &SolverOptions,
) -> Result<PrecisionEstimate, CovselError> {
    let n = s.n();
    if lambda.n() != n || s.matrix().ncols() != n {
        return Err(CovselError::InvalidInput(format!(
            "dimension mismatch: S is {}x{}, penalty is {}x{}",
            s.matrix().nrows(),
            s.matrix().ncols(),
            lambda.n(),
            lambda.n()
        )));
    }
    if s.matrix().iter().any(|v| !v.is_finite()) {
        return Err(CovselError::InvalidInput("non-finite sample covariance".into()));
    }
    for i in 0..n {
        if s.matrix()[(i, i)] <= 0.0 {
            return Err(CovselError::IllPosed(format!(
                "variable {i} has zero sample variance"
            )));
        }
    }

    let hard_value = HARD_PENALTY_SCALE * s.max_abs();
    let mut zero_set = Vec::new();
    let mut weights = lambda.0.clone();
    for (i, j) in pairs(n) {
        if weights[(i, j)].is_infinite() {
            zero_set.push((i, j));
            weights[(i, j)] = hard_value;
            weights[(j, i)] = hard_value;
        }
    }
    let penalized_any = pairs(n).any(|(i, j)| weights[(i, j)] > 0.0);

    if !penalized_any {
        // No penalty and no constraint: the maximizer is S⁻¹.
        let singular = || CovselError::IllPosed("sample covariance is singular and nothing is penalized".into());
        let chol = Cholesky::new(s.0.clone()).ok_or_else(singular)?;
        let min_pivot = chol.l().diagonal().min();
        let max_var = s.0.diagonal().max();
        if min_pivot * min_pivot <= 1e-12 * max_var {
            return Err(singular());
        }
        let theta = symmetrize(chol.inverse());
        return finish(s, &weights, theta, zero_set, 0);
    }

    let mut solver = ColumnSolver::new(s, &weights);
    let scale = s.max_abs().max(f64::MIN_POSITIVE);
    let mut prev_obj = f64::NEG_INFINITY;
    let mut last_change = f64::INFINITY;
    let mut last_kkt = f64::INFINITY;
    let mut reconstruct_err = None;
    for sweep in 1..=opts.max_iter {
        solver.sweep()?;
        // Mid-descent the stored columns can be mutually inconsistent, so a
        // failed reconstruction only counts against convergence.
        let theta = match solver.precision() {
            Ok(t) => {
                reconstruct_err = None;
                t
            }
            Err(e) => {
                reconstruct_err = Some(e);
                prev_obj = f64::NEG_INFINITY;
                continue;
            }
        };
        let obj = objective(s, &weights, &theta);
        let kkt = match Cholesky::new(theta.clone()) {
            Some(chol) => kkt_residual(s, &weights, &theta, &chol.inverse()) / scale,
            None => f64::INFINITY,
        };
        last_change = ((obj - prev_obj) / obj.abs().max(1.0)).abs();
        last_kkt = kkt;
        prev_obj = obj;
        if last_change < opts.tol && kkt <= opts.kkt_tol {
            return finish(s, &weights, theta, zero_set, sweep);
        }
    }
    if let Some(e) = reconstruct_err {
        return Err(e);
    }
    Err(CovselError::NotConverged {
        iterations: opts.max_iter,
        residual: last_kkt,
        objective_change: last_change,
    })
}

/// Maximum-likelihood precision with `Θ_ij = 0` forced wherever an observed
/// pair is known to be absent. Every other entry is left unpenalized.
pub fn constrained_mle(
    s: &SampleCovariance,
    a_obs: &AdjacencyMatrix,
    mask: &MaskPartition,
    opts: &SolverOptions,
) -> Result<PrecisionEstimate, CovselError> {
    let n = s.n();
    if a_obs.n() != n || mask.n() != n {
        return Err(CovselError::InvalidInput("dimension mismatch".into()));
    }
    let mut lambda = PenaltyMatrix::zeros(n);
    for (i, j) in mask.observed_pairs() {
        if !a_obs.has_edge(i, j) {
            lambda.hard_zero(i, j)?;
        }
    }
    weighted_glasso(s, &lambda, opts)
}

/// `log det Θ − tr(SΘ) − Σ_ij Λ_ij |Θ_ij|` (ordered pairs), `-inf` outside the
/// positive-definite cone.
pub fn objective(s: &SampleCovariance, weights: &DMatrix<f64>, theta: &DMatrix<f64>) -> f64 {
    let Some(chol) = Cholesky::new(theta.clone()) else {
        return f64::NEG_INFINITY;
    };
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = s.0.component_mul(theta).sum();
    let penalty = weights.component_mul(&theta.abs()).sum();
    logdet - trace - penalty
}

/// Largest violation of the stationarity conditions of the weighted problem.
/// Hard-zero entries (very large weights) are always satisfied.
fn kkt_residual(
    s: &SampleCovariance,
    weights: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
) -> f64 {
    let n = s.n();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let g = sigma[(i, j)] - s.0[(i, j)];
            let w = weights[(i, j)];
            let r = if i == j || w == 0.0 {
                g.abs()
            } else if theta[(i, j)] != 0.0 {
                (g - w * theta[(i, j)].signum()).abs()
            } else {
                (g.abs() - w).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}

fn finish(
    s: &SampleCovariance,
    weights: &DMatrix<f64>,
    mut theta: DMatrix<f64>,
    zero_set: Vec<(usize, usize)>,
    sweeps: usize,
) -> Result<PrecisionEstimate, CovselError> {
    let n = s.n();
    for &(i, j) in &zero_set {
        theta[(i, j)] = 0.0;
        theta[(j, i)] = 0.0;
    }
    let chol = match Cholesky::new(theta.clone()) {
        Some(c) => c,
        None => {
            let ridge = 1e-8 * s.0.trace() / n as f64;
            for i in 0..n {
                theta[(i, i)] += ridge;
            }
            Cholesky::new(theta.clone()).ok_or(CovselError::NotPositiveDefinite)?
        }
    };
    let scale = s.max_abs().max(f64::MIN_POSITIVE);
    let kkt = kkt_residual(s, weights, &theta, &chol.inverse()) / scale;
    Ok(PrecisionEstimate {
        theta,
        zero_set,
        sweeps,
        kkt_residual: kkt,
    })
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// State of the column-wise block coordinate descent.
struct ColumnSolver<'a> {
    s: &'a DMatrix<f64>,
    weights: &'a DMatrix<f64>,
    w: DMatrix<f64>,
    /// Lasso coefficients per column, indexed by the full node index (the
    /// entry for the column itself is unused).
    beta: DMatrix<f64>,
}

impl<'a> ColumnSolver<'a> {
    fn new(s: &'a SampleCovariance, weights: &'a DMatrix<f64>) -> Self {
        let n = s.n();
        // Block updates keep W positive definite only when W starts inside the
        // dual box |W − S| ≤ Λ: use S itself if it is positive definite, else S
        // shrunk toward its diagonal by at most Λ.
        let shrunk = DMatrix::from_fn(n, n, |i, j| {
            let v = s.0[(i, j)];
            if i == j {
                v
            } else {
                v - v.clamp(-weights[(i, j)], weights[(i, j)])
            }
        });
        let w = [s.0.clone(), shrunk]
            .into_iter()
            .find(|m| Cholesky::new(m.clone()).is_some())
            .unwrap_or_else(|| DMatrix::from_diagonal(&s.0.diagonal()));
        ColumnSolver {
            s: &s.0,
            weights,
            w,
            beta: DMatrix::zeros(n, n),
        }
    }

    fn sweep(&mut self) -> Result<(), CovselError> {
        let n = self.s.nrows();
        let mut g = vec![0.0; n];
        for j in 0..n {
            // g = W_{-j,-j} β restricted to the off-column indices.
            for a in 0..n {
                if a == j {
                    continue;
                }
                g[a] = (0..n)
                    .filter(|&b| b != j)
                    .map(|b| self.w[(a, b)] * self.beta[(b, j)])
                    .sum();
            }
            let scale = (0..n)
                .filter(|&a| a != j)
                .fold(0.0f64, |m, a| m.max(self.s[(a, j)].abs()))
                .max(1e-300);
            for _ in 0..INNER_MAX_ITER {
                let mut max_delta = 0.0f64;
                for a in 0..n {
                    if a == j {
                        continue;
                    }
                    let vaa = self.w[(a, a)];
                    let old = self.beta[(a, j)];
                    let r = self.s[(a, j)] - (g[a] - vaa * old);
                    let new = soft_threshold(r, self.weights[(a, j)]) / vaa;
                    let delta = new - old;
                    if delta != 0.0 {
                        self.beta[(a, j)] = new;
                        for b in 0..n {
                            if b != j {
                                g[b] += self.w[(b, a)] * delta;
                            }
                        }
                        max_delta = max_delta.max((delta * vaa).abs());
                    }
                }
                if max_delta <= 1e-14 * scale {
                    break;
                }
            }
            for a in 0..n {
                if a != j {
                    if !g[a].is_finite() {
                        return Err(CovselError::IllPosed(
                            "coordinate descent diverged; the problem has no finite maximizer"
                                .into(),
                        ));
                    }
                    self.w[(a, j)] = g[a];
                    self.w[(j, a)] = g[a];
                }
            }
        }
        Ok(())
    }

    fn precision(&self) -> Result<DMatrix<f64>, CovselError> {
        let n = self.s.nrows();
        let mut theta = DMatrix::zeros(n, n);
        for j in 0..n {
            let quad: f64 = (0..n)
                .filter(|&a| a != j)
                .map(|a| self.w[(a, j)] * self.beta[(a, j)])
                .sum();
            let denom = self.w[(j, j)] - quad;
            if !(denom > 0.0) || !denom.is_finite() {
                return Err(CovselError::IllPosed(format!(
                    "non-positive Schur complement in column {j}; the problem has no finite maximizer"
                )));
            }
            let tjj = 1.0 / denom;
            theta[(j, j)] = tjj;
            for a in 0..n {
                if a != j {
                    theta[(a, j)] = -self.beta[(a, j)] * tjj;
                }
            }
        }
        Ok(symmetrize(theta))
    }
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}
