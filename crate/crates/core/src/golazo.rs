//! Network graphical lasso.
//!
//! Maximizes `log det(Theta) - tr(S Theta) - sum_{j != k} lambda_jk |Theta_jk|`
//! through its dual: maximize `log det(Sigma)` over `|Sigma_jk - S_jk| <= lambda_jk`,
//! `Sigma_jj = S_jj`. Each row of `Sigma` is updated in turn by solving a
//! box-constrained quadratic program with coordinate descent.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_inverse, upper_pairs};
use crate::model::{NetworkStack, SampleCov};

/// Largest exponent passed to `exp` when building penalties.
pub const MAX_LOG_LAMBDA: f64 = 700.0;

/// Entries of `Theta` with magnitude below this count as zero (five-decimal
/// rounding).
pub const DEFAULT_EDGE_THRESHOLD: f64 = 0.5e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop when no entry of `Sigma` moves by more than this over a sweep.
    pub tol: f64,
    /// Defaults to `10 p` when `None`.
    pub max_sweeps: Option<usize>,
    pub edge_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: None,
            edge_threshold: DEFAULT_EDGE_THRESHOLD,
        }
    }
}

/// Edge penalties `lambda_jk = exp(beta_0 + sum_q beta_q a_jk^(q))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyModel {
    beta: Vec<f64>,
    log_lambda: DMatrix<f64>,
    lambda: DMatrix<f64>,
}

impl PenaltyModel {
    /// Penalties regressed on the standardized networks. `beta` has `Q + 1`
    /// entries, intercept first.
    pub fn from_beta(beta: &[f64], networks: &NetworkStack) -> Result<Self> {
        if beta.len() != networks.q() + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                networks.q() + 1,
                beta.len()
            )));
        }
        if beta.iter().any(|b| b.is_nan() || *b == f64::INFINITY) {
            return Err(Error::InvalidInput("penalty coefficients must not be NaN or +inf".into()));
        }
        let p = networks.p();
        let mut log_lambda = DMatrix::zeros(p, p);
        for (j, k) in upper_pairs(p) {
            let mut e = beta[0];
            for (q, a) in networks.standardized().iter().enumerate() {
                e += beta[q + 1] * a[(j, k)];
            }
            log_lambda[(j, k)] = e;
            log_lambda[(k, j)] = e;
        }
        Ok(Self::from_log_lambda(beta.to_vec(), log_lambda))
    }

    /// The same penalty on every edge (plain graphical lasso).
    pub fn constant(p: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid penalty {lambda}")));
        }
        let b0 = lambda.ln();
        let mut log_lambda = DMatrix::from_element(p, p, b0);
        log_lambda.fill_diagonal(0.0);
        Ok(Self::from_log_lambda(vec![b0], log_lambda))
    }

    /// Arbitrary symmetric nonnegative penalty matrix; `beta` is left empty.
    pub fn from_matrix(lambda: DMatrix<f64>) -> Result<Self> {
        let p = lambda.nrows();
        if !lambda.is_square() {
            return Err(Error::InvalidInput("penalty matrix must be square".into()));
        }
        for (j, k) in upper_pairs(p) {
            let l = lambda[(j, k)];
            if !(l >= 0.0 && l.is_finite()) || l != lambda[(k, j)] {
                return Err(Error::InvalidInput(format!("invalid penalty at ({j}, {k})")));
            }
        }
        let mut log_lambda = lambda.map(f64::ln);
        log_lambda.fill_diagonal(0.0);
        let mut lambda = lambda;
        lambda.fill_diagonal(0.0);
        Ok(Self {
            beta: Vec::new(),
            log_lambda,
            lambda,
        })
    }

    fn from_log_lambda(beta: Vec<f64>, log_lambda: DMatrix<f64>) -> Self {
        let p = log_lambda.nrows();
        let lambda = DMatrix::from_fn(p, p, |j, k| {
            if j == k {
                0.0
            } else {
                log_lambda[(j, k)].min(MAX_LOG_LAMBDA).exp()
            }
        });
        Self {
            beta,
            log_lambda,
            lambda,
        }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `lambda_jk`, with a zero diagonal.
    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn p(&self) -> usize {
        self.lambda.nrows()
    }

    /// Log-variance of the partial covariances under the equivalent Laplace
    /// prior: `log 2 - 2 log lambda_jk`. Zero on the diagonal.
    pub fn laplace_prior_logvar(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |j, k| {
            if j == k {
                0.0
            } else {
                std::f64::consts::LN_2 - 2.0 * self.log_lambda[(j, k)]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoSolution {
    pub theta: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// Unordered pairs `(j, k)`, `j < k`, with `|Theta_jk|` at or above the
    /// edge threshold.
    pub edges: Vec<(usize, usize)>,
    pub iterations: usize,
    pub dual_gap: f64,
}

impl GlassoSolution {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

/// Number of unordered pairs with `|Theta_jk| >= threshold`.
pub fn count_edges(theta: &DMatrix<f64>, threshold: f64) -> usize {
    edge_list(theta, threshold).len()
}

pub fn edge_list(theta: &DMatrix<f64>, threshold: f64) -> Vec<(usize, usize)> {
    upper_pairs(theta.nrows())
        .into_iter()
        .filter(|&(j, k)| theta[(j, k)].abs() >= threshold)
        .collect()
}

/// `tr(S Theta) + sum_{j != k} lambda_jk |Theta_jk| - p` for `Theta = Sigma^-1`.
pub fn duality_gap(s: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    let mut gap = crate::linalg::trace_of_product(s, theta) - p as f64;
    for j in 0..p {
        for k in 0..p {
            if j != k {
                gap += lambda[(j, k)] * theta[(j, k)].abs();
            }
        }
    }
    gap
}

/// Solves the network graphical lasso for fixed penalties.
pub fn solve(
    s: &SampleCov,
    penalty: &PenaltyModel,
    warm_start: Option<&GlassoSolution>,
    opts: &SolverOptions,
) -> Result<GlassoSolution> {
    let sm = s.matrix();
    let p = sm.nrows();
    if penalty.p() != p {
        return Err(Error::InvalidInput(format!(
            "penalty is {} x {0}, covariance is {p} x {p}",
            penalty.p()
        )));
    }
    if let Some(j) = (0..p).find(|&j| !(sm[(j, j)] > 0.0)) {
        return Err(Error::InvalidInput(format!("S[{j},{j}] must be positive")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let lambda = penalty.lambda();
    let max_sweeps = opts.max_sweeps.unwrap_or(10 * p).max(1);

    let mut sigma = warm_start
        .and_then(|w| project_warm_start(sm, lambda, &w.sigma))
        .map(Ok)
        .unwrap_or_else(|| cold_start(sm, lambda))?;

    let inner_tol = opts.tol / 10.0;
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut lo = DVector::zeros(p - 1);
    let mut hi = DVector::zeros(p - 1);
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let others: Vec<usize> = (0..p).filter(|&i| i != j).collect();
            let w = sigma.select_rows(others.iter()).select_columns(others.iter());
            let m = spd_inverse(&w).ok_or_else(|| {
                Error::Numerical(format!("row block {j} lost positive definiteness"))
            })?;
            let mut x = DVector::from_fn(p - 1, |i, _| sigma[(others[i], j)]);
            for (i, &o) in others.iter().enumerate() {
                lo[i] = sm[(o, j)] - lambda[(o, j)];
                hi[i] = sm[(o, j)] + lambda[(o, j)];
            }
            box_qp(&m, &mut x, &lo, &hi, inner_tol);
            for (i, &o) in others.iter().enumerate() {
                max_change = max_change.max((sigma[(o, j)] - x[i]).abs());
                sigma[(o, j)] = x[i];
                sigma[(j, o)] = x[i];
            }
        }
        last_change = max_change;
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }

    let solution = finish(sm, lambda, sigma, sweeps, opts)?;
    if converged {
        Ok(solution)
    } else {
        Err(Error::NotConverged {
            sweeps,
            gap: last_change,
            last: Box::new(solution),
        })
    }
}

/// Minimizes `x' M x` over `lo <= x <= hi` by cyclic coordinate descent.
fn box_qp(m: &DMatrix<f64>, x: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>, tol: f64) {
    let d = x.len();
    for i in 0..d {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
    let mut g = m * &*x;
    const MAX_PASSES: usize = 10_000;
    for _ in 0..MAX_PASSES {
        let mut change: f64 = 0.0;
        for i in 0..d {
            let mii = m[(i, i)];
            let rest = g[i] - mii * x[i];
            let new = (-rest / mii).clamp(lo[i], hi[i]);
            let delta = new - x[i];
            if delta != 0.0 {
                x[i] = new;
                g.axpy(delta, &m.column(i), 1.0);
                change = change.max(delta.abs());
            }
        }
        if change < tol {
            break;
        }
    }
}

/// `Sigma = diag(S) + c offdiag(S)` with the largest shrinkage (smallest `c`)
/// that keeps every entry inside its box.
fn cold_start(s: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = s.nrows();
    let mut c: f64 = 0.0;
    for (j, k) in upper_pairs(p) {
        let a = s[(j, k)].abs();
        if a > 0.0 {
            c = c.max(1.0 - lambda[(j, k)] / a);
        }
    }
    let c = c.clamp(0.0, 1.0);
    let sigma = DMatrix::from_fn(p, p, |j, k| if j == k { s[(j, j)] } else { c * s[(j, k)] });
    if cholesky(&sigma).is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(sigma)
}

fn project_warm_start(
    s: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    prev: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let p = s.nrows();
    if prev.shape() != (p, p) {
        return None;
    }
    let sigma = DMatrix::from_fn(p, p, |j, k| {
        if j == k {
            s[(j, j)]
        } else {
            prev[(j, k)].clamp(s[(j, k)] - lambda[(j, k)], s[(j, k)] + lambda[(j, k)])
        }
    });
    cholesky(&sigma).map(|_| sigma)
}

fn finish(
    s: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    sigma: DMatrix<f64>,
    iterations: usize,
    opts: &SolverOptions,
) -> Result<GlassoSolution> {
    let p = s.nrows();
    let mut theta = spd_inverse(&sigma).ok_or(Error::NotPositiveDefinite)?;
    // Complementary slackness: an inactive box constraint means a zero entry.
    for (j, k) in upper_pairs(p) {
        let slack = lambda[(j, k)] - (sigma[(j, k)] - s[(j, k)]).abs();
        if slack > 1e-9 * (1.0 + lambda[(j, k)]) {
            theta[(j, k)] = 0.0;
            theta[(k, j)] = 0.0;
        }
    }
    let dual_gap = duality_gap(s, &theta, lambda);
    let edges = edge_list(&theta, opts.edge_threshold);
    Ok(GlassoSolution {
        theta,
        sigma,
        edges,
        iterations,
        dual_gap,
    })
}
