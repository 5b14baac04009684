//! Data model shared by both estimators: observations, covariates, sample
//! covariance, the (scale, partial correlation) factorization of a precision
//! matrix, and the stack of external networks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, log_det_chol, trace_of_product, upper_pairs};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// An `n x p` matrix of observations (rows) on named variables (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 || p < 2 {
            return Err(Error::InvalidInput(format!(
                "data must be at least 2 x 2, got {n} x {p}"
            )));
        }
        if names.len() != p {
            return Err(Error::InvalidInput(format!(
                "{} column names for {p} columns",
                names.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                idx % n,
                names[idx / n]
            )));
        }
        Ok(Self { values, names })
    }

    /// Columns named `V1..Vp`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("V{j}")).collect();
        Self::new(values, names)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.values.select_rows(rows.iter())
    }

    /// Returns a copy whose columns are scaled to unit sample variance
    /// (divisor `n`). Columns are not re-centered.
    pub fn scaled_to_unit_variance(&self) -> Result<Self> {
        let n = self.n() as f64;
        let mut values = self.values.clone();
        for (j, mut col) in values.column_iter_mut().enumerate() {
            let ss = col.iter().map(|v| v * v).sum::<f64>() / n;
            if ss <= 0.0 {
                return Err(Error::ConstantColumn {
                    column: self.names[j].clone(),
                });
            }
            col /= ss.sqrt();
        }
        Ok(Self {
            values,
            names: self.names.clone(),
        })
    }
}

/// Covariates `x_i` used to remove the mean before graphical modelling.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    values: DMatrix<f64>,
    intercept: bool,
}

impl CovariateMatrix {
    pub fn new(values: DMatrix<f64>, intercept: bool) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite covariate value".into()));
        }
        if intercept {
            for (j, col) in values.column_iter().enumerate() {
                let first = col[0];
                if col.iter().all(|v| *v == first) {
                    return Err(Error::InvalidInput(format!(
                        "covariate column {j} is constant and duplicates the intercept"
                    )));
                }
            }
        }
        Ok(Self { values, intercept })
    }

    /// Intercept-only design with `n` rows.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            values: DMatrix::zeros(n, 0),
            intercept: true,
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Full design matrix, with the column of ones first when the intercept
    /// flag is set.
    pub fn design(&self) -> DMatrix<f64> {
        let n = self.values.nrows();
        if self.intercept {
            let mut x = DMatrix::from_element(n, self.values.ncols() + 1, 1.0);
            x.columns_mut(1, self.values.ncols()).copy_from(&self.values);
            x
        } else {
            self.values.clone()
        }
    }
}

/// Empirical covariance `S` and the number of observations behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCov {
    s: DMatrix<f64>,
    n_obs: usize,
}

impl SampleCov {
    pub fn new(s: DMatrix<f64>, n_obs: usize) -> Result<Self> {
        if !s.is_square() || s.nrows() < 1 {
            return Err(Error::InvalidInput("covariance must be square".into()));
        }
        let p = s.nrows();
        for j in 0..p {
            if !(s[(j, j)] >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "negative or non-finite variance at {j}"
                )));
            }
            for k in 0..j {
                let scale = 1.0f64.max(s[(j, k)].abs());
                if (s[(j, k)] - s[(k, j)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "covariance not symmetric at ({j}, {k})"
                    )));
                }
            }
        }
        Ok(Self { s, n_obs })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn p(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Empirical correlation matrix. Zero-variance variables get zero
    /// correlations.
    pub fn correlation(&self) -> DMatrix<f64> {
        let p = self.p();
        let sd: Vec<f64> = (0..p).map(|j| self.s[(j, j)].sqrt()).collect();
        DMatrix::from_fn(p, p, |j, k| {
            if j == k {
                1.0
            } else if sd[j] > 0.0 && sd[k] > 0.0 {
                self.s[(j, k)] / (sd[j] * sd[k])
            } else {
                0.0
            }
        })
    }
}

/// Precision matrix factored as `sqrt(Theta_jj)` and partial correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionParam {
    pub sqrt_diag: DVector<f64>,
    pub partial_corr: DMatrix<f64>,
}

impl PrecisionParam {
    pub fn new(sqrt_diag: DVector<f64>, partial_corr: DMatrix<f64>) -> Result<Self> {
        let p = sqrt_diag.len();
        if partial_corr.shape() != (p, p) {
            return Err(Error::InvalidInput(
                "partial correlation matrix has the wrong shape".into(),
            ));
        }
        if sqrt_diag.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidInput(
                "diagonal scales must be positive and finite".into(),
            ));
        }
        for j in 0..p {
            for k in 0..p {
                let r = partial_corr[(j, k)];
                if j == k {
                    if r != 0.0 {
                        return Err(Error::InvalidInput(
                            "partial correlation diagonal must be zero".into(),
                        ));
                    }
                } else if !(r.abs() < 1.0) || r != partial_corr[(k, j)] {
                    return Err(Error::InvalidInput(format!(
                        "invalid partial correlation at ({j}, {k})"
                    )));
                }
            }
        }
        Ok(Self {
            sqrt_diag,
            partial_corr,
        })
    }

    pub fn p(&self) -> usize {
        self.sqrt_diag.len()
    }

    /// Whether the assembled precision matrix is positive definite.
    pub fn is_valid(&self) -> bool {
        cholesky(&assemble_precision(self)).is_some()
    }
}

/// `Theta_jj = d_j^2`, `Theta_jk = -rho_jk d_j d_k`.
pub fn assemble_precision(param: &PrecisionParam) -> DMatrix<f64> {
    let d = &param.sqrt_diag;
    let p = d.len();
    DMatrix::from_fn(p, p, |j, k| {
        if j == k {
            d[j] * d[j]
        } else {
            -param.partial_corr[(j, k)] * d[j] * d[k]
        }
    })
}

/// `rho_jk = -Theta_jk / sqrt(Theta_jj Theta_kk)` with a zero diagonal.
pub fn partial_corr_of(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !theta.is_square() || cholesky(theta).is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let p = theta.nrows();
    let d: Vec<f64> = (0..p).map(|j| theta[(j, j)].sqrt()).collect();
    Ok(DMatrix::from_fn(p, p, |j, k| {
        if j == k {
            0.0
        } else {
            -0.5 * (theta[(j, k)] + theta[(k, j)]) / (d[j] * d[k])
        }
    }))
}

/// Gaussian log-likelihood of `n` zero-mean observations with empirical
/// covariance `S`, including the `-(n p / 2) log(2 pi)` constant.
pub fn gaussian_loglik(s: &SampleCov, theta: &DMatrix<f64>, n: usize) -> Result<f64> {
    if theta.shape() != s.matrix().shape() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let chol = cholesky(theta).ok_or(Error::NotPositiveDefinite)?;
    let n = n as f64;
    let p = theta.nrows() as f64;
    Ok(0.5 * n * (log_det_chol(&chol) - trace_of_product(s.matrix(), theta)) - 0.5 * n * p * LN_2PI)
}

/// Removes the least-squares fit of every column of `y` on the covariates.
pub fn residualize(y: &DataMatrix, x: &CovariateMatrix) -> Result<DataMatrix> {
    if x.n() != y.n() {
        return Err(Error::InvalidInput(format!(
            "covariates have {} rows, data has {}",
            x.n(),
            y.n()
        )));
    }
    let design = x.design();
    let d = design.ncols();
    if d == 0 {
        return Ok(y.clone());
    }
    if y.n() <= d {
        return Err(Error::InvalidInput(format!(
            "need more observations ({}) than covariates ({d})",
            y.n()
        )));
    }
    let basis = orthonormal_basis(&design)?;
    let coef = basis.transpose() * y.values();
    let resid = y.values() - &basis * coef;
    DataMatrix::new(resid, y.names().to_vec())
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns whose
/// residual norm collapses relative to their original norm are collinear.
fn orthonormal_basis(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = x.shape();
    let mut q = DMatrix::<f64>::zeros(n, d);
    let mut collinear = Vec::new();
    for j in 0..d {
        let original = x.column(j).norm();
        let mut v: DVector<f64> = x.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v.axpy(-proj, &qi, 1.0);
            }
        }
        let norm = v.norm();
        if original == 0.0 || norm <= 1e-10 * original {
            collinear.push(j);
            continue;
        }
        q.set_column(j, &(v / norm));
    }
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    Ok(q)
}

/// `S = (1/n) sum_i y_i y_i^T`; the data are taken to be mean-zero already.
pub fn sample_cov(y: &DataMatrix) -> SampleCov {
    let n = y.n();
    let s = (y.values().transpose() * y.values()) / n as f64;
    let s = crate::linalg::symmetrize(&s);
    SampleCov { s, n_obs: n }
}

/// Empirical covariance of a raw row block, same convention as [`sample_cov`].
pub fn sample_cov_of_rows(rows: &DMatrix<f64>) -> SampleCov {
    let n = rows.nrows().max(1);
    let s = crate::linalg::symmetrize(&((rows.transpose() * rows) / n as f64));
    SampleCov {
        s,
        n_obs: rows.nrows(),
    }
}

/// External networks `A^(1..Q)` on the same `p` variables, with their
/// standardized versions (off-diagonal entries scaled to mean 0, variance 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStack {
    p: usize,
    raw: Vec<DMatrix<f64>>,
    standardized: Vec<DMatrix<f64>>,
    names: Vec<String>,
}

impl NetworkStack {
    pub fn new(raw: Vec<DMatrix<f64>>, names: Vec<String>) -> Result<Self> {
        Self::with_dim(None, raw, names)
    }

    /// A stack with no networks (plain graphical lasso / spike-and-slab).
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            raw: Vec::new(),
            standardized: Vec::new(),
            names: Vec::new(),
        }
    }

    fn with_dim(p: Option<usize>, raw: Vec<DMatrix<f64>>, names: Vec<String>) -> Result<Self> {
        if raw.len() != names.len() {
            return Err(Error::InvalidInput("one name per network required".into()));
        }
        let p = match (p, raw.first()) {
            (Some(p), _) => p,
            (None, Some(a)) => a.nrows(),
            (None, None) => {
                return Err(Error::InvalidInput(
                    "use NetworkStack::empty for zero networks".into(),
                ))
            }
        };
        let mut standardized = Vec::with_capacity(raw.len());
        for (a, name) in raw.iter().zip(&names) {
            if a.shape() != (p, p) {
                return Err(Error::InvalidInput(format!(
                    "network {name} is {:?}, expected {p} x {p}",
                    a.shape()
                )));
            }
            standardized.push(standardize_network(a, name)?);
        }
        Ok(Self {
            p,
            raw,
            standardized,
            names,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of networks `Q`.
    pub fn q(&self) -> usize {
        self.raw.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn raw(&self) -> &[DMatrix<f64>] {
        &self.raw
    }

    pub fn standardized(&self) -> &[DMatrix<f64>] {
        &self.standardized
    }

    /// `(1, a_jk^(1), ..., a_jk^(Q))` on the standardized scale.
    pub fn edge_covariates(&self, j: usize, k: usize) -> Vec<f64> {
        let mut a = Vec::with_capacity(self.q() + 1);
        a.push(1.0);
        a.extend(self.standardized.iter().map(|m| m[(j, k)]));
        a
    }

    /// Keeps only the networks at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            p: self.p,
            raw: indices.iter().map(|&i| self.raw[i].clone()).collect(),
            standardized: indices.iter().map(|&i| self.standardized[i].clone()).collect(),
            names: indices.iter().map(|&i| self.names[i].clone()).collect(),
        }
    }
}

fn standardize_network(a: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    let p = a.nrows();
    for j in 0..p {
        for k in 0..j {
            if !a[(j, k)].is_finite() || !a[(k, j)].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "network {name} has a non-finite entry at ({j}, {k})"
                )));
            }
            if (a[(j, k)] - a[(k, j)]).abs() > 1e-8 {
                return Err(Error::InvalidInput(format!(
                    "network {name} is not symmetric at ({j}, {k})"
                )));
            }
        }
    }
    let pairs = upper_pairs(p);
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "network {name} needs at least three nodes"
        )));
    }
    let m = pairs.len() as f64;
    let mean = pairs.iter().map(|&(j, k)| a[(j, k)]).sum::<f64>() / m;
    let var = pairs
        .iter()
        .map(|&(j, k)| (a[(j, k)] - mean).powi(2))
        .sum::<f64>()
        / (m - 1.0);
    if !(var > 0.0) {
        return Err(Error::InvalidInput(format!(
            "network {name} has constant off-diagonal entries"
        )));
    }
    let sd = var.sqrt();
    let mut out = DMatrix::zeros(p, p);
    for &(j, k) in &pairs {
        let z = (a[(j, k)] - mean) / sd;
        out[(j, k)] = z;
        out[(k, j)] = z;
    }
    Ok(out)
}
