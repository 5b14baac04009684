//! Choosing the penalty coefficients `beta` by BIC or EBIC, and scoring
//! fits by cross-validated held-out log-likelihood.

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::golazo::{solve, GlassoSolution, PenaltyModel, SolverOptions};
use crate::gp::{self, BoOptions};
use crate::linalg::{linspace, upper_pairs};
use crate::model::{gaussian_loglik, sample_cov_of_rows, DataMatrix, NetworkStack, SampleCov};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    Bic,
    /// Extended BIC with `gamma` in `[0, 0.5]`.
    Ebic(f64),
}

impl Criterion {
    pub fn evaluate(&self, sol: &GlassoSolution, s: &SampleCov, n: usize) -> Result<f64> {
        match *self {
            Criterion::Bic => bic(sol, s, n),
            Criterion::Ebic(gamma) => ebic(sol, s, n, gamma),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Criterion::Bic => "BIC".into(),
            Criterion::Ebic(g) => format!("EBIC({g})"),
        }
    }
}

/// `-2 loglik + |E| log n`.
pub fn bic(sol: &GlassoSolution, s: &SampleCov, n: usize) -> Result<f64> {
    let ll = gaussian_loglik(s, &sol.theta, n)?;
    Ok(-2.0 * ll + sol.n_edges() as f64 * (n as f64).ln())
}

/// `bic + 4 |E| gamma log p`.
pub fn ebic(sol: &GlassoSolution, s: &SampleCov, n: usize, gamma: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&gamma) {
        return Err(Error::InvalidInput(format!("EBIC gamma {gamma} outside [0, 0.5]")));
    }
    let p = s.p() as f64;
    Ok(bic(sol, s, n)? + 4.0 * sol.n_edges() as f64 * gamma * p.ln())
}

/// `log max_{j != k} |R_jk|` for the correlation matrix `R` of `S`;
/// `-inf` when every off-diagonal correlation is zero.
pub fn beta0_upper_bound(s: &SampleCov) -> f64 {
    let r = s.correlation();
    max_abs_offdiag(&r).ln()
}

fn max_abs_offdiag(m: &DMatrix<f64>) -> f64 {
    upper_pairs(m.nrows())
        .into_iter()
        .map(|(j, k)| m[(j, k)].abs())
        .fold(0.0, f64::max)
}

/// Top of the intercept search range: above it every penalty exceeds every
/// `|S_jk|` when the network coefficients are zero.
fn beta0_top(s: &SampleCov) -> Result<f64> {
    let top = beta0_upper_bound(s).max(max_abs_offdiag(s.matrix()).ln());
    if top.is_finite() {
        Ok(top)
    } else {
        Err(Error::InvalidInput(
            "all off-diagonal covariances are zero; nothing to select".into(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub beta_hat: Vec<f64>,
    pub criterion_value: f64,
    pub criterion: Criterion,
    /// Every evaluated `(beta, criterion)`, failures recorded as `+inf`.
    pub trace: Vec<(Vec<f64>, f64)>,
    pub solution: GlassoSolution,
}

/// Grid layout. Without explicit values the search runs in two phases: a
/// one-dimensional intercept grid over `[top - beta0_width, top]`, then a
/// Cartesian grid with the intercept re-centred on the phase-one optimum
/// (`+- refine_width`) and every network coefficient on `beta_q_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub beta0_points: usize,
    pub beta0_width: f64,
    pub refine_width: f64,
    pub beta_q_points: usize,
    pub beta_q_range: (f64, f64),
    pub beta0_values: Option<Vec<f64>>,
    pub beta_q_values: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            beta0_points: 50,
            beta0_width: 5.0,
            refine_width: 2.5,
            beta_q_points: 50,
            beta_q_range: (-3.0, 3.0),
            beta0_values: None,
            beta_q_values: None,
        }
    }
}

impl GridSpec {
    /// A grid with the given values on every axis.
    pub fn explicit(beta0: Vec<f64>, beta_q: Vec<f64>) -> Self {
        Self {
            beta0_values: Some(beta0),
            beta_q_values: Some(beta_q),
            ..Self::default()
        }
    }
}

fn beta_q_axis(spec: &GridSpec) -> Vec<f64> {
    if let Some(v) = &spec.beta_q_values {
        return v.clone();
    }
    let mut axis = linspace(spec.beta_q_range.0, spec.beta_q_range.1, spec.beta_q_points);
    if spec.beta_q_range.0 <= 0.0 && spec.beta_q_range.1 >= 0.0 && !axis.contains(&0.0) {
        axis.push(0.0);
        axis.sort_by(f64::total_cmp);
    }
    axis
}

struct Evaluated {
    trace: Vec<(Vec<f64>, f64)>,
    best: Option<(usize, GlassoSolution)>,
}

/// Evaluates the Cartesian product `beta0 x beta_q^Q`. Each line of fixed
/// network coefficients sweeps the intercept from large to small with warm
/// starts; lines run in parallel and are merged in a fixed order.
fn evaluate_grid(
    s: &SampleCov,
    networks: &NetworkStack,
    criterion: Criterion,
    beta0: &[f64],
    beta_q: &[f64],
    opts: &SolverOptions,
) -> Result<Evaluated> {
    let q = networks.q();
    let mut lines: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..q {
        lines = lines
            .into_iter()
            .flat_map(|prefix| {
                beta_q.iter().map(move |b| {
                    let mut v = prefix.clone();
                    v.push(*b);
                    v
                })
            })
            .collect();
    }
    let mut b0: Vec<f64> = beta0.to_vec();
    b0.sort_by(|a, b| b.total_cmp(a));

    let per_line: Vec<Result<(Vec<(Vec<f64>, f64)>, Option<(usize, GlassoSolution)>)>> = lines
        .par_iter()
        .map(|rest| {
            let mut trace = Vec::with_capacity(b0.len());
            let mut warm: Option<GlassoSolution> = None;
            let mut best: Option<(usize, GlassoSolution)> = None;
            let mut best_val = f64::INFINITY;
            for &b in &b0 {
                let mut beta = Vec::with_capacity(q + 1);
                beta.push(b);
                beta.extend_from_slice(rest);
                let pen = PenaltyModel::from_beta(&beta, networks)?;
                let value = match solve(s, &pen, warm.as_ref(), opts) {
                    Ok(sol) => {
                        let v = criterion.evaluate(&sol, s, s.n_obs()).unwrap_or(f64::INFINITY);
                        if v < best_val {
                            best_val = v;
                            best = Some((trace.len(), sol.clone()));
                        }
                        warm = Some(sol);
                        v
                    }
                    Err(_) => f64::INFINITY,
                };
                trace.push((beta, value));
            }
            Ok((trace, best))
        })
        .collect();

    let mut trace = Vec::with_capacity(lines.len() * b0.len());
    let mut best: Option<(usize, GlassoSolution)> = None;
    let mut best_val = f64::INFINITY;
    for line in per_line {
        let (t, b) = line?;
        if let Some((i, sol)) = b {
            if t[i].1 < best_val {
                best_val = t[i].1;
                best = Some((trace.len() + i, sol));
            }
        }
        trace.extend(t);
    }
    Ok(Evaluated { trace, best })
}

fn into_result(eval: Evaluated, criterion: Criterion, mut prior: Vec<(Vec<f64>, f64)>) -> Result<SelectionResult> {
    let offset = prior.len();
    prior.extend(eval.trace);
    let (idx, solution) = eval
        .best
        .ok_or_else(|| Error::Numerical("every grid point failed to solve".into()))?;
    let (beta_hat, criterion_value) = prior[offset + idx].clone();
    Ok(SelectionResult {
        beta_hat,
        criterion_value,
        criterion,
        trace: prior,
        solution,
    })
}

/// Grid search for the criterion-minimizing `beta`.
pub fn grid_search(
    s: &SampleCov,
    networks: &NetworkStack,
    criterion: Criterion,
    spec: &GridSpec,
    opts: &SolverOptions,
) -> Result<SelectionResult> {
    let q = networks.q();
    if q > 2 {
        warn!("grid search over {q} network coefficients grows exponentially; consider Bayesian optimization");
    }
    if let Some(b0) = &spec.beta0_values {
        let bq = beta_q_axis(spec);
        if b0.is_empty() || (q > 0 && bq.is_empty()) {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        let eval = evaluate_grid(s, networks, criterion, b0, &bq, opts)?;
        return into_result(eval, criterion, Vec::new());
    }
    if spec.beta0_points == 0 || (q > 0 && spec.beta_q_points == 0) {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let top = beta0_top(s)?;
    let axis0 = linspace(top - spec.beta0_width, top, spec.beta0_points);
    let base = networks.subset(&[]);
    let phase1 = evaluate_grid(s, &base, criterion, &axis0, &[], opts)?;
    let phase1 = into_result(phase1, criterion, Vec::new())?;
    if q == 0 {
        return Ok(phase1);
    }
    let center = phase1.beta_hat[0];
    let padded: Vec<(Vec<f64>, f64)> = phase1
        .trace
        .into_iter()
        .map(|(b, v)| {
            let mut full = vec![0.0; q + 1];
            full[0] = b[0];
            (full, v)
        })
        .collect();
    let axis0 = linspace(center - spec.refine_width, center + spec.refine_width, spec.beta0_points);
    let eval = evaluate_grid(s, networks, criterion, &axis0, &beta_q_axis(spec), opts)?;
    let mut result = into_result(eval, criterion, padded)?;
    if phase1.criterion_value < result.criterion_value {
        // the refined grid need not contain the phase-one optimum
        let mut beta = vec![0.0; q + 1];
        beta[0] = center;
        result.beta_hat = beta;
        result.criterion_value = phase1.criterion_value;
        result.solution = phase1.solution;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesOptSpec {
    /// Defaults to `15 + 5 Q`.
    pub budget: Option<usize>,
    /// Defaults to `5 + 2 Q`.
    pub n_init: Option<usize>,
    pub beta0_width: f64,
    pub beta_q_range: (f64, f64),
    pub seed: u64,
    /// Coefficient vectors evaluated before the acquisition loop.
    pub warm_start: Vec<Vec<f64>>,
}

impl BayesOptSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            budget: None,
            n_init: None,
            beta0_width: 5.0,
            beta_q_range: (-3.0, 3.0),
            seed,
            warm_start: Vec::new(),
        }
    }
}

/// Gaussian-process Bayesian optimization of the criterion over
/// `beta_0 in [top - width, top]`, `beta_q in beta_q_range`, widened to
/// contain any warm-start points.
pub fn bayes_opt(
    s: &SampleCov,
    networks: &NetworkStack,
    criterion: Criterion,
    spec: &BayesOptSpec,
    opts: &SolverOptions,
) -> Result<SelectionResult> {
    let q = networks.q();
    let top = beta0_top(s)?;
    let mut bounds = vec![(top - spec.beta0_width, top)];
    bounds.extend(std::iter::repeat_n(spec.beta_q_range, q));
    // the box grows to hold the warm-start points
    for x in &spec.warm_start {
        for ((lo, hi), v) in bounds.iter_mut().zip(x) {
            *lo = lo.min(*v);
            *hi = hi.max(*v);
        }
    }
    let budget = spec.budget.unwrap_or(15 + 5 * q);
    let n_init = spec.n_init.unwrap_or(5 + 2 * q);
    let mut solutions: Vec<Option<GlassoSolution>> = Vec::new();
    let objective = |beta: &[f64]| -> f64 {
        let value = PenaltyModel::from_beta(beta, networks)
            .and_then(|pen| solve(s, &pen, None, opts))
            .and_then(|sol| {
                let v = criterion.evaluate(&sol, s, s.n_obs())?;
                Ok((v, sol))
            });
        match value {
            Ok((v, sol)) => {
                solutions.push(Some(sol));
                v
            }
            Err(_) => {
                solutions.push(None);
                f64::INFINITY
            }
        }
    };
    let mut bo = BoOptions::new(budget, n_init, spec.seed);
    bo.warm_start = spec.warm_start.clone();
    let trace = gp::minimize(objective, &bounds, &bo)?;
    let best = trace.best;
    let solution = solutions[best]
        .take()
        .ok_or_else(|| Error::Numerical("every evaluation failed to solve".into()))?;
    Ok(SelectionResult {
        beta_hat: trace.points[best].clone(),
        criterion_value: trace.values[best],
        criterion,
        trace: trace.points.into_iter().zip(trace.values).collect(),
        solution,
    })
}

/// Seeded fold assignment: rows are shuffled and cut into contiguous blocks.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || n < folds {
        return Err(Error::InvalidInput(format!("cannot split {n} rows into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assign = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assign[row] = pos * folds / n;
    }
    Ok(assign)
}

/// Held-out log-likelihood of each fold given `assign[row] = fold`.
pub fn cv_fold_scores(
    y: &DataMatrix,
    networks: &NetworkStack,
    beta: &[f64],
    assign: &[usize],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    if assign.len() != y.n() {
        return Err(Error::InvalidInput("one fold label per row required".into()));
    }
    let folds = assign.iter().copied().max().map_or(0, |m| m + 1);
    let pen = PenaltyModel::from_beta(beta, networks)?;
    (0..folds)
        .into_par_iter()
        .map(|f| {
            let test: Vec<usize> = (0..y.n()).filter(|&i| assign[i] == f).collect();
            let train: Vec<usize> = (0..y.n()).filter(|&i| assign[i] != f).collect();
            if train.len() <= 1 || test.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "fold {f} leaves {} training rows",
                    train.len()
                )));
            }
            let s_train = sample_cov_of_rows(&y.select_rows(&train));
            let sol = solve(&s_train, &pen, None, opts)?;
            let s_test = sample_cov_of_rows(&y.select_rows(&test));
            gaussian_loglik(&s_test, &sol.theta, test.len())
        })
        .collect()
}

/// Mean over folds of the total held-out log-likelihood.
pub fn cv_loglik(
    y: &DataMatrix,
    networks: &NetworkStack,
    beta: &[f64],
    folds: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<f64> {
    let assign = fold_assignment(y.n(), folds, seed)?;
    let scores = cv_fold_scores(y, networks, beta, &assign, opts)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
