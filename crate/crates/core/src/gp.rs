//! Gaussian-process Bayesian optimization over a box.
//!
//! Inputs are mapped to the unit cube and outputs standardized before the
//! surrogate is fit. The acquisition is the lower confidence bound
//! `mu - kappa * sd` (minimization form of UCB).

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::cholesky;

#[derive(Debug, Clone, PartialEq)]
pub struct BoOptions {
    pub budget: usize,
    pub n_init: usize,
    pub kappa: f64,
    pub seed: u64,
    /// Random starting points for the acquisition search.
    pub n_candidates: usize,
    /// Points evaluated after the initial design, in box coordinates;
    /// clamped to the box. They count toward the budget.
    pub warm_start: Vec<Vec<f64>>,
}

impl BoOptions {
    pub fn new(budget: usize, n_init: usize, seed: u64) -> Self {
        Self {
            budget,
            n_init,
            kappa: 2.0,
            seed,
            n_candidates: 512,
            warm_start: Vec::new(),
        }
    }
}

/// Every evaluated point in order, with the index of the best one.
#[derive(Debug, Clone, PartialEq)]
pub struct BoTrace {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub best: usize,
}

impl BoTrace {
    pub fn best_point(&self) -> &[f64] {
        &self.points[self.best]
    }

    pub fn best_value(&self) -> f64 {
        self.values[self.best]
    }
}

/// Fitted squared-exponential GP on unit-cube inputs.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    length: Vec<f64>,
    signal: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
}

const LENGTH_GRID: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
const SIGNAL_GRID: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
const NOISE_GRID: [f64; 4] = [1e-6, 1e-4, 1e-2, 1e-1];

impl GaussianProcess {
    /// Length-scales start from the per-dimension median of pairwise
    /// distances; a common multiplier, the signal and the noise variance are
    /// chosen by marginal likelihood over a fixed grid.
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::InvalidInput("GP needs matching, nonempty inputs".into()));
        }
        let d = x[0].len();
        let median: Vec<f64> = (0..d).map(|i| median_distance(x, i)).collect();
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));

        type Fit = (f64, Vec<f64>, f64, nalgebra::Cholesky<f64, nalgebra::Dyn>, DVector<f64>);
        let mut best: Option<Fit> = None;
        for &mult in &LENGTH_GRID {
            let length: Vec<f64> = median.iter().map(|l| (l * mult).clamp(0.02, 2.0)).collect();
            let base = kernel_matrix(x, &length);
            for &signal in &SIGNAL_GRID {
                for &noise in &NOISE_GRID {
                    let mut k = &base * signal;
                    for i in 0..y.len() {
                        k[(i, i)] += noise;
                    }
                    let Some(chol) = jittered_cholesky(k) else {
                        continue;
                    };
                    let alpha = chol.solve(&ys);
                    let logml = -0.5 * ys.dot(&alpha)
                        - chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                    if best.as_ref().is_none_or(|b| logml > b.0) {
                        best = Some((logml, length.clone(), signal, chol, alpha));
                    }
                }
            }
        }
        let (_, length, signal, chol, alpha) =
            best.ok_or_else(|| Error::Numerical("GP kernel matrix is degenerate".into()))?;
        Ok(Self {
            x: x.to_vec(),
            length,
            signal,
            chol,
            alpha,
            y_mean,
            y_scale,
        })
    }

    /// Posterior mean and standard deviation on the original output scale.
    pub fn predict(&self, z: &[f64]) -> (f64, f64) {
        let kx = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| self.signal * se(xi, z, &self.length)));
        let mean = kx.dot(&self.alpha);
        let v = self.chol.solve(&kx);
        let var = (self.signal - kx.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

fn se(a: &[f64], b: &[f64], length: &[f64]) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(length)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    (-0.5 * r2).exp()
}

fn kernel_matrix(x: &[Vec<f64>], length: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| se(&x[i], &x[j], length))
}

fn median_distance(x: &[Vec<f64>], dim: usize) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let v = (x[i][dim] - x[j][dim]).abs();
            if v > 0.0 {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return 0.3;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2].clamp(0.05, 1.0)
}

fn jittered_cholesky(k: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = cholesky(&k) {
        return Some(c);
    }
    let mut jitter = 1e-10;
    while jitter <= 1e-2 {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = cholesky(&kj) {
            return Some(c);
        }
        jitter *= 10.0;
    }
    None
}

/// Stratified space-filling design in the unit cube.
pub fn latin_hypercube(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    for dim in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            pts[i][dim] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

/// Minimizes `f` over the box `bounds` within `opts.budget` evaluations.
/// Non-finite values are kept in the trace but replaced by a pessimistic
/// finite value when fitting the surrogate.
pub fn minimize<F>(mut f: F, bounds: &[(f64, f64)], opts: &BoOptions) -> Result<BoTrace>
where
    F: FnMut(&[f64]) -> f64,
{
    let d = bounds.len();
    if d == 0 {
        return Err(Error::InvalidInput("empty search box".into()));
    }
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(Error::InvalidInput(format!("invalid search box {bounds:?}")));
    }
    if opts.budget < d + 2 {
        return Err(Error::InvalidInput(format!(
            "budget {} below the minimum {}",
            opts.budget,
            d + 2
        )));
    }
    let to_box = |z: &[f64]| -> Vec<f64> {
        z.iter()
            .zip(bounds)
            .map(|(u, (lo, hi))| lo + u * (hi - lo))
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n_init = opts.n_init.clamp(2, opts.budget);
    let mut unit = latin_hypercube(n_init, d, &mut rng);
    let mut points: Vec<Vec<f64>> = unit.iter().map(|z| to_box(z)).collect();
    for x in opts.warm_start.iter().take(opts.budget - n_init) {
        if x.len() != d {
            return Err(Error::InvalidInput(format!("warm-start point of length {} for {d} dimensions", x.len())));
        }
        let x: Vec<f64> = x.iter().zip(bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect();
        unit.push(x.iter().zip(bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect());
        points.push(x);
    }
    let mut values: Vec<f64> = points.iter().map(|x| f(x)).collect();

    while values.len() < opts.budget {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let z = if finite.is_empty() {
            (0..d).map(|_| rng.random::<f64>()).collect()
        } else {
            let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let fill = hi + (hi - lo).max(1.0);
            let ys: Vec<f64> = values.iter().map(|v| if v.is_finite() { *v } else { fill }).collect();
            let gp = GaussianProcess::fit(&unit, &ys)?;
            next_point(&gp, &unit, opts, &mut rng)
        };
        let x = to_box(&z);
        values.push(f(&x));
        points.push(x);
        unit.push(z);
    }

    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = i;
        }
    }
    Ok(BoTrace {
        points,
        values,
        best,
    })
}

fn next_point(gp: &GaussianProcess, seen: &[Vec<f64>], opts: &BoOptions, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = seen[0].len();
    let acq = |z: &[f64]| {
        let (m, s) = gp.predict(z);
        m - opts.kappa * s
    };
    let mut starts: Vec<(f64, Vec<f64>)> = (0..opts.n_candidates)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            (acq(&z), z)
        })
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (v, z) in starts.into_iter().take(5) {
        let (v, z) = pattern_search(&acq, z, v);
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, z));
        }
    }
    let (_, z) = best.expect("at least one candidate");
    let duplicate = seen
        .iter()
        .any(|s| s.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-9));
    if duplicate {
        (0..d).map(|_| rng.random::<f64>()).collect()
    } else {
        z
    }
}

/// Compass search inside the unit cube.
fn pattern_search<A: Fn(&[f64]) -> f64>(acq: &A, mut z: Vec<f64>, mut v: f64) -> (f64, Vec<f64>) {
    let mut step = 0.1;
    while step > 1e-4 {
        let mut improved = false;
        for i in 0..z.len() {
            for dir in [-1.0, 1.0] {
                let mut c = z.clone();
                c[i] = (c[i] + dir * step).clamp(0.0, 1.0);
                let cv = acq(&c);
                if cv < v {
                    z = c;
                    v = cv;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (v, z)
}
