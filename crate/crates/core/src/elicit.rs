//! Default spike-and-slab hyperparameters.
//!
//! * `s0`: the spike puts 95% of its mass on `|rho| < 0.01`.
//! * `(m2, g2)`: `logistic(N(m2, g2^2))` has the mean and variance of
//!   `Beta(m_w, 1 - m_w)` with `m_w = 2 / (p - 1)`, so the prior expects `p`
//!   edges.
//! * `(m1, g1)`: the slab scale has its mode at `10 s0` and exceeds `3 s0`
//!   with probability 0.99.
//! * `g0`: the largest value for which independently drawn partial
//!   correlations form a positive-definite matrix with probability 0.95.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, logistic};
use crate::model::NetworkStack;
use crate::spike_slab::{sample_unit_de, Eta, EtaPrior, SpikeSlabHyper};

/// Half-width of the "practically zero" band for partial correlations.
pub const ZERO_BAND: f64 = 0.01;
pub const PD_TARGET: f64 = 0.95;
pub const G0_FLOOR: f64 = 1e-4;
pub const G0_CEILING: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ElicitOptions {
    pub n_draws: usize,
    pub bisection_steps: usize,
    pub seed: u64,
}

impl ElicitOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            n_draws: 10_000,
            bisection_steps: 20,
            seed,
        }
    }
}

/// `tau / ln 20` rounded to three decimals.
pub fn spike_scale() -> f64 {
    (ZERO_BAND / 20f64.ln() * 1000.0).round() / 1000.0
}

/// `(m1, g1)` from the mode and lower-quantile conditions.
pub fn dispersion_prior() -> (f64, f64) {
    let m1 = 9f64.ln();
    let z = Normal::standard().inverse_cdf(0.99);
    (m1, (m1 - 2f64.ln()) / z)
}

/// Fixed normal-weighted rule on `[-10, 10]` with 201 nodes.
struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    fn new() -> Self {
        let nodes: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
        let raw: Vec<f64> = nodes.iter().map(|z| (-0.5 * z * z).exp()).collect();
        let total: f64 = raw.iter().sum();
        Self {
            nodes,
            weights: raw.iter().map(|w| w / total).collect(),
        }
    }

    /// Mean and variance of `logistic(m + g Z)`.
    fn moments(&self, m: f64, g: f64) -> (f64, f64) {
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            let v = logistic(m + g * z);
            e1 += w * v;
            e2 += w * v * v;
        }
        (e1, (e2 - e1 * e1).max(0.0))
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo.signum() == fhi.signum() {
        return Err(Error::Numerical(format!("root not bracketed on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < 1e-12 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(m2, g2)` matching `logistic(N(m2, g2^2))` to `Beta(m_w, 1 - m_w)`.
pub fn probability_prior(p: usize) -> Result<(f64, f64)> {
    if p < 3 {
        return Err(Error::InvalidInput("need at least three variables".into()));
    }
    let mw = 2.0 / (p as f64 - 1.0);
    let target_var = mw * (1.0 - mw) / 2.0;
    let quad = Quadrature::new();
    let mean_for = |g: f64| bisect(|m| quad.moments(m, g).0 - mw, -200.0, 200.0);
    let g = bisect(
        |g| match mean_for(g) {
            Ok(m) => quad.moments(m, g).1 - target_var,
            Err(_) => f64::NAN,
        },
        1e-3,
        100.0,
    )?;
    Ok((mean_for(g)?, g))
}

/// Monte Carlo frequency with which `I - rho` is positive definite when the
/// entries of `rho` are drawn independently from the spike-and-slab prior
/// at average network values. Matrix `i` uses its own seeded stream, so
/// different `g0` share random numbers.
pub fn pd_frequency(p: usize, g0: f64, prior: &EtaPrior, s0: f64, n_draws: usize, seed: u64) -> f64 {
    let hits: usize = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let mean = g0 * z0;
            let s = s0 * (1.0 + (prior.m[1] + prior.g[1] * z1).exp());
            let w = logistic(prior.m[2] + prior.g[2] * z2);
            let mut m = nalgebra::DMatrix::<f64>::identity(p, p);
            for j in 0..p {
                for k in (j + 1)..p {
                    let slab = rng.random::<f64>() < w;
                    let r = sample_unit_de(&mut rng);
                    let rho = if slab { mean + s * r } else { s0 * r };
                    m[(j, k)] = -rho;
                    m[(k, j)] = -rho;
                }
            }
            usize::from(cholesky(&m).is_some())
        })
        .sum();
    hits as f64 / n_draws as f64
}

/// Elicited hyperparameters for `p` variables and the given networks; the
/// returned `eta` is the prior mean.
pub fn elicit_priors(p: usize, n: usize, networks: &NetworkStack, opts: &ElicitOptions) -> Result<SpikeSlabHyper> {
    if p < 3 {
        return Err(Error::InvalidInput("need at least three variables".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("need at least one observation".into()));
    }
    let s0 = spike_scale();
    let (m1, g1) = dispersion_prior();
    let (m2, g2) = probability_prior(p)?;
    let mut prior = EtaPrior {
        m: [0.0, m1, m2],
        g: [G0_FLOOR, g1, g2],
    };
    let freq = |g0: f64, prior: &EtaPrior| pd_frequency(p, g0, prior, s0, opts.n_draws, opts.seed);

    let g0 = if freq(G0_FLOOR, &prior) < PD_TARGET {
        return Err(Error::Numerical(format!(
            "prior positive-definiteness below {PD_TARGET} even at g0 = {G0_FLOOR}"
        )));
    } else if freq(G0_CEILING, &prior) >= PD_TARGET {
        G0_CEILING
    } else {
        let (mut lo, mut hi) = (G0_FLOOR, G0_CEILING);
        for _ in 0..opts.bisection_steps {
            let mid = 0.5 * (lo + hi);
            if freq(mid, &prior) >= PD_TARGET {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    prior.g[0] = g0;
    let q = networks.q();
    let mut eta = Eta::zeros(q);
    eta.eta1[0] = m1;
    eta.eta2[0] = m2;
    Ok(SpikeSlabHyper {
        eta,
        s0,
        prior,
        ig_a: 0.01,
        ig_b: 0.01,
    })
}
