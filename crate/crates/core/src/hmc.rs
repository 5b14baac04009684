//! Hamiltonian Monte Carlo with an identity mass matrix, jittered
//! trajectory lengths and dual-averaging step-size adaptation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::model::PrecisionParam;
use crate::spike_slab::{Eta, SpikeSlabModel};

/// A differentiable log-density on `R^d`.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// `None` outside the support or when the gradient is unavailable.
    fn log_density_and_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

impl Target for SpikeSlabModel {
    fn dim(&self) -> usize {
        SpikeSlabModel::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_density_unconstrained(x)
    }

    fn log_density_and_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        SpikeSlabModel::log_density_and_grad(self, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub n_warmup: usize,
    pub n_samples: usize,
    pub thin: usize,
    pub n_chains: usize,
    /// Mean number of leapfrog steps.
    pub leapfrog_steps: usize,
    /// Draw the number of steps uniformly from `[L/2, 3L/2]`.
    pub jitter_steps: bool,
    pub target_accept: f64,
    pub seed: u64,
    /// Starting step size; found by a doubling heuristic when `None`.
    pub init_step_size: Option<f64>,
}

impl McmcConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_warmup: 1000,
            n_samples: 2000,
            thin: 1,
            n_chains: 4,
            leapfrog_steps: 20,
            jitter_steps: true,
            target_accept: 0.8,
            seed,
            init_step_size: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidInput("thin must be at least 1".into()));
        }
        if !(self.target_accept > 0.5 && self.target_accept < 0.99) {
            return Err(Error::InvalidInput("target_accept must lie in (0.5, 0.99)".into()));
        }
        if self.n_chains == 0 || self.n_samples == 0 || self.leapfrog_steps == 0 {
            return Err(Error::InvalidInput("chains, samples and leapfrog steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// Retained post-warmup states.
    pub draws: Vec<Vec<f64>>,
    pub accept_rate: f64,
    pub divergences: usize,
    pub step_size: f64,
    /// Hamiltonian change of every post-warmup trajectory.
    pub energy_errors: Vec<f64>,
}

const DIVERGENCE_ENERGY: f64 = 1000.0;
const MAX_DIVERGENCE_RATE: f64 = 0.5;

/// Seeded generator for chain `chain`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 + 1);
    rng
}

enum Trajectory {
    Done { x: Vec<f64>, logp: f64, grad: Vec<f64>, delta_h: f64 },
    Diverged,
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

fn leapfrog<T: Target + ?Sized>(
    target: &T,
    x0: &[f64],
    logp0: f64,
    grad0: &[f64],
    p0: &[f64],
    eps: f64,
    steps: usize,
) -> Trajectory {
    let h0 = -logp0 + kinetic(p0);
    let mut x = x0.to_vec();
    let mut p = p0.to_vec();
    let mut grad = grad0.to_vec();
    let mut logp = logp0;
    for _ in 0..steps {
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * eps * gi;
        }
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += eps * pi;
        }
        match target.log_density_and_grad(&x) {
            Some((lp, g)) => {
                logp = lp;
                grad = g;
            }
            None => return Trajectory::Diverged,
        }
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * eps * gi;
        }
    }
    let delta_h = -logp + kinetic(&p) - h0;
    if !delta_h.is_finite() || delta_h > DIVERGENCE_ENERGY {
        return Trajectory::Diverged;
    }
    Trajectory::Done { x, logp, grad, delta_h }
}

fn momentum(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Doubles or halves a unit step until a single leapfrog step's acceptance
/// probability crosses one half.
fn initial_step_size<T: Target + ?Sized>(target: &T, x: &[f64], logp: f64, grad: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let mut eps = 1.0;
    let p = momentum(rng, x.len());
    let accept = |eps: f64| match leapfrog(target, x, logp, grad, &p, eps, 1) {
        Trajectory::Done { delta_h, .. } => (-delta_h).exp().min(1.0),
        Trajectory::Diverged => 0.0,
    };
    let a0 = accept(eps);
    let dir = if a0 > 0.5 { 1.0 } else { -1.0 };
    for _ in 0..60 {
        let a = accept(eps);
        let crossed = if dir > 0.0 { a <= 0.5 } else { a > 0.5 };
        if crossed {
            break;
        }
        eps *= 2f64.powf(dir);
    }
    eps
}

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps_bar: f64,
    m: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, delta: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            h_bar: 0.0,
            log_eps_bar: 0.0,
            m: 0.0,
            delta,
        }
    }

    fn update(&mut self, accept: f64) -> f64 {
        self.m += 1.0;
        let w = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.delta - accept);
        let log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.m.powf(-Self::KAPPA);
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar;
        log_eps.exp()
    }

    fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Runs one chain from `init`.
pub fn sample_chain<T: Target + ?Sized>(
    target: &T,
    init: &[f64],
    config: &McmcConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ChainOutput> {
    config.validate()?;
    let d = target.dim();
    if init.len() != d {
        return Err(Error::InvalidInput(format!("initial point has {} coordinates, target has {d}", init.len())));
    }
    let (mut logp, mut grad) = target
        .log_density_and_grad(init)
        .ok_or_else(|| Error::Sampler("initial point has zero posterior density".into()))?;
    let mut x = init.to_vec();
    let mut eps = match config.init_step_size {
        Some(e) if e > 0.0 => e,
        _ => initial_step_size(target, &x, logp, &grad, rng),
    };
    let mut adapt = DualAveraging::new(eps, config.target_accept);

    let total = config.n_warmup + config.n_samples;
    let mut draws = Vec::with_capacity(config.n_samples / config.thin);
    let mut energy_errors = Vec::with_capacity(config.n_samples);
    let mut accepted_sum = 0.0;
    let mut divergences = 0;
    for it in 0..total {
        let warm = it < config.n_warmup;
        if it == config.n_warmup && config.n_warmup > 0 {
            eps = adapt.final_step();
        }
        let steps = if config.jitter_steps {
            let l = config.leapfrog_steps;
            rng.random_range((l / 2).max(1)..=(3 * l / 2).max(1))
        } else {
            config.leapfrog_steps
        };
        let p0 = momentum(rng, d);
        let u: f64 = rng.random();
        let accept_prob = match leapfrog(target, &x, logp, &grad, &p0, eps, steps) {
            Trajectory::Done { x: xn, logp: lpn, grad: gn, delta_h } => {
                let a = (-delta_h).exp().min(1.0);
                if !warm {
                    energy_errors.push(delta_h);
                }
                if u < a {
                    x = xn;
                    logp = lpn;
                    grad = gn;
                }
                a
            }
            Trajectory::Diverged => {
                if !warm {
                    divergences += 1;
                    energy_errors.push(f64::INFINITY);
                }
                0.0
            }
        };
        if warm {
            eps = adapt.update(accept_prob);
        } else {
            accepted_sum += accept_prob;
            let i = it - config.n_warmup;
            if (i + 1) % config.thin == 0 {
                draws.push(x.clone());
            }
        }
    }
    let rate = divergences as f64 / config.n_samples as f64;
    if rate > MAX_DIVERGENCE_RATE {
        return Err(Error::Sampler(format!(
            "{:.0}% of post-warmup trajectories diverged; try a smaller step size or longer warmup",
            100.0 * rate
        )));
    }
    Ok(ChainOutput {
        draws,
        accept_rate: accepted_sum / config.n_samples as f64,
        divergences,
        step_size: eps,
        energy_errors,
    })
}

/// Runs `config.n_chains` chains in parallel; `init(chain, rng)` supplies
/// each starting point from that chain's generator.
pub fn sample<T, F>(target: &T, init: F, config: &McmcConfig) -> Result<Vec<ChainOutput>>
where
    T: Target + ?Sized,
    F: Fn(usize, &mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    config.validate()?;
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(config.seed, c);
            let x0 = init(c, &mut rng);
            sample_chain(target, &x0, config, &mut rng)
        })
        .collect()
}

/// Retained draws of a spike-and-slab fit with convergence summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcRun {
    /// `chains[c][i]` is the `i`-th retained draw of chain `c`.
    pub chains: Vec<Vec<(PrecisionParam, Eta)>>,
    pub accept_rate: f64,
    pub divergences: usize,
    pub step_sizes: Vec<f64>,
    /// Labels aligned with `ess` and `rhat`.
    pub param_names: Vec<String>,
    pub ess: Vec<f64>,
    pub rhat: Vec<f64>,
    pub eta_free: bool,
}

impl McmcRun {
    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    /// All retained draws, chain by chain.
    pub fn iter_draws(&self) -> impl Iterator<Item = &(PrecisionParam, Eta)> {
        self.chains.iter().flatten()
    }

    /// Flattened `eta` draws per chain.
    pub fn eta_chains(&self) -> Vec<Vec<Vec<f64>>> {
        self.chains
            .iter()
            .map(|c| c.iter().map(|(_, e)| e.flatten()).collect())
            .collect()
    }

    /// Diagnostics restricted to the `eta` coordinates.
    pub fn eta_diagnostics(&self) -> (Vec<f64>, Vec<f64>) {
        let mut ess = Vec::new();
        let mut rhat = Vec::new();
        for (i, name) in self.param_names.iter().enumerate() {
            if name.starts_with("eta") {
                ess.push(self.ess[i]);
                rhat.push(self.rhat[i]);
            }
        }
        (ess, rhat)
    }
}

/// Samples the spike-and-slab posterior and decodes every retained draw.
pub fn sample_spike_slab(model: &SpikeSlabModel, config: &McmcConfig) -> Result<McmcRun> {
    let outputs = sample(
        model,
        |_, rng| {
            let state = model.initial_state(rng);
            model.to_unconstrained(&state)
        },
        config,
    )?;
    let chains: Vec<Vec<(PrecisionParam, Eta)>> = outputs
        .iter()
        .map(|o| {
            o.draws
                .iter()
                .map(|x| model.decode(&model.from_unconstrained(x)))
                .collect()
        })
        .collect();

    let p = model.p();
    let pairs = model.pairs().to_vec();
    let mut names = Vec::new();
    let mut extractors: Vec<Box<dyn Fn(&(PrecisionParam, Eta)) -> f64>> = Vec::new();
    for &(j, k) in &pairs {
        names.push(format!("rho[{j},{k}]"));
        extractors.push(Box::new(move |d| d.0.partial_corr[(j, k)]));
    }
    for j in 0..p {
        names.push(format!("sqrt_diag[{j}]"));
        extractors.push(Box::new(move |d| d.0.sqrt_diag[j]));
    }
    if model.eta_is_free() {
        let k = model.q() + 1;
        for block in 0..3 {
            for c in 0..k {
                names.push(format!("eta{block}[{c}]"));
                extractors.push(Box::new(move |d| d.1.flatten()[block * k + c]));
            }
        }
    }
    let enough = chains.iter().all(|c| c.len() >= 10);
    let total = chains.iter().map(Vec::len).sum::<usize>() as f64;
    let mut ess = Vec::with_capacity(names.len());
    let mut rhat = Vec::with_capacity(names.len());
    for f in &extractors {
        let series: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|d| f(d)).collect()).collect();
        if enough {
            // reported ESS never exceeds the retained draws
            ess.push(diagnostics::ess(&series)?.min(total));
            rhat.push(diagnostics::rhat(&series)?);
        } else {
            ess.push(f64::NAN);
            rhat.push(f64::NAN);
        }
    }
    let n_iter = (config.n_samples * outputs.len()) as f64;
    Ok(McmcRun {
        chains,
        accept_rate: outputs.iter().map(|o| o.accept_rate * config.n_samples as f64).sum::<f64>() / n_iter,
        divergences: outputs.iter().map(|o| o.divergences).sum(),
        step_sizes: outputs.iter().map(|o| o.step_size).collect(),
        param_names: names,
        ess,
        rhat,
        eta_free: model.eta_is_free(),
    })
}
