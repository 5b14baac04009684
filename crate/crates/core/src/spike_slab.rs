//! Network spike-and-slab prior on partial correlations.
//!
//! Each `rho_jk` is a two-component double-exponential mixture. The slab's
//! probability `w_jk`, location and scale `s_jk` are regressed on the edge's
//! network covariates `a_jk = (1, a_jk^(1), ..., a_jk^(Q))`:
//!
//! ```text
//! w_jk    = logistic(eta2' a_jk)
//! mean_jk = eta0' a_jk
//! s_jk    = s0 (1 + exp(eta1' a_jk))
//! ```
//!
//! Sampling uses unit-scale latents: `rho = h s0 r_spike + (1 - h)(mean + s r_slab)`
//! where `h = sigmoid(100 (u - w))` smooths the spike indicator `u > w`.
//! The network coefficients are sampled on a standardized scale `eta_tilde`
//! with variance `V = p (p - 1) / (2 n)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, log_det_chol, logistic, trace_of_product, upper_pairs};
use crate::model::{assemble_precision, partial_corr_of, NetworkStack, PrecisionParam, SampleCov};

/// Slope of the smoothed spike indicator.
pub const SIGMOID_SLOPE: f64 = 100.0;
const MAX_EXP: f64 = 700.0;
const LN_2: f64 = std::f64::consts::LN_2;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Slab regression coefficients, each of length `Q + 1` (intercept first).
#[derive(Debug, Clone, PartialEq)]
pub struct Eta {
    /// Slab location.
    pub eta0: Vec<f64>,
    /// Slab dispersion.
    pub eta1: Vec<f64>,
    /// Slab probability.
    pub eta2: Vec<f64>,
}

impl Eta {
    pub fn zeros(q: usize) -> Self {
        Self {
            eta0: vec![0.0; q + 1],
            eta1: vec![0.0; q + 1],
            eta2: vec![0.0; q + 1],
        }
    }

    pub fn q(&self) -> usize {
        self.eta0.len() - 1
    }

    /// `[eta0, eta1, eta2]` concatenated.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.eta0.clone();
        v.extend_from_slice(&self.eta1);
        v.extend_from_slice(&self.eta2);
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.is_empty() || v.len() % 3 != 0 {
            return Err(Error::InvalidInput(format!("cannot split {} values into three blocks", v.len())));
        }
        let k = v.len() / 3;
        Ok(Self {
            eta0: v[..k].to_vec(),
            eta1: v[k..2 * k].to_vec(),
            eta2: v[2 * k..].to_vec(),
        })
    }
}

/// Gaussian prior on the coefficients. Intercepts have means `m`; network
/// effects have mean zero; both share the standard deviation `g` per block.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaPrior {
    /// Intercept means for (location, dispersion, probability); `m[0]` is 0.
    pub m: [f64; 3],
    /// Standard deviations for (location, dispersion, probability).
    pub g: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSlabHyper {
    pub eta: Eta,
    pub s0: f64,
    pub prior: EtaPrior,
    pub ig_a: f64,
    pub ig_b: f64,
}

impl SpikeSlabHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0) {
            return Err(Error::InvalidInput("spike scale must be positive".into()));
        }
        if self.prior.g.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidInput("prior standard deviations must be positive".into()));
        }
        if !(self.ig_a > 0.0 && self.ig_b > 0.0) {
            return Err(Error::InvalidInput("inverse-gamma parameters must be positive".into()));
        }
        let k = self.eta.eta0.len();
        if k == 0 || self.eta.eta1.len() != k || self.eta.eta2.len() != k {
            return Err(Error::InvalidInput("eta blocks must have equal, nonzero length".into()));
        }
        Ok(())
    }
}

/// Sampler coordinates for one state of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub sqrt_diag: DVector<f64>,
    pub rho_spike_raw: Vec<f64>,
    pub rho_slab_raw: Vec<f64>,
    pub u: Vec<f64>,
    /// `[location, dispersion, probability]` blocks of length `Q + 1`; empty
    /// when the coefficients are held fixed.
    pub eta_tilde: Vec<f64>,
}

/// Gradient of the log-posterior with respect to each latent block.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGradient {
    pub sqrt_diag: Vec<f64>,
    pub rho_spike_raw: Vec<f64>,
    pub rho_slab_raw: Vec<f64>,
    pub u: Vec<f64>,
    pub eta_tilde: Vec<f64>,
}

/// `(w, mean, s)` for one edge.
pub fn slab_terms(a: &[f64], eta: &Eta, s0: f64) -> (f64, f64, f64) {
    let (w, mean, s, _) = slab_terms_with_exp(a, eta, s0);
    (w, mean, s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Also returns `d s / d(eta1' a)`.
fn slab_terms_with_exp(a: &[f64], eta: &Eta, s0: f64) -> (f64, f64, f64, f64) {
    let w = logistic(dot(&eta.eta2, a));
    let mean = dot(&eta.eta0, a);
    let x = dot(&eta.eta1, a);
    let e = x.min(MAX_EXP).exp();
    let ds = if x < MAX_EXP { s0 * e } else { 0.0 };
    (w, mean, s0 * (1.0 + e), ds)
}

fn smooth_step(x: f64) -> f64 {
    logistic(SIGMOID_SLOPE * x)
}

/// Double-exponential log-density.
pub fn de_logpdf(x: f64, mean: f64, scale: f64) -> f64 {
    -LN_2 - scale.ln() - (x - mean).abs() / scale
}

/// Double-exponential CDF.
pub fn de_cdf(x: f64, mean: f64, scale: f64) -> f64 {
    let z = (x - mean) / scale;
    if z < 0.0 {
        0.5 * z.exp()
    } else {
        1.0 - 0.5 * (-z).exp()
    }
}

/// Draws from the unit double-exponential.
pub fn sample_unit_de<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
enum EtaMode {
    Free,
    Fixed(Eta),
}

/// Posterior of the network spike-and-slab model for fixed data.
#[derive(Debug, Clone)]
pub struct SpikeSlabModel {
    s: DMatrix<f64>,
    n: usize,
    p: usize,
    q: usize,
    pairs: Vec<(usize, usize)>,
    covariates: Vec<Vec<f64>>,
    hyper: SpikeSlabHyper,
    mode: EtaMode,
    v: f64,
}

impl SpikeSlabModel {
    /// Model with the slab coefficients sampled alongside `(Theta_jj, rho)`.
    pub fn new(s: &SampleCov, networks: &NetworkStack, hyper: SpikeSlabHyper) -> Result<Self> {
        Self::build(s, networks, hyper, EtaMode::Free)
    }

    /// Model with the slab coefficients fixed at `eta`.
    pub fn with_fixed_eta(s: &SampleCov, networks: &NetworkStack, hyper: SpikeSlabHyper, eta: Eta) -> Result<Self> {
        if eta.eta0.len() != networks.q() + 1 {
            return Err(Error::InvalidInput("eta has the wrong number of coefficients".into()));
        }
        Self::build(s, networks, hyper, EtaMode::Fixed(eta))
    }

    fn build(s: &SampleCov, networks: &NetworkStack, hyper: SpikeSlabHyper, mode: EtaMode) -> Result<Self> {
        hyper.validate()?;
        let p = s.p();
        if p < 2 || networks.p() != p {
            return Err(Error::InvalidInput(format!(
                "covariance is {p} x {p} but networks are on {} nodes",
                networks.p()
            )));
        }
        if hyper.eta.eta0.len() != networks.q() + 1 {
            return Err(Error::InvalidInput("hyperparameters do not match the network count".into()));
        }
        let n = s.n_obs();
        if n == 0 {
            return Err(Error::InvalidInput("no observations".into()));
        }
        let pairs = upper_pairs(p);
        let covariates = pairs.iter().map(|&(j, k)| networks.edge_covariates(j, k)).collect();
        Ok(Self {
            s: s.matrix().clone(),
            n,
            p,
            q: networks.q(),
            pairs,
            covariates,
            hyper,
            mode,
            v: (p * (p - 1)) as f64 / (2.0 * n as f64),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_edges(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn hyper(&self) -> &SpikeSlabHyper {
        &self.hyper
    }

    pub fn eta_is_free(&self) -> bool {
        self.mode == EtaMode::Free
    }

    /// Prior variance of each standardized coefficient.
    pub fn eta_tilde_variance(&self) -> f64 {
        self.v
    }

    fn n_eta_tilde(&self) -> usize {
        if self.eta_is_free() {
            3 * (self.q + 1)
        } else {
            0
        }
    }

    /// Length of the unconstrained sampler vector.
    pub fn dim(&self) -> usize {
        self.p + 3 * self.pairs.len() + self.n_eta_tilde()
    }

    /// `eta = m + eta_tilde g / sqrt(V)` blockwise (intercept mean only).
    pub fn decode_eta(&self, eta_tilde: &[f64]) -> Eta {
        match &self.mode {
            EtaMode::Fixed(eta) => eta.clone(),
            EtaMode::Free => {
                let k = self.q + 1;
                let scale = 1.0 / self.v.sqrt();
                let block = |i: usize| -> Vec<f64> {
                    (0..k)
                        .map(|c| {
                            let m = if c == 0 { self.hyper.prior.m[i] } else { 0.0 };
                            m + eta_tilde[i * k + c] * self.hyper.prior.g[i] * scale
                        })
                        .collect()
                };
                Eta {
                    eta0: block(0),
                    eta1: block(1),
                    eta2: block(2),
                }
            }
        }
    }

    /// Inverse of [`decode_eta`](Self::decode_eta).
    pub fn encode_eta(&self, eta: &Eta) -> Vec<f64> {
        let k = self.q + 1;
        let sv = self.v.sqrt();
        let mut out = Vec::with_capacity(3 * k);
        for (i, block) in [&eta.eta0, &eta.eta1, &eta.eta2].into_iter().enumerate() {
            for (c, val) in block.iter().enumerate() {
                let m = if c == 0 { self.hyper.prior.m[i] } else { 0.0 };
                out.push((val - m) * sv / self.hyper.prior.g[i]);
            }
        }
        out
    }

    fn check_state(&self, state: &LatentState) -> Result<()> {
        let m = self.pairs.len();
        if state.sqrt_diag.len() != self.p
            || state.rho_spike_raw.len() != m
            || state.rho_slab_raw.len() != m
            || state.u.len() != m
            || state.eta_tilde.len() != self.n_eta_tilde()
        {
            return Err(Error::InvalidInput("latent state has the wrong shape".into()));
        }
        Ok(())
    }

    /// Maps latents to `(sqrt(Theta_jj), rho)` and the slab coefficients.
    pub fn decode(&self, state: &LatentState) -> (PrecisionParam, Eta) {
        self.decode_with(state, smooth_step)
    }

    /// `decode` with the exact indicator `I(u > w)` in place of the sigmoid.
    pub fn decode_exact(&self, state: &LatentState) -> (PrecisionParam, Eta) {
        self.decode_with(state, |x| if x > 0.0 { 1.0 } else { 0.0 })
    }

    fn decode_with(&self, state: &LatentState, step: impl Fn(f64) -> f64) -> (PrecisionParam, Eta) {
        let eta = self.decode_eta(&state.eta_tilde);
        let mut rho = DMatrix::zeros(self.p, self.p);
        for (e, &(j, k)) in self.pairs.iter().enumerate() {
            let (w, mean, s) = slab_terms(&self.covariates[e], &eta, self.hyper.s0);
            let h = step(state.u[e] - w);
            let r = h * self.hyper.s0 * state.rho_spike_raw[e] + (1.0 - h) * (mean + s * state.rho_slab_raw[e]);
            rho[(j, k)] = r;
            rho[(k, j)] = r;
        }
        (
            PrecisionParam {
                sqrt_diag: state.sqrt_diag.clone(),
                partial_corr: rho,
            },
            eta,
        )
    }

    fn loglik(&self, theta: &DMatrix<f64>) -> Option<(f64, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
        let chol = cholesky(theta)?;
        let n = self.n as f64;
        let ll = 0.5 * n * (log_det_chol(&chol) - trace_of_product(&self.s, theta))
            - 0.5 * n * self.p as f64 * LN_2PI;
        Some((ll, chol))
    }

    fn log_prior(&self, state: &LatentState) -> f64 {
        let mut lp = 0.0;
        for r in state.rho_spike_raw.iter().chain(&state.rho_slab_raw) {
            lp += -LN_2 - r.abs();
        }
        if state.u.iter().any(|u| !(*u > 0.0 && *u < 1.0)) {
            return f64::NEG_INFINITY;
        }
        for t in &state.eta_tilde {
            lp += -0.5 * (LN_2PI + self.v.ln()) - t * t / (2.0 * self.v);
        }
        let (a, b) = (self.hyper.ig_a, self.hyper.ig_b);
        let norm = a * b.ln() - statrs::function::gamma::ln_gamma(a);
        for d in state.sqrt_diag.iter() {
            if !(*d > 0.0) {
                return f64::NEG_INFINITY;
            }
            lp += norm - (a + 1.0) * d.ln() - b / d;
        }
        lp
    }

    /// Log-posterior up to the omitted normalizing constant of the
    /// positive-definiteness indicator; `-inf` outside the support.
    pub fn log_posterior(&self, state: &LatentState) -> f64 {
        if self.check_state(state).is_err() {
            return f64::NEG_INFINITY;
        }
        let lp = self.log_prior(state);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        let (param, _) = self.decode(state);
        match self.loglik(&assemble_precision(&param)) {
            Some((ll, _)) => ll + lp,
            None => f64::NEG_INFINITY,
        }
    }

    /// Gradient of [`log_posterior`](Self::log_posterior). Errors when the
    /// decoded precision matrix is not positive definite.
    pub fn grad_log_posterior(&self, state: &LatentState) -> Result<(f64, LatentGradient)> {
        self.check_state(state)?;
        let lp = self.log_prior(state);
        if !lp.is_finite() {
            return Err(Error::InvalidInput("state outside the prior support".into()));
        }
        let p = self.p;
        let s0 = self.hyper.s0;
        let eta = self.decode_eta(&state.eta_tilde);
        let d = &state.sqrt_diag;

        let mut rho = DMatrix::zeros(p, p);
        let mut parts = Vec::with_capacity(self.pairs.len());
        for (e, &(j, k)) in self.pairs.iter().enumerate() {
            let (w, mean, s, ds) = slab_terms_with_exp(&self.covariates[e], &eta, s0);
            let h = smooth_step(state.u[e] - w);
            let spike = s0 * state.rho_spike_raw[e];
            let slab = mean + s * state.rho_slab_raw[e];
            let r = h * spike + (1.0 - h) * slab;
            rho[(j, k)] = r;
            rho[(k, j)] = r;
            parts.push((w, s, ds, h, spike, slab));
        }
        let theta = assemble_precision(&PrecisionParam {
            sqrt_diag: d.clone(),
            partial_corr: rho.clone(),
        });
        let (ll, chol) = self.loglik(&theta).ok_or(Error::NotPositiveDefinite)?;
        let n = self.n as f64;
        let g = (chol.inverse() - &self.s) * (0.5 * n);

        let mut grad_d: Vec<f64> = (0..p).map(|j| 2.0 * g[(j, j)] * d[j]).collect();
        let m = self.pairs.len();
        let mut grad_sp = vec![0.0; m];
        let mut grad_sl = vec![0.0; m];
        let mut grad_u = vec![0.0; m];
        let k = self.q + 1;
        let mut grad_eta = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
        for (e, &(j, kk)) in self.pairs.iter().enumerate() {
            let gjk = 0.5 * (g[(j, kk)] + g[(kk, j)]);
            grad_d[j] -= 2.0 * gjk * rho[(j, kk)] * d[kk];
            grad_d[kk] -= 2.0 * gjk * rho[(j, kk)] * d[j];
            let dl_drho = -2.0 * gjk * d[j] * d[kk];

            let (w, s, ds, h, spike, slab) = parts[e];
            let dh = SIGMOID_SLOPE * h * (1.0 - h);
            grad_sp[e] = dl_drho * h * s0;
            grad_sl[e] = dl_drho * (1.0 - h) * s;
            grad_u[e] = dl_drho * dh * (spike - slab);
            let a = &self.covariates[e];
            let d_mean = dl_drho * (1.0 - h);
            let d_lin1 = dl_drho * (1.0 - h) * state.rho_slab_raw[e] * ds;
            let d_lin2 = -dl_drho * dh * (spike - slab) * w * (1.0 - w);
            for c in 0..k {
                grad_eta[0][c] += d_mean * a[c];
                grad_eta[1][c] += d_lin1 * a[c];
                grad_eta[2][c] += d_lin2 * a[c];
            }
        }

        // prior terms
        for e in 0..m {
            grad_sp[e] -= sign0(state.rho_spike_raw[e]);
            grad_sl[e] -= sign0(state.rho_slab_raw[e]);
        }
        let (a, b) = (self.hyper.ig_a, self.hyper.ig_b);
        for j in 0..p {
            grad_d[j] += -(a + 1.0) / d[j] + b / (d[j] * d[j]);
        }
        let grad_tilde = if self.eta_is_free() {
            let scale = 1.0 / self.v.sqrt();
            let mut out = Vec::with_capacity(3 * k);
            for i in 0..3 {
                for c in 0..k {
                    let t = state.eta_tilde[i * k + c];
                    out.push(grad_eta[i][c] * self.hyper.prior.g[i] * scale - t / self.v);
                }
            }
            out
        } else {
            Vec::new()
        };

        Ok((
            ll + lp,
            LatentGradient {
                sqrt_diag: grad_d,
                rho_spike_raw: grad_sp,
                rho_slab_raw: grad_sl,
                u: grad_u,
                eta_tilde: grad_tilde,
            },
        ))
    }

    /// Unconstrained vector `[ln d, r_spike, r_slab, logit u, eta_tilde]`.
    pub fn to_unconstrained(&self, state: &LatentState) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        x.extend(state.sqrt_diag.iter().map(|d| d.ln()));
        x.extend_from_slice(&state.rho_spike_raw);
        x.extend_from_slice(&state.rho_slab_raw);
        x.extend(state.u.iter().map(|u| (u / (1.0 - u)).ln()));
        x.extend_from_slice(&state.eta_tilde);
        x
    }

    pub fn from_unconstrained(&self, x: &[f64]) -> LatentState {
        let p = self.p;
        let m = self.pairs.len();
        LatentState {
            sqrt_diag: DVector::from_iterator(p, x[..p].iter().map(|v| v.exp())),
            rho_spike_raw: x[p..p + m].to_vec(),
            rho_slab_raw: x[p + m..p + 2 * m].to_vec(),
            u: x[p + 2 * m..p + 3 * m].iter().map(|v| logistic(*v)).collect(),
            eta_tilde: x[p + 3 * m..].to_vec(),
        }
    }

    /// Log-density of the unconstrained vector, including the log-Jacobian
    /// of `d = exp(x)` and `u = logistic(z)`.
    pub fn log_density_unconstrained(&self, x: &[f64]) -> f64 {
        let state = self.from_unconstrained(x);
        let lp = self.log_posterior(&state);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        lp + self.log_jacobian(x, &state)
    }

    fn log_jacobian(&self, x: &[f64], state: &LatentState) -> f64 {
        let p = self.p;
        let mut lj: f64 = x[..p].iter().sum();
        for u in &state.u {
            lj += u.ln() + (1.0 - u).ln();
        }
        lj
    }

    /// Log-density and gradient in unconstrained coordinates; `None` when
    /// the state leaves the support.
    pub fn log_density_and_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let state = self.from_unconstrained(x);
        if state.u.iter().any(|u| !(*u > 0.0 && *u < 1.0)) || state.sqrt_diag.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return None;
        }
        let (lp, g) = self.grad_log_posterior(&state).ok()?;
        let value = lp + self.log_jacobian(x, &state);
        if !value.is_finite() {
            return None;
        }
        let mut out = Vec::with_capacity(x.len());
        for (gd, d) in g.sqrt_diag.iter().zip(state.sqrt_diag.iter()) {
            out.push(gd * d + 1.0);
        }
        out.extend_from_slice(&g.rho_spike_raw);
        out.extend_from_slice(&g.rho_slab_raw);
        for (gu, u) in g.u.iter().zip(&state.u) {
            out.push(gu * u * (1.0 - u) + 1.0 - 2.0 * u);
        }
        out.extend_from_slice(&g.eta_tilde);
        if out.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((value, out))
    }

    /// Starting point from a lightly shrunk inverse of `S`: edges whose
    /// partial correlation exceeds `2 / sqrt(n)` start in the slab at that
    /// value, the rest in the spike, each at a random `u` inside its region.
    /// Falls back to [`diffuse_state`](Self::diffuse_state) when that point
    /// is not positive definite.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentState {
        let diffuse = self.diffuse_state(rng);
        let shrunk = DMatrix::from_fn(self.p, self.p, |j, k| {
            if j == k {
                self.s[(j, j)]
            } else {
                0.95 * self.s[(j, k)]
            }
        });
        let Some(theta) = cholesky(&shrunk).map(|c| c.inverse()) else {
            return diffuse;
        };
        let Ok(rho) = partial_corr_of(&theta) else {
            return diffuse;
        };
        let eta = self.decode_eta(&diffuse.eta_tilde);
        let s0 = self.hyper.s0;
        let cut = 2.0 / (self.n as f64).sqrt();
        let mut state = LatentState {
            sqrt_diag: theta.diagonal().map(f64::sqrt),
            ..diffuse.clone()
        };
        for (e, &(j, k)) in self.pairs.iter().enumerate() {
            let (w, mean, s) = slab_terms(&self.covariates[e], &eta, s0);
            let r = rho[(j, k)];
            let v: f64 = rng.random();
            if r.abs() > cut {
                state.u[e] = w * (0.1 + 0.4 * v);
                state.rho_slab_raw[e] = ((r - mean) / s).clamp(-50.0, 50.0);
            } else {
                state.u[e] = w + (1.0 - w) * (0.5 + 0.4 * v);
                state.rho_spike_raw[e] = (r / s0).clamp(-3.0, 3.0);
            }
            state.u[e] = state.u[e].clamp(1e-6, 1.0 - 1e-6);
        }
        if self.log_posterior(&state).is_finite() {
            state
        } else {
            diffuse
        }
    }

    /// Prior-like starting point: `d_j = 1 / sqrt(S_jj)`, small latents, `u`
    /// in `(0.05, 0.95)`, `eta_tilde = 0`.
    pub fn diffuse_state<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentState {
        let m = self.pairs.len();
        let small = |rng: &mut R| { let z: f64 = StandardNormal.sample(rng); 0.1 * z };
        LatentState {
            sqrt_diag: DVector::from_iterator(self.p, (0..self.p).map(|j| 1.0 / self.s[(j, j)].max(1e-12).sqrt())),
            rho_spike_raw: (0..m).map(|_| small(rng)).collect(),
            rho_slab_raw: (0..m).map(|_| small(rng)).collect(),
            u: (0..m).map(|_| 0.05 + 0.9 * rng.random::<f64>()).collect(),
            eta_tilde: vec![0.0; self.n_eta_tilde()],
        }
    }
}
