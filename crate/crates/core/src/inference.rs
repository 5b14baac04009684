//! Empirical Bayes for the slab coefficients, posterior edge probabilities
//! and edge selection.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hmc::{sample_spike_slab, McmcConfig, McmcRun};
use crate::model::{NetworkStack, SampleCov};
use crate::spike_slab::{de_logpdf, slab_terms, Eta, SpikeSlabHyper, SpikeSlabModel};

const MIN_EB_DRAWS: usize = 100;
const KDE_GRID: usize = 256;
const KDE_GRID_2D: usize = 16;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0).max(1.0)).sqrt()
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule-of-thumb bandwidth, scaled for `dim` dimensions.
fn silverman(x: &[f64], dim: usize) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let spread = if iqr > 0.0 { sd(x).min(iqr / 1.34) } else { sd(x) };
    let n = x.len() as f64;
    if dim == 1 {
        0.9 * spread * n.powf(-0.2)
    } else {
        spread * n.powf(-1.0 / (dim as f64 + 4.0))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::linalg::linspace(lo, hi, n)
}

fn kde_mode_1d(x: &[f64]) -> f64 {
    let h = silverman(x, 1);
    if !(h > 0.0) {
        return x[0];
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut candidates = x.to_vec();
    candidates.extend(linspace(lo, hi, KDE_GRID));
    let density = |c: f64| x.iter().map(|v| (-0.5 * ((c - v) / h).powi(2)).exp()).sum::<f64>();
    let scores: Vec<f64> = candidates.par_iter().map(|c| density(*c)).collect();
    argmax(&candidates, &scores)
}

fn argmax<T: Clone>(candidates: &[T], scores: &[f64]) -> T {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    candidates[best].clone()
}

fn kde_mode_2d(x: &[f64], y: &[f64]) -> (f64, f64) {
    let hx = silverman(x, 2);
    let hy = silverman(y, 2);
    if !(hx > 0.0) || !(hy > 0.0) {
        return (
            if hx > 0.0 { kde_mode_1d(x) } else { x[0] },
            if hy > 0.0 { kde_mode_1d(y) } else { y[0] },
        );
    }
    let range = |v: &[f64]| {
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (x0, x1) = range(x);
    let (y0, y1) = range(y);
    let mut candidates: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    for gx in linspace(x0, x1, KDE_GRID_2D) {
        for gy in linspace(y0, y1, KDE_GRID_2D) {
            candidates.push((gx, gy));
        }
    }
    let density = |c: &(f64, f64)| {
        x.iter()
            .zip(y)
            .map(|(a, b)| (-0.5 * (((c.0 - a) / hx).powi(2) + ((c.1 - b) / hy).powi(2))).exp())
            .sum::<f64>()
    };
    let scores: Vec<f64> = candidates.par_iter().map(density).collect();
    argmax(&candidates, &scores)
}

/// Mode of a Gaussian kernel density estimate: the joint mode for one or
/// two coordinates, per-coordinate marginal modes otherwise. `draws[i]` is
/// one multivariate draw.
pub fn kde_mode(draws: &[Vec<f64>]) -> Result<Vec<f64>> {
    if draws.len() < MIN_EB_DRAWS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_EB_DRAWS} draws for a density mode, got {}",
            draws.len()
        )));
    }
    let dim = draws[0].len();
    let column = |c: usize| -> Vec<f64> { draws.iter().map(|d| d[c]).collect() };
    match dim {
        0 => Ok(Vec::new()),
        2 => {
            let (a, b) = kde_mode_2d(&column(0), &column(1));
            Ok(vec![a, b])
        }
        _ => Ok((0..dim).map(|c| kde_mode_1d(&column(c))).collect()),
    }
}

/// Empirical Bayes estimate of the slab coefficients from joint draws.
pub fn empirical_bayes(run: &McmcRun) -> Result<Eta> {
    let draws: Vec<Vec<f64>> = run.iter_draws().map(|(_, e)| e.flatten()).collect();
    Eta::from_flat(&kde_mode(&draws)?)
}

/// Equal-tailed `level` intervals per coordinate of the flattened `eta`.
pub fn eta_intervals(run: &McmcRun, level: f64) -> Vec<(f64, f64)> {
    let draws: Vec<Vec<f64>> = run.iter_draws().map(|(_, e)| e.flatten()).collect();
    if draws.is_empty() {
        return Vec::new();
    }
    let a = (1.0 - level) / 2.0;
    (0..draws[0].len())
        .map(|c| {
            let mut v: Vec<f64> = draws.iter().map(|d| d[c]).collect();
            v.sort_by(f64::total_cmp);
            (quantile(&v, a), quantile(&v, 1.0 - a))
        })
        .collect()
}

/// Posterior slab probability of one value given the slab terms directly.
/// Computed in log space, so `w = 0` and `w = 1` are returned exactly.
pub fn edge_prob_terms(rho: f64, w: f64, mean: f64, s: f64, s0: f64) -> f64 {
    let log_slab = w.ln() + de_logpdf(rho, mean, s);
    let log_spike = (1.0 - w).ln() + de_logpdf(rho, 0.0, s0);
    if log_slab == f64::NEG_INFINITY {
        return 0.0;
    }
    if log_spike == f64::NEG_INFINITY {
        return 1.0;
    }
    let hi = log_slab.max(log_spike);
    let den = hi + ((log_slab - hi).exp() + (log_spike - hi).exp()).ln();
    (log_slab - den).exp()
}

/// `w pi_1(rho) / ((1 - w) pi_0(rho) + w pi_1(rho))` with the slab terms of
/// edge covariates `a`.
pub fn edge_prob(rho: f64, eta: &Eta, a: &[f64], s0: f64) -> f64 {
    let (w, mean, s) = slab_terms(a, eta, s0);
    edge_prob_terms(rho, w, mean, s, s0)
}

/// Average of [`edge_prob`] over posterior draws of one `rho_jk`.
pub fn edge_prob_mc(draws: &[f64], eta: &Eta, a: &[f64], s0: f64) -> f64 {
    let (w, mean, s) = slab_terms(a, eta, s0);
    draws.iter().map(|r| edge_prob_terms(*r, w, mean, s, s0)).sum::<f64>() / draws.len() as f64
}

/// Largest set `{i : probs[i] >= t}` whose mean `1 - p` is at most `alpha`.
/// Returns `t` and the selected indices in input order; `t = 1` when
/// nothing is selected.
pub fn fdr_threshold(probs: &[f64], alpha: f64) -> Result<(f64, Vec<usize>)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut t = 1.0;
    let mut cut = 0;
    let mut loss = 0.0;
    for (k, &i) in order.iter().enumerate() {
        loss += 1.0 - probs[i];
        let boundary = k + 1 == order.len() || probs[order[k + 1]] < probs[i];
        if boundary {
            if loss / (k + 1) as f64 <= alpha {
                t = probs[i];
                cut = k + 1;
            } else {
                break;
            }
        }
    }
    let mut selected: Vec<usize> = order[..cut].to_vec();
    selected.sort_unstable();
    Ok((t, selected))
}

/// Indices with `probs[i] >= t`.
pub fn fixed_threshold(probs: &[f64], t: f64) -> Vec<usize> {
    (0..probs.len()).filter(|&i| probs[i] >= t).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeRule {
    /// Include edges with posterior probability at least `t`.
    Fixed(f64),
    /// Bayesian FDR control at level `alpha`.
    Fdr(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEntry {
    pub j: usize,
    pub k: usize,
    pub posterior_slab_prob: f64,
    pub post_mean_rho: f64,
    pub post_sd_rho: f64,
    pub selected: bool,
    pub selected_05: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeReport {
    pub entries: Vec<EdgeEntry>,
    pub threshold_used: f64,
}

impl EdgeReport {
    pub fn selected_pairs(&self) -> Vec<(usize, usize)> {
        self.entries.iter().filter(|e| e.selected).map(|e| (e.j, e.k)).collect()
    }

    /// Posterior mean partial correlations as a matrix.
    pub fn mean_matrix(&self, p: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(p, p);
        for e in &self.entries {
            m[(e.j, e.k)] = e.post_mean_rho;
            m[(e.k, e.j)] = e.post_mean_rho;
        }
        m
    }
}

/// Builds the edge report from draws of a run with the coefficients fixed
/// at `eta`.
pub fn edge_report(run: &McmcRun, model: &SpikeSlabModel, eta: &Eta, rule: EdgeRule) -> Result<EdgeReport> {
    if run.n_draws() == 0 {
        return Err(Error::InvalidInput("run has no draws".into()));
    }
    let s0 = model.hyper().s0;
    let stats: Vec<(f64, f64, f64)> = model
        .pairs()
        .par_iter()
        .zip(model.covariates().par_iter())
        .map(|(&(j, k), a)| {
            let draws: Vec<f64> = run.iter_draws().map(|(param, _)| param.partial_corr[(j, k)]).collect();
            (edge_prob_mc(&draws, eta, a, s0), mean(&draws), sd(&draws))
        })
        .collect();
    let probs: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let (t, selected) = match rule {
        EdgeRule::Fixed(t) => (t, fixed_threshold(&probs, t)),
        EdgeRule::Fdr(alpha) => fdr_threshold(&probs, alpha)?,
    };
    let mut flags = vec![false; probs.len()];
    for i in selected {
        flags[i] = true;
    }
    let entries = model
        .pairs()
        .iter()
        .zip(stats)
        .zip(flags)
        .map(|((&(j, k), (prob, m, s)), sel)| EdgeEntry {
            j,
            k,
            posterior_slab_prob: prob,
            post_mean_rho: m,
            post_sd_rho: s,
            selected: sel,
            selected_05: prob >= 0.5,
        })
        .collect();
    Ok(EdgeReport {
        entries,
        threshold_used: t,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageConfig {
    pub stage1: McmcConfig,
    pub stage2: McmcConfig,
    pub rule: EdgeRule,
    /// Stage one fails when the mean R-hat of `eta` exceeds this.
    pub max_mean_rhat: f64,
    pub interval_level: f64,
}

impl TwoStageConfig {
    pub fn new(seed: u64) -> Self {
        let stage1 = McmcConfig::new(seed);
        let mut stage2 = McmcConfig::new(seed);
        stage2.seed = seed.wrapping_add(1);
        Self {
            stage1,
            stage2,
            rule: EdgeRule::Fixed(0.95),
            max_mean_rhat: 1.1,
            interval_level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageFit {
    pub eta_hat: Eta,
    /// Equal-tailed intervals of the flattened `eta` from stage one.
    pub eta_intervals: Vec<(f64, f64)>,
    pub stage1: McmcRun,
    pub stage2: McmcRun,
    pub report: EdgeReport,
}

/// Joint sampling, empirical Bayes for `eta`, then resampling with `eta`
/// fixed and edge selection from the second run.
pub fn two_stage_fit(
    s: &SampleCov,
    networks: &NetworkStack,
    hyper: &SpikeSlabHyper,
    config: &TwoStageConfig,
) -> Result<TwoStageFit> {
    let joint = SpikeSlabModel::new(s, networks, hyper.clone())?;
    let stage1 = sample_spike_slab(&joint, &config.stage1)?;
    let (ess, rhat) = stage1.eta_diagnostics();
    let mean_rhat = rhat.iter().sum::<f64>() / rhat.len().max(1) as f64;
    if !(mean_rhat <= config.max_mean_rhat) {
        return Err(Error::Diagnostics {
            message: format!("stage-one chains for eta have not converged (limit {})", config.max_mean_rhat),
            mean_rhat,
            rhat,
            ess,
        });
    }
    let eta_hat = empirical_bayes(&stage1)?;
    let intervals = eta_intervals(&stage1, config.interval_level);
    let fixed = SpikeSlabModel::with_fixed_eta(s, networks, hyper.clone(), eta_hat.clone())?;
    let stage2 = sample_spike_slab(&fixed, &config.stage2)?;
    let report = edge_report(&stage2, &fixed, &eta_hat, config.rule)?;
    Ok(TwoStageFit {
        eta_hat,
        eta_intervals: intervals,
        stage1,
        stage2,
        report,
    })
}
