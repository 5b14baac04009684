//! Simulation designs with a banded precision matrix and a binary network
//! of controlled informativeness, plus the estimator comparison harness.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::elicit::{elicit_priors, ElicitOptions};
use crate::error::{Error, Result};
use crate::golazo::{edge_list, SolverOptions, DEFAULT_EDGE_THRESHOLD};
use crate::hmc::McmcConfig;
use crate::inference::{two_stage_fit, EdgeRule, TwoStageConfig};
use crate::linalg::{cholesky, linspace, upper_pairs};
use crate::model::{assemble_precision, sample_cov_of_rows, NetworkStack};
use crate::selection::{grid_search, Criterion, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Informativeness {
    Independent,
    Mild,
    Strong,
}

impl Informativeness {
    /// Share of `a_jk = 1` on the tri-diagonal and off it.
    pub fn proportions(self) -> (f64, f64) {
        match self {
            Self::Independent => (0.5, 0.5),
            Self::Mild => (0.75, 0.25),
            Self::Strong => (0.85, 0.15),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Independent => "A_ind",
            Self::Mild => "A_0.75",
            Self::Strong => "A_0.85",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimDesign {
    pub p: usize,
    pub n: usize,
    pub informativeness: Informativeness,
    pub seed: u64,
}

impl SimDesign {
    pub fn validate(&self) -> Result<()> {
        if self.p < 4 || self.n < 10 {
            return Err(Error::InvalidInput(format!(
                "design needs p >= 4 and n >= 10, got p = {}, n = {}",
                self.p, self.n
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("p={} n={} {}", self.p, self.n, self.informativeness.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub theta: DMatrix<f64>,
    pub network: DMatrix<f64>,
    /// Amount added to the diagonal to make `theta` positive definite.
    pub inflation: f64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn round_count(share: f64, total: usize) -> usize {
    ((share * total as f64).round() as usize).min(total)
}

/// True precision matrix and network. `theta` depends only on `p` and the
/// seed, so designs differing in informativeness share it.
pub fn gen_truth(design: &SimDesign) -> Result<Truth> {
    design.validate()?;
    let p = design.p;
    let (tri, off): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
        upper_pairs(p).into_iter().partition(|&(j, k)| k == j + 1);

    let mut rng = rng_for(design.seed, 1);
    let mut theta = DMatrix::<f64>::identity(p, p);
    let mut tri_pos = tri.clone();
    tri_pos.shuffle(&mut rng);
    let k_tri = round_count(0.95, tri.len());
    for (&(j, k), v) in tri_pos[..k_tri].iter().zip(linspace(0.2, 0.5, k_tri)) {
        theta[(j, k)] = v;
        theta[(k, j)] = v;
    }
    let mut off_pos = off.clone();
    off_pos.shuffle(&mut rng);
    let k_off = round_count(0.5 / p as f64, off.len());
    for (i, &(j, k)) in off_pos[..k_off].iter().enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let v = sign * 0.1 * (i + 1) as f64 / k_off as f64;
        theta[(j, k)] = v;
        theta[(k, j)] = v;
    }
    let mut inflation = 0.0;
    while cholesky(&theta).is_none() {
        for j in 0..p {
            theta[(j, j)] += 0.05;
        }
        inflation += 0.05;
    }

    let mut rng = rng_for(design.seed, 2);
    let (share_tri, share_off) = design.informativeness.proportions();
    let mut network = DMatrix::zeros(p, p);
    for (pairs, share) in [(tri, share_tri), (off, share_off)] {
        let mut pos = pairs;
        pos.shuffle(&mut rng);
        let ones = round_count(share, pos.len());
        for &(j, k) in &pos[..ones] {
            network[(j, k)] = 1.0;
            network[(k, j)] = 1.0;
        }
    }
    Ok(Truth {
        theta,
        network,
        inflation,
    })
}

/// Share of pairs on which `a_jk` equals `I(theta_jk != 0)`.
pub fn overlap(truth: &Truth) -> f64 {
    let pairs = upper_pairs(truth.theta.nrows());
    let agree = pairs
        .iter()
        .filter(|&&(j, k)| (truth.network[(j, k)] != 0.0) == (truth.theta[(j, k)] != 0.0))
        .count();
    agree as f64 / pairs.len() as f64
}

/// `n` rows drawn from `N(0, theta^-1)`.
pub fn draw_data(theta: &DMatrix<f64>, n: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let l = cholesky(theta).ok_or(Error::NotPositiveDefinite)?;
    let lt = l.l().transpose();
    let p = theta.nrows();
    let mut y = DMatrix::zeros(n, p);
    for i in 0..n {
        let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(&mut *rng)));
        let row = lt.solve_upper_triangular(&z).ok_or(Error::NotPositiveDefinite)?;
        y.row_mut(i).copy_from(&row.transpose());
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mse: f64,
    pub fdr: f64,
    pub fnr: f64,
}

/// Squared error summed over the diagonal and upper triangle; FDR and FNR of
/// the declared edges against the nonzero pattern of `truth`. FDR is the
/// false share of the declared edges and FNR the share of true edges among
/// the undeclared ones; each is 0 when its denominator is empty.
pub fn metrics(estimate: &DMatrix<f64>, edges: &[(usize, usize)], truth: &DMatrix<f64>) -> Metrics {
    let p = truth.nrows();
    let mut mse = 0.0;
    for j in 0..p {
        for k in j..p {
            mse += (estimate[(j, k)] - truth[(j, k)]).powi(2);
        }
    }
    let true_edges = upper_pairs(p).into_iter().filter(|&(j, k)| truth[(j, k)] != 0.0).count();
    let tp = edges.iter().filter(|&&(j, k)| truth[(j, k)] != 0.0).count();
    let fdr = if edges.is_empty() {
        0.0
    } else {
        (edges.len() - tp) as f64 / edges.len() as f64
    };
    let undeclared = p * (p - 1) / 2 - edges.len();
    let fnr = if undeclared == 0 {
        0.0
    } else {
        (true_edges - tp) as f64 / undeclared as f64
    };
    Metrics { mse, fdr, fnr }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    /// Returns the true precision matrix.
    Oracle,
    /// Returns the identity.
    Identity,
    Glasso,
    NetworkGlasso,
    SpikeSlab,
    NetworkSpikeSlab,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Identity => "identity",
            Self::Glasso => "glasso",
            Self::NetworkGlasso => "network_glasso",
            Self::SpikeSlab => "spike_slab",
            Self::NetworkSpikeSlab => "network_spike_slab",
        }
    }

    fn uses_network(self) -> bool {
        matches!(self, Self::NetworkGlasso | Self::NetworkSpikeSlab)
    }

    fn is_bayesian(self) -> bool {
        matches!(self, Self::SpikeSlab | Self::NetworkSpikeSlab)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub criterion: Criterion,
    pub grid: GridSpec,
    pub solver: SolverOptions,
    /// Seeds are replaced per replicate. Defaults to 100 leapfrog steps, which
    /// the slab coefficients need to mix at small spike scales.
    pub mcmc: McmcConfig,
    pub rule: EdgeRule,
    pub elicit_draws: usize,
    /// Record wall-clock times in the manifest.
    pub timing: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            criterion: Criterion::Bic,
            grid: GridSpec::default(),
            solver: SolverOptions::default(),
            mcmc: McmcConfig {
                leapfrog_steps: 100,
                ..McmcConfig::new(0)
            },
            rule: EdgeRule::Fixed(0.95),
            elicit_draws: 10_000,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub design: usize,
    pub replicate: usize,
    pub method: Method,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub design: String,
    pub method: String,
    pub mse: f64,
    pub fdr: f64,
    pub fnr: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub designs: Vec<SimDesign>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub data_streams: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method_seconds: Option<Vec<(String, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub rows: Vec<MetricRow>,
    pub records: Vec<ReplicateRecord>,
    pub manifest: Manifest,
}

/// Fits one method to `y` and returns the estimate and its declared edges.
pub fn fit_method(
    method: Method,
    truth: &Truth,
    y: &DMatrix<f64>,
    hyper: Option<&crate::spike_slab::SpikeSlabHyper>,
    opts: &BenchOptions,
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<(usize, usize)>)> {
    let p = truth.theta.nrows();
    let networks = network_stack(method, truth)?;
    match method {
        Method::Oracle => Ok((truth.theta.clone(), edge_list(&truth.theta, f64::MIN_POSITIVE))),
        Method::Identity => Ok((DMatrix::identity(p, p), Vec::new())),
        Method::Glasso | Method::NetworkGlasso => {
            let s = sample_cov_of_rows(y);
            let fit = grid_search(&s, &networks, opts.criterion, &opts.grid, &opts.solver)?;
            let edges = edge_list(&fit.solution.theta, DEFAULT_EDGE_THRESHOLD);
            Ok((fit.solution.theta, edges))
        }
        Method::SpikeSlab | Method::NetworkSpikeSlab => {
            let s = sample_cov_of_rows(y);
            let hyper = hyper.ok_or_else(|| Error::InvalidInput("missing prior hyperparameters".into()))?;
            let mut config = TwoStageConfig::new(seed);
            config.stage1 = McmcConfig { seed, ..opts.mcmc.clone() };
            config.stage2 = McmcConfig {
                seed: seed.wrapping_add(1),
                ..opts.mcmc.clone()
            };
            config.rule = opts.rule;
            let fit = two_stage_fit(&s, &networks, hyper, &config)?;
            let mut mean = DMatrix::zeros(p, p);
            for (param, _) in fit.stage2.iter_draws() {
                mean += assemble_precision(param);
            }
            mean /= fit.stage2.n_draws() as f64;
            Ok((mean, fit.report.selected_pairs()))
        }
    }
}

fn network_stack(method: Method, truth: &Truth) -> Result<NetworkStack> {
    let p = truth.theta.nrows();
    if method.uses_network() {
        NetworkStack::new(vec![truth.network.clone()], vec!["A".into()])
    } else {
        Ok(NetworkStack::empty(p))
    }
}

fn replicate_seed(seed: u64, replicate: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(replicate as u64)
}

/// Runs every method on `replicates` data sets per design. Replicates run
/// in parallel; methods within a replicate run in sequence. Failed fits are
/// recorded and excluded from the averages.
pub fn run_benchmark(
    designs: &[SimDesign],
    methods: &[Method],
    replicates: usize,
    opts: &BenchOptions,
) -> Result<BenchmarkResult> {
    if replicates == 0 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    let start = Instant::now();
    let truths: Vec<Truth> = designs.iter().map(gen_truth).collect::<Result<_>>()?;
    let mut hypers = Vec::new();
    for (d, design) in designs.iter().enumerate() {
        let mut per_method = Vec::new();
        for &m in methods {
            per_method.push(if m.is_bayesian() {
                let networks = network_stack(m, &truths[d])?;
                let mut eo = ElicitOptions::new(design.seed);
                eo.n_draws = opts.elicit_draws;
                Some(elicit_priors(design.p, design.n, &networks, &eo)?)
            } else {
                None
            });
        }
        hypers.push(per_method);
    }

    let jobs: Vec<(usize, usize)> = (0..designs.len())
        .flat_map(|d| (0..replicates).map(move |r| (d, r)))
        .collect();
    let records: Vec<ReplicateRecord> = jobs
        .par_iter()
        .flat_map_iter(|&(d, r)| {
            let design = &designs[d];
            let truth = &truths[d];
            let mut rng = rng_for(design.seed, 1000 + r as u64);
            let data = draw_data(&truth.theta, design.n, &mut rng);
            let seed = replicate_seed(design.seed, r);
            methods
                .iter()
                .enumerate()
                .map(|(mi, &m)| {
                    let t0 = Instant::now();
                    let fit = data
                        .as_ref()
                        .map_err(|e| Error::Numerical(e.to_string()))
                        .and_then(|y| fit_method(m, truth, y, hypers[d][mi].as_ref(), opts, seed));
                    let seconds = t0.elapsed().as_secs_f64();
                    let (metrics, error) = match fit {
                        Ok((est, edges)) => (Some(metrics(&est, &edges, &truth.theta)), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    ReplicateRecord {
                        design: d,
                        replicate: r,
                        method: m,
                        metrics,
                        error,
                        seconds,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut rows = Vec::new();
    for (d, design) in designs.iter().enumerate() {
        for &m in methods {
            let ok: Vec<Metrics> = records
                .iter()
                .filter(|r| r.design == d && r.method == m)
                .filter_map(|r| r.metrics)
                .collect();
            let failed = replicates - ok.len();
            let avg = |f: fn(&Metrics) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(f).sum::<f64>() / ok.len() as f64
                }
            };
            rows.push(MetricRow {
                design: design.label(),
                method: m.label().into(),
                mse: avg(|x| x.mse),
                fdr: avg(|x| x.fdr),
                fnr: avg(|x| x.fnr),
                n_ok: ok.len(),
                n_failed: failed,
            });
        }
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        designs: designs.to_vec(),
        methods: methods.to_vec(),
        replicates,
        data_streams: "replicate r of a design draws its data from stream 1000 + r of the design seed".into(),
        wall_seconds: opts.timing.then(|| start.elapsed().as_secs_f64()),
        method_seconds: opts.timing.then(|| {
            methods
                .iter()
                .map(|m| {
                    let total: f64 = records.iter().filter(|r| r.method == *m).map(|r| r.seconds).sum();
                    (m.label().to_string(), total)
                })
                .collect()
        }),
    };
    Ok(BenchmarkResult {
        rows,
        records,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(p: usize, inf: Informativeness, seed: u64) -> SimDesign {
        SimDesign {
            p,
            n: 100,
            informativeness: inf,
            seed,
        }
    }

    #[test]
    fn truth_structure() {
        let t = gen_truth(&design(10, Informativeness::Mild, 4)).unwrap();
        let p = 10;
        let tri: Vec<f64> = (0..p - 1).map(|j| t.theta[(j, j + 1)]).filter(|v| *v != 0.0).collect();
        assert_eq!(tri.len(), 9);
        assert!(tri.iter().all(|v| (0.2..=0.5).contains(v)));
        let off: Vec<f64> = upper_pairs(p)
            .into_iter()
            .filter(|&(j, k)| k > j + 1 && t.theta[(j, k)] != 0.0)
            .map(|(j, k)| t.theta[(j, k)])
            .collect();
        assert_eq!(off.len(), 2);
        assert!(off.iter().all(|v| v.abs() <= 0.1));
        assert!(cholesky(&t.theta).is_some());
        assert_eq!(t.theta, t.theta.transpose());
        assert_eq!(t, gen_truth(&design(10, Informativeness::Mild, 4)).unwrap());
        // informativeness does not change theta
        assert_eq!(t.theta, gen_truth(&design(10, Informativeness::Strong, 4)).unwrap().theta);
        let ones = upper_pairs(p).into_iter().filter(|&(j, k)| k == j + 1 && t.network[(j, k)] == 1.0).count();
        assert_eq!(ones, 7);
    }

    #[test]
    fn invalid_design() {
        assert!(gen_truth(&design(3, Informativeness::Mild, 1)).is_err());
    }

    #[test]
    fn metric_conventions() {
        let t = gen_truth(&design(10, Informativeness::Strong, 2)).unwrap();
        let edges = edge_list(&t.theta, f64::MIN_POSITIVE);
        let m = metrics(&t.theta, &edges, &t.theta);
        assert_eq!((m.mse, m.fdr, m.fnr), (0.0, 0.0, 0.0));
        let m = metrics(&DMatrix::identity(10, 10), &[], &t.theta);
        assert_eq!((m.fdr, m.fnr), (0.0, edges.len() as f64 / 45.0));
        let expected: f64 = upper_pairs(10).iter().map(|&(j, k)| t.theta[(j, k)].powi(2)).sum::<f64>()
            + (0..10).map(|j| (t.theta[(j, j)] - 1.0).powi(2)).sum::<f64>();
        assert!((m.mse - expected).abs() < 1e-12);
        let m = metrics(&t.theta, &[(0, 9)], &t.theta);
        assert_eq!(m.fdr, if t.theta[(0, 9)] != 0.0 { 0.0 } else { 1.0 });
        let missed = edges.iter().filter(|&&e| e != (0, 9)).count();
        assert_eq!(m.fnr, missed as f64 / 44.0);
    }

    #[test]
    fn data_covariance_converges() {
        let t = gen_truth(&design(5, Informativeness::Independent, 3)).unwrap();
        let mut rng = rng_for(1, 1);
        let y = draw_data(&t.theta, 20000, &mut rng).unwrap();
        let s = sample_cov_of_rows(&y);
        let sigma = t.theta.clone().try_inverse().unwrap();
        assert!((s.matrix() - sigma).amax() < 0.05);
    }

    #[test]
    fn benchmark_bookkeeping() {
        let designs = [design(6, Informativeness::Strong, 5)];
        let res = run_benchmark(&designs, &[Method::Oracle, Method::Identity, Method::Glasso], 3, &BenchOptions::default()).unwrap();
        assert_eq!(res.rows.len(), 3);
        assert_eq!(res.records.len(), 9);
        assert_eq!(res.rows[0].mse, 0.0);
        let theta = gen_truth(&designs[0]).unwrap().theta;
        let true_edges = upper_pairs(6).iter().filter(|&&(j, k)| theta[(j, k)] != 0.0).count();
        assert!((res.rows[1].fnr - true_edges as f64 / 15.0).abs() < 1e-12);
        assert!(res.rows.iter().all(|r| r.n_failed == 0));
        assert!(res.manifest.wall_seconds.is_none());
        let again = run_benchmark(&designs, &[Method::Glasso], 3, &BenchOptions::default()).unwrap();
        assert_eq!(again.rows[0].mse, res.rows[2].mse);
    }
}
