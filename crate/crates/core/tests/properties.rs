use nalgebra::{DMatrix, DVector};
use netgm::diagnostics::ks_statistic;
use netgm::golazo::{solve, PenaltyModel, SolverOptions};
use netgm::hmc::{self, McmcConfig, Target};
use netgm::inference::{edge_prob, edge_prob_terms, fdr_threshold};
use netgm::spike_slab::{de_cdf, sample_unit_de, slab_terms, EtaPrior, SpikeSlabHyper};
use netgm::{sample_cov, DataMatrix, Eta, LatentState, NetworkStack, SampleCov, SpikeSlabModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_cov(seed: u64, n: usize, p: usize) -> SampleCov {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    sample_cov(&DataMatrix::from_matrix(y).unwrap())
}

fn random_penalty(seed: u64, p: usize, scale: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in (j + 1)..p {
            let v = scale * rng.random::<f64>();
            l[(j, k)] = v;
            l[(k, j)] = v;
        }
    }
    l
}

fn kkt_violation(s: &DMatrix<f64>, sigma: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..p {
        worst = worst.max((sigma[(j, j)] - s[(j, j)]).abs());
        for k in (j + 1)..p {
            let diff = sigma[(j, k)] - s[(j, k)];
            let l = lambda[(j, k)];
            worst = worst.max(diff.abs() - l);
            if theta[(j, k)] != 0.0 {
                worst = worst.max((diff - l * theta[(j, k)].signum()).abs());
            }
        }
    }
    let resid = sigma * theta - DMatrix::identity(p, p);
    worst.max(resid.amax())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_is_feasible_and_complementary(seed in 0u64..10_000, pi in 0usize..3, scale in 0.0f64..0.4) {
        let p = [3, 5, 10][pi];
        let s = random_cov(seed, 3 * p, p);
        let lambda = random_penalty(seed + 1, p, scale);
        let pen = PenaltyModel::from_matrix(lambda.clone()).unwrap();
        let opts = SolverOptions { tol: 1e-9, ..SolverOptions::default() };
        let sol = solve(&s, &pen, None, &opts).unwrap();
        prop_assert!(kkt_violation(s.matrix(), &sol.sigma, &sol.theta, &lambda) < 1e-6);
    }

    #[test]
    fn zero_penalty_recovers_inverse(seed in 0u64..10_000, pi in 0usize..3) {
        let p = [3, 5, 10][pi];
        let s = random_cov(seed, 4 * p, p);
        let pen = PenaltyModel::constant(p, 0.0).unwrap();
        let opts = SolverOptions { tol: 1e-10, ..SolverOptions::default() };
        let sol = solve(&s, &pen, None, &opts).unwrap();
        let inv = s.matrix().clone().try_inverse().unwrap();
        prop_assert!((&sol.theta - inv).amax() < 1e-6);
    }
}

#[test]
fn penalties_dominating_covariances_give_no_edges() {
    for (i, p) in [3, 5, 10, 20].into_iter().enumerate() {
        let s = random_cov(40 + i as u64, 2 * p, p);
        let mut lambda = s.matrix().abs();
        // mixing exact ties and slack
        for j in 0..p {
            for k in (j + 1)..p {
                if (j + k) % 2 == 1 {
                    lambda[(j, k)] *= 1.5;
                    lambda[(k, j)] = lambda[(j, k)];
                }
            }
        }
        let sol = solve(&s, &PenaltyModel::from_matrix(lambda).unwrap(), None, &SolverOptions::default()).unwrap();
        assert_eq!(sol.n_edges(), 0);
        for j in 0..p {
            for k in 0..p {
                if j != k {
                    assert_eq!(sol.theta[(j, k)], 0.0);
                }
            }
        }
    }
}

fn network(p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in (j + 1)..p {
            let v: f64 = rng.random();
            a[(j, k)] = v;
            a[(k, j)] = v;
        }
    }
    a
}

fn hyper(q: usize) -> SpikeSlabHyper {
    SpikeSlabHyper {
        eta: Eta::zeros(q),
        s0: 0.003,
        prior: EtaPrior {
            m: [0.0, 9f64.ln(), -2.7],
            g: [0.15, 0.65, 3.0],
        },
        ig_a: 0.01,
        ig_b: 0.01,
    }
}

fn model(p: usize, q: usize, seed: u64) -> SpikeSlabModel {
    let s = random_cov(seed, 60, p);
    let nets = if q == 0 {
        NetworkStack::empty(p)
    } else {
        NetworkStack::new((0..q).map(|i| network(p, seed + 7 * i as u64)).collect(), (0..q).map(|i| format!("a{i}")).collect())
            .unwrap()
    };
    SpikeSlabModel::new(&s, &nets, hyper(q)).unwrap()
}

fn random_state(model: &SpikeSlabModel, rng: &mut ChaCha8Rng) -> LatentState {
    let mut state = model.initial_state(rng);
    for r in state.rho_spike_raw.iter_mut().chain(state.rho_slab_raw.iter_mut()) {
        let z: f64 = StandardNormal.sample(rng);
        *r = 0.5 * z;
    }
    for u in state.u.iter_mut() {
        *u = 0.05 + 0.9 * rng.random::<f64>();
    }
    for d in state.sqrt_diag.iter_mut() {
        *d *= 0.8 + 0.4 * rng.random::<f64>();
    }
    for t in state.eta_tilde.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *t = 0.1 * z;
    }
    state
}

#[test]
fn gradient_matches_central_differences() {
    let mut checked = 0;
    for (p, q) in [(3, 0), (3, 2), (5, 1), (5, 3)] {
        let m = model(p, q, 100 + p as u64 + q as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(p as u64 * 10 + q as u64);
        let mut done = 0;
        while done < 5 {
            let x = m.to_unconstrained(&random_state(&m, &mut rng));
            let Some((_, grad)) = m.log_density_and_grad(&x) else { continue };
            let h = 1e-5;
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (m.log_density_unconstrained(&xp) - m.log_density_unconstrained(&xm)) / (2.0 * h);
                let err = (fd - grad[i]).abs() / grad[i].abs().max(1.0);
                assert!(err < 1e-5, "p={p} q={q} coordinate {i}: fd {fd} analytic {}", grad[i]);
            }
            done += 1;
        }
        checked += done;
    }
    assert_eq!(checked, 20);
}

#[test]
fn decoded_prior_matches_mixture_marginal() {
    let eta = Eta {
        eta0: vec![0.05],
        eta1: vec![9f64.ln()],
        eta2: vec![0.0],
    };
    let s = SampleCov::new(DMatrix::identity(2, 2), 10).unwrap();
    let h = hyper(0);
    let s0 = h.s0;
    let m = SpikeSlabModel::with_fixed_eta(&s, &NetworkStack::empty(2), h, eta.clone()).unwrap();
    let (w, mean, scale) = slab_terms(&[1.0], &eta, s0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let states: Vec<LatentState> = (0..20_000)
        .map(|_| LatentState {
            sqrt_diag: DVector::from_element(2, 1.0),
            rho_spike_raw: vec![sample_unit_de(&mut rng)],
            rho_slab_raw: vec![sample_unit_de(&mut rng)],
            u: vec![rng.random()],
            eta_tilde: Vec::new(),
        })
        .collect();
    let cdf = |x: f64| (1.0 - w) * de_cdf(x, 0.0, s0) + w * de_cdf(x, mean, scale);
    let exact: Vec<f64> = states.iter().map(|st| m.decode_exact(st).0.partial_corr[(0, 1)]).collect();
    let ks = ks_statistic(&exact, cdf);
    assert!(ks < 0.012, "exact indicator KS {ks}");
    // the sigmoid blends spike and slab values near u = w
    let smooth: Vec<f64> = states.iter().map(|st| m.decode(st).0.partial_corr[(0, 1)]).collect();
    let ks = ks_statistic(&smooth, cdf);
    assert!(ks < 0.035, "sigmoid KS {ks}");
}

struct Gaussian {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
}

impl Target for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        -0.5 * d.dot(&(&self.precision * &d))
    }

    fn log_density_and_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let d = DVector::from_column_slice(x) - &self.mean;
        let g = -(&self.precision * &d);
        Some((0.5 * d.dot(&g), g.iter().copied().collect()))
    }
}

#[test]
fn hmc_recovers_a_gaussian() {
    let mean = DVector::from_fn(4, |i, _| i as f64 - 1.5);
    let cov = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 + 0.5 * i as f64 } else { 0.3 });
    let target = Gaussian {
        mean: mean.clone(),
        precision: cov.clone().try_inverse().unwrap(),
    };
    let config = McmcConfig {
        n_warmup: 500,
        n_samples: 1000,
        ..McmcConfig::new(3)
    };
    let chains = hmc::sample(&target, |_, rng| (0..4).map(|_| rng.random::<f64>() - 0.5).collect(), &config).unwrap();
    let draws: Vec<&Vec<f64>> = chains.iter().flat_map(|c| &c.draws).collect();
    let n = draws.len() as f64;
    for i in 0..4 {
        let m = draws.iter().map(|d| d[i]).sum::<f64>() / n;
        let v = draws.iter().map(|d| (d[i] - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((m - mean[i]).abs() < 0.1, "mean {i}: {m}");
        assert!((v / cov[(i, i)] - 1.0).abs() < 0.15, "variance {i}: {v}");
    }
}

#[test]
fn edge_probability_algebra() {
    let s0 = 0.003;
    let p = edge_prob_terms(0.0, 0.5, 0.0, 10.0 * s0, s0);
    assert!((p - 1.0 / 11.0).abs() < 1e-12);
    let eta = Eta {
        eta0: vec![0.0],
        eta1: vec![9f64.ln()],
        eta2: vec![0.0],
    };
    assert!((edge_prob(0.0, &eta, &[1.0], s0) - 1.0 / 11.0).abs() < 1e-12);
    // far in the slab tail the spike has no mass
    assert!(edge_prob(0.5, &eta, &[1.0], s0) > 1.0 - 1e-12);
}

fn brute_force_fdr(probs: &[f64], alpha: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|a, b| probs[*b].total_cmp(&probs[*a]));
    let mut best = Vec::new();
    for k in 1..=probs.len() {
        // a cut may not split tied probabilities
        if k < probs.len() && probs[order[k]] == probs[order[k - 1]] {
            continue;
        }
        let fdr = order[..k].iter().map(|&i| 1.0 - probs[i]).sum::<f64>() / k as f64;
        if fdr <= alpha {
            best = order[..k].to_vec();
        }
    }
    best.sort_unstable();
    best
}

#[test]
fn fdr_threshold_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let len = 1 + case % 40;
        let probs: Vec<f64> = (0..len)
            .map(|_| {
                let v: f64 = rng.random();
                // coarse values produce ties
                if case % 3 == 0 {
                    (v * 5.0).round() / 5.0
                } else {
                    v.powf(0.3)
                }
            })
            .collect();
        let alpha = 0.01 + 0.3 * rng.random::<f64>();
        let (_, mut got) = fdr_threshold(&probs, alpha).unwrap();
        got.sort_unstable();
        assert_eq!(got, brute_force_fdr(&probs, alpha), "case {case}");
    }
}
