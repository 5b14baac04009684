//! Subcommand implementations. Each writes its CSV files into the output
//! directory and returns the paths written.

use std::path::PathBuf;

use netgm::elicit::{elicit_priors, ElicitOptions};
use netgm::hmc::{McmcConfig, McmcRun};
use netgm::inference::{two_stage_fit, TwoStageConfig};
use netgm::linalg::upper_pairs;
use netgm::selection::{bayes_opt, cv_fold_scores, fold_assignment, grid_search, BayesOptSpec};
use netgm::sim::{gen_truth, overlap, run_benchmark, BenchOptions, Informativeness, Method, SimDesign};
use netgm::spike_slab::slab_terms;
use netgm::{partial_corr_of, sample_cov, GridSpec, NetworkStack, SampleCov, SelectionResult, SolverOptions};

use crate::config::{Command, RunConfig, Selector};
use crate::error::CliError;
use crate::ingest::{ingest, Inputs};
use crate::output::{flag, num, write_text, Table};

pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cfg.out.display())))?;
    match cfg.command {
        Command::Glasso | Command::Netglasso => glasso(cfg),
        Command::Spikeslab => spikeslab(cfg),
        Command::Simulate => simulate(cfg),
        Command::Cv => cv(cfg),
        Command::Lincheck => lincheck(cfg),
    }
}

fn select(cfg: &RunConfig, s: &SampleCov, networks: &NetworkStack) -> Result<SelectionResult, CliError> {
    select_from(cfg, s, networks, Vec::new())
}

/// `warm_start` seeds Bayesian optimization and is ignored by the grid.
fn select_from(
    cfg: &RunConfig,
    s: &SampleCov,
    networks: &NetworkStack,
    warm_start: Vec<Vec<f64>>,
) -> Result<SelectionResult, CliError> {
    let opts = SolverOptions::default();
    let use_grid = match cfg.selector {
        Selector::Auto => networks.q() <= 1,
        Selector::Grid => true,
        Selector::BayesOpt => false,
    };
    let result = if use_grid {
        let spec = GridSpec {
            beta0_points: cfg.grid_points,
            beta_q_points: cfg.grid_points,
            ..GridSpec::default()
        };
        grid_search(s, networks, cfg.criterion, &spec, &opts)?
    } else {
        let mut spec = BayesOptSpec::new(cfg.seed);
        spec.budget = cfg.budget;
        spec.warm_start = warm_start;
        bayes_opt(s, networks, cfg.criterion, &spec, &opts)?
    };
    Ok(result)
}

fn coefficient_names(networks: &NetworkStack) -> Vec<String> {
    let mut v = vec!["intercept".to_string()];
    v.extend(networks.names().iter().cloned());
    v
}

fn glasso(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let Inputs { data, networks } = ingest(cfg)?;
    let s = sample_cov(&data);
    let fit = select(cfg, &s, &networks)?;
    let names = data.names();
    let rho = partial_corr_of(&fit.solution.theta)?;
    let mut edges = Table::new(&["node_i", "node_j", "theta", "partial_corr", "selected"]);
    let selected = &fit.solution.edges;
    for (j, k) in upper_pairs(data.p()) {
        edges.push(vec![
            names[j].clone(),
            names[k].clone(),
            num(fit.solution.theta[(j, k)]),
            num(rho[(j, k)]),
            flag(selected.contains(&(j, k))),
        ]);
    }
    let mut hyper = Table::new(&["coefficient", "beta"]);
    for (name, b) in coefficient_names(&networks).into_iter().zip(&fit.beta_hat) {
        hyper.push(vec![name, num(*b)]);
    }
    let mut summary = Table::new(&["quantity", "value"]);
    summary.push(vec!["n".into(), data.n().to_string()]);
    summary.push(vec!["p".into(), data.p().to_string()]);
    summary.push(vec!["criterion".into(), fit.criterion.label()]);
    summary.push(vec!["criterion_value".into(), num(fit.criterion_value)]);
    summary.push(vec!["edges".into(), fit.solution.n_edges().to_string()]);
    summary.push(vec!["evaluations".into(), fit.trace.len().to_string()]);
    let mut out = vec![
        edges.write(&cfg.out, "edges.csv")?,
        hyper.write(&cfg.out, "hyperparameters.csv")?,
        summary.write(&cfg.out, "summary.csv")?,
    ];
    if cfg.command == Command::Netglasso {
        out.extend(lattice(cfg, &data, &networks, false)?);
    }
    Ok(out)
}

fn subset_label(networks: &NetworkStack) -> String {
    if networks.q() == 0 {
        "none".into()
    } else {
        networks.names().join("+")
    }
}

/// Selection and cross-validation for every subset of the networks, in
/// bitmask order. Each subset starts from the optima of the subsets one
/// network smaller, with the dropped coefficient at zero, so a larger
/// subset never scores worse than a nested one it has seen.
fn lattice(
    cfg: &RunConfig,
    data: &netgm::DataMatrix,
    networks: &NetworkStack,
    per_fold: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let q = networks.q();
    if q > 16 {
        return Err(CliError::Config(format!("{q} networks give too many subsets to compare")));
    }
    let s = sample_cov(data);
    let assign = fold_assignment(data.n(), cfg.folds, cfg.seed)?;
    let mut table = Table::new(&["networks", "criterion", "edges", "cv_loglik", "beta"]);
    let mut folds = Table::new(&["networks", "fold", "heldout_loglik"]);
    let mut optima: Vec<Vec<f64>> = Vec::with_capacity(1 << q);
    for mask in 0..(1usize << q) {
        let idx: Vec<usize> = (0..q).filter(|i| mask >> i & 1 == 1).collect();
        let sub = networks.subset(&idx);
        let warm = idx
            .iter()
            .map(|&drop| {
                let smaller = &optima[mask & !(1 << drop)];
                let mut beta = vec![smaller[0]];
                let mut rest = smaller[1..].iter();
                beta.extend(idx.iter().map(|&i| if i == drop { 0.0 } else { *rest.next().unwrap() }));
                beta
            })
            .collect();
        let fit = select_from(cfg, &s, &sub, warm)?;
        optima.push(fit.beta_hat.clone());
        let scores = cv_fold_scores(data, &sub, &fit.beta_hat, &assign, &SolverOptions::default())?;
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let label = subset_label(&sub);
        table.push(vec![
            label.clone(),
            num(fit.criterion_value),
            fit.solution.n_edges().to_string(),
            num(mean),
            fit.beta_hat.iter().map(|b| num(*b)).collect::<Vec<_>>().join(";"),
        ]);
        for (f, sc) in scores.iter().enumerate() {
            folds.push(vec![label.clone(), f.to_string(), num(*sc)]);
        }
    }
    let mut out = vec![table.write(&cfg.out, "comparison.csv")?];
    if per_fold {
        out.push(folds.write(&cfg.out, "cv_folds.csv")?);
    }
    Ok(out)
}

fn cv(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let Inputs { data, networks } = ingest(cfg)?;
    lattice(cfg, &data, &networks, true)
}

fn diagnostics_rows(table: &mut Table, stage: &str, run: &McmcRun) {
    for ((name, e), r) in run.param_names.iter().zip(&run.ess).zip(&run.rhat) {
        table.push(vec![stage.into(), name.clone(), num(*e), num(*r)]);
    }
}

fn sampler_rows(table: &mut Table, stage: &str, run: &McmcRun) {
    for (c, step) in run.step_sizes.iter().enumerate() {
        table.push(vec![
            stage.into(),
            c.to_string(),
            num(*step),
            num(run.accept_rate),
            run.divergences.to_string(),
        ]);
    }
}

/// Mean and sample standard deviation over upper-triangle pairs, matching
/// the standardization of the network stack.
fn pair_moments(a: &nalgebra::DMatrix<f64>) -> (f64, f64, f64, f64) {
    let vals: Vec<f64> = upper_pairs(a.nrows()).iter().map(|&(j, k)| a[(j, k)]).collect();
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, sd, lo, hi)
}

fn spikeslab(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let Inputs { data, networks } = ingest(cfg)?;
    let s = sample_cov(&data);
    let mut eo = ElicitOptions::new(cfg.seed);
    eo.n_draws = cfg.elicit_draws;
    let hyper = elicit_priors(data.p(), data.n(), &networks, &eo)?;
    let mut tc = TwoStageConfig::new(cfg.seed);
    tc.stage1 = cfg.mcmc.clone();
    tc.stage2 = McmcConfig {
        seed: cfg.seed.wrapping_add(1),
        ..cfg.mcmc.clone()
    };
    tc.rule = cfg.rule;
    let fit = two_stage_fit(&s, &networks, &hyper, &tc)?;
    let names = data.names();
    let coef = coefficient_names(&networks);

    let mut edges = Table::new(&[
        "node_i",
        "node_j",
        "partial_corr",
        "posterior_sd",
        "posterior_slab_prob",
        "selected_0.5",
        "selected_0.95",
        "selected",
    ]);
    for e in &fit.report.entries {
        edges.push(vec![
            names[e.j].clone(),
            names[e.k].clone(),
            num(e.post_mean_rho),
            num(e.post_sd_rho),
            num(e.posterior_slab_prob),
            flag(e.selected_05),
            flag(e.posterior_slab_prob >= 0.95),
            flag(e.selected),
        ]);
    }

    let mut header = vec!["parameter".to_string()];
    header.extend(coef.iter().cloned());
    let mut hyper_table = Table::new(&header);
    let blocks = [("eta0", &fit.eta_hat.eta0), ("eta1", &fit.eta_hat.eta1), ("eta2", &fit.eta_hat.eta2)];
    for (label, v) in blocks {
        let mut row = vec![label.to_string()];
        row.extend(v.iter().map(|x| num(*x)));
        hyper_table.push(row);
    }

    let mut intervals = Table::new(&["parameter", "coefficient", "estimate", "lower_95", "upper_95"]);
    let flat = fit.eta_hat.flatten();
    for (i, (lo, hi)) in fit.eta_intervals.iter().enumerate() {
        let block = ["eta0", "eta1", "eta2"][i / coef.len()];
        intervals.push(vec![block.into(), coef[i % coef.len()].clone(), num(flat[i]), num(*lo), num(*hi)]);
    }

    let mut prior = Table::new(&["quantity", "value"]);
    prior.push(vec!["s0".into(), num(hyper.s0)]);
    for b in 0..3 {
        prior.push(vec![format!("m{b}"), num(hyper.prior.m[b])]);
        prior.push(vec![format!("g{b}"), num(hyper.prior.g[b])]);
    }
    prior.push(vec!["ig_a".into(), num(hyper.ig_a)]);
    prior.push(vec!["ig_b".into(), num(hyper.ig_b)]);
    prior.push(vec!["threshold_used".into(), num(fit.report.threshold_used)]);

    let mut diag = Table::new(&["stage", "parameter", "ess", "rhat"]);
    diagnostics_rows(&mut diag, "joint", &fit.stage1);
    diagnostics_rows(&mut diag, "fixed_eta", &fit.stage2);
    let mut sampler = Table::new(&["stage", "chain", "step_size", "accept_rate", "divergences"]);
    sampler_rows(&mut sampler, "joint", &fit.stage1);
    sampler_rows(&mut sampler, "fixed_eta", &fit.stage2);

    let mut plot = Table::new(&["network", "value", "slab_prob", "slab_mean", "slab_scale"]);
    if networks.q() == 0 {
        let (w, m, sc) = slab_terms(&[1.0], &fit.eta_hat, hyper.s0);
        plot.push(vec!["none".into(), num(0.0), num(w), num(m), num(sc)]);
    }
    for (qi, a) in networks.raw().iter().enumerate() {
        let (mean, sd, lo, hi) = pair_moments(a);
        for v in netgm::linalg::linspace(lo, hi, 50) {
            let mut x = vec![0.0; networks.q() + 1];
            x[0] = 1.0;
            x[qi + 1] = (v - mean) / sd;
            let (w, m, sc) = slab_terms(&x, &fit.eta_hat, hyper.s0);
            plot.push(vec![networks.names()[qi].clone(), num(v), num(w), num(m), num(sc)]);
        }
    }

    Ok(vec![
        edges.write(&cfg.out, "edges.csv")?,
        hyper_table.write(&cfg.out, "hyperparameters.csv")?,
        intervals.write(&cfg.out, "intervals.csv")?,
        prior.write(&cfg.out, "prior.csv")?,
        diag.write(&cfg.out, "diagnostics.csv")?,
        sampler.write(&cfg.out, "sampler.csv")?,
        plot.write(&cfg.out, "plot_data.csv")?,
    ])
}

fn parse_list<T>(text: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| CliError::Config(format!("unknown {what} '{s}'"))))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("no {what} given")));
    }
    Ok(items)
}

fn simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let kinds = parse_list(&cfg.designs, "design", |s| match s {
        "independent" | "ind" => Some(Informativeness::Independent),
        "mild" => Some(Informativeness::Mild),
        "strong" => Some(Informativeness::Strong),
        _ => None,
    })?;
    let methods = parse_list(&cfg.methods, "method", |s| {
        [
            Method::Oracle,
            Method::Identity,
            Method::Glasso,
            Method::NetworkGlasso,
            Method::SpikeSlab,
            Method::NetworkSpikeSlab,
        ]
        .into_iter()
        .find(|m| m.label() == s)
    })?;
    let designs: Vec<SimDesign> = kinds
        .into_iter()
        .map(|k| SimDesign {
            p: cfg.p,
            n: cfg.n,
            informativeness: k,
            seed: cfg.seed,
        })
        .collect();
    let mut opts = BenchOptions {
        criterion: cfg.criterion,
        timing: cfg.timing,
        elicit_draws: cfg.elicit_draws,
        rule: cfg.rule,
        ..BenchOptions::default()
    };
    opts.grid.beta0_points = cfg.grid_points;
    opts.grid.beta_q_points = cfg.grid_points;
    let harness_steps = opts.mcmc.leapfrog_steps;
    opts.mcmc = cfg.mcmc.clone();
    if !cfg.leapfrog_given {
        opts.mcmc.leapfrog_steps = harness_steps;
    }
    let result = run_benchmark(&designs, &methods, cfg.replicates, &opts)?;

    let mut metrics = Table::new(&["design", "method", "mse", "fdr", "fnr", "n_ok", "n_failed"]);
    for r in &result.rows {
        metrics.push(vec![
            r.design.clone(),
            r.method.clone(),
            num(r.mse),
            num(r.fdr),
            num(r.fnr),
            r.n_ok.to_string(),
            r.n_failed.to_string(),
        ]);
    }
    let mut reps = Table::new(&["design", "replicate", "method", "mse", "fdr", "fnr", "error"]);
    for r in &result.records {
        let m = r.metrics;
        let f = |g: fn(&netgm::sim::Metrics) -> f64| m.as_ref().map_or_else(String::new, |x| num(g(x)));
        reps.push(vec![
            designs[r.design].label(),
            r.replicate.to_string(),
            r.method.label().into(),
            f(|x| x.mse),
            f(|x| x.fdr),
            f(|x| x.fnr),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    let mut truth = Table::new(&["design", "overlap", "diagonal_inflation"]);
    for d in &designs {
        let t = gen_truth(d)?;
        truth.push(vec![d.label(), num(overlap(&t)), num(t.inflation)]);
    }
    let manifest = serde_json::to_string_pretty(&result.manifest)
        .map_err(|e| CliError::Numerical(format!("cannot serialize manifest: {e}")))?;
    Ok(vec![
        metrics.write(&cfg.out, "metrics.csv")?,
        reps.write(&cfg.out, "replicates.csv")?,
        truth.write(&cfg.out, "designs.csv")?,
        write_text(&cfg.out, "manifest.json", &(manifest + "\n"))?,
    ])
}

/// Log of the mean squared partial correlation within equispaced bins of
/// each network's values, with a least-squares line through the bins.
fn lincheck(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let Inputs { data, networks } = ingest(cfg)?;
    let s = sample_cov(&data);
    let fit = select(cfg, &s, &NetworkStack::empty(data.p()))?;
    let rho = partial_corr_of(&fit.solution.theta)?;
    let pairs = upper_pairs(data.p());
    let mut bins_table = Table::new(&["network", "bin", "lower", "upper", "count", "log_mean_rho2"]);
    let mut lines = Table::new(&["network", "slope", "intercept", "r_squared", "bins_used"]);
    for (qi, a) in networks.raw().iter().enumerate() {
        let name = &networks.names()[qi];
        let (_, _, lo, hi) = pair_moments(a);
        let width = (hi - lo) / cfg.bins as f64;
        let mut sums = vec![0.0; cfg.bins];
        let mut counts = vec![0usize; cfg.bins];
        for &(j, k) in &pairs {
            let b = if width > 0.0 {
                (((a[(j, k)] - lo) / width) as usize).min(cfg.bins - 1)
            } else {
                0
            };
            sums[b] += rho[(j, k)].powi(2);
            counts[b] += 1;
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for b in 0..cfg.bins {
            let lower = lo + b as f64 * width;
            let value = if counts[b] > 0 {
                (sums[b] / counts[b] as f64).ln()
            } else {
                f64::NAN
            };
            if value.is_finite() {
                xs.push(lower + 0.5 * width);
                ys.push(value);
            }
            bins_table.push(vec![
                name.clone(),
                b.to_string(),
                num(lower),
                num(lower + width),
                counts[b].to_string(),
                num(value),
            ]);
        }
        let (slope, intercept, r2) = least_squares(&xs, &ys);
        lines.push(vec![name.clone(), num(slope), num(intercept), num(r2), xs.len().to_string()]);
    }
    Ok(vec![
        bins_table.write(&cfg.out, "lincheck.csv")?,
        lines.write(&cfg.out, "lincheck_fit.csv")?,
    ])
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    if x.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}
