//! Command-line flags merged over an optional `key = value` config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use netgm::hmc::McmcConfig;
use netgm::inference::EdgeRule;
use netgm::selection::Criterion;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Glasso,
    Netglasso,
    Spikeslab,
    Simulate,
    Cv,
    Lincheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Glasso => "glasso",
            Command::Netglasso => "netglasso",
            Command::Spikeslab => "spikeslab",
            Command::Simulate => "simulate",
            Command::Cv => "cv",
            Command::Lincheck => "lincheck",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "netgm", version, about = "Network-informed Gaussian graphical models")]
pub struct Invocation {
    #[command(subcommand)]
    pub command: CommandWithOpts,
}

#[derive(Subcommand, Debug)]
pub enum CommandWithOpts {
    /// Graphical lasso with one penalty chosen by BIC/EBIC.
    Glasso(Opts),
    /// Network graphical lasso with network-dependent penalties.
    Netglasso(Opts),
    /// Network spike-and-slab model sampled by HMC.
    Spikeslab(Opts),
    /// Simulation benchmark.
    Simulate(Opts),
    /// Cross-validated log-likelihood over all network subsets.
    Cv(Opts),
    /// Binned log-mean squared partial correlations against network values.
    Lincheck(Opts),
}

impl CommandWithOpts {
    pub fn split(self) -> (Command, Opts) {
        match self {
            CommandWithOpts::Glasso(o) => (Command::Glasso, o),
            CommandWithOpts::Netglasso(o) => (Command::Netglasso, o),
            CommandWithOpts::Spikeslab(o) => (Command::Spikeslab, o),
            CommandWithOpts::Simulate(o) => (Command::Simulate, o),
            CommandWithOpts::Cv(o) => (Command::Cv, o),
            CommandWithOpts::Lincheck(o) => (Command::Lincheck, o),
        }
    }
}

/// Every option can also be given in the config file under the same name
/// with dashes or underscores; flags win.
#[derive(Args, Debug, Clone, Default)]
pub struct Opts {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Data CSV with a header row of variable names.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Covariate CSV; the data are residualized on these plus an intercept.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Network CSV (repeatable); file order sets the coefficient order.
    #[arg(long = "network")]
    pub networks: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for all randomness (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides NETGM_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    /// bic or ebic.
    #[arg(long)]
    pub criterion: Option<String>,
    /// EBIC gamma in [0, 0.5].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// auto, grid or bayesopt; auto uses the grid for at most one network.
    #[arg(long)]
    pub selector: Option<String>,
    /// Bayesian optimization evaluation budget.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Points per grid axis.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Warmup iterations per chain
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Retained iterations per chain
    #[arg(long)]
    pub samples: Option<usize>,
    /// Keep every k-th draw
    #[arg(long)]
    pub thin: Option<usize>,
    /// Number of chains
    #[arg(long)]
    pub chains: Option<usize>,
    /// Leapfrog steps per trajectory
    #[arg(long)]
    pub leapfrog: Option<usize>,
    /// Step-size adaptation target acceptance rate
    #[arg(long)]
    pub target_accept: Option<f64>,
    /// Bayesian FDR level; replaces the fixed threshold when given.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Posterior probability threshold for edge selection.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Monte Carlo draws for the positive-definiteness prior calibration.
    #[arg(long)]
    pub elicit_draws: Option<usize>,
    /// Gaussianize margins after residualization.
    #[arg(long)]
    pub nonparanormal: bool,
    /// Simulation: number of variables.
    #[arg(long)]
    pub p: Option<usize>,
    /// Simulation: observations per data set.
    #[arg(long)]
    pub n: Option<usize>,
    /// Simulation: data sets per design.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Simulation: comma-separated subset of independent,mild,strong.
    #[arg(long)]
    pub designs: Option<String>,
    /// Simulation: comma-separated estimators.
    #[arg(long)]
    pub methods: Option<String>,
    /// Simulation: record wall-clock times in the manifest.
    #[arg(long)]
    pub timing: bool,
    /// lincheck: number of bins.
    #[arg(long)]
    pub bins: Option<usize>,
}

const KNOWN_KEYS: &[&str] = &[
    "data", "covariates", "network", "out", "seed", "threads", "criterion", "gamma", "selector", "budget",
    "grid_points", "folds", "warmup", "samples", "thin", "chains", "leapfrog", "target_accept", "alpha",
    "threshold", "elicit_draws", "nonparanormal", "p", "n", "replicates", "designs", "methods", "timing", "bins",
];

/// Parses `key = value` lines; `#` starts a comment. Repeated `network`
/// keys accumulate.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, Vec<String>>, CliError> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        let value = value.trim().to_string();
        let entry = map.entry(key.clone()).or_default();
        if key == "network" {
            entry.extend(value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()));
        } else {
            *entry = vec![value];
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    /// Grid search for at most one network, Bayesian optimization beyond.
    Auto,
    Grid,
    BayesOpt,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub data: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub networks: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub criterion: Criterion,
    pub selector: Selector,
    pub budget: Option<usize>,
    pub grid_points: usize,
    pub folds: usize,
    pub mcmc: McmcConfig,
    /// Whether the leapfrog count was set explicitly.
    pub leapfrog_given: bool,
    pub rule: EdgeRule,
    pub elicit_draws: usize,
    pub nonparanormal: bool,
    pub p: usize,
    pub n: usize,
    pub replicates: usize,
    pub designs: String,
    pub methods: String,
    pub timing: bool,
    pub bins: usize,
}

struct Merger {
    file: BTreeMap<String, Vec<String>>,
}

impl Merger {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key).and_then(|v| v.first()) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("config key '{key}': cannot parse '{s}'"))),
        }
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

/// Output directory named in the flags or config file, if any, for error
/// reporting before full validation.
pub fn early_out_dir(opts: &Opts) -> Option<PathBuf> {
    if opts.out.is_some() {
        return opts.out.clone();
    }
    let text = std::fs::read_to_string(opts.config.as_ref()?).ok()?;
    parse_config_text(&text).ok()?.get("out")?.first().map(PathBuf::from)
}

fn check_exists(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!("{what} file {} does not exist", path.display())));
    }
    Ok(())
}

pub fn resolve(command: Command, opts: Opts) -> Result<RunConfig, CliError> {
    let file = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let m = Merger { file };
    let seed = m
        .pick(opts.seed, "seed")?
        .ok_or_else(|| CliError::Config("a seed is required (--seed or seed = ...)".into()))?;
    let out = m
        .pick(opts.out.clone(), "out")?
        .ok_or_else(|| CliError::Config("an output directory is required (--out)".into()))?;
    let data = m.pick(opts.data.clone(), "data")?;
    let covariates = m.pick(opts.covariates.clone(), "covariates")?;
    let networks: Vec<PathBuf> = if opts.networks.is_empty() {
        m.file.get("network").map(|v| v.iter().map(PathBuf::from).collect()).unwrap_or_default()
    } else {
        opts.networks.clone()
    };

    if command != Command::Simulate {
        let d = data.as_ref().ok_or_else(|| CliError::Config("--data is required".into()))?;
        check_exists(d, "data")?;
    }
    if let Some(c) = &covariates {
        check_exists(c, "covariate")?;
    }
    for (i, a) in networks.iter().enumerate() {
        check_exists(a, "network")?;
        if networks[..i].contains(a) {
            return Err(CliError::Config(format!("network {} given twice", a.display())));
        }
    }
    if matches!(command, Command::Netglasso | Command::Cv | Command::Lincheck) && networks.is_empty() {
        return Err(CliError::Config(format!("{} needs at least one --network", command.name())));
    }
    if command == Command::Glasso && !networks.is_empty() {
        return Err(CliError::Config("glasso takes no networks; use netglasso".into()));
    }

    let gamma = m.pick(opts.gamma, "gamma")?;
    let criterion = match m.pick(opts.criterion.clone(), "criterion")?.as_deref().unwrap_or("bic") {
        "bic" => {
            if gamma.is_some() {
                return Err(CliError::Config("gamma applies only to criterion = ebic".into()));
            }
            Criterion::Bic
        }
        "ebic" => {
            let g = gamma.unwrap_or(0.5);
            if !(0.0..=0.5).contains(&g) {
                return Err(CliError::Config(format!("gamma {g} outside [0, 0.5]")));
            }
            Criterion::Ebic(g)
        }
        other => return Err(CliError::Config(format!("unknown criterion '{other}'"))),
    };
    let selector = match m.pick(opts.selector.clone(), "selector")?.as_deref().unwrap_or("auto") {
        "auto" => Selector::Auto,
        "grid" => Selector::Grid,
        "bayesopt" => Selector::BayesOpt,
        other => return Err(CliError::Config(format!("unknown selector '{other}'"))),
    };

    let mut mcmc = McmcConfig::new(seed);
    if let Some(v) = m.pick(opts.warmup, "warmup")? {
        mcmc.n_warmup = v;
    }
    if let Some(v) = m.pick(opts.samples, "samples")? {
        mcmc.n_samples = v;
    }
    if let Some(v) = m.pick(opts.thin, "thin")? {
        mcmc.thin = v;
    }
    if let Some(v) = m.pick(opts.chains, "chains")? {
        mcmc.n_chains = v;
    }
    let leapfrog = m.pick(opts.leapfrog, "leapfrog")?;
    if let Some(v) = leapfrog {
        mcmc.leapfrog_steps = v;
    }
    if let Some(v) = m.pick(opts.target_accept, "target_accept")? {
        mcmc.target_accept = v;
    }
    mcmc.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let alpha = m.pick(opts.alpha, "alpha")?;
    let threshold = m.pick(opts.threshold, "threshold")?;
    let rule = match (alpha, threshold) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either alpha or threshold, not both".into())),
        (Some(a), None) if a > 0.0 && a < 1.0 => EdgeRule::Fdr(a),
        (None, Some(t)) if (0.0..=1.0).contains(&t) => EdgeRule::Fixed(t),
        (None, None) => EdgeRule::Fixed(0.95),
        _ => return Err(CliError::Config("alpha must be in (0, 1) and threshold in [0, 1]".into())),
    };
    let threads = match m.pick(opts.threads, "threads")? {
        Some(t) => Some(t),
        None => match std::env::var("NETGM_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Config(format!("NETGM_THREADS='{v}' is not a count")))?),
            Err(_) => None,
        },
    };
    if threads == Some(0) {
        return Err(CliError::Config("threads must be positive".into()));
    }
    let folds = m.pick(opts.folds, "folds")?.unwrap_or(10);
    if folds < 2 {
        return Err(CliError::Config("folds must be at least 2".into()));
    }
    let grid_points = m.pick(opts.grid_points, "grid_points")?.unwrap_or(50);
    if grid_points == 0 {
        return Err(CliError::Config("grid_points must be positive".into()));
    }
    let bins = m.pick(opts.bins, "bins")?.unwrap_or(10);
    if bins == 0 {
        return Err(CliError::Config("bins must be positive".into()));
    }

    Ok(RunConfig {
        command,
        data,
        covariates,
        networks,
        out,
        seed,
        threads,
        criterion,
        selector,
        budget: m.pick(opts.budget, "budget")?,
        grid_points,
        folds,
        mcmc,
        leapfrog_given: leapfrog.is_some(),
        rule,
        elicit_draws: m.pick(opts.elicit_draws, "elicit_draws")?.unwrap_or(10_000),
        nonparanormal: m.flag(opts.nonparanormal, "nonparanormal")?,
        p: m.pick(opts.p, "p")?.unwrap_or(10),
        n: m.pick(opts.n, "n")?.unwrap_or(100),
        replicates: m.pick(opts.replicates, "replicates")?.unwrap_or(20),
        designs: m.pick(opts.designs.clone(), "designs")?.unwrap_or_else(|| "independent,mild,strong".into()),
        methods: m.pick(opts.methods.clone(), "methods")?.unwrap_or_else(|| "glasso,network_glasso".into()),
        timing: m.flag(opts.timing, "timing")?,
        bins,
    })
}
