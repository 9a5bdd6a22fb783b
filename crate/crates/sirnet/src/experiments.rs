//! Batch experiments: the tree grid behind the phase-transition heatmaps and
//! estimator sweeps on finite graphs.
//!
//! Every trial draws from its own stream keyed by `(master seed, cell, trial)`
//! and results are reduced in index order, so output does not depend on the
//! number of worker threads.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use sirnet_core::branching::{extinction_probability, OffspringDist};
use sirnet_core::estimator::{estimate, estimate_tree, EstimateOutcome};
use sirnet_core::graph::{random_regular, GraphError};
use sirnet_core::rng::substream;
use sirnet_core::sir::{simulate, simulate_tree, PatientZero, TreeStop, TreeStopReason, TREE_SAFETY_CAP};
use sirnet_core::{BreakReason, Graph, Radius, SimRng, SirParams};
use thiserror::Error;

use crate::io::{self, IoError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Sir(#[from] sirnet_core::sir::SirError),
    #[error(transparent)]
    Estimator(#[from] sirnet_core::estimator::EstimatorError),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn config_error(message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(message.into())
}

/// How many children a tree vertex gets for a heatmap column labeled `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaRule {
    /// `κ = d`
    D,
    /// `κ = d - 1`, the subtree arity inside a `d`-regular graph.
    DMinusOne,
}

impl KappaRule {
    pub fn kappa(self, d: usize) -> usize {
        match self {
            KappaRule::D => d,
            KappaRule::DMinusOne => d - 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KappaRule::D => "d",
            KappaRule::DMinusOne => "d-1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "d" => Some(KappaRule::D),
            "d-1" => Some(KappaRule::DMinusOne),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Config {
    pub d_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    pub mu: f64,
    pub trials_per_cell: u64,
    /// `k` in `T₀ = inf{t : |U(t)| ≥ k}`.
    pub u_threshold: usize,
    /// `t₁ - t₀`
    pub tau_after_t0: f64,
    /// A cell is masked once this many of its trials break.
    pub break_threshold: u64,
    pub master_seed: u64,
    pub kappa_rule: KappaRule,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Self {
            d_values: vec![2, 4, 8, 16, 32, 64, 128],
            lambda_values: (-5..=1).map(|j| 2f64.powi(j)).collect(),
            mu: 1.0,
            trials_per_cell: 100,
            u_threshold: 100,
            tau_after_t0: 4.0,
            break_threshold: 80,
            master_seed: 0,
            kappa_rule: KappaRule::D,
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Option<Vec<T>> {
    value.split(',').map(|s| s.trim().parse().ok()).collect()
}

impl Figure1Config {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.d_values.is_empty() || self.lambda_values.is_empty() {
            return Err(config_error("d_values and lambda_values must be nonempty"));
        }
        if self.d_values.iter().any(|&d| self.kappa_rule.kappa(d) == 0) {
            return Err(config_error("every d must give at least one child per vertex"));
        }
        if self.lambda_values.iter().any(|&l| !(l > 0.0 && l.is_finite())) || !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(config_error("rates must be finite, lambda > 0 and mu >= 0"));
        }
        if self.trials_per_cell == 0 || self.break_threshold > self.trials_per_cell {
            return Err(config_error("need trials_per_cell >= 1 and break_threshold <= trials_per_cell"));
        }
        if self.u_threshold == 0 || !(self.tau_after_t0 > 0.0) {
            return Err(config_error("need u_threshold >= 1 and tau_after_t0 > 0"));
        }
        Ok(())
    }

    /// Applies `key = value` lines over `self`. `#` starts a comment; lists
    /// are comma separated.
    pub fn apply_kv(&mut self, text: &str) -> Result<(), ExperimentError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| ExperimentError::ConfigLine { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let invalid = || bad(format!("bad value {value:?} for {key}"));
            match key {
                "d_values" => self.d_values = parse_list(value).ok_or_else(invalid)?,
                "lambda_values" => self.lambda_values = parse_list(value).ok_or_else(invalid)?,
                "mu" => self.mu = value.parse().map_err(|_| invalid())?,
                "trials_per_cell" => self.trials_per_cell = value.parse().map_err(|_| invalid())?,
                "u_threshold" => self.u_threshold = value.parse().map_err(|_| invalid())?,
                "tau_after_t0" => self.tau_after_t0 = value.parse().map_err(|_| invalid())?,
                "break_threshold" => self.break_threshold = value.parse().map_err(|_| invalid())?,
                "master_seed" => self.master_seed = value.parse().map_err(|_| invalid())?,
                "kappa" => self.kappa_rule = KappaRule::parse(value).ok_or_else(invalid)?,
                _ => return Err(bad(format!("unknown key {key:?}"))),
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let join = |xs: Vec<String>| xs.join(",");
        format!(
            "d_values = {}\nlambda_values = {}\nmu = {}\ntrials_per_cell = {}\nu_threshold = {}\ntau_after_t0 = {}\nbreak_threshold = {}\nmaster_seed = {}\nkappa = {}\n",
            join(self.d_values.iter().map(|d| d.to_string()).collect()),
            join(self.lambda_values.iter().map(|l| l.to_string()).collect()),
            self.mu,
            self.trials_per_cell,
            self.u_threshold,
            self.tau_after_t0,
            self.break_threshold,
            self.master_seed,
            self.kappa_rule.as_str(),
        )
    }
}

/// Result of one tree trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeTrial {
    pub t0: Option<f64>,
    pub outcome: EstimateOutcome,
}

impl TreeTrial {
    pub fn broke(&self) -> bool {
        self.outcome.broke.is_some()
    }
}

/// One tree run with `t₀ = T₀` (the first time `|U| ≥ u_threshold`) and
/// `t₁ = t₀ + tau`, followed by the estimator with `r = ∞`.
pub fn tree_trial(
    kappa: usize,
    params: SirParams,
    u_threshold: usize,
    tau: f64,
    rng: &mut SimRng,
) -> Result<TreeTrial, ExperimentError> {
    let stop = TreeStop {
        horizon: f64::INFINITY,
        u_cap: Some(u_threshold),
    };
    let run = simulate_tree(kappa, params, stop, rng)?;
    let t0 = match run.stop {
        TreeStopReason::UCap => run.trajectory.horizon(),
        TreeStopReason::Absorbed => {
            return Ok(TreeTrial {
                t0: None,
                outcome: EstimateOutcome::broken(BreakReason::T0Infinite),
            })
        }
        TreeStopReason::Horizon | TreeStopReason::SafetyCap => {
            return Ok(TreeTrial {
                t0: None,
                outcome: EstimateOutcome::broken(BreakReason::Unresolved),
            })
        }
    };
    let outcome = estimate_tree(&run, t0, t0 + tau, rng)?;
    Ok(TreeTrial { t0: Some(t0), outcome })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub d: usize,
    pub kappa: usize,
    pub lambda: f64,
    pub mu: f64,
    pub trials: u64,
    pub t0_infinite: u64,
    pub broke_count: u64,
    /// Mean of `max(|λ̂-λ|/λ, |μ̂-μ|/μ)` over non-broken trials; `None` when masked.
    pub mean_max_rel_err: Option<f64>,
}

impl CellResult {
    pub fn prop_t0_inf(&self) -> f64 {
        self.t0_infinite as f64 / self.trials as f64
    }

    pub fn masked(&self) -> bool {
        self.mean_max_rel_err.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub config: Figure1Config,
    /// Row-major: all `lambda_values` for the first `d`, then the next `d`.
    pub cells: Vec<CellResult>,
}

pub const GRID_CSV_HEADER: &str = "d,lambda,mu,trials,prop_t0_inf,broke_count,mean_max_rel_err";

impl GridResult {
    pub fn cell(&self, d: usize, lambda: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.d == d && c.lambda == lambda)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{GRID_CSV_HEADER}\n");
        for c in &self.cells {
            let err = c.mean_max_rel_err.map_or_else(|| "na".to_string(), |e| e.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.d,
                c.lambda,
                c.mu,
                c.trials,
                c.prop_t0_inf(),
                c.broke_count,
                err
            );
        }
        out
    }

    /// Settings needed to rerun the grid, including the child-count rule and
    /// the tree size cap.
    pub fn metadata(&self) -> String {
        format!(
            "{}tree_safety_cap = {}\n",
            self.config.to_kv(),
            TREE_SAFETY_CAP
        )
    }

    /// Exact extinction probability of the offspring law behind each cell.
    pub fn extinction_oracle(&self, cell: &CellResult) -> f64 {
        OffspringDist::new(cell.kappa, cell.lambda, cell.mu)
            .map(|dist| extinction_probability(&dist))
            .unwrap_or(1.0)
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

/// Runs every `(d, λ)` cell of the grid on `threads` workers.
pub fn run_figure1(config: &Figure1Config, threads: usize) -> Result<GridResult, ExperimentError> {
    config.validate()?;
    let mut cells_spec = Vec::new();
    for &d in &config.d_values {
        for &lambda in &config.lambda_values {
            cells_spec.push((d, lambda));
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells_spec.len())
        .flat_map(|cell| (0..config.trials_per_cell).map(move |trial| (cell, trial)))
        .collect();

    let trials: Vec<Result<TreeTrial, ExperimentError>> = pool(threads)?.install(|| {
        jobs.par_iter()
            .map(|&(cell, trial)| {
                let (d, lambda) = cells_spec[cell];
                let params = SirParams::new(lambda, config.mu)?;
                let mut rng = substream(config.master_seed, cell as u64, trial);
                tree_trial(config.kappa_rule.kappa(d), params, config.u_threshold, config.tau_after_t0, &mut rng)
            })
            .collect()
    });

    let per_cell = config.trials_per_cell as usize;
    let mut cells = Vec::with_capacity(cells_spec.len());
    for (index, chunk) in trials.chunks(per_cell).enumerate() {
        let (d, lambda) = cells_spec[index];
        let mut t0_infinite = 0;
        let mut broke_count = 0;
        let mut errors = Vec::new();
        for trial in chunk {
            let trial = trial.as_ref().map_err(|e| config_error(e.to_string()))?;
            if trial.t0.is_none() && trial.outcome.broke == Some(BreakReason::T0Infinite) {
                t0_infinite += 1;
            }
            if trial.broke() {
                broke_count += 1;
            } else if let Some(err) = trial.outcome.max_relative_error(lambda, config.mu) {
                errors.push(err);
            }
        }
        let mean_max_rel_err = (broke_count < config.break_threshold && !errors.is_empty())
            .then(|| errors.iter().sum::<f64>() / errors.len() as f64);
        cells.push(CellResult {
            d,
            kappa: config.kappa_rule.kappa(d),
            lambda,
            mu: config.mu,
            trials: config.trials_per_cell,
            t0_infinite,
            broke_count,
            mean_max_rel_err,
        });
    }
    Ok(GridResult {
        config: config.clone(),
        cells,
    })
}

/// Where the sweep's graphs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    EdgeList(PathBuf),
    /// A fresh uniform `d`-regular graph on `n` vertices per trial.
    Regular { n: usize, d: usize },
}

/// Observation start time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T0Rule {
    Fixed(f64),
    /// First time `|U| ≥ k`.
    UThreshold(usize),
    /// `α·log_{d-1} n`
    LogScaled(f64),
}

/// Observation end time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T1Rule {
    Fixed(f64),
    AfterT0(f64),
    /// `β·log_{d-1} n`
    LogScaled(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusRule {
    Fixed(Radius),
    /// `⌊c·log_{d-1} n⌋` hops.
    LogScaled(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub graph: GraphSpec,
    pub params: SirParams,
    pub radius: RadiusRule,
    pub t0: T0Rule,
    pub t1: T1Rule,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub trial: u64,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub outcome: EstimateOutcome,
}

pub const SWEEP_CSV_HEADER: &str = "trial,t0,t1,lambda_hat,mu_hat,P,Q,num_bridge_sources,num_hits,broke";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "na".to_string(), |v| v.to_string())
}

/// One-line rendering of an estimate: `lambda_hat,mu_hat,P,Q,num_bridge_sources,num_hits,broke`.
pub fn outcome_fields(o: &EstimateOutcome) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        opt(o.lambda_hat),
        opt(o.mu_hat),
        opt(o.p),
        opt(o.q),
        o.num_bridge_sources,
        o.num_hits,
        o.broke.map_or("na", BreakReason::as_str)
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.trial, opt(r.t0), opt(r.t1), outcome_fields(&r.outcome));
    }
    out
}

fn log_scale(g: &Graph) -> Result<f64, ExperimentError> {
    match g.regular_degree() {
        Some(d) if d >= 3 => Ok((g.num_vertices() as f64).ln() / ((d - 1) as f64).ln()),
        _ => Err(config_error("log-scaled rules need a d-regular graph with d >= 3")),
    }
}

fn sweep_trial(config: &SweepConfig, fixed: Option<&Graph>, trial: u64) -> Result<SweepRow, ExperimentError> {
    let mut rng = substream(config.seed, 0, trial);
    let generated;
    let g = match (fixed, &config.graph) {
        (Some(g), _) => g,
        (None, GraphSpec::Regular { n, d }) => {
            generated = random_regular(*n, *d, &mut rng)?;
            &generated
        }
        (None, GraphSpec::EdgeList(_)) => unreachable!("edge lists are loaded once"),
    };
    let radius = match config.radius {
        RadiusRule::Fixed(r) => r,
        RadiusRule::LogScaled(c) => Radius::Hops((c * log_scale(g)?).floor() as usize),
    };
    let traj = simulate(g, config.params, PatientZero::Uniform, f64::INFINITY, &mut rng)?;
    let t0 = match config.t0 {
        T0Rule::Fixed(t) => Some(t),
        T0Rule::UThreshold(k) => traj.first_time_u_reaches(k).time(),
        T0Rule::LogScaled(alpha) => Some(alpha * log_scale(g)?),
    };
    let Some(t0) = t0 else {
        return Ok(SweepRow {
            trial,
            t0: None,
            t1: None,
            outcome: EstimateOutcome::broken(BreakReason::T0Infinite),
        });
    };
    let t1 = match config.t1 {
        T1Rule::Fixed(t) => t,
        T1Rule::AfterT0(tau) => t0 + tau,
        T1Rule::LogScaled(beta) => beta * log_scale(g)?,
    };
    let outcome = estimate(g, &traj, radius, t0, t1, &mut rng)?;
    Ok(SweepRow {
        trial,
        t0: Some(t0),
        t1: Some(t1),
        outcome,
    })
}

/// Simulates to completion and runs the estimator once per trial.
pub fn run_estimator_sweep(config: &SweepConfig, threads: usize) -> Result<Vec<SweepRow>, ExperimentError> {
    let fixed = match &config.graph {
        GraphSpec::EdgeList(path) => Some(io::load_edge_list(path)?),
        GraphSpec::Regular { .. } => None,
    };
    pool(threads)?.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|trial| sweep_trial(config, fixed.as_ref(), trial))
            .collect()
    })
}
