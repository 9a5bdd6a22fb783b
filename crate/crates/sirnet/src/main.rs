use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sirnet::experiments::{
    outcome_fields, run_estimator_sweep, run_figure1, sweep_csv, Figure1Config, GraphSpec, KappaRule, RadiusRule,
    SweepConfig, T0Rule, T1Rule,
};
use sirnet::io;
use sirnet::svg::{render_curve, render_heatmap, Panel};
use sirnet_core::branching::{extinction_probability, extinction_upper_bound, OffspringDist};
use sirnet_core::estimator::estimate;
use sirnet_core::graph::random_regular;
use sirnet_core::meanfield::{fit_exponential, integrate, MeanFieldParams};
use sirnet_core::rng::stream;
use sirnet_core::sir::{simulate, simulate_gillespie, PatientZero};
use sirnet_core::{Graph, Radius, SirParams};

#[derive(Parser)]
#[command(name = "sirnet", version, about = "SIR epidemics on graphs: simulation and early-time rate estimation")]
struct Cli {
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; without it single-file results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one epidemic and write its trajectory CSV.
    Simulate(SimulateArgs),
    /// Estimate (lambda, mu) from an edge list and observed infection times.
    Estimate(EstimateArgs),
    /// Run the tree grid and write the CSV, metadata and both heatmaps.
    Figure1(Figure1Args),
    /// Extinction probabilities and bounds over a parameter grid.
    Extinction(ExtinctionArgs),
    /// Integrate the mean-field system and fit its early growth.
    Meanfield(MeanfieldArgs),
    /// Repeat simulation plus estimation on finite graphs.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GraphSource {
    /// Edge-list file.
    #[arg(long, conflicts_with = "regular")]
    graph: Option<PathBuf>,
    /// Random regular graph as N,D.
    #[arg(long)]
    regular: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Next,
    Gillespie,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    mu: f64,
    /// Vertex id or `uniform`.
    #[arg(long, default_value = "uniform")]
    patient_zero: String,
    /// Time horizon, or `inf` to run until nothing can change.
    #[arg(long, default_value = "inf")]
    horizon: String,
    #[arg(long, value_enum, default_value = "next")]
    engine: Engine,
}

#[derive(Args)]
struct EstimateArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// CSV with columns vertex,infection_time.
    #[arg(long)]
    times: PathBuf,
    /// Ball radius in hops, or `inf`.
    #[arg(long, default_value = "inf")]
    r: String,
    #[arg(long)]
    t0: f64,
    #[arg(long)]
    t1: f64,
    /// Observation horizon; defaults to unbounded unless the file has `na` entries.
    #[arg(long)]
    horizon: Option<f64>,
    /// Print the column names before the values.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct Figure1Args {
    /// key = value file with grid settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    /// Children per tree vertex: `d` or `d-1`.
    #[arg(long)]
    kappa: Option<String>,
}

#[derive(Args)]
struct ExtinctionArgs {
    /// Comma-separated children counts.
    #[arg(long, default_value = "2,4,8,16,32,64,128")]
    kappa: String,
    /// Comma-separated infection rates.
    #[arg(long, default_value = "0.03125,0.0625,0.125,0.25,0.5,1,2")]
    lambda: String,
    /// Comma-separated recovery rates.
    #[arg(long, default_value = "1")]
    mu: String,
}

#[derive(Args)]
struct MeanfieldArgs {
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Initial infected fraction.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Initial recovered fraction.
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, default_value_t = 5.0)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// Fit a + b·e^{ct} to iota + rho on [0, fit_end].
    #[arg(long, default_value_t = 0.3)]
    fit_end: f64,
    /// Time between CSV rows.
    #[arg(long, default_value_t = 0.01)]
    every: f64,
    /// Also write an SVG plot (needs --out).
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    mu: f64,
    /// Hops, `inf`, or `log:C` for floor(C·log_{d-1} n).
    #[arg(long, default_value = "inf")]
    r: String,
    /// Time, `k:K` for the first time |U| >= K, or `log:A` for A·log_{d-1} n.
    #[arg(long)]
    t0: String,
    /// Time, `+TAU` for t0 + TAU, or `log:B` for B·log_{d-1} n.
    #[arg(long)]
    t1: String,
    #[arg(long, default_value_t = 100)]
    trials: u64,
}

fn parse_time(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        t => t.parse().with_context(|| format!("bad time {t:?}")),
    }
}

fn parse_radius(s: &str) -> Result<Radius> {
    match s.trim() {
        "inf" => Ok(Radius::Infinite),
        r => Ok(Radius::Hops(r.parse().with_context(|| format!("bad radius {r:?}"))?)),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().ok())
        .collect::<Option<Vec<T>>>()
        .with_context(|| format!("bad {what} list {s:?}"))
}

fn parse_regular(s: &str) -> Result<(usize, usize)> {
    match parse_list::<usize>(s, "N,D")?.as_slice() {
        &[n, d] => Ok((n, d)),
        _ => bail!("--regular expects N,D"),
    }
}

fn load_graph(source: &GraphSource, seed: u64) -> Result<(Graph, bool)> {
    match (&source.graph, &source.regular) {
        (Some(path), None) => Ok((io::load_edge_list(path)?, false)),
        (None, Some(spec)) => {
            let (n, d) = parse_regular(spec)?;
            Ok((random_regular(n, d, &mut stream(seed, u64::MAX))?, true))
        }
        _ => bail!("give exactly one of --graph or --regular"),
    }
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    /// Writes to `dir/name`, or to stdout without an output directory.
    fn emit(&self, name: &str, contents: &str) -> Result<()> {
        match &self.dir {
            Some(dir) => self.file(dir, name, contents),
            None => {
                std::io::stdout().write_all(contents.as_bytes())?;
                Ok(())
            }
        }
    }

    fn file(&self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = Output { dir: cli.out.clone() };

    match cli.command {
        Command::Simulate(args) => {
            let (g, generated) = load_graph(&args.source, seed)?;
            let params = SirParams::new(args.lambda, args.mu)?;
            let patient_zero = match args.patient_zero.as_str() {
                "uniform" => PatientZero::Uniform,
                v => PatientZero::Vertex(v.parse().with_context(|| format!("bad patient zero {v:?}"))?),
            };
            let horizon = parse_time(&args.horizon)?;
            let mut rng = stream(seed, 0);
            let traj = match args.engine {
                Engine::Next => simulate(&g, params, patient_zero, horizon, &mut rng)?,
                Engine::Gillespie => simulate_gillespie(&g, params, patient_zero, horizon, &mut rng)?,
            };
            out.emit("trajectory.csv", &io::write_trajectory_csv(&traj))?;
            if let (true, Some(dir)) = (generated, &out.dir) {
                out.file(dir, "graph.txt", &io::write_edge_list(&g))?;
            }
        }
        Command::Estimate(args) => {
            let g = io::load_edge_list(&args.graph)?;
            let traj = io::parse_infection_times(&io::read_to_string(&args.times)?, args.horizon)?;
            let radius = parse_radius(&args.r)?;
            let outcome = estimate(&g, &traj, radius, args.t0, args.t1, &mut stream(seed, 0))?;
            let mut text = String::new();
            if args.header {
                text.push_str("lambda_hat,mu_hat,P,Q,num_bridge_sources,num_hits,broke\n");
            }
            text.push_str(&outcome_fields(&outcome));
            text.push('\n');
            out.emit("estimate.csv", &text)?;
        }
        Command::Figure1(args) => {
            let mut config = Figure1Config::default();
            if let Some(path) = &args.config {
                config.apply_kv(&io::read_to_string(path)?)?;
            }
            if let Some(trials) = args.trials {
                config.trials_per_cell = trials;
                config.break_threshold = config.break_threshold.min(trials);
            }
            if let Some(rule) = &args.kappa {
                config.kappa_rule = KappaRule::parse(rule).with_context(|| format!("bad kappa rule {rule:?}"))?;
            }
            if let Some(s) = cli.seed {
                config.master_seed = s;
            }
            let grid = run_figure1(&config, threads)?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            out.file(&dir, "figure1.csv", &grid.to_csv())?;
            out.file(&dir, "figure1_meta.txt", &grid.metadata())?;
            out.file(&dir, "figure1_left.svg", &render_heatmap(&grid, Panel::Left))?;
            out.file(&dir, "figure1_right.svg", &render_heatmap(&grid, Panel::Right))?;
        }
        Command::Extinction(args) => {
            let kappas: Vec<usize> = parse_list(&args.kappa, "kappa")?;
            let lambdas: Vec<f64> = parse_list(&args.lambda, "lambda")?;
            let mus: Vec<f64> = parse_list(&args.mu, "mu")?;
            let mut text = String::from("kappa,lambda,mu,mean,extinction_exact,bound_intermediate,bound_simple\n");
            for &kappa in &kappas {
                for &lambda in &lambdas {
                    for &mu in &mus {
                        let dist = OffspringDist::new(kappa, lambda, mu)?;
                        let (inter, simple) = match extinction_upper_bound(kappa + 1, lambda, mu) {
                            Ok(b) => (b.intermediate.to_string(), b.simple.to_string()),
                            Err(_) => ("na".to_string(), "na".to_string()),
                        };
                        text.push_str(&format!(
                            "{kappa},{lambda},{mu},{},{},{inter},{simple}\n",
                            dist.mean(),
                            extinction_probability(&dist)
                        ));
                    }
                }
            }
            out.emit("extinction.csv", &text)?;
        }
        Command::Meanfield(args) => {
            let params = MeanFieldParams::with_delta_gamma(args.beta, args.mu, args.delta, args.gamma)?;
            let curve = integrate(params, args.t_end, args.dt)?;
            let step = curve.times.get(1).copied().unwrap_or(args.dt);
            let stride = ((args.every / step).round() as usize).max(1);
            let mut text = String::from("t,sigma,iota,rho\n");
            for i in (0..curve.len()).step_by(stride) {
                text.push_str(&format!("{},{},{},{}\n", curve.times[i], curve.sigma[i], curve.iota[i], curve.rho[i]));
            }
            let samples: Vec<(f64, f64)> = curve
                .times
                .iter()
                .zip(curve.unsusceptible())
                .filter(|(t, _)| **t <= args.fit_end + 1e-12)
                .map(|(t, v)| (*t, v))
                .collect();
            match fit_exponential(&samples) {
                Ok(fit) => text.push_str(&format!("# fit on [0, {}]: a={},b={},c={}\n", args.fit_end, fit.a, fit.b, fit.c)),
                Err(e) => text.push_str(&format!("# fit on [0, {}]: none ({e})\n", args.fit_end)),
            }
            out.emit("meanfield.csv", &text)?;
            if args.svg {
                let dir = out.dir.as_ref().context("--svg needs --out")?;
                out.file(dir, "meanfield.svg", &render_curve(&curve))?;
            }
        }
        Command::Sweep(args) => {
            let graph = match (&args.source.graph, &args.source.regular) {
                (Some(path), None) => GraphSpec::EdgeList(path.clone()),
                (None, Some(spec)) => {
                    let (n, d) = parse_regular(spec)?;
                    GraphSpec::Regular { n, d }
                }
                _ => bail!("give exactly one of --graph or --regular"),
            };
            let radius = match args.r.strip_prefix("log:") {
                Some(c) => RadiusRule::LogScaled(c.parse().context("bad log radius")?),
                None => RadiusRule::Fixed(parse_radius(&args.r)?),
            };
            let t0 = if let Some(k) = args.t0.strip_prefix("k:") {
                T0Rule::UThreshold(k.parse().context("bad threshold")?)
            } else if let Some(a) = args.t0.strip_prefix("log:") {
                T0Rule::LogScaled(a.parse().context("bad log t0")?)
            } else {
                T0Rule::Fixed(parse_time(&args.t0)?)
            };
            let t1 = if let Some(tau) = args.t1.strip_prefix('+') {
                T1Rule::AfterT0(tau.parse().context("bad window")?)
            } else if let Some(b) = args.t1.strip_prefix("log:") {
                T1Rule::LogScaled(b.parse().context("bad log t1")?)
            } else {
                T1Rule::Fixed(parse_time(&args.t1)?)
            };
            let config = SweepConfig {
                graph,
                params: SirParams::new(args.lambda, args.mu)?,
                radius,
                t0,
                t1,
                trials: args.trials,
                seed,
            };
            let rows = run_estimator_sweep(&config, threads)?;
            out.emit("sweep.csv", &sweep_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
