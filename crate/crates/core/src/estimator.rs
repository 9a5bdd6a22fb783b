//! Rate estimation from early infection times.
//!
//! A cross-infection across a single edge, observed for a window of length
//! `τ`, has the truncated law `CI(λ, μ, τ)`: with density `λe^{-(λ+μ)t}` on
//! `(0, τ)` and an atom at `τ`. Its hit probability `p` and conditional mean
//! `q` determine the rates through `λ ≈ p/q` and `μ ≈ (1-p)/q`.
//!
//! [`estimate`] harvests approximately independent `CI` samples from one
//! sample path: around the earliest infected vertex it takes the bridges
//! separating the unsusceptible set `U(t0)` from the rest, draws one outside
//! endpoint per inside endpoint, and records how long that endpoint took to
//! become infected after `t0`, truncated at `τ = t1 - t0`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::graph::{ball, bridges, Graph, Radius};
use crate::rng;
use crate::sir::{SirError, Stamp, Trajectory, TreeRun};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid parameters: lambda={lambda}, mu={mu}, tau={tau}")]
    InvalidParams { lambda: f64, mu: f64, tau: f64 },
    #[error("lambda = 0: the conditional mean is undefined")]
    Degenerate,
    #[error("(lambda + mu)·tau = {0} is below 2")]
    OutsideHypothesis(f64),
    #[error("fraction {0} is not a probability")]
    InvalidProbability(f64),
    #[error("no sample fell inside the window")]
    NoHits,
    #[error("no samples")]
    EmptySample,
    #[error("sample {0} is outside (0, tau]")]
    SampleOutOfRange(f64),
    #[error("need 0 <= t0 < t1, got t0={t0}, t1={t1}")]
    InvalidWindow { t0: f64, t1: f64 },
    #[error("trajectory covers {trajectory} vertices but the graph has {graph}")]
    SizeMismatch { graph: usize, trajectory: usize },
    #[error(transparent)]
    Sir(#[from] SirError),
}

/// Parameters of the truncated cross-infection law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiParams {
    lambda: f64,
    mu: f64,
    tau: f64,
}

impl CiParams {
    pub fn new(lambda: f64, mu: f64, tau: f64) -> Result<Self, EstimatorError> {
        let finite = lambda.is_finite() && mu.is_finite() && tau.is_finite();
        if !finite || lambda < 0.0 || mu < 0.0 || lambda + mu <= 0.0 || tau <= 0.0 {
            return Err(EstimatorError::InvalidParams { lambda, mu, tau });
        }
        Ok(Self { lambda, mu, tau })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `m = (λ + μ)τ`.
    pub fn m(&self) -> f64 {
        (self.lambda + self.mu) * self.tau
    }
}

/// One draw of `CI(λ, μ, τ)`: the race between an infection clock and a
/// recovery clock, truncated at `τ`.
pub fn sample_ci<R: Rng + ?Sized>(params: CiParams, rng: &mut R) -> f64 {
    let infection = rng::exp(rng, params.lambda);
    let recovery = rng::exp(rng, params.mu);
    if infection < recovery && infection < params.tau {
        infection
    } else {
        params.tau
    }
}

/// `p = P{Z < τ} = λ/(λ+μ) · (1 - e^{-m})`.
pub fn ci_p(params: CiParams) -> f64 {
    let rate = params.lambda + params.mu;
    params.lambda / rate * -libm::expm1(-params.m())
}

/// `q = E[Z | Z < τ] = (1/(λ+μ)) · (1 - (m+1)e^{-m}) / (1 - e^{-m})`.
pub fn ci_q(params: CiParams) -> Result<f64, EstimatorError> {
    if params.lambda == 0.0 {
        return Err(EstimatorError::Degenerate);
    }
    let m = params.m();
    let tail = -libm::expm1(-m);
    let numerator = tail - m * libm::exp(-m);
    Ok(numerator / tail / (params.lambda + params.mu))
}

/// `(λ̂, μ̂) = (P/Q, (1-P)/Q)`.
pub fn recover_params(p: f64, q: f64) -> Result<(f64, f64), EstimatorError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EstimatorError::InvalidProbability(p));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(EstimatorError::NoHits);
    }
    Ok((p / q, (1.0 - p) / q))
}

/// Guaranteed ranges for `P/Q` and `(1-P)/Q` when `P`, `1-P` and `Q` are each
/// within a factor `e^{±ε}` of `p`, `1-p` and `q`, valid for `m ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryBounds {
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub mu_lower: f64,
    pub mu_upper: f64,
}

impl RecoveryBounds {
    pub fn new(params: CiParams, epsilon: f64) -> Result<Self, EstimatorError> {
        let m = params.m();
        if m < 2.0 {
            return Err(EstimatorError::OutsideHypothesis(m));
        }
        let (lambda, mu) = (params.lambda, params.mu);
        let spread = libm::exp(2.0 * epsilon);
        let tail = libm::exp(-m);
        // (1 + 2(λ/μ + m + 1)e^{-m})·μ, multiplied through so that μ = 0 is fine.
        let mu_upper = mu + 2.0 * (lambda + (m + 1.0) * mu) * tail;
        Ok(Self {
            lambda_lower: lambda / spread,
            lambda_upper: spread * (1.0 + 2.0 * (m + 1.0) * tail) * lambda,
            mu_lower: mu / spread,
            mu_upper: spread * mu_upper,
        })
    }

    pub fn contains(&self, lambda_hat: f64, mu_hat: f64) -> bool {
        (self.lambda_lower..=self.lambda_upper).contains(&lambda_hat)
            && (self.mu_lower..=self.mu_upper).contains(&mu_hat)
    }
}

/// Whether `(P/Q, (1-P)/Q)` lies in the guaranteed ranges.
pub fn recovery_bounds_hold(params: CiParams, epsilon: f64, p: f64, q: f64) -> Result<bool, EstimatorError> {
    let bounds = RecoveryBounds::new(params, epsilon)?;
    let (lambda_hat, mu_hat) = recover_params(p, q)?;
    Ok(bounds.contains(lambda_hat, mu_hat))
}

/// Whether `P`, `1-P` and `Q` are within `e^{±ε}` of `p`, `1-p` and `q`.
pub fn within_bands(p: f64, q: f64, p_hat: f64, q_hat: f64, epsilon: f64) -> bool {
    let band = |estimate: f64, truth: f64| {
        let ratio = estimate / truth;
        ratio >= libm::exp(-epsilon) && ratio <= libm::exp(epsilon)
    };
    band(p_hat, p) && band(1.0 - p_hat, 1.0 - p) && band(q_hat, q)
}

/// Empirical `(P, Q)` from truncated samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PqAggregate {
    pub p: f64,
    pub q: f64,
    pub num_samples: usize,
    pub num_hits: usize,
}

/// `P` is the fraction of samples below `τ` and `Q` their mean.
pub fn aggregate_pq(samples: &[f64], tau: f64) -> Result<PqAggregate, EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for &z in samples {
        if !(z > 0.0 && z <= tau) {
            return Err(EstimatorError::SampleOutOfRange(z));
        }
        if z < tau {
            hits += 1;
            total += z;
        }
    }
    if hits == 0 {
        return Err(EstimatorError::NoHits);
    }
    Ok(PqAggregate {
        p: hits as f64 / samples.len() as f64,
        q: total / hits as f64,
        num_samples: samples.len(),
        num_hits: hits,
    })
}

/// Why an estimate produced no rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakReason {
    /// No bridge leaves the unsusceptible set.
    NoBridgeSources,
    /// Every drawn target stayed uninfected through the window (`Q` undefined).
    NoHits,
    /// The size threshold defining `t0` was never reached.
    T0Infinite,
    /// The path is not resolved far enough to evaluate the window.
    Unresolved,
}

impl BreakReason {
    pub fn as_str(self) -> &'static str {
        match self {
            BreakReason::NoBridgeSources => "no_bridge_sources",
            BreakReason::NoHits => "no_hits",
            BreakReason::T0Infinite => "t0_infinite",
            BreakReason::Unresolved => "unresolved",
        }
    }
}

/// One harvested sample: a bridge source, its drawn target, and `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub source: usize,
    pub target: usize,
    pub z: f64,
}

/// Result of one run of the estimator, including its intermediate counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOutcome {
    /// `|A|`
    pub num_bridge_sources: usize,
    /// `|A'|`
    pub num_hits: usize,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub mu_hat: Option<f64>,
    pub broke: Option<BreakReason>,
    pub draws: Vec<Draw>,
}

impl EstimateOutcome {
    pub fn broken(reason: BreakReason) -> Self {
        Self {
            num_bridge_sources: 0,
            num_hits: 0,
            p: None,
            q: None,
            lambda_hat: None,
            mu_hat: None,
            broke: Some(reason),
            draws: Vec::new(),
        }
    }

    /// `max(|λ̂-λ|/λ, |μ̂-μ|/μ)` when the estimate succeeded.
    pub fn max_relative_error(&self, lambda: f64, mu: f64) -> Option<f64> {
        let (l, m) = (self.lambda_hat?, self.mu_hat?);
        Some(f64::max((l - lambda).abs() / lambda, (m - mu).abs() / mu))
    }
}

fn check_window(t0: f64, t1: f64) -> Result<(), EstimatorError> {
    if !(t0 >= 0.0 && t0 < t1) || t1.is_nan() {
        return Err(EstimatorError::InvalidWindow { t0, t1 });
    }
    Ok(())
}

/// Draws one target per source and aggregates. `groups` yields each source
/// with its sorted candidate targets, in ascending source order.
fn harvest<'a, R, I>(traj: &Trajectory, groups: I, t0: f64, t1: f64, rng: &mut R) -> EstimateOutcome
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = (usize, &'a [usize])>,
{
    let tau = t1 - t0;
    let mut draws = Vec::new();
    for (source, candidates) in groups {
        let target = candidates[rng::index(rng, candidates.len())];
        let z = match traj.infection_time(target) {
            Stamp::At(t) => f64::min(t - t0, tau),
            Stamp::Never => tau,
            Stamp::Unresolved if traj.horizon() >= t1 => tau,
            Stamp::Unresolved => return EstimateOutcome::broken(BreakReason::Unresolved),
        };
        draws.push(Draw { source, target, z });
    }

    let mut outcome = EstimateOutcome::broken(BreakReason::NoBridgeSources);
    outcome.num_bridge_sources = draws.len();
    if draws.is_empty() {
        return outcome;
    }
    let hits: Vec<f64> = draws.iter().map(|d| d.z).filter(|&z| z < tau).collect();
    outcome.num_hits = hits.len();
    outcome.p = Some(hits.len() as f64 / draws.len() as f64);
    outcome.draws = draws;
    if hits.is_empty() {
        outcome.broke = Some(BreakReason::NoHits);
        return outcome;
    }
    let q = hits.iter().sum::<f64>() / hits.len() as f64;
    let p = outcome.p.expect("set above");
    let (lambda_hat, mu_hat) = recover_params(p, q).expect("p in [0, 1] and q > 0");
    outcome.q = Some(q);
    outcome.lambda_hat = Some(lambda_hat);
    outcome.mu_hat = Some(mu_hat);
    outcome.broke = None;
    outcome
}

/// Bridge-based estimate of `(λ, μ)` from the infection times in `traj`.
///
/// `B(r)` is the ball of radius `radius` around the earliest infected vertex
/// and `U = {u ∈ B(r) : T(u) ≤ t0}`. Each bridge of `B(r)` with exactly one
/// endpoint `a` in `U` makes its other endpoint a candidate for `a`; one
/// candidate `b(a)` is drawn uniformly per `a`, and
/// `Z_a = min(T(b(a)) - t0, t1 - t0)`. Recovery times are not used.
pub fn estimate<R: Rng + ?Sized>(
    g: &Graph,
    traj: &Trajectory,
    radius: Radius,
    t0: f64,
    t1: f64,
    rng: &mut R,
) -> Result<EstimateOutcome, EstimatorError> {
    check_window(t0, t1)?;
    if traj.num_vertices() != g.num_vertices() {
        return Err(EstimatorError::SizeMismatch {
            graph: g.num_vertices(),
            trajectory: traj.num_vertices(),
        });
    }
    if t0 > traj.horizon() {
        return Ok(EstimateOutcome::broken(BreakReason::Unresolved));
    }
    let view = ball(g, &[traj.patient_zero()], radius);
    let in_u = |v: usize| traj.infection_time(v).is_at_most(t0);

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (x, y) in bridges(&view) {
        match (in_u(x), in_u(y)) {
            (true, false) => groups.entry(x).or_default().push(y),
            (false, true) => groups.entry(y).or_default().push(x),
            _ => {}
        }
    }
    for targets in groups.values_mut() {
        targets.sort_unstable();
    }
    let outcome = harvest(traj, groups.iter().map(|(&a, b)| (a, b.as_slice())), t0, t1, rng);
    debug_assert!(!view.is_tree() || targets_distinct(&outcome));
    Ok(outcome)
}

/// [`estimate`] with `r = ∞` on a tree run, without computing bridges.
///
/// Every tree edge is a bridge, so the candidates of `a ∈ U` are its
/// materialized children not yet infected at `t0`. Draws consume randomness
/// in the same order as the generic path on `run.arena.to_graph()`, so both
/// give identical outcomes for the same stream.
pub fn estimate_tree<R: Rng + ?Sized>(
    run: &TreeRun,
    t0: f64,
    t1: f64,
    rng: &mut R,
) -> Result<EstimateOutcome, EstimatorError> {
    check_window(t0, t1)?;
    let traj = &run.trajectory;
    if t0 > traj.horizon() {
        return Ok(EstimateOutcome::broken(BreakReason::Unresolved));
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for a in 0..run.arena.num_vertices() {
        if !traj.infection_time(a).is_at_most(t0) {
            continue;
        }
        let children = run
            .arena
            .children(a)
            .expect("vertices infected by the horizon have materialized children");
        let candidates: Vec<usize> = children
            .filter(|&c| !traj.infection_time(c).is_at_most(t0))
            .collect();
        if !candidates.is_empty() {
            groups.push((a, candidates));
        }
    }
    let outcome = harvest(traj, groups.iter().map(|(a, b)| (*a, b.as_slice())), t0, t1, rng);
    debug_assert!(targets_distinct(&outcome));
    Ok(outcome)
}

fn targets_distinct(outcome: &EstimateOutcome) -> bool {
    let mut targets: Vec<usize> = outcome.draws.iter().map(|d| d.target).collect();
    targets.sort_unstable();
    targets.windows(2).all(|w| w[0] != w[1])
}
