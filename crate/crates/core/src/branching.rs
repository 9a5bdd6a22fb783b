//! Galton–Watson analytics for SIR on trees.
//!
//! An infected vertex with `κ` susceptible children infects each of them
//! before its own recovery independently given the recovery time `R`, so the
//! number of children it infects is `X | R ~ Binomial(κ, 1 - e^{-λR})` with
//! `R ~ Exp(μ)`. Generations of the epidemic on a tree form a Galton–Watson
//! process with offspring law `X`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::rng;

/// Iteration cap for the extinction fixed point.
pub const MAX_FIXED_POINT_ITERATIONS: usize = 1_000_000;
/// Convergence tolerance for the extinction fixed point.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
/// Default total-progeny cap for Monte-Carlo extinction; reaching it counts as survival.
pub const DEFAULT_PROGENY_CAP: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BranchingError {
    #[error("invalid rates: lambda={lambda}, mu={mu}")]
    InvalidRates { lambda: f64, mu: f64 },
    #[error("kappa must be at least 1")]
    InvalidKappa,
    #[error("degree {0} is below 3")]
    InvalidDegree(usize),
    #[error("(d-2)·lambda <= mu for d={d}, lambda={lambda}, mu={mu}: the bound is vacuous")]
    Subcritical { d: usize, lambda: f64, mu: f64 },
}

fn check_rates(lambda: f64, mu: f64) -> Result<(), BranchingError> {
    if !(lambda.is_finite() && mu.is_finite() && lambda >= 0.0 && mu >= 0.0 && lambda + mu > 0.0) {
        return Err(BranchingError::InvalidRates { lambda, mu });
    }
    Ok(())
}

/// Offspring law of a vertex with `kappa` children.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDist {
    kappa: usize,
    lambda: f64,
    mu: f64,
    pmf: Vec<f64>,
}

impl OffspringDist {
    pub fn new(kappa: usize, lambda: f64, mu: f64) -> Result<Self, BranchingError> {
        if kappa == 0 {
            return Err(BranchingError::InvalidKappa);
        }
        check_rates(lambda, mu)?;
        Ok(Self {
            kappa,
            lambda,
            mu,
            pmf: pmf_table(kappa, lambda, mu),
        })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `E X = κλ/(λ+μ)`.
    pub fn mean(&self) -> f64 {
        self.kappa as f64 * self.lambda / (self.lambda + self.mu)
    }

    /// `P{X = k}`; zero outside `0..=κ`.
    pub fn pmf(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    /// `P{X = k}` for `k = 0..=κ`.
    pub fn pmf_table(&self) -> &[f64] {
        &self.pmf
    }

    /// Generating function `f(s) = Σ_k P{X = k} s^k`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.pmf.iter().rev().fold(0.0, |acc, &p| acc * s + p)
    }

    /// One draw from the two-clock race: the parent's recovery clock against
    /// one infection clock per child.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let recovery = rng::exp(rng, self.mu);
        (0..self.kappa)
            .filter(|_| rng::exp(rng, self.lambda) < recovery)
            .count()
    }
}

/// Integrating the binomial over `R` gives a Beta function:
/// `P{X = k} = a/(κ-k+a) · Π_{i=κ-k+1}^{κ} i/(i+a)` with `a = μ/λ`.
/// All factors lie in `[0, 1]`, so this is stable for any `κ`.
fn pmf_table(kappa: usize, lambda: f64, mu: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; kappa + 1];
    if lambda == 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if mu == 0.0 {
        pmf[kappa] = 1.0;
        return pmf;
    }
    let a = mu / lambda;
    let mut product = 1.0;
    for (k, slot) in pmf.iter_mut().enumerate() {
        if k > 0 {
            let i = (kappa - k + 1) as f64;
            product *= i / (i + a);
        }
        *slot = a / ((kappa - k) as f64 + a) * product;
    }
    pmf
}

/// Smallest fixed point of the offspring generating function in `[0, 1]`.
///
/// Returns exactly 1 when `E X ≤ 1` and `P{X = 1} < 1`. Otherwise iterates
/// `s ← f(s)` from `s = 0`, which increases monotonically to the smallest
/// fixed point; stops once a step is below [`FIXED_POINT_TOLERANCE`] or after
/// [`MAX_FIXED_POINT_ITERATIONS`] steps. Near criticality convergence is slow
/// and the result can fall short of the fixed point by more than the
/// tolerance.
pub fn extinction_probability(dist: &OffspringDist) -> f64 {
    if dist.mean() <= 1.0 && dist.pmf(1) < 1.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for _ in 0..MAX_FIXED_POINT_ITERATIONS {
        let next = dist.pgf(s);
        if (next - s).abs() < FIXED_POINT_TOLERANCE {
            return next;
        }
        s = next;
    }
    s
}

/// `P{T < n}` for the total progeny `T` (root included), from
/// `P{T = j} = P{S_j = j - 1}/j` where `S_j` sums `j` independent offspring.
pub fn total_progeny_below(dist: &OffspringDist, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    // power[i] = P{S_j = i} for i < n, updated in place from j to j+1.
    let pmf = dist.pmf_table();
    let mut power = vec![0.0; n];
    power[0] = 1.0;
    let mut total = 0.0;
    for j in 1..n {
        let mut next = vec![0.0; n];
        for (i, &mass) in power.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (k, &p) in pmf.iter().enumerate().take(n - i) {
                next[i + k] += mass * p;
            }
        }
        power = next;
        total += power[j - 1] / j as f64;
    }
    total.min(1.0)
}

/// Outcome of a Monte-Carlo extinction experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtinctionTally {
    pub trials: u64,
    pub extinct: u64,
}

impl ExtinctionTally {
    pub fn frequency(&self) -> f64 {
        self.extinct as f64 / self.trials as f64
    }
}

/// Whether one Galton–Watson tree dies out before its total progeny reaches
/// `progeny_cap`. Whole generations are drawn at once as multinomial counts
/// over the offspring values.
pub fn gw_dies_out<R: Rng + ?Sized>(dist: &OffspringDist, progeny_cap: u64, rng: &mut R) -> bool {
    let pmf = dist.pmf_table();
    let mut generation: u64 = 1;
    let mut total: u64 = 1;
    while generation > 0 {
        if total >= progeny_cap {
            return false;
        }
        let mut remaining = generation;
        let mut mass = 1.0;
        let mut next = 0u64;
        for (k, &p) in pmf.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let count = if k == dist.kappa() || p >= mass {
                remaining
            } else {
                let share = (p / mass).clamp(0.0, 1.0);
                Binomial::new(remaining, share)
                    .expect("share is a probability")
                    .sample(rng)
            };
            next += k as u64 * count;
            remaining -= count;
            mass -= p;
        }
        generation = next;
        total = total.saturating_add(next);
    }
    true
}

/// Monte-Carlo extinction frequency over `trials` independent trees.
pub fn mc_extinction(dist: &OffspringDist, trials: u64, progeny_cap: u64, seed: u64) -> ExtinctionTally {
    let extinct = (0..trials)
        .filter(|&t| gw_dies_out(dist, progeny_cap, &mut rng::stream(seed, t)))
        .count() as u64;
    ExtinctionTally { trials, extinct }
}

fn check_degree(d: usize) -> Result<(), BranchingError> {
    if d < 3 {
        return Err(BranchingError::InvalidDegree(d));
    }
    Ok(())
}

/// `p₀ = μ/(μ + (d-1)λ)`: no child of a vertex with `d-1` children is infected.
pub fn p0_closed(d: usize, lambda: f64, mu: f64) -> Result<f64, BranchingError> {
    check_degree(d)?;
    check_rates(lambda, mu)?;
    Ok(mu / (mu + (d - 1) as f64 * lambda))
}

/// `p₀ + p₁ = (d-1)μ/(μ + (d-2)λ) - (d-2)μ/(μ + (d-1)λ)`, from the second
/// order statistic of the children's infection clocks.
pub fn p0_plus_p1_closed(d: usize, lambda: f64, mu: f64) -> Result<f64, BranchingError> {
    check_degree(d)?;
    check_rates(lambda, mu)?;
    let k = (d - 1) as f64;
    Ok(k * mu / (mu + (k - 1.0) * lambda) - (k - 1.0) * mu / (mu + k * lambda))
}

/// Upper bounds on the extinction probability with `κ = d - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtinctionBounds {
    /// `p₀/(1 - p₀ - p₁)`
    pub intermediate: f64,
    /// `μ/((d-2)λ - μ)`
    pub simple: f64,
}

pub fn extinction_upper_bound(d: usize, lambda: f64, mu: f64) -> Result<ExtinctionBounds, BranchingError> {
    check_degree(d)?;
    check_rates(lambda, mu)?;
    let gap = (d - 2) as f64 * lambda - mu;
    if gap <= 0.0 {
        return Err(BranchingError::Subcritical { d, lambda, mu });
    }
    let p0 = p0_closed(d, lambda, mu)?;
    let p01 = p0_plus_p1_closed(d, lambda, mu)?;
    let bounds = ExtinctionBounds {
        intermediate: p0 / (1.0 - p01),
        simple: mu / gap,
    };
    debug_assert!({
        let q = extinction_probability(&OffspringDist::new(d - 1, lambda, mu)?);
        q <= bounds.intermediate + 1e-9 && bounds.intermediate <= bounds.simple + 1e-12
    });
    Ok(bounds)
}

/// `1 - μ/((d-2)λ - μ)`, the asymptotic lower bound on runs from a tree-like
/// root that neither stall nor die out.
pub fn survival_lower_bound_theorem(d: usize, lambda: f64, mu: f64) -> Result<f64, BranchingError> {
    Ok(1.0 - extinction_upper_bound(d, lambda, mu)?.simple)
}

/// `m/(2ed)`, the first-passage threshold at depth `m`.
pub fn first_passage_threshold(d: usize, m: usize) -> f64 {
    m as f64 / (2.0 * core::f64::consts::E * d as f64)
}

/// Whether pure growth with unit-rate edges on the infinite `d`-ary tree
/// reaches depth `m` strictly before `threshold`. Only vertices reached
/// before the threshold are explored.
pub fn first_passage_below<R: Rng + ?Sized>(d: usize, m: usize, threshold: f64, rng: &mut R) -> bool {
    if threshold <= 0.0 {
        return false;
    }
    let mut stack = vec![(0usize, 0.0f64)];
    while let Some((depth, time)) = stack.pop() {
        if depth == m {
            return true;
        }
        for _ in 0..d {
            let child = time + rng::exp(rng, 1.0);
            if child < threshold {
                stack.push((depth + 1, child));
            }
        }
    }
    false
}

/// Frequency of `{B_m < m/(2ed)}` over `trials` runs, where `B_m` is the
/// first time a depth-`m` vertex is reached.
pub fn first_passage_experiment(d: usize, m: usize, trials: u64, seed: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let threshold = first_passage_threshold(d, m);
    let hits = (0..trials)
        .filter(|&t| first_passage_below(d, m, threshold, &mut rng::stream(seed, t)))
        .count();
    hits as f64 / trials as f64
}
