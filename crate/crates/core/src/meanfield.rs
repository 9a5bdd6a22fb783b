//! Mean-field SIR on the complete graph and why `(β, μ)` cannot be read off
//! its early growth.
//!
//! With `β = λn` the fractions of susceptible, infected and recovered vertices
//! follow `σ' = -βισ`, `ι' = βισ - μι`, `ρ' = μι`. While `σ ≈ 1` the
//! unsusceptible fraction `ι + ρ` grows like `a + be^{ct}` with `c = β - μ`,
//! and any `β' > c` paired with a matching `(μ', δ', γ')` produces the same
//! three numbers.

use alloc::vec::Vec;

use thiserror::Error;

/// Default RK4 step.
pub const DEFAULT_DT: f64 = 1e-4;
/// Search range for the growth rate in [`fit_exponential`].
pub const FIT_C_RANGE: (f64, f64) = (1e-3, 20.0);
const FIT_GRID_POINTS: usize = 400;
const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanFieldError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("need t_end > 0 and dt > 0, got t_end={t_end}, dt={dt}")]
    InvalidGrid { t_end: f64, dt: f64 },
    #[error("need at least {MIN_FIT_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples show no growth")]
    NoGrowth,
    #[error("confounding needs b > 0 and beta >= c > 0")]
    InvalidConfound,
}

/// Rates and initial fractions `(σ₀, ι₀, ρ₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldParams {
    beta: f64,
    mu: f64,
    init: (f64, f64, f64),
}

impl MeanFieldParams {
    pub fn new(beta: f64, mu: f64, init: (f64, f64, f64)) -> Result<Self, MeanFieldError> {
        if !(beta.is_finite() && mu.is_finite() && beta >= 0.0 && mu >= 0.0) {
            return Err(MeanFieldError::InvalidParams("rates must be finite and nonnegative"));
        }
        let (s, i, r) = init;
        if !(s >= 0.0 && i >= 0.0 && r >= 0.0) {
            return Err(MeanFieldError::InvalidParams("fractions must be nonnegative"));
        }
        if (s + i + r - 1.0).abs() > 1e-12 {
            return Err(MeanFieldError::InvalidParams("fractions must sum to 1"));
        }
        Ok(Self { beta, mu, init })
    }

    /// Starts from `ι(0) = δ`, `ρ(0) = γ`.
    pub fn with_delta_gamma(beta: f64, mu: f64, delta: f64, gamma: f64) -> Result<Self, MeanFieldError> {
        Self::new(beta, mu, (1.0 - delta - gamma, delta, gamma))
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn init(&self) -> (f64, f64, f64) {
        self.init
    }

    /// `R₀ = β/μ`.
    pub fn r0(&self) -> f64 {
        self.beta / self.mu
    }
}

/// Solution values on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldCurve {
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    pub iota: Vec<f64>,
    pub rho: Vec<f64>,
}

impl MeanFieldCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `ι + ρ` at each grid point.
    pub fn unsusceptible(&self) -> Vec<f64> {
        self.iota.iter().zip(&self.rho).map(|(i, r)| i + r).collect()
    }
}

fn derivative(beta: f64, mu: f64, (s, i, _): (f64, f64, f64)) -> (f64, f64, f64) {
    let infect = beta * i * s;
    let recover = mu * i;
    (-infect, infect - recover, recover)
}

/// RK4 on `[0, t_end]` with `⌈t_end/dt⌉` equal steps, so the grid ends at `t_end`.
pub fn integrate(params: MeanFieldParams, t_end: f64, dt: f64) -> Result<MeanFieldCurve, MeanFieldError> {
    if !(t_end > 0.0 && dt > 0.0 && t_end.is_finite()) {
        return Err(MeanFieldError::InvalidGrid { t_end, dt });
    }
    let steps = libm::ceil(t_end / dt - 1e-9).max(1.0) as usize;
    let h = t_end / steps as f64;
    let (beta, mu) = (params.beta, params.mu);
    let f = |y| derivative(beta, mu, y);
    let axpy = |y: (f64, f64, f64), k: (f64, f64, f64), w: f64| (y.0 + w * k.0, y.1 + w * k.1, y.2 + w * k.2);

    let mut curve = MeanFieldCurve {
        times: Vec::with_capacity(steps + 1),
        sigma: Vec::with_capacity(steps + 1),
        iota: Vec::with_capacity(steps + 1),
        rho: Vec::with_capacity(steps + 1),
    };
    let mut y = params.init;
    for n in 0..=steps {
        curve.times.push(n as f64 * h);
        curve.sigma.push(y.0);
        curve.iota.push(y.1);
        curve.rho.push(y.2);
        if n == steps {
            break;
        }
        let k1 = f(y);
        let k2 = f(axpy(y, k1, h / 2.0));
        let k3 = f(axpy(y, k2, h / 2.0));
        let k4 = f(axpy(y, k3, h));
        y = (
            y.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            y.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            y.2 + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
        );
    }
    Ok(curve)
}

/// Least-squares fit of `a + be^{ct}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Residual sum of squares.
    pub rss: f64,
}

/// Best `(a, b)` for a fixed `c`. The basis is `e^{c(t - t_max)}` so the
/// normal equations stay well scaled.
fn fit_linear(samples: &[(f64, f64)], c: f64, t_max: f64) -> Option<ExpFit> {
    let n = samples.len() as f64;
    let (mut se, mut see, mut sv, mut sev) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in samples {
        let e = libm::exp(c * (t - t_max));
        se += e;
        see += e * e;
        sv += v;
        sev += e * v;
    }
    let det = n * see - se * se;
    if !(det > 1e-300 * n * see) {
        return None;
    }
    let a = (see * sv - se * sev) / det;
    let b_scaled = (n * sev - se * sv) / det;
    let rss = samples
        .iter()
        .map(|&(t, v)| {
            let r = v - a - b_scaled * libm::exp(c * (t - t_max));
            r * r
        })
        .sum();
    Some(ExpFit {
        a,
        b: b_scaled * libm::exp(-c * t_max),
        c,
        rss,
    })
}

/// Fits `v(t) ≈ a + be^{ct}` with `c` in [`FIT_C_RANGE`]: a log-spaced grid
/// over `c`, golden-section refinement around the best grid point, and
/// linear least squares for `(a, b)` at each `c`.
pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<ExpFit, MeanFieldError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(MeanFieldError::TooFewSamples(samples.len()));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    if !(hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE)) {
        return Err(MeanFieldError::NoGrowth);
    }
    let t_max = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let rss = |c: f64| fit_linear(samples, c, t_max).map_or(f64::INFINITY, |f| f.rss);

    let (c_lo, c_hi) = FIT_C_RANGE;
    let ratio = libm::log(c_hi / c_lo);
    let grid: Vec<f64> = (0..FIT_GRID_POINTS)
        .map(|i| c_lo * libm::exp(ratio * i as f64 / (FIT_GRID_POINTS - 1) as f64))
        .collect();
    let best = (0..grid.len())
        .min_by(|&i, &j| rss(grid[i]).total_cmp(&rss(grid[j])))
        .expect("nonempty grid");

    let mut left = grid[best.saturating_sub(1)];
    let mut right = grid[(best + 1).min(grid.len() - 1)];
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = right - inv_phi * (right - left);
    let mut x2 = left + inv_phi * (right - left);
    let (mut f1, mut f2) = (rss(x1), rss(x2));
    while right - left > 1e-13 * right {
        if f1 <= f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - inv_phi * (right - left);
            f1 = rss(x1);
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + inv_phi * (right - left);
            f2 = rss(x2);
        }
    }
    let c = if rss(grid[best]) < f1.min(f2) {
        grid[best]
    } else if f1 <= f2 {
        x1
    } else {
        x2
    };
    let fit = fit_linear(samples, c, t_max).ok_or(MeanFieldError::NoGrowth)?;
    if !(fit.b > 0.0) {
        return Err(MeanFieldError::NoGrowth);
    }
    Ok(fit)
}

/// The alternative parameters consistent with a fitted `(a, b, c)` once `β`
/// is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confounded {
    pub mu: f64,
    pub delta: f64,
    pub gamma: f64,
}

/// `μ = β - c`, `δ = (c/β)b`, `γ = a + (μ/β)b`.
pub fn confound(a: f64, b: f64, c: f64, beta: f64) -> Result<Confounded, MeanFieldError> {
    if !(b > 0.0 && c > 0.0 && beta >= c && beta.is_finite()) {
        return Err(MeanFieldError::InvalidConfound);
    }
    let mu = beta - c;
    Ok(Confounded {
        mu,
        delta: c / beta * b,
        gamma: a + mu / beta * b,
    })
}

/// `sup_t |(ι₁ + ρ₁)(t) - (ι₂ + ρ₂)(t)|` over the RK4 grid on `[0, t_end]`.
pub fn indistinguishability_gap(
    first: MeanFieldParams,
    second: MeanFieldParams,
    t_end: f64,
    dt: f64,
) -> Result<f64, MeanFieldError> {
    let one = integrate(first, t_end, dt)?;
    let two = integrate(second, t_end, dt)?;
    Ok(one
        .unsusceptible()
        .iter()
        .zip(two.unsusceptible())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Max deviation between `ι(t)` and the solution of the dilated system
/// `σ' = -R₀ισ`, `ι' = R₀ισ - ι`, `ρ' = ι` at `s = μt`.
pub fn time_dilation_check(params: MeanFieldParams, t_end: f64, dt: f64) -> Result<f64, MeanFieldError> {
    if !(params.mu > 0.0) {
        return Err(MeanFieldError::InvalidParams("dilation needs mu > 0"));
    }
    let dilated = MeanFieldParams::new(params.r0(), 1.0, params.init)?;
    let original = integrate(params, t_end, dt)?;
    let rescaled = integrate(dilated, params.mu * t_end, params.mu * dt)?;
    Ok(max_gap(&original.iota, &rescaled.iota))
}

/// Max deviation between `ι₁(t)` and `ι₂(μ₁t/μ₂)` for two parameter sets with
/// equal `R₀` and initial fractions.
pub fn dilation_pair_gap(
    first: MeanFieldParams,
    second: MeanFieldParams,
    t_end: f64,
    dt: f64,
) -> Result<f64, MeanFieldError> {
    if !(first.mu > 0.0 && second.mu > 0.0) {
        return Err(MeanFieldError::InvalidParams("dilation needs mu > 0"));
    }
    let scale = first.mu / second.mu;
    let one = integrate(first, t_end, dt)?;
    let two = integrate(second, scale * t_end, scale * dt)?;
    Ok(max_gap(&one.iota, &two.iota))
}

fn max_gap(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mf(beta: f64, mu: f64, init: (f64, f64, f64)) -> MeanFieldParams {
        MeanFieldParams::new(beta, mu, init).unwrap()
    }

    fn check_curve(curve: &MeanFieldCurve) {
        for n in 0..curve.len() {
            assert!((curve.sigma[n] + curve.iota[n] + curve.rho[n] - 1.0).abs() <= 1e-10);
            if n > 0 {
                assert!(curve.sigma[n] <= curve.sigma[n - 1]);
                assert!(curve.rho[n] >= curve.rho[n - 1]);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MeanFieldParams::new(1.0, 1.0, (0.5, 0.5, 0.1)).is_err());
        assert!(MeanFieldParams::new(-1.0, 1.0, (1.0, 0.0, 0.0)).is_err());
        assert!(integrate(mf(1.0, 1.0, (0.9, 0.1, 0.0)), 0.0, 0.1).is_err());
    }

    #[test]
    fn no_infection_is_pure_decay() {
        let curve = integrate(mf(0.0, 0.7, (0.5, 0.3, 0.2)), 3.0, 1e-3).unwrap();
        check_curve(&curve);
        for n in 0..curve.len() {
            let iota = 0.3 * libm::exp(-0.7 * curve.times[n]);
            assert!((curve.iota[n] - iota).abs() < 1e-8);
            assert!((curve.rho[n] - (0.5 - iota)).abs() < 1e-8);
            assert_eq!(curve.sigma[n], 0.5);
        }
        assert_eq!(*curve.times.last().unwrap(), 3.0);
    }

    #[test]
    fn no_recovery_is_logistic() {
        let curve = integrate(mf(2.0, 0.0, (0.99, 0.01, 0.0)), 4.0, 1e-3).unwrap();
        check_curve(&curve);
        for n in 0..curve.len() {
            assert!((curve.sigma[n] + curve.iota[n] - 1.0).abs() < 1e-12);
            let e = libm::exp(2.0 * curve.times[n]);
            let logistic = 0.01 * e / (0.99 + 0.01 * e);
            assert!((curve.iota[n] - logistic).abs() < 1e-10);
        }
    }

    #[test]
    fn early_growth_matches_exponential_approximation() {
        let curve = integrate(mf(2.0, 1.0, (0.98, 0.01, 0.01)), 0.5, DEFAULT_DT).unwrap();
        for (t, v) in curve.times.iter().zip(curve.unsusceptible()) {
            assert!((v - 0.02 * libm::exp(*t)).abs() <= 5e-3);
        }
    }

    #[test]
    fn fit_examples() {
        let samples: Vec<(f64, f64)> = (0..40).map(|i| {
            let t = i as f64 * 0.0125;
            (t, 0.02 * libm::exp(t))
        }).collect();
        let fit = fit_exponential(&samples).unwrap();
        assert!(fit.a.abs() < 1e-6 && (fit.b - 0.02).abs() < 1e-6 && (fit.c - 1.0).abs() < 1e-6, "{fit:?}");

        let flat: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.5)).collect();
        assert_eq!(fit_exponential(&flat), Err(MeanFieldError::NoGrowth));
        assert_eq!(fit_exponential(&samples[..5]), Err(MeanFieldError::TooFewSamples(5)));

        // Near σ = 1 the growth rate is β - μ.
        let curve = integrate(mf(2.0, 1.0, (0.9998, 0.0001, 0.0001)), 0.3, DEFAULT_DT).unwrap();
        let samples: Vec<(f64, f64)> = curve.times.iter().copied().zip(curve.unsusceptible()).step_by(100).collect();
        let fit = fit_exponential(&samples).unwrap();
        assert!((fit.c - 1.0).abs() < 0.05, "{fit:?}");

        // From σ₀ = 0.98 the instantaneous rate βσ - μ starts at 0.96 and
        // keeps falling, so the fit lands below it.
        let curve = integrate(mf(2.0, 1.0, (0.98, 0.01, 0.01)), 0.3, DEFAULT_DT).unwrap();
        let samples: Vec<(f64, f64)> = curve.times.iter().copied().zip(curve.unsusceptible()).step_by(100).collect();
        let fit = fit_exponential(&samples).unwrap();
        assert!(fit.c > 0.9 && fit.c < 0.96, "{fit:?}");
    }

    #[test]
    fn fit_handles_offsets_and_fast_growth() {
        let samples: Vec<(f64, f64)> = (0..30).map(|i| {
            let t = i as f64 * 0.1;
            (t, -0.3 + 1.5 * libm::exp(4.2 * t))
        }).collect();
        let fit = fit_exponential(&samples).unwrap();
        assert!((fit.a + 0.3).abs() < 1e-6 && (fit.b - 1.5).abs() < 1e-6 && (fit.c - 4.2).abs() < 1e-8);
    }

    #[test]
    fn confound_examples() {
        let c = confound(0.0, 0.02, 1.0, 2.0).unwrap();
        assert_eq!((c.mu, c.delta, c.gamma), (1.0, 0.01, 0.01));
        let c = confound(0.0, 0.02, 1.0, 3.0).unwrap();
        assert_eq!(c.mu, 2.0);
        assert!((c.delta - 0.02 / 3.0).abs() < 1e-17 && (c.gamma - 0.04 / 3.0).abs() < 1e-17);
        let c = confound(0.1, 0.02, 1.5, 1.5).unwrap();
        assert_eq!((c.mu, c.delta, c.gamma), (0.0, 0.02, 0.1));
        assert!(confound(0.0, 0.02, 1.0, 0.5).is_err());
    }

    #[test]
    fn confounded_pair_separates_late() {
        let first = MeanFieldParams::with_delta_gamma(2.0, 1.0, 0.01, 0.01).unwrap();
        let second = MeanFieldParams::with_delta_gamma(3.0, 2.0, 0.02 / 3.0, 0.04 / 3.0).unwrap();
        assert!(indistinguishability_gap(first, second, 0.3, DEFAULT_DT).unwrap() <= 5e-3);
        assert!(indistinguishability_gap(first, second, 5.0, DEFAULT_DT).unwrap() > 5e-2);
        assert_eq!(indistinguishability_gap(first, first, 1.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn dilation_examples() {
        let init = (0.98, 0.01, 0.01);
        assert!(time_dilation_check(mf(2.0, 1.0, init), 5.0, 1e-3).unwrap() <= 1e-8);
        assert!(time_dilation_check(mf(2.0, 0.5, init), 10.0, 1e-3).unwrap() <= 1e-6);
        assert!(dilation_pair_gap(mf(3.0, 2.0, init), mf(1.5, 1.0, init), 5.0, 1e-3).unwrap() <= 1e-6);
        // Different R₀ do not line up.
        assert!(dilation_pair_gap(mf(3.0, 2.0, init), mf(2.0, 1.0, init), 5.0, 1e-3).unwrap() > 1e-2);
    }

    #[test]
    fn fit_then_confound_recovers_generating_parameters() {
        for &(beta, mu, delta, gamma) in &[(2.0, 1.0, 0.001, 0.001), (3.0, 1.0, 0.002, 0.0), (4.0, 2.5, 0.001, 0.002)] {
            let params = MeanFieldParams::with_delta_gamma(beta, mu, delta, gamma).unwrap();
            let curve = integrate(params, 0.3, DEFAULT_DT).unwrap();
            let samples: Vec<(f64, f64)> = curve.times.iter().copied().zip(curve.unsusceptible()).step_by(100).collect();
            let fit = fit_exponential(&samples).unwrap();
            let back = confound(fit.a, fit.b, fit.c, beta).unwrap();
            assert!((back.mu - mu).abs() <= 0.05 * mu, "{back:?}");
            assert!((back.delta - delta).abs() <= 0.05 * delta, "{back:?}");
            assert!((back.gamma - gamma).abs() <= 0.05 * gamma.max(delta), "{back:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn curves_conserve_mass(beta in 0.0f64..8.0, mu in 0.0f64..4.0, i0 in 0.0f64..0.5, r0 in 0.0f64..0.5) {
            let curve = integrate(mf(beta, mu, (1.0 - i0 - r0, i0, r0)), 3.0, 1e-3).unwrap();
            check_curve(&curve);
        }
    }
}
