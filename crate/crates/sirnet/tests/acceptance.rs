//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p sirnet --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use sirnet::experiments::{run_figure1, tree_trial, Figure1Config};
use sirnet_core::branching::{
    extinction_probability, extinction_upper_bound, first_passage_experiment, mc_extinction, total_progeny_below,
    OffspringDist, DEFAULT_PROGENY_CAP,
};
use sirnet_core::estimator::{aggregate_pq, ci_p, ci_q, recover_params, sample_ci, CiParams};
use sirnet_core::graph::{boundary_count, random_regular};
use sirnet_core::meanfield::{
    dilation_pair_gap, indistinguishability_gap, integrate, time_dilation_check, MeanFieldParams, DEFAULT_DT,
};
use sirnet_core::rng::{self, stream, substream};
use sirnet_core::sir::{simulate, simulate_gillespie, PatientZero};
use sirnet_core::{Graph, SirParams, Stamp};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn binomial_sigma(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

fn c1_ci_closed_forms() -> Verdict {
    let params = CiParams::new(2.0, 1.0, 2.0).unwrap();
    // Independent evaluation: p = λ/(λ+μ)·(1 - e^{-m}); q = E[X | X < τ] for
    // X ~ Exp(λ+μ) computed from the truncated-mean integral.
    let m: f64 = 6.0;
    let p_ref = 2.0 / 3.0 * (1.0 - (-m).exp());
    let q_ref = (1.0 / 3.0) * (1.0 - (1.0 + m) * (-m).exp()) / (1.0 - (-m).exp());
    let (p, q) = (ci_p(params), ci_q(params).unwrap());
    // The printed reference 0.328365 is a rounding of 0.3283635; the closed
    // form is checked against the independent value and both prints are shown.
    let closed = (p - p_ref).abs() < 1e-6 && (q - q_ref).abs() < 1e-6 && (p - 0.665014).abs() < 1e-6;

    let n = 1_000_000;
    let mut rng = stream(101, 0);
    let samples: Vec<f64> = (0..n).map(|_| sample_ci(params, &mut rng)).collect();
    let agg = aggregate_pq(&samples, 2.0).unwrap();
    let mc = (agg.p - p).abs() < 0.002 && (agg.q - q).abs() < 0.002;
    verdict(
        closed && mc,
        format!(
            "p={p:.7} q={q:.7} (independent {q_ref:.7}, printed 0.328365 differs by {:.1e}); MC P={:.5} Q={:.5}",
            (q - 0.328365).abs(),
            agg.p,
            agg.q
        ),
    )
}

fn c2_recovery_bounds() -> Verdict {
    let rates = [0.1, 0.5, 1.0, 2.0, 7.0];
    let ms = [2.0, 3.0, 5.0, 10.0];
    let mut points = 0;
    let mut violations = 0;
    for &lambda in &rates {
        for &mu in &rates {
            for &m in &ms {
                let params = CiParams::new(lambda, mu, m / (lambda + mu)).unwrap();
                let (l, u) = recover_params(ci_p(params), ci_q(params).unwrap()).unwrap();
                let tail = (-m).exp();
                let ok_l = lambda <= l && l <= (1.0 + 2.0 * (m + 1.0) * tail) * lambda;
                let ok_u = mu <= u && u <= (1.0 + 2.0 * (lambda / mu + m + 1.0) * tail) * mu;
                points += 1;
                if !(ok_l && ok_u) {
                    violations += 1;
                }
            }
        }
    }
    verdict(violations == 0, format!("{points} grid points, {violations} violations"))
}

fn c3_two_vertex_closed_form() -> Verdict {
    let g = Graph::path(2);
    let params = SirParams::new(3.0, 1.0).unwrap();
    let n = 100_000;
    let mut hits = 0usize;
    let mut total = 0.0;
    for i in 0..n {
        let traj = simulate(&g, params, PatientZero::Vertex(0), f64::INFINITY, &mut stream(103, i)).unwrap();
        if let Stamp::At(t) = traj.infection_time(1) {
            hits += 1;
            total += t;
        }
    }
    let frac = hits as f64 / n as f64;
    let mean = total / hits as f64;
    let sigma_frac = binomial_sigma(0.75, n as f64);
    // Given a hit, the time is Exp(λ+μ) with standard deviation 1/(λ+μ).
    let sigma_mean = 0.25 / (hits as f64).sqrt();
    verdict(
        (frac - 0.75).abs() <= 3.0 * sigma_frac && (mean - 0.25).abs() <= 3.0 * sigma_mean,
        format!("fraction {frac:.5} (3σ={:.5}), mean {mean:.5} (3σ={:.5})", 3.0 * sigma_frac, 3.0 * sigma_mean),
    )
}

fn petersen() -> Graph {
    let mut edges = Vec::new();
    for i in 0..5 {
        edges.push((i, (i + 1) % 5));
        edges.push((i, i + 5));
        edges.push((5 + i, 5 + (i + 2) % 5));
    }
    Graph::from_edges(10, edges).unwrap()
}

fn c4_engine_equivalence() -> Verdict {
    let g = petersen();
    let params = SirParams::new(1.0, 1.0).unwrap();
    let n = 50_000u64;
    let mut next = [0u64; 11];
    let mut gill = [0u64; 11];
    for i in 0..n {
        let a = simulate(&g, params, PatientZero::Vertex(0), f64::INFINITY, &mut substream(104, 0, i)).unwrap();
        let b = simulate_gillespie(&g, params, PatientZero::Vertex(0), f64::INFINITY, &mut substream(104, 1, i))
            .unwrap();
        next[a.final_size()] += 1;
        gill[b.final_size()] += 1;
    }
    let tv: f64 = next
        .iter()
        .zip(&gill)
        .map(|(&x, &y)| (x as f64 - y as f64).abs() / n as f64)
        .sum::<f64>()
        / 2.0;
    verdict(tv <= 0.02, format!("Petersen graph, TV distance {tv:.4}"))
}

fn components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut count = n;
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a] = b;
            count -= 1;
        }
    }
    count
}

fn c5_bridge_oracle() -> Verdict {
    let mut mismatches = 0;
    for i in 0..200u64 {
        let mut rng = stream(105, i);
        let n = 1 + rng::index(&mut rng, 50);
        let density = 0.5 * rng::unit(&mut rng) * 4.0 / n as f64 + 0.02;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng::unit(&mut rng) < density {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::from_edges(n, edges.clone()).unwrap();
        let base = components(n, &edges);
        let mut oracle: Vec<(usize, usize)> = (0..edges.len())
            .filter(|&k| {
                let rest: Vec<_> = edges.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, e)| *e).collect();
                components(n, &rest) > base
            })
            .map(|k| edges[k])
            .collect();
        oracle.sort_unstable();
        if g.bridges() != oracle {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("200 random graphs, {mismatches} mismatches"))
}

fn c6_gw_suite() -> Verdict {
    let dist = OffspringDist::new(2, 1.0, 1.0).unwrap();
    let pmf_ok = dist.pmf_table().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12);

    let dist = OffspringDist::new(2, 1.0, 0.2).unwrap();
    let q = extinction_probability(&dist);
    let trials = 100_000;
    let tally = mc_extinction(&dist, trials, DEFAULT_PROGENY_CAP, 106);
    let sigma = binomial_sigma(q, trials as f64);
    let mc_ok = (tally.frequency() - q).abs() <= 3.0 * sigma;

    let mut points = 0;
    let mut violations = 0;
    for d in [3, 4, 5, 8, 16, 32, 64, 128] {
        for lambda in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
            for mu in [0.1, 0.5, 1.0, 2.0] {
                if (d - 2) as f64 * lambda <= mu {
                    continue;
                }
                points += 1;
                let exact = extinction_probability(&OffspringDist::new(d - 1, lambda, mu).unwrap());
                if exact > mu / ((d - 2) as f64 * lambda - mu) || exact > extinction_upper_bound(d, lambda, mu).unwrap().intermediate + 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    verdict(
        pmf_ok && (q - 0.12).abs() < 1e-9 && mc_ok && violations == 0,
        format!(
            "pmf(1/3 each) {pmf_ok}; q={q:.12}; MC {:.5} (3σ={:.5}); bound grid {points} points, {violations} violations",
            tally.frequency(),
            3.0 * sigma
        ),
    )
}

fn c7_first_passage() -> Verdict {
    let trials = 100_000u64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, m) in [(2usize, 6usize), (4, 10)] {
        let freq = first_passage_experiment(d, m, trials, 107);
        let bound = (-(m as f64) / 2.0).exp();
        let limit = bound + 3.0 * binomial_sigma(bound, trials as f64);
        pass &= freq <= limit;
        parts.push(format!("(d={d}, m={m}) freq {freq:.5} <= {limit:.5}"));
    }
    verdict(pass, parts.join("; "))
}

/// Every connected vertex set of size at most `k` in `g`.
fn connected_sets(g: &Graph, k: usize) -> Vec<Vec<usize>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut frontier: Vec<Vec<usize>> = (0..g.num_vertices()).map(|v| vec![v]).collect();
    for set in &frontier {
        seen.insert(set.clone());
    }
    for _ in 1..k {
        let mut next = Vec::new();
        for set in &frontier {
            for &v in set {
                for &w in g.neighbors(v) {
                    if set.contains(&w) {
                        continue;
                    }
                    let mut grown = set.clone();
                    grown.push(w);
                    grown.sort_unstable();
                    if seen.insert(grown.clone()) {
                        next.push(grown);
                    }
                }
            }
        }
        frontier = next;
    }
    seen.into_iter().collect()
}

fn c8_boundary_points() -> Verdict {
    let mut checked = 0;
    let mut violations = 0;
    for i in 0..5 {
        let g = random_regular(20, 4, &mut stream(108, i)).unwrap();
        for set in connected_sets(&g, 6) {
            if !g.induced(&set).unwrap().is_tree() {
                continue;
            }
            checked += 1;
            let count = boundary_count(&g, &set).unwrap();
            if (count as f64) < (1.0 - 2.0 / 4.0) * set.len() as f64 {
                violations += 1;
            }
        }
    }
    verdict(violations == 0, format!("{checked} induced subtrees, {violations} violations"))
}

fn c9_left_panel() -> Verdict {
    let config = Figure1Config {
        master_seed: 109,
        ..Figure1Config::default()
    };
    let start = Instant::now();
    let grid = run_figure1(&config, 4).unwrap();
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    let mut exact_sigma_failures = 0;
    let mut truncation_failures = 0;
    for cell in &grid.cells {
        let q = grid.extinction_oracle(cell);
        let p_hat = cell.prop_t0_inf();
        let n = cell.trials as f64;
        if (p_hat - q).abs() > 0.05 + 3.0 * binomial_sigma(p_hat, n) {
            failures.push(format!("(d={}, λ={})", cell.d, cell.lambda));
        }
        if (p_hat - q).abs() > 0.05 + 3.0 * binomial_sigma(q, n) {
            exact_sigma_failures += 1;
        }
        // T₀ = ∞ exactly when the total progeny stays below the threshold.
        let dist = OffspringDist::new(cell.kappa, cell.lambda, cell.mu).unwrap();
        let below = total_progeny_below(&dist, config.u_threshold);
        if (p_hat - below).abs() > 3.0 * binomial_sigma(below, n) + 1e-9 {
            truncation_failures += 1;
        }
    }
    verdict(
        failures.is_empty() && elapsed < Duration::from_secs(600),
        format!(
            "{} cells, {} outside 0.05+3σ(p̂) {:?}; with σ from q instead: {} outside; vs exact P(progeny<100) within 3σ: {} outside; {:.1?}",
            grid.cells.len(),
            failures.len(),
            failures,
            exact_sigma_failures,
            truncation_failures,
            elapsed
        ),
    )
}

fn c10_estimator_interval() -> Verdict {
    let (lambda, mu) = (1.0, 1.0 / 6.0);
    let params = SirParams::new(lambda, mu).unwrap();
    let mut good = 0;
    let mut done = 0;
    let mut broken = 0;
    let mut trial = 0u64;
    let mut lambda_hats = Vec::new();
    while done < 100 {
        let result = tree_trial(7, params, 100, 4.0, &mut substream(110, 0, trial)).unwrap();
        trial += 1;
        let (Some(l), Some(m)) = (result.outcome.lambda_hat, result.outcome.mu_hat) else {
            broken += 1;
            continue;
        };
        done += 1;
        lambda_hats.push(l);
        if (lambda / 8.0 - 0.05..=lambda + 0.05).contains(&l) && (mu - 0.05..=8.0 * mu + 0.05).contains(&m) {
            good += 1;
        }
    }
    let mean = lambda_hats.iter().sum::<f64>() / lambda_hats.len() as f64;
    verdict(
        good >= 90,
        format!("{good}/100 non-broken trials inside ({broken} broken); mean λ̂ = {mean:.4}"),
    )
}

fn c11_mean_field() -> Verdict {
    let mut worst = 0.0f64;
    let base = [(2.0, 1.0, 0.01, 0.01), (3.0, 2.0, 0.02 / 3.0, 0.04 / 3.0), (1.5, 1.0, 0.01, 0.0), (5.0, 0.5, 0.001, 0.0)];
    for &(beta, mu, delta, gamma) in &base {
        let curve = integrate(MeanFieldParams::with_delta_gamma(beta, mu, delta, gamma).unwrap(), 10.0, DEFAULT_DT).unwrap();
        for i in 0..curve.len() {
            worst = worst.max((curve.sigma[i] + curve.iota[i] + curve.rho[i] - 1.0).abs());
        }
    }
    let first = MeanFieldParams::with_delta_gamma(2.0, 1.0, 0.01, 0.01).unwrap();
    let second = MeanFieldParams::with_delta_gamma(3.0, 2.0, 0.02 / 3.0, 0.04 / 3.0).unwrap();
    let early = indistinguishability_gap(first, second, 0.3, DEFAULT_DT).unwrap();
    let late = indistinguishability_gap(first, second, 5.0, DEFAULT_DT).unwrap();
    let init = (0.98, 0.01, 0.01);
    let dilation = time_dilation_check(MeanFieldParams::new(2.0, 0.5, init).unwrap(), 10.0, 1e-3).unwrap();
    let pair = dilation_pair_gap(
        MeanFieldParams::new(3.0, 2.0, init).unwrap(),
        MeanFieldParams::new(1.5, 1.0, init).unwrap(),
        10.0,
        1e-3,
    )
    .unwrap();
    verdict(
        worst <= 1e-10 && early <= 5e-3 && late > 5e-2 && dilation <= 1e-6 && pair <= 1e-6,
        format!("conservation {worst:.1e}; gap [0,0.3] {early:.2e}, [0,5] {late:.3}; dilation {dilation:.1e}, equal-R0 pair {pair:.1e}"),
    )
}

fn c12_determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_sirnet");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in [1, 4, 8] {
        let out = dir.path().join(format!("t{threads}"));
        let status = Command::new(bin)
            .args(["figure1", "--seed", "112", "--threads", &threads.to_string(), "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        outputs.push((
            std::fs::read(out.join("figure1.csv")).unwrap(),
            std::fs::read(out.join("figure1_right.svg")).unwrap(),
        ));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(same, format!("1/4/8 workers: CSV and SVG byte-identical = {same} ({} bytes)", outputs[0].0.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("CI closed forms", c1_ci_closed_forms),
        ("recovery bounds grid", c2_recovery_bounds),
        ("two-vertex closed form", c3_two_vertex_closed_form),
        ("two-engine equivalence", c4_engine_equivalence),
        ("bridge oracle", c5_bridge_oracle),
        ("Galton-Watson suite", c6_gw_suite),
        ("first-passage bound", c7_first_passage),
        ("boundary points", c8_boundary_points),
        ("left panel vs extinction", c9_left_panel),
        ("interval at desk scale", c10_estimator_interval),
        ("mean field", c11_mean_field),
        ("determinism", c12_determinism),
    ];
    let budgets = [5, 600, 600, 30, 600, 600, 60, 600, 600, 600, 600, 600];
    let mut failed = 0;
    for (i, ((name, check), budget)) in criteria.iter().zip(budgets).enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(v) => (v.pass && elapsed.as_secs_f64() < budget as f64, v.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.2}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
