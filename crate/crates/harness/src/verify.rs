//! Invariant checks over seeded problems, grouped into suites.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dsm_core::discrepancy::{history_ratio, log_derivative_h_squared};
use dsm_core::quadrature::{exp_convolution, QuadratureConfig, MEMORY_WINDOW};
use dsm_core::solver::w_dot;
use dsm_core::{
    integrate_u, perturb, residual_identity, solve_a_delta, source_condition_problem,
    synthetic_problem, w_dot_diagnostic, w_trajectory, DataSpectrum, DiscrepancyConfig, DsmError,
    IntegratorConfig, NoisyObservation, ProblemInstance, Schedule,
};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Bounds,
    Lemmas,
    All,
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "identities" => Ok(Suite::Identities),
            "bounds" => Ok(Suite::Bounds),
            "lemmas" => Ok(Suite::Lemmas),
            "all" => Ok(Suite::All),
            other => Err(HarnessError::Usage(format!(
                "unknown suite '{other}' (expected identities, bounds, lemmas or all)"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Identities => "identities",
            Suite::Bounds => "bounds",
            Suite::Lemmas => "lemmas",
            Suite::All => "all",
        })
    }
}

/// One check: `measured ≤ threshold` passes. The margin is `threshold − measured`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(
        suite: Suite,
        name: &str,
        measured: f64,
        threshold: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            suite,
            name: name.to_string(),
            measured,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.measured <= self.threshold
    }

    pub fn margin(&self) -> f64 {
        self.threshold - self.measured
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<10} {:<28} measured={:.6e} threshold={:.6e} margin={:+.6e}  {}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.suite,
                c.name,
                c.measured,
                c.threshold,
                c.margin(),
                c.detail
            )?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

/// Runs the requested suite. Solver errors while setting up a check are
/// returned as errors; check failures are report content.
pub fn run_verify(suite: Suite) -> Result<VerifyReport, HarnessError> {
    let mut report = VerifyReport::default();
    if matches!(suite, Suite::Identities | Suite::All) {
        report.checks.extend(identities()?);
    }
    if matches!(suite, Suite::Bounds | Suite::All) {
        report.checks.extend(bounds()?);
    }
    if matches!(suite, Suite::Lemmas | Suite::All) {
        report.checks.extend(lemmas()?);
    }
    Ok(report)
}

pub const RANDOM_PROBLEMS: usize = 20;

/// Seeded random instance: `m, n ∈ [4, 64]`, possibly rank deficient, singular
/// values spread over six decades, noise at 1% of `‖f‖`.
pub fn random_instance(seed: u64) -> Result<(ProblemInstance, NoisyObservation), DsmError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(4..=64);
    let n = rng.random_range(4..=64);
    let rank = (m.min(n) - rng.random_range(0..=2usize)).max(1);
    let mut sigmas: Vec<f64> = (0..rank)
        .map(|_| 10f64.powf(-rng.random_range(0.0..6.0)))
        .collect();
    sigmas.sort_by(|x, y| y.total_cmp(x));
    let coeffs: Vec<f64> = (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect();
    let problem = synthetic_problem(&sigmas, &coeffs, m, n, seed)?;
    let delta = 1e-2 * problem.f().norm();
    let noisy = perturb(&problem, delta, seed.wrapping_add(1))?;
    Ok((problem, noisy))
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (l + (h - l) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

fn identities() -> Result<Vec<CheckOutcome>, HarnessError> {
    let mut worst: f64 = 0.0;
    for seed in 0..RANDOM_PROBLEMS as u64 {
        let (problem, noisy) = random_instance(seed)?;
        let scale = noisy.f_delta.norm();
        for a in log_grid(1e-8, 1.0, 10) {
            let (lhs, rhs) = residual_identity(problem.fact(), &noisy.f_delta, a)?;
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(vec![CheckOutcome::new(
        Suite::Identities,
        "residual_identity",
        worst,
        1e-10,
        format!("{RANDOM_PROBLEMS} problems x 10 shifts, relative to |f_delta|"),
    )])
}

fn bounds() -> Result<Vec<CheckOutcome>, HarnessError> {
    let mut checks = Vec::new();
    let grid = log_grid(1e-8, 1.0, 50);

    let mut operator_ratio: f64 = 0.0;
    let mut shifted_ratio: f64 = 0.0;
    for seed in 0..RANDOM_PROBLEMS as u64 {
        let (problem, noisy) = random_instance(seed)?;
        let fact = problem.fact();
        let g = &noisy.f_delta;
        for &a in &grid {
            let w = fact.regularized_solution(a, g)?;
            operator_ratio = operator_ratio.max(w.norm() * 2.0 * a.sqrt() / g.norm());
            let q = fact.gram_shifted_inverse_apply(a, g)?;
            shifted_ratio = shifted_ratio.max(q.norm() * a / g.norm());
        }
    }
    checks.push(CheckOutcome::new(
        Suite::Bounds,
        "operator_bound",
        operator_ratio,
        1.0 + 1e-12,
        "max |T_a^-1 A* f| 2 sqrt(a) / |f| over a in [1e-8, 1]",
    ));
    checks.push(CheckOutcome::new(
        Suite::Bounds,
        "shifted_inverse_bound",
        shifted_ratio,
        1.0 + 1e-12,
        "max a |Q_a^-1 f| / |f| over a in [1e-8, 1]",
    ));

    // Noise propagation and the full error decomposition along u0 = 0 runs.
    let schedule = Schedule::default();
    let icfg = IntegratorConfig::default();
    let mut noise_ratio: f64 = 0.0;
    let mut decomposition_ratio: f64 = 0.0;
    for seed in 0..5u64 {
        let (problem, noisy) = random_instance(seed)?;
        let fact = problem.fact();
        let noise = &noisy.f_delta - problem.f();
        for t in [0.5, 2.0, 10.0, 50.0, 500.0] {
            let (a, _) = schedule.eval(t)?;
            let j2 = integrate_u(&schedule, fact, &noise, &icfg, t)?.norm();
            let j2_bound = (1.0 - (-t).exp()) * noisy.delta / (2.0 * a.sqrt());
            noise_ratio = noise_ratio.max(j2 / j2_bound);
            let u = integrate_u(&schedule, fact, &noisy.f_delta, &icfg, t)?;
            let j3 = (integrate_u(&schedule, fact, problem.f(), &icfg, t)? - problem.y()).norm();
            let total = (u - problem.y()).norm();
            decomposition_ratio = decomposition_ratio.max(total / (j2_bound + j3));
        }
    }
    let quad_slack = 1.0 + 1e-8;
    checks.push(CheckOutcome::new(
        Suite::Bounds,
        "noise_propagation",
        noise_ratio,
        quad_slack,
        "max j2 / ((1 - e^-t) delta / (2 sqrt(a(t))))",
    ));
    checks.push(CheckOutcome::new(
        Suite::Bounds,
        "error_decomposition",
        decomposition_ratio,
        quad_slack,
        "max |u(t) - y| / (delta / (2 sqrt(a(t))) + j3)",
    ));

    // Analytic w-dot against its bound and against central differences.
    let mut w_ratio: f64 = 0.0;
    let mut fd_error: f64 = 0.0;
    for seed in 0..10u64 {
        let (problem, noisy) = random_instance(seed)?;
        let fact = problem.fact();
        for t in log_grid(0.1, 1e3, 20) {
            let check = w_dot_diagnostic(&schedule, fact, &noisy.f_delta, t)?;
            if check.bound > 0.0 {
                w_ratio = w_ratio.max(check.w_dot_norm / check.bound);
            }
            let step = 1e-4 * t;
            let fd = (w_trajectory(&schedule, fact, &noisy.f_delta, t + step)?
                - w_trajectory(&schedule, fact, &noisy.f_delta, t - step)?)
                / (2.0 * step);
            let exact = w_dot(&schedule, fact, &noisy.f_delta, t)?;
            fd_error = fd_error.max((fd - &exact).norm() / exact.norm());
        }
    }
    checks.push(CheckOutcome::new(
        Suite::Bounds,
        "w_dot_bound",
        w_ratio,
        1.0 + 1e-12,
        "max |w'| a^2 / (|a'| |A* f_delta|), 10 problems x 20 times",
    ));
    checks.push(CheckOutcome::new(
        Suite::Bounds,
        "w_dot_finite_difference",
        fd_error,
        1e-4,
        "relative gap to central differences of w",
    ));
    Ok(checks)
}

/// `p^p (1 − p)^{1−p}` with `p = γ + 1/2`.
pub fn source_constant(gamma: f64) -> f64 {
    let p = gamma + 0.5;
    p.powf(p) * (1.0 - p).powf(1.0 - p)
}

/// Grid maximum of `s^{γ+1/2}/(s + a)` over `s ∈ [a·10⁻⁶, a·10⁶]`.
pub fn brute_force_source_max(gamma: f64, a: f64, points: usize) -> f64 {
    log_grid(a * 1e-6, a * 1e6, points)
        .into_iter()
        .map(|s| s.powf(gamma + 0.5) / (s + a))
        .fold(0.0, f64::max)
}

fn count_increases(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

fn count_decreases(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}

fn lemmas() -> Result<Vec<CheckOutcome>, HarnessError> {
    let mut checks = Vec::new();
    let schedule = Schedule::default();
    let quad = QuadratureConfig::default();

    // ψ structure.
    let mut psi_violations = 0usize;
    let mut psi_limit: f64 = 0.0;
    let mut null_ratio: f64 = 0.0;
    for seed in 0..RANDOM_PROBLEMS as u64 {
        let (problem, noisy) = random_instance(seed)?;
        let fact = problem.fact();
        let spectrum = DataSpectrum::new(fact, &noisy.f_delta);
        let s1 = fact.spectral_bound();
        let values: Vec<f64> = log_grid(1e-12 * s1, 1e6 * s1, 1000)
            .into_iter()
            .map(|a| spectrum.psi(a))
            .collect();
        psi_violations += count_decreases(&values);
        let norm2 = noisy.f_delta.norm_squared();
        psi_limit = psi_limit.max((spectrum.psi(1e6 * s1) - norm2).abs() / norm2);
        null_ratio = null_ratio.max(fact.null_projection(&noisy.f_delta).norm() / noisy.delta);
    }
    checks.push(CheckOutcome::new(
        Suite::Lemmas,
        "psi_monotone",
        psi_violations as f64,
        0.0,
        "decreasing steps of psi on 1000-point log grids",
    ));
    checks.push(CheckOutcome::new(
        Suite::Lemmas,
        "psi_limit",
        psi_limit,
        1e-5,
        "|psi(1e6 s1) - |f_delta|^2| / |f_delta|^2",
    ));
    checks.push(CheckOutcome::new(
        Suite::Lemmas,
        "null_component",
        null_ratio,
        1.0,
        "|P f_delta| / delta",
    ));

    // Logarithmic derivative of h² and the history ratio G/h.
    let times = [1e2, 1e3, 1e4, 1e5, 1e6];
    let mut log_derivative_violations = 0usize;
    let mut log_derivative_last: f64 = 0.0;
    let mut ratio_gap: f64 = 0.0;
    for seed in 0..5u64 {
        let (problem, noisy) = random_instance(seed)?;
        let spectrum = DataSpectrum::new(problem.fact(), &noisy.f_delta);
        let values: Vec<f64> = times
            .iter()
            .map(|&t| log_derivative_h_squared(&schedule, &spectrum, t))
            .collect();
        log_derivative_violations += count_increases(&values);
        log_derivative_last = log_derivative_last.max(values[values.len() - 1]);
        if spectrum.null_norm() > 0.0 {
            let ratio = history_ratio(&schedule, &spectrum, 1e4, &quad)?;
            ratio_gap = ratio_gap.max((ratio - 1.0).abs());
        }
    }
    checks.push(CheckOutcome::new(
        Suite::Lemmas,
        "log_derivative_decreasing",
        log_derivative_violations as f64,
        0.0,
        "increasing steps of |(h^2)'|/h^2 at t = 1e2..1e6",
    ));
    checks.push(CheckOutcome::new(
        Suite::Lemmas,
        "log_derivative_vanishes",
        log_derivative_last,
        1e-5,
        "|(h^2)'|/h^2 at t = 1e6",
    ));
    checks.push(CheckOutcome::new(
        Suite::Lemmas,
        "history_ratio",
        ratio_gap,
        1e-3,
        "|G/h - 1| at t = 1e4 for data with a null component",
    ));

    // a²‖T_a⁻¹y‖² → 0 for y in the closure of the range of A*.
    let mut filter_violations = 0usize;
    let mut filter_last: f64 = 0.0;
    for seed in 0..5u64 {
        let (problem, _) = random_instance(seed)?;
        let fact = problem.fact();
        let coeffs = fact.solution_coefficients(problem.y());
        let rank = fact.rank();
        let smallest = fact.gram_eigenvalue(rank - 1);
        let values: Vec<f64> = log_grid(fact.spectral_bound(), 1e-6 * smallest, 40)
            .into_iter()
            .map(|a| {
                (0..rank)
                    .map(|i| {
                        let s = fact.gram_eigenvalue(i);
                        (a * coeffs[i] / (s + a)).powi(2)
                    })
                    .sum::<f64>()
            })
            .collect();
        filter_violations += count_increases(&values);
        filter_last = filter_last.max(values[values.len() - 1] / problem.y().norm_squared());
    }
    checks.push(CheckOutcome::new(
        Suite::Lemmas,
        "a2_filter_decreasing",
        filter_violations as f64,
        0.0,
        "increasing steps of a^2 |T_a^-1 y|^2 as a falls from s1 to 1e-6 s_min",
    ));
    checks.push(CheckOutcome::new(
        Suite::Lemmas,
        "a2_filter_limit",
        filter_last,
        1e-6,
        "a^2 |T_a^-1 y|^2 / |y|^2 at a = 1e-6 s_min",
    ));

    checks.extend(source_checks()?);
    checks.extend(convolution_limits(&quad)?);
    checks.extend(schedule_checks()?);
    Ok(checks)
}

fn source_checks() -> Result<Vec<CheckOutcome>, HarnessError> {
    let gamma = 0.25;
    let c_gamma = source_constant(gamma);
    let mut constant_gap: f64 = 0.0;
    for a in [1e-6_f64, 1e-3, 1.0] {
        let exact = c_gamma * a.powf(gamma - 0.5);
        constant_gap =
            constant_gap.max((brute_force_source_max(gamma, a, 100_000) - exact).abs() / exact);
    }

    let n = 32;
    let sigmas: Vec<f64> = (1..=n).map(|i| 1.0 / (i * i) as f64).collect();
    let coeffs: Vec<f64> = (1..=n).map(|i| 1.0 / i as f64).collect();
    let base = synthetic_problem(&sigmas, &coeffs, n, n, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let problem = source_condition_problem(&base, gamma, &v)?;
    let v_norm = problem.source().map_or(0.0, |s| s.v_norm);
    let cfg = DiscrepancyConfig::default();
    let scale = problem.f().norm();
    let mut inequality_ratio: f64 = 0.0;
    let mut trend = Vec::new();
    for k in 1..=5 {
        let delta = 10f64.powi(-k) * scale;
        let noisy = perturb(&problem, delta, 5)?;
        let a = solve_a_delta(problem.fact(), &noisy.f_delta, delta, &cfg)?;
        let lhs = (cfg.c - 1.0) * delta / a.sqrt();
        inequality_ratio = inequality_ratio.max(lhs / (c_gamma * v_norm * a.powf(gamma)));
        trend.push(delta / a.sqrt());
    }
    Ok(vec![
        CheckOutcome::new(
            Suite::Lemmas,
            "source_constant",
            constant_gap,
            1e-4,
            format!("c(0.25) = {c_gamma:.6} against grid maximization"),
        ),
        CheckOutcome::new(
            Suite::Lemmas,
            "source_inequality",
            inequality_ratio,
            1.0,
            "max (c - 1) delta / sqrt(a) / (c(gamma) |v| a^gamma) over the sweep",
        ),
        CheckOutcome::new(
            Suite::Lemmas,
            "delta_over_sqrt_a_decreasing",
            count_increases(&trend) as f64,
            0.0,
            "increasing steps of delta / sqrt(a_delta) as delta shrinks",
        ),
    ])
}

fn convolution_limits(quad: &QuadratureConfig) -> Result<Vec<CheckOutcome>, HarnessError> {
    let constant = exp_convolution(|_| 1.0, 30.0, MEMORY_WINDOW, quad)?;
    let decaying = exp_convolution(|s: f64| (-s).exp(), 30.0, MEMORY_WINDOW, quad)?;
    // The 1/(1+s) forcing decays only like 1/t; its limit is reached well
    // after t = 30, so it is sampled at t = 1e4.
    let slow = exp_convolution(|s: f64| 1.0 / (1.0 + s), 1e4, MEMORY_WINDOW, quad)?;
    Ok(vec![
        CheckOutcome::new(
            Suite::Lemmas,
            "convolution_constant",
            (constant - 1.0).abs(),
            1e-3,
            "q = 1 at t = 30",
        ),
        CheckOutcome::new(
            Suite::Lemmas,
            "convolution_exponential",
            decaying.abs(),
            1e-3,
            "q = e^-s at t = 30",
        ),
        CheckOutcome::new(
            Suite::Lemmas,
            "convolution_harmonic",
            slow.abs(),
            1e-3,
            "q = 1/(1+s) at t = 1e4",
        ),
    ])
}

fn schedule_checks() -> Result<Vec<CheckOutcome>, HarnessError> {
    let mut violations = 0usize;
    for b in [0.25, 0.5, 0.75] {
        let schedule = Schedule::new(1.0, 1.0, b)?;
        let mut log_rate = Vec::new();
        let mut rate_over_square = Vec::new();
        for t in log_grid(1.0, 1e4, 200) {
            let (a, a_dot) = schedule.eval(t)?;
            log_rate.push(a_dot.abs() / a);
            rate_over_square.push(a_dot.abs() / (a * a));
        }
        violations += log_rate.windows(2).filter(|w| w[1] >= w[0]).count();
        violations += rate_over_square.windows(2).filter(|w| w[1] >= w[0]).count();
    }
    let (a, a_dot) = Schedule::default().eval(1e4)?;
    Ok(vec![
        CheckOutcome::new(
            Suite::Lemmas,
            "schedule_monotone",
            violations as f64,
            0.0,
            "non-decreasing steps of |a'|/a and |a'|/a^2, b in {0.25, 0.5, 0.75}",
        ),
        CheckOutcome::new(
            Suite::Lemmas,
            "schedule_rate_small",
            a_dot.abs() / (a * a),
            1e-2,
            "|a'|/a^2 at t = 1e4 for b = 0.5",
        ),
    ])
}
