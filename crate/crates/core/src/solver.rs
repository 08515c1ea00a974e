//! The DSM trajectory `u̇ = −u + T_{a(t)}⁻¹A*f_δ`, `u(0) = u₀`, and the two
//! stopped reconstructions.
//!
//! The trajectory is evaluated through its variation-of-constants form
//! `u(t) = e^{−t}u₀ + ∫₀ᵗ e^{−(t−s)} T_{a(s)}⁻¹A*f_δ ds`, which decouples in the
//! right singular basis into one scalar memory integral per component.

use nalgebra::DVector;

use crate::discrepancy::{
    integral_stopping_time, solve_a_delta, DiscrepancyConfig, StoppingRecord, StoppingRule,
};
use crate::error::{DsmError, Result};
use crate::operator::SpectralFactorization;
use crate::problems::{NoisyObservation, ProblemInstance};
use crate::quadrature::{exp_convolution, QuadratureConfig, MEMORY_WINDOW};
use crate::schedule::{ParameterPath, Schedule};

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// Initial state; `None` means `u₀ = 0`.
    pub u0: Option<DVector<f64>>,
    pub quad_tolerance: f64,
    pub max_nodes: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let quad = QuadratureConfig::default();
        Self {
            u0: None,
            quad_tolerance: quad.tolerance,
            max_nodes: quad.max_nodes,
        }
    }
}

impl IntegratorConfig {
    pub fn with_initial_state(u0: DVector<f64>) -> Self {
        Self {
            u0: Some(u0),
            ..Self::default()
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            tolerance: self.quad_tolerance,
            max_nodes: self.max_nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsmResult {
    pub u_delta: DVector<f64>,
    pub stopping: StoppingRecord,
    /// `‖u_δ − y‖`
    pub error_to_y: Option<f64>,
    /// `‖Au_δ − f_δ‖`
    pub residual_norm: f64,
    /// `δ/√a_δ`
    pub delta_over_sqrt_a: f64,
}

/// `w(t) = T_{a(t)}⁻¹A*f_δ`, the Tikhonov solution along the schedule.
pub fn w_trajectory<S: ParameterPath + ?Sized>(
    schedule: &S,
    fact: &SpectralFactorization,
    f_delta: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    check_time(t)?;
    fact.regularized_solution(schedule.value(t), f_delta)
}

/// `ẇ(t) = −ȧ(t) T_{a(t)}⁻² A*f_δ`.
pub fn w_dot<S: ParameterPath + ?Sized>(
    schedule: &S,
    fact: &SpectralFactorization,
    f_delta: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    check_time(t)?;
    let a = schedule.value(t);
    let a_dot = schedule.rate(t);
    let coeffs = fact.data_coefficients(f_delta);
    Ok(fact.synthesize(|i, s| {
        let shifted = s * s + a;
        -a_dot * s * coeffs[i] / (shifted * shifted)
    }))
}

/// `‖ẇ(t)‖` against its bound `(|ȧ|/a²)‖A*f_δ‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WDotCheck {
    pub w_dot_norm: f64,
    pub bound: f64,
}

impl WDotCheck {
    pub fn holds(&self) -> bool {
        self.w_dot_norm <= self.bound * (1.0 + 1e-12)
    }
}

pub fn w_dot_diagnostic<S: ParameterPath + ?Sized>(
    schedule: &S,
    fact: &SpectralFactorization,
    f_delta: &DVector<f64>,
    t: f64,
) -> Result<WDotCheck> {
    if !(t > 0.0) {
        return Err(DsmError::Domain(format!("time must be positive, got {t}")));
    }
    let a = schedule.value(t);
    let w_dot_norm = w_dot(schedule, fact, f_delta, t)?.norm();
    let adjoint_norm = fact.operator().apply_adjoint(f_delta).norm();
    Ok(WDotCheck {
        w_dot_norm,
        bound: schedule.rate(t).abs() / (a * a) * adjoint_norm,
    })
}

/// `u(t_end)` for the DSM started at `cfg.u0`, computed per singular component:
/// `e^{−t}(vᵢᵀu₀) + σᵢ(uᵢᵀf_δ)∫₀ᵗ e^{−(t−s)}/(σᵢ² + a(s)) ds`.
///
/// The memory integrand is nondecreasing in `s` for a decreasing schedule, so
/// lags beyond [`MEMORY_WINDOW`] contribute below `e^{−60}` relative.
pub fn integrate_u<S: ParameterPath + ?Sized>(
    schedule: &S,
    fact: &SpectralFactorization,
    f_delta: &DVector<f64>,
    cfg: &IntegratorConfig,
    t_end: f64,
) -> Result<DVector<f64>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(DsmError::Domain(format!(
            "end time must be positive, got {t_end}"
        )));
    }
    let quad = cfg.quadrature();
    quad.validate()?;
    let n = fact.cols();
    let decay = (-t_end).exp();
    let mut coeffs = match &cfg.u0 {
        Some(u0) => {
            if u0.len() != n {
                return Err(DsmError::InvalidInput(format!(
                    "initial state has length {}, expected {n}",
                    u0.len()
                )));
            }
            fact.solution_coefficients(u0) * decay
        }
        None => DVector::zeros(n),
    };
    let data = fact.data_coefficients(f_delta);
    for (i, &s) in fact.singular_values().iter().enumerate() {
        let weight = s * data[i];
        if weight == 0.0 {
            continue;
        }
        let s2 = s * s;
        let memory = exp_convolution(
            |tau| 1.0 / (s2 + schedule.value(tau)),
            t_end,
            MEMORY_WINDOW,
            &quad,
        )?;
        coeffs[i] += weight * memory;
    }
    Ok(fact.right_vectors() * coeffs)
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(DsmError::Domain(format!(
            "time must be nonnegative, got {t}"
        )))
    }
}

fn finish(
    problem: &ProblemInstance,
    noisy: &NoisyObservation,
    stopping: StoppingRecord,
    u_delta: DVector<f64>,
) -> DsmResult {
    let residual_norm = (problem.operator().apply(&u_delta) - &noisy.f_delta).norm();
    DsmResult {
        error_to_y: Some((&u_delta - problem.y()).norm()),
        residual_norm,
        delta_over_sqrt_a: noisy.delta / stopping.a_delta.sqrt(),
        stopping,
        u_delta,
    }
}

/// Stops the DSM by the integral discrepancy rule.
pub fn solve_theorem1(
    problem: &ProblemInstance,
    noisy: &NoisyObservation,
    schedule: &Schedule,
    cfg: &DiscrepancyConfig,
    icfg: &IntegratorConfig,
    t_max: f64,
) -> Result<DsmResult> {
    let stopping = integral_stopping_time(
        schedule,
        problem.fact(),
        &noisy.f_delta,
        noisy.delta,
        cfg,
        t_max,
    )?;
    let u_delta = integrate_u(
        schedule,
        problem.fact(),
        &noisy.f_delta,
        icfg,
        stopping.t_delta,
    )?;
    Ok(finish(problem, noisy, stopping, u_delta))
}

/// Horizon and sample count used to confirm `|ȧ|/a² ↓ 0` before the root rule.
const CONDITION_HORIZON: f64 = 1e6;
const CONDITION_SAMPLES: usize = 64;

/// Stops the DSM at `t_δ = a⁻¹(a_δ)`, where `a_δ` solves the root discrepancy
/// equation.
pub fn solve_theorem2(
    problem: &ProblemInstance,
    noisy: &NoisyObservation,
    schedule: &Schedule,
    cfg: &DiscrepancyConfig,
    icfg: &IntegratorConfig,
) -> Result<DsmResult> {
    let horizon = schedule.initial_override().map_or(CONDITION_HORIZON, |ov| {
        CONDITION_HORIZON.max(100.0 * ov.switch_time)
    });
    let report = schedule.check_conditions(horizon, CONDITION_SAMPLES)?;
    if !(report.log_rate_decreasing && report.rate_over_square_decreasing) {
        return Err(DsmError::Config(format!(
            "schedule {schedule} does not show |ȧ|/a and |ȧ|/a² decreasing"
        )));
    }
    let a_delta = solve_a_delta(problem.fact(), &noisy.f_delta, noisy.delta, cfg)?;
    let t_delta = schedule.inverse_time(a_delta).map_err(|e| match e {
        DsmError::NoSolution(msg) => DsmError::NoSolution(format!("{msg}; increase c0")),
        other => other,
    })?;
    let stopping = StoppingRecord {
        rule: StoppingRule::Root,
        t_delta,
        a_delta,
        achieved_discrepancy: crate::discrepancy::DataSpectrum::new(problem.fact(), &noisy.f_delta)
            .discrepancy(a_delta),
    };
    let u_delta = if t_delta > 0.0 {
        integrate_u(schedule, problem.fact(), &noisy.f_delta, icfg, t_delta)?
    } else {
        icfg.u0
            .clone()
            .unwrap_or_else(|| DVector::zeros(problem.fact().cols()))
    };
    Ok(finish(problem, noisy, stopping, u_delta))
}
