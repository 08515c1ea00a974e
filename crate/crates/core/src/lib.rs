//! Dynamical systems method (DSM) for linear ill-posed problems `Au = f`
//! with noisy data `f_δ`, `‖f_δ − f‖ ≤ δ`.
//!
//! The trajectory `u̇ = −u + T_{a(t)}⁻¹A*f_δ` is stopped either by an
//! integral discrepancy rule or by the root of `a‖Q_a⁻¹f_δ‖ = cδ` mapped back
//! through the schedule `a(t)`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrepancy;
pub mod error;
pub mod io;
pub mod operator;
pub mod problems;
pub mod quadrature;
pub mod roots;
pub mod schedule;
pub mod solver;

pub use discrepancy::{
    h_value, integral_stopping_time, psi, residual_identity, solve_a_delta, DataSpectrum,
    DiscrepancyConfig, StoppingRecord, StoppingRule,
};
pub use error::{DsmError, Result};
pub use operator::{DenseOperator, SpectralFactorization};
pub use problems::{
    fredholm_problem, perturb, source_condition_problem, synthetic_problem, FredholmKind,
    NoisyObservation, ProblemInstance,
};
pub use schedule::{FrozenParameter, ParameterPath, Schedule};
pub use solver::{
    integrate_u, solve_theorem1, solve_theorem2, w_dot_diagnostic, w_trajectory, DsmResult,
    IntegratorConfig,
};
