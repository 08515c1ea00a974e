//! Test instances with known minimal-norm solutions and exact-magnitude noise.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DsmError, Result};
use crate::operator::{DenseOperator, SpectralFactorization};

/// Smoothness data of an instance built as `y = T^γ v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCondition {
    pub gamma: f64,
    /// `‖v‖` restricted to `N(A)^⊥`.
    pub v_norm: f64,
}

/// `Ay = f` with `y ⊥ N(A)`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    fact: SpectralFactorization,
    f: DVector<f64>,
    y: DVector<f64>,
    label: String,
    source: Option<SourceCondition>,
}

impl ProblemInstance {
    /// Factorizes `op`, projects `y` onto `N(A)^⊥` and sets `f = Ay`.
    pub fn from_solution(
        op: DenseOperator,
        y: DVector<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let fact = SpectralFactorization::factorize_default(op)?;
        Self::from_factorization(fact, y, label)
    }

    pub fn from_factorization(
        fact: SpectralFactorization,
        y: DVector<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if y.len() != fact.cols() {
            return Err(DsmError::InvalidInput(format!(
                "solution has length {}, operator has {} columns",
                y.len(),
                fact.cols()
            )));
        }
        let y = fact.solution_range_projection(&y);
        let f = fact.operator().apply(&y);
        Ok(Self {
            fact,
            f,
            y,
            label: label.into(),
            source: None,
        })
    }

    pub fn operator(&self) -> &DenseOperator {
        self.fact.operator()
    }

    pub fn fact(&self) -> &SpectralFactorization {
        &self.fact
    }

    /// Exact data `f = Ay`.
    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    /// Minimal-norm solution.
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> Option<SourceCondition> {
        self.source
    }

    /// `(‖Ay − f‖/‖f‖, ‖𝒫y‖)`.
    pub fn defects(&self) -> (f64, f64) {
        let residual = (self.operator().apply(&self.y) - &self.f).norm();
        let scale = self.f.norm();
        let consistency = if scale > 0.0 {
            residual / scale
        } else {
            residual
        };
        (
            consistency,
            self.fact.solution_null_projection(&self.y).norm(),
        )
    }
}

/// Noisy data with `‖f_δ − f‖ = δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyObservation {
    pub f_delta: DVector<f64>,
    pub delta: f64,
    pub seed: u64,
}

fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign fix so that the distribution is Haar.
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `A = U Σ Vᵀ` with seeded random orthogonal `U`, `V` and
/// `y = Σ y_coeffs[i] vᵢ`.
pub fn synthetic_problem(
    sigmas: &[f64],
    y_coeffs: &[f64],
    m: usize,
    n: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(m.max(1), &mut rng);
    let v = random_orthogonal(n.max(1), &mut rng);
    synthetic_problem_with_bases(
        sigmas,
        y_coeffs,
        &u,
        &v,
        format!("synthetic(m={m},n={n},seed={seed})"),
    )
}

/// [`synthetic_problem`] with caller-supplied orthogonal bases.
pub fn synthetic_problem_with_bases(
    sigmas: &[f64],
    y_coeffs: &[f64],
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    label: impl Into<String>,
) -> Result<ProblemInstance> {
    let (m, n) = (u.nrows(), v.nrows());
    if m == 0 || n == 0 || !u.is_square() || !v.is_square() {
        return Err(DsmError::InvalidInput(
            "bases must be nonempty square matrices".into(),
        ));
    }
    if sigmas.is_empty() || sigmas.len() > m.min(n) {
        return Err(DsmError::InvalidInput(format!(
            "need 1..={} singular values, got {}",
            m.min(n),
            sigmas.len()
        )));
    }
    if sigmas.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(DsmError::InvalidInput(
            "singular values must be positive".into(),
        ));
    }
    if sigmas.windows(2).any(|w| w[1] > w[0]) {
        return Err(DsmError::InvalidInput(
            "singular values must be nonincreasing".into(),
        ));
    }
    if y_coeffs.len() > sigmas.len() {
        return Err(DsmError::InvalidInput(format!(
            "{} solution coefficients exceed the {} singular directions",
            y_coeffs.len(),
            sigmas.len()
        )));
    }
    let k = sigmas.len();
    let scaled = u.columns(0, k) * DMatrix::from_diagonal(&DVector::from_column_slice(sigmas));
    let a = scaled * v.columns(0, k).transpose();
    let mut y = DVector::zeros(n);
    for (i, &c) in y_coeffs.iter().enumerate() {
        y.axpy(c, &v.column(i), 1.0);
    }
    ProblemInstance::from_solution(DenseOperator::new(a)?, y, label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FredholmKind {
    /// `d / (d² + (x − t)²)^{3/2}`, `d = 0.25`
    GravityLike,
    /// `exp(−(x − t)²/(4κ)) / √(4πκ)`, `κ = 0.05`
    HeatLike,
}

pub const GRAVITY_DEPTH: f64 = 0.25;
pub const HEAT_DIFFUSIVITY: f64 = 0.05;

impl FredholmKind {
    pub fn kernel(&self, x: f64, t: f64) -> f64 {
        let d2 = (x - t) * (x - t);
        match self {
            FredholmKind::GravityLike => {
                GRAVITY_DEPTH / (GRAVITY_DEPTH * GRAVITY_DEPTH + d2).powf(1.5)
            }
            FredholmKind::HeatLike => {
                (-d2 / (4.0 * HEAT_DIFFUSIVITY)).exp() / (4.0 * PI * HEAT_DIFFUSIVITY).sqrt()
            }
        }
    }
}

impl fmt::Display for FredholmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FredholmKind::GravityLike => "gravity",
            FredholmKind::HeatLike => "heat",
        })
    }
}

impl FromStr for FredholmKind {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gravity" | "gravity_like" => Ok(FredholmKind::GravityLike),
            "heat" | "heat_like" => Ok(FredholmKind::HeatLike),
            other => Err(DsmError::Parse(format!(
                "unknown Fredholm kernel '{other}'"
            ))),
        }
    }
}

/// Midpoint-rule discretization of a first-kind integral equation on `[0, 1]`
/// with exact solution `sin(πt)`.
pub fn fredholm_problem(kind: FredholmKind, n: usize) -> Result<ProblemInstance> {
    if n < 8 {
        return Err(DsmError::InvalidInput(format!("need n ≥ 8, got {n}")));
    }
    let h = 1.0 / n as f64;
    let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let a = DMatrix::from_fn(n, n, |i, j| h * kind.kernel(nodes[i], nodes[j]));
    let y = DVector::from_iterator(n, nodes.iter().map(|&t| (PI * t).sin()));
    ProblemInstance::from_solution(DenseOperator::new(a)?, y, format!("{kind}(n={n})"))
}

/// `f_δ = f + δe` for a seeded random unit vector `e`. The last bits of one
/// component are adjusted so that the computed `‖f_δ − f‖` equals `δ` as
/// closely as floating point allows.
pub fn perturb(problem: &ProblemInstance, delta: f64, seed: u64) -> Result<NoisyObservation> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(DsmError::Domain(format!(
            "noise level must be positive, got {delta}"
        )));
    }
    let f = problem.f();
    let m = f.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e: DVector<f64> = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    while e.norm() == 0.0 {
        e = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    }
    let e = e.normalize();
    let mut f_delta = f + &e * delta;

    // Nudge the component on the finest floating-point grid relative to its
    // noise share.
    let pivot = (0..m)
        .filter(|&i| e[i] != 0.0)
        .min_by(|&i, &j| {
            let gi = f_delta[i].abs().max(f64::MIN_POSITIVE) / e[i].abs();
            let gj = f_delta[j].abs().max(f64::MIN_POSITIVE) / e[j].abs();
            gi.total_cmp(&gj)
        })
        .expect("unit vector has a nonzero entry");
    for _ in 0..8 {
        let d = &f_delta - f;
        let norm = d.norm();
        if norm == delta || d[pivot] == 0.0 {
            break;
        }
        let correction = (delta * delta - norm * norm) / (2.0 * d[pivot]);
        let nudged = f_delta[pivot] + correction;
        if nudged == f_delta[pivot] {
            break;
        }
        f_delta[pivot] = nudged;
    }
    Ok(NoisyObservation {
        f_delta,
        delta,
        seed,
    })
}

/// Replaces the solution by `y = T^γ v = Σ (σᵢ²)^γ (vᵢᵀv) vᵢ` and `f = Ay`.
pub fn source_condition_problem(
    base: &ProblemInstance,
    gamma: f64,
    v: &DVector<f64>,
) -> Result<ProblemInstance> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(DsmError::Domain(format!(
            "γ must lie in (0, 1/2), got {gamma}"
        )));
    }
    let fact = base.fact().clone();
    if v.len() != fact.cols() {
        return Err(DsmError::InvalidInput(format!(
            "v has length {}, operator has {} columns",
            v.len(),
            fact.cols()
        )));
    }
    let coeffs = fact.solution_coefficients(v);
    let rank = fact.rank();
    let y = fact.synthesize(|i, s| {
        if i < rank {
            (s * s).powf(gamma) * coeffs[i]
        } else {
            0.0
        }
    });
    let v_norm = coeffs.rows(0, rank).norm();
    let label = format!("{}+source(γ={gamma})", base.label());
    let mut problem = ProblemInstance::from_factorization(fact, y, label)?;
    problem.source = Some(SourceCondition { gamma, v_norm });
    Ok(problem)
}
