//! Discrepancy functions and the two stopping rules.
//!
//! The discrepancy of a parameter `a` is `a‖Q_a⁻¹f_δ‖ = ‖AT_a⁻¹A*f_δ − f_δ‖`,
//! the residual of the Tikhonov solution. Its square `ψ(a)` is nondecreasing,
//! tends to `‖Pf_δ‖²` as `a → 0` and to `‖f_δ‖²` as `a → ∞`.
//!
//! * The **root rule** picks `a_δ` with discrepancy `cδ` and reads the DSM
//!   trajectory at the time `t_δ` where `a(t_δ) = a_δ`.
//! * The **integral rule** picks `t_δ` where the exponentially weighted history
//!   `G(t) = ∫₀ᵗ e^{−(t−s)} h(s) ds` of `h(t) = a(t)‖Q_{a(t)}⁻¹f_δ‖` equals `cδ`.

use nalgebra::DVector;

use crate::error::{DsmError, Result};
use crate::operator::SpectralFactorization;
use crate::quadrature::{exp_convolution, integrate_adaptive, QuadratureConfig, MEMORY_WINDOW};
use crate::roots::{bisect, Split};
use crate::schedule::ParameterPath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyConfig {
    /// Discrepancy level factor, `1 < c < 2`.
    pub c: f64,
    /// Relative tolerance on the achieved discrepancy.
    pub root_tolerance: f64,
    pub max_bisection_steps: usize,
    /// Accuracy of the history integral `G(t)`.
    pub quadrature: QuadratureConfig,
}

impl Default for DiscrepancyConfig {
    fn default() -> Self {
        Self {
            c: 1.5,
            root_tolerance: 1e-8,
            max_bisection_steps: 200,
            quadrature: QuadratureConfig {
                tolerance: 1e-12,
                max_nodes: 1 << 16,
            },
        }
    }
}

impl DiscrepancyConfig {
    pub fn with_c(c: f64) -> Self {
        Self {
            c,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 1.0 && self.c < 2.0) {
            return Err(DsmError::Config(format!(
                "c must lie in (1, 2), got {}",
                self.c
            )));
        }
        if !(self.root_tolerance > 0.0) {
            return Err(DsmError::Config(format!(
                "root tolerance must be positive, got {}",
                self.root_tolerance
            )));
        }
        if self.max_bisection_steps == 0 {
            return Err(DsmError::Config(
                "max_bisection_steps must be positive".into(),
            ));
        }
        self.quadrature.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StoppingRule {
    Integral,
    Root,
}

impl StoppingRule {
    pub fn name(&self) -> &'static str {
        match self {
            StoppingRule::Integral => "integral",
            StoppingRule::Root => "root",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRecord {
    pub rule: StoppingRule,
    pub t_delta: f64,
    pub a_delta: f64,
    /// `G(t_δ)` for the integral rule, `a_δ‖Q_{a_δ}⁻¹f_δ‖` for the root rule.
    pub achieved_discrepancy: f64,
}

/// The spectral measure `ρ` of `Q` against `f_δ`: point masses `(uᵢᵀf_δ)²` at
/// the eigenvalues `σᵢ²`, with every component outside the singular span
/// collected at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpectrum {
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    null_weight: f64,
    total_weight: f64,
}

impl DataSpectrum {
    pub fn new(fact: &SpectralFactorization, f_delta: &DVector<f64>) -> Self {
        let coeffs = fact.data_coefficients(f_delta);
        let k = fact.singular_values().len();
        let mut eigenvalues = Vec::with_capacity(k + 1);
        let mut weights = Vec::with_capacity(k + 1);
        for (i, &s) in fact.singular_values().iter().enumerate() {
            eigenvalues.push(s * s);
            weights.push(coeffs[i] * coeffs[i]);
        }
        let complement: f64 = coeffs.iter().skip(k).map(|c| c * c).sum();
        if complement > 0.0 {
            eigenvalues.push(0.0);
            weights.push(complement);
        }
        let null_weight = coeffs.iter().skip(fact.rank()).map(|c| c * c).sum();
        Self {
            eigenvalues,
            weights,
            null_weight,
            total_weight: coeffs.norm_squared(),
        }
    }

    /// `‖f_δ‖`
    pub fn data_norm(&self) -> f64 {
        self.total_weight.sqrt()
    }

    /// `‖Pf_δ‖`
    pub fn null_norm(&self) -> f64 {
        self.null_weight.sqrt()
    }

    /// `ψ(a) = Σ a² ρᵢ / (sᵢ + a)²`
    pub fn psi(&self, a: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| {
                let r = a / (s + a);
                w * r * r
            })
            .sum()
    }

    /// `a‖Q_a⁻¹f_δ‖ = √ψ(a)`
    pub fn discrepancy(&self, a: f64) -> f64 {
        self.psi(a).sqrt()
    }

    /// `Σ ρᵢ / (sᵢ + a)^power`; `g² = moment(a, 2)`.
    pub fn moment(&self, a: f64, power: i32) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w / (s + a).powi(power))
            .sum()
    }
}

fn check_shift(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(DsmError::Domain(format!(
            "parameter must be positive, got {a}"
        )))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(DsmError::Domain(format!(
            "noise level must be positive, got {delta}"
        )))
    }
}

/// `(ψ(a), √ψ(a))`.
pub fn psi(fact: &SpectralFactorization, f_delta: &DVector<f64>, a: f64) -> Result<(f64, f64)> {
    check_shift(a)?;
    let psi = DataSpectrum::new(fact, f_delta).psi(a);
    Ok((psi, psi.sqrt()))
}

/// Checks `‖f_δ‖ > cδ` and `‖Pf_δ‖ < cδ`; returns the level `cδ`.
fn check_data(spectrum: &DataSpectrum, delta: f64, c: f64) -> Result<f64> {
    check_delta(delta)?;
    let level = c * delta;
    let data_norm = spectrum.data_norm();
    if data_norm <= level {
        return Err(DsmError::NoiseDominates { data_norm, level });
    }
    let null_norm = spectrum.null_norm();
    if null_norm >= level {
        return Err(DsmError::InconsistentData { null_norm, level });
    }
    Ok(level)
}

/// Solves `a‖Q_a⁻¹f_δ‖ = cδ` by geometric bracketing and log-scale bisection.
pub fn solve_a_delta(
    fact: &SpectralFactorization,
    f_delta: &DVector<f64>,
    delta: f64,
    cfg: &DiscrepancyConfig,
) -> Result<f64> {
    cfg.validate()?;
    let spectrum = DataSpectrum::new(fact, f_delta);
    solve_a_delta_spectrum(&spectrum, fact.spectral_bound(), delta, cfg)
}

pub(crate) fn solve_a_delta_spectrum(
    spectrum: &DataSpectrum,
    spectral_bound: f64,
    delta: f64,
    cfg: &DiscrepancyConfig,
) -> Result<f64> {
    let level = check_data(spectrum, delta, cfg.c)?;
    let scale = if spectral_bound > 0.0 {
        spectral_bound
    } else {
        1.0
    };
    let mut lo = 1e-12 * scale;
    let mut hi = 1e6 * scale;
    while spectrum.discrepancy(lo) >= level {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Err(DsmError::NoSolution(format!(
                "discrepancy stays above cδ = {level:e} for all representable a"
            )));
        }
    }
    while spectrum.discrepancy(hi) <= level {
        hi *= 1e3;
        if !hi.is_finite() {
            return Err(DsmError::NoSolution(format!(
                "discrepancy stays below cδ = {level:e} for all representable a"
            )));
        }
    }
    let root = bisect(
        |a| spectrum.discrepancy(a) - level,
        lo,
        hi,
        Split::Geometric,
        cfg.max_bisection_steps,
    )?;
    if (root.value).abs() > cfg.root_tolerance * level {
        return Err(DsmError::Accuracy(format!(
            "a_δ = {:e} reaches discrepancy error {:e} > {:e} after {} steps",
            root.x,
            root.value.abs(),
            cfg.root_tolerance * level,
            root.steps
        )));
    }
    Ok(root.x)
}

/// `h(t) = a(t)‖Q_{a(t)}⁻¹f_δ‖`.
pub fn h_value<S: ParameterPath + ?Sized>(
    schedule: &S,
    fact: &SpectralFactorization,
    f_delta: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(DsmError::Domain(format!(
            "time must be nonnegative, got {t}"
        )));
    }
    Ok(DataSpectrum::new(fact, f_delta).discrepancy(schedule.value(t)))
}

/// Where and how the history `G` meets a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    /// `G(t)`
    pub value: f64,
    /// True when the crossing lies on the nonincreasing branch of `G`, after
    /// which no further crossing can occur.
    pub is_final: bool,
}

/// Locates the last crossing of `G(t) = ∫₀ᵗ e^{−(t−s)} h(s) ds` with `level`
/// on `[0, t_max]` for a nonincreasing forcing `h`.
///
/// `G` solves `G′ = −G + h`, `G(0) = 0`, and is advanced step by step with the
/// exact variation-of-constants update
/// `G(t + τ) = e^{−τ}G(t) + ∫₀^τ e^{−x} h(t + τ − x) dx`, which also serves as
/// dense output for bisection. Once `G ≥ h`, `G` is nonincreasing, so the
/// search ends at the first downward crossing.
pub fn history_crossing<H: Fn(f64) -> f64>(
    h: H,
    level: f64,
    t_max: f64,
    cfg: &DiscrepancyConfig,
) -> Result<Crossing> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(DsmError::InvalidInput(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    if !(level > 0.0) {
        return Err(DsmError::InvalidInput(format!(
            "level must be positive, got {level}"
        )));
    }
    let quad = &cfg.quadrature;
    let advance = |t0: f64, g0: f64, tau: f64| -> Result<f64> {
        let end = t0 + tau;
        let memory = integrate_adaptive(
            |x| (-x).exp() * h(end - x),
            0.0,
            tau.min(MEMORY_WINDOW),
            quad,
        )?;
        Ok((-tau).exp() * g0 + memory)
    };
    let locate = |t0: f64, g0: f64, t1: f64| -> Result<Crossing> {
        let root = bisect(
            |tau| advance(t0, g0, tau).map_or(f64::NAN, |g| g - level),
            0.0,
            t1 - t0,
            Split::Arithmetic,
            cfg.max_bisection_steps,
        )?;
        if !root.value.is_finite() {
            return Err(DsmError::Accuracy(
                "history integral failed during bisection".into(),
            ));
        }
        Ok(Crossing {
            t: t0 + root.x,
            value: root.value + level,
            is_final: false,
        })
    };

    let mut t = 0.0;
    let mut g = 0.0;
    let mut descending = false;
    let mut last_up: Option<Crossing> = None;
    while t < t_max {
        let step = if descending {
            (0.25 * t).max(0.25)
        } else {
            0.25
        };
        let step = step.min(t_max - t);
        let t_next = if t_max - (t + step) <= 1e-12 * t_max {
            t_max
        } else {
            t + step
        };
        let g_next = advance(t, g, t_next - t)?;
        if g < level && g_next >= level {
            last_up = Some(locate(t, g, t_next)?);
        } else if g >= level && g_next < level {
            let mut crossing = locate(t, g, t_next)?;
            crossing.is_final = true;
            return Ok(crossing);
        }
        if !descending && g_next >= h(t_next) {
            descending = true;
        }
        t = t_next;
        g = g_next;
        if descending && g < level {
            break;
        }
    }
    match last_up {
        // G is still above the level on its decreasing branch.
        Some(_) if g >= level && descending => Err(DsmError::HorizonExceeded { t_max }),
        Some(crossing) => Ok(crossing),
        None if g >= level => unreachable!("G starts at zero, below any positive level"),
        None if descending => Err(DsmError::NoSolution(format!(
            "history integral peaks below cδ = {level:e}; increase c0"
        ))),
        None => Err(DsmError::HorizonExceeded { t_max }),
    }
}

/// Integral discrepancy rule: the time `t_δ` at which `G(t_δ) = cδ` on the
/// decreasing branch of `G`.
pub fn integral_stopping_time<S: ParameterPath + ?Sized>(
    schedule: &S,
    fact: &SpectralFactorization,
    f_delta: &DVector<f64>,
    delta: f64,
    cfg: &DiscrepancyConfig,
    t_max: f64,
) -> Result<StoppingRecord> {
    cfg.validate()?;
    let spectrum = DataSpectrum::new(fact, f_delta);
    let level = check_data(&spectrum, delta, cfg.c)?;
    let h0 = spectrum.discrepancy(schedule.value(0.0));
    if h0 <= level {
        return Err(DsmError::InitialDiscrepancy { h0, level });
    }
    let h = |t: f64| spectrum.discrepancy(schedule.value(t));
    let crossing = history_crossing(h, level, t_max, cfg)?;
    if !crossing.is_final {
        return Err(DsmError::HorizonExceeded { t_max });
    }
    if (crossing.value - level).abs() > cfg.root_tolerance * level {
        return Err(DsmError::Accuracy(format!(
            "G(t_δ) = {:e} misses cδ = {level:e} by more than the root tolerance",
            crossing.value
        )));
    }
    Ok(StoppingRecord {
        rule: StoppingRule::Integral,
        t_delta: crossing.t,
        a_delta: schedule.value(crossing.t),
        achieved_discrepancy: crossing.value,
    })
}

/// `(a‖Q_a⁻¹f_δ‖, ‖A T_a⁻¹A*f_δ − f_δ‖)`; the first spectrally, the second by
/// applying `A` to the regularized solution.
pub fn residual_identity(
    fact: &SpectralFactorization,
    f_delta: &DVector<f64>,
    a: f64,
) -> Result<(f64, f64)> {
    check_shift(a)?;
    let lhs = DataSpectrum::new(fact, f_delta).discrepancy(a);
    let w = fact.regularized_solution(a, f_delta)?;
    let rhs = (fact.operator().apply(&w) - f_delta).norm();
    Ok((lhs, rhs))
}

/// `|(h²)′| / h²` at time `t`, from `(h²)′/h² = 2ȧ/a + (g²)′/g²` with
/// `(g²)′ = −2ȧ Σ ρᵢ/(sᵢ + a)³`. Tends to zero whenever `ȧ/a` does.
pub fn log_derivative_h_squared<S: ParameterPath + ?Sized>(
    schedule: &S,
    spectrum: &DataSpectrum,
    t: f64,
) -> f64 {
    let a = schedule.value(t);
    let a_dot = schedule.rate(t);
    let g2 = spectrum.moment(a, 2);
    if g2 == 0.0 {
        return 0.0;
    }
    let g2_dot = -2.0 * a_dot * spectrum.moment(a, 3);
    (2.0 * a_dot / a + g2_dot / g2).abs()
}

/// `G(t)/h(t)`; tends to one when `h` has a positive limit.
pub fn history_ratio<S: ParameterPath + ?Sized>(
    schedule: &S,
    spectrum: &DataSpectrum,
    t: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let h = |s: f64| spectrum.discrepancy(schedule.value(s));
    let g = exp_convolution(h, t, MEMORY_WINDOW, quad)?;
    Ok(g / h(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::DenseOperator;
    use crate::schedule::Schedule;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(value: f64) -> SpectralFactorization {
        SpectralFactorization::factorize_default(
            DenseOperator::from_row_slice(1, 1, &[value]).unwrap(),
        )
        .unwrap()
    }

    fn diag10() -> SpectralFactorization {
        SpectralFactorization::factorize_default(
            DenseOperator::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap(),
        )
        .unwrap()
    }

    fn random_fact(m: usize, n: usize, seed: u64) -> SpectralFactorization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        SpectralFactorization::factorize_default(DenseOperator::new(a).unwrap()).unwrap()
    }

    fn random_vector(len: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
    }

    fn one() -> DVector<f64> {
        DVector::from_element(1, 1.0)
    }

    #[test]
    fn psi_examples() {
        let (p, d) = psi(&scalar(2.0), &one(), 4.0).unwrap();
        assert_relative_eq!(p, 0.25, epsilon = 1e-16);
        assert_relative_eq!(d, 0.5, epsilon = 1e-16);

        let null_data = DVector::from_vec(vec![0.0, 1.0]);
        for &a in &[1e-9, 1e-3, 1.0, 1e5] {
            assert_relative_eq!(
                psi(&diag10(), &null_data, a).unwrap().0,
                1.0,
                epsilon = 1e-15
            );
        }
        assert!(matches!(
            psi(&scalar(1.0), &one(), 0.0),
            Err(DsmError::Domain(_))
        ));
    }

    #[test]
    fn psi_sweep_is_monotone_with_correct_limit() {
        let fact = random_fact(6, 6, 5);
        let f = random_vector(6, 6);
        let spectrum = DataSpectrum::new(&fact, &f);
        let b = fact.spectral_bound();
        let grid: Vec<f64> = (0..1000)
            .map(|k| b * 10f64.powf(-12.0 + 18.0 * k as f64 / 999.0))
            .collect();
        let values: Vec<f64> = grid.iter().map(|&a| spectrum.psi(a)).collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0]));
        assert_relative_eq!(spectrum.psi(1e6 * b), f.norm_squared(), max_relative = 1e-6);
    }

    #[test]
    fn root_scalar_closed_form() {
        let cfg = DiscrepancyConfig::with_c(1.5);
        let a = solve_a_delta(&scalar(1.0), &one(), 0.1, &cfg).unwrap();
        assert_relative_eq!(a, 3.0 / 17.0, max_relative = 1e-12);
    }

    #[test]
    fn root_precondition_errors() {
        let cfg = DiscrepancyConfig::with_c(1.5);
        let f = DVector::from_element(1, 0.075);
        assert!(matches!(
            solve_a_delta(&scalar(1.0), &f, 0.1, &cfg),
            Err(DsmError::NoiseDominates { .. })
        ));
        let f = DVector::from_vec(vec![1.0, 0.5]);
        assert!(matches!(
            solve_a_delta(&diag10(), &f, 0.1, &cfg),
            Err(DsmError::InconsistentData { .. })
        ));
        assert!(matches!(
            solve_a_delta(&scalar(1.0), &one(), 0.1, &DiscrepancyConfig::with_c(2.0)),
            Err(DsmError::Config(_))
        ));
        assert!(matches!(
            solve_a_delta(&scalar(1.0), &one(), -0.1, &cfg),
            Err(DsmError::Domain(_))
        ));
    }

    #[test]
    fn root_matches_grid_scan() {
        let fact = random_fact(8, 8, 11);
        let f = random_vector(8, 12);
        let delta = 1e-3;
        let cfg = DiscrepancyConfig::with_c(1.5);
        let a = solve_a_delta(&fact, &f, delta, &cfg).unwrap();
        // Brute force: independent evaluation of a‖(AAᵀ + aI)⁻¹f‖ on a log grid.
        let mat = fact.operator().matrix();
        let gram = mat * mat.transpose();
        let disc = |a: f64| {
            let shifted = &gram + DMatrix::identity(8, 8) * a;
            a * shifted.lu().solve(&f).unwrap().norm()
        };
        let (lo, hi) = (a * 1e-2, a * 1e2);
        let points = 20_000;
        let ratio = (hi / lo).powf(1.0 / (points - 1) as f64);
        let best = (0..points)
            .map(|k| lo * ratio.powi(k))
            .min_by(|x, y| {
                (disc(*x) - 1.5 * delta)
                    .abs()
                    .total_cmp(&(disc(*y) - 1.5 * delta).abs())
            })
            .unwrap();
        assert!(
            (best / a).ln().abs() <= ratio.ln(),
            "scan {best} vs root {a}"
        );
    }

    #[test]
    fn h_value_examples() {
        let s = Schedule::default();
        let h = h_value(&s, &scalar(1.0), &one(), 99.0).unwrap();
        assert_relative_eq!(h, 0.1 / 1.1, max_relative = 1e-14);
        assert_eq!(
            h_value(&s, &scalar(1.0), &DVector::zeros(1), 5.0).unwrap(),
            0.0
        );

        let fact = random_fact(5, 4, 3);
        let f = random_vector(5, 4);
        let values: Vec<f64> = (0..100)
            .map(|k| h_value(&s, &fact, &f, k as f64 * 10.0).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_forcing_crossing() {
        let cfg = DiscrepancyConfig::default();
        let crossing = history_crossing(|_| 1.0, 0.5, 50.0, &cfg).unwrap();
        assert_relative_eq!(crossing.t, 2f64.ln(), max_relative = 1e-12);
        assert!(!crossing.is_final);
    }

    #[test]
    fn integral_rule_picks_decreasing_branch() {
        let s = Schedule::default();
        let cfg = DiscrepancyConfig::with_c(1.5);
        let rec = integral_stopping_time(&s, &scalar(1.0), &one(), 0.05, &cfg, 1e6).unwrap();
        assert_eq!(rec.rule, StoppingRule::Integral);
        assert!(rec.t_delta > 100.0 && rec.t_delta < 200.0, "{rec:?}");
        assert_relative_eq!(
            rec.a_delta,
            s.eval(rec.t_delta).unwrap().0,
            max_relative = 1e-14
        );
        assert!((rec.achieved_discrepancy - 0.075).abs() <= 1e-8 * 0.075);
    }

    #[test]
    fn integral_rule_errors() {
        let s = Schedule::default();
        let cfg = DiscrepancyConfig::with_c(1.5);
        let f = DVector::from_element(1, 0.07);
        assert!(matches!(
            integral_stopping_time(&s, &scalar(1.0), &f, 0.05, &cfg, 1e6),
            Err(DsmError::NoiseDominates { .. })
        ));
        assert!(matches!(
            integral_stopping_time(&s, &scalar(1.0), &one(), 0.05, &cfg, 20.0),
            Err(DsmError::HorizonExceeded { .. })
        ));
        // a(0) far below σ₁²: h(0) already under the level
        let small = Schedule::new(1e-3, 1.0, 0.5).unwrap();
        let big = scalar(100.0);
        assert!(matches!(
            integral_stopping_time(
                &small,
                &big,
                &DVector::from_element(1, 1.0),
                0.05,
                &cfg,
                1e6
            ),
            Err(DsmError::InitialDiscrepancy { .. })
        ));
    }

    #[test]
    fn residual_identity_examples() {
        let (l, r) = residual_identity(&scalar(2.0), &one(), 1.0).unwrap();
        assert_relative_eq!(l, 0.2, epsilon = 1e-15);
        assert_relative_eq!(r, 0.2, epsilon = 1e-15);

        let f = DVector::from_vec(vec![0.0, 1.0]);
        for &a in &[1e-6, 1.0, 10.0] {
            let (l, r) = residual_identity(&diag10(), &f, a).unwrap();
            assert_relative_eq!(l, 1.0, epsilon = 1e-15);
            assert_relative_eq!(r, 1.0, epsilon = 1e-15);
        }

        let fact = random_fact(10, 7, 17);
        let f = random_vector(10, 18);
        let (l, r) = residual_identity(&fact, &f, 1e-4).unwrap();
        assert!((l - r).abs() <= 1e-10 * f.norm());
    }

    #[test]
    fn delta_sweep_trends() {
        let fact = random_fact(6, 6, 23);
        let y = random_vector(6, 24);
        let f = fact.operator().apply(&y);
        let noise = random_vector(6, 25).normalize();
        let s = Schedule::default();
        let cfg = DiscrepancyConfig::with_c(1.5);
        let mut previous: Option<(f64, f64)> = None;
        for &delta in &[1e-1, 1e-2, 1e-3] {
            let f_delta = &f + &noise * delta;
            let a = solve_a_delta(&fact, &f_delta, delta, &cfg).unwrap();
            let t = integral_stopping_time(&s, &fact, &f_delta, delta, &cfg, 1e12)
                .unwrap()
                .t_delta;
            if let Some((pa, pt)) = previous {
                assert!(a < pa && t > pt);
            }
            previous = Some((a, t));
        }
    }

    #[test]
    fn lemma_diagnostics() {
        let fact = random_fact(5, 3, 31);
        let f = random_vector(5, 32);
        let spectrum = DataSpectrum::new(&fact, &f);
        assert!(spectrum.null_norm() > 0.0);
        let s = Schedule::default();
        let quad = QuadratureConfig::default();
        let ratios: Vec<f64> = [1.0, 10.0, 100.0, 1e3, 1e4]
            .iter()
            .map(|&t| log_derivative_h_squared(&s, &spectrum, t))
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
        assert!(ratios[4] < 1e-3);
        let ratio = history_ratio(&s, &spectrum, 1e4, &quad).unwrap();
        assert!((ratio - 1.0).abs() < 0.1);
    }
}
