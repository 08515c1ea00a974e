//! Composite Gauss–Legendre quadrature and the exponential memory kernel
//! `∫₀ᵗ e^{−(t−s)} q(s) ds` shared by the DSM integrator and the integral
//! discrepancy rule.

use std::sync::OnceLock;

use crate::error::{DsmError, Result};

/// Points per Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 10;

/// Lag beyond which the factor `e^{−x}` (< 1e−26) is dropped from convolutions
/// whose forcing does not grow toward the past.
pub const MEMORY_WINDOW: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Relative change of the composite sum between refinements.
    pub tolerance: f64,
    /// Cap on total integrand evaluations.
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_nodes: 1 << 18,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(DsmError::Config(format!(
                "quadrature tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_nodes < 2 * PANEL_ORDER {
            return Err(DsmError::Config(format!(
                "max_nodes must be at least {}, got {}",
                2 * PANEL_ORDER,
                self.max_nodes
            )));
        }
        Ok(())
    }
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from Chebyshev-like initial guesses.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared table of order [`PANEL_ORDER`].
    pub fn panel_rule() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        half * sum
    }

    /// Sum over `panels` equal panels of `[lo, hi]`.
    pub fn integrate_composite<F: Fn(f64) -> f64>(
        &self,
        lo: f64,
        hi: f64,
        panels: usize,
        f: F,
    ) -> f64 {
        let width = (hi - lo) / panels as f64;
        (0..panels)
            .map(|k| {
                let a = lo + k as f64 * width;
                let b = if k + 1 == panels { hi } else { a + width };
                self.integrate(a, b, &f)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre on `[lo, hi]`, doubling the panel count until the
/// relative change of the sum drops to `cfg.tolerance`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    let rule = GaussLegendre::panel_rule();
    let mut panels = 2usize;
    let mut previous = rule.integrate_composite(lo, hi, 1, &f);
    loop {
        let current = rule.integrate_composite(lo, hi, panels, &f);
        if !current.is_finite() {
            return Err(DsmError::Accuracy(format!(
                "non-finite quadrature sum on [{lo}, {hi}]"
            )));
        }
        if (current - previous).abs() <= cfg.tolerance * current.abs() {
            return Ok(current);
        }
        if 2 * panels * rule.order() > cfg.max_nodes {
            return Err(DsmError::Accuracy(format!(
                "quadrature on [{lo}, {hi}] did not reach relative tolerance {:e} within {} nodes (last change {:e})",
                cfg.tolerance,
                cfg.max_nodes,
                (current - previous).abs()
            )));
        }
        previous = current;
        panels *= 2;
    }
}

/// `∫₀ᵗ e^{−(t−s)} q(s) ds`, evaluated in the lag variable `x = t − s` over
/// `[0, min(t, window)]`. Pass `f64::INFINITY` to integrate the full history.
pub fn exp_convolution<F: Fn(f64) -> f64>(
    q: F,
    t: f64,
    window: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(DsmError::Domain(format!(
            "convolution time must be nonnegative, got {t}"
        )));
    }
    let span = t.min(window);
    integrate_adaptive(|x| (-x).exp() * q(t - x), 0.0, span, cfg)
}
