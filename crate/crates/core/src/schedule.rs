//! Regularization schedules `a(t)`.
//!
//! The DSM needs `a(t) > 0` decreasing to zero with `ȧ/a → 0`; the second
//! stopping rule additionally needs `ȧ/a² → 0`. The power law
//! `a(t) = c0 / (c1 + t)^b` with `0 < b < 1` satisfies both.

use std::fmt;
use std::str::FromStr;

use crate::error::{DsmError, Result};
use crate::roots::{bisect, Split};

/// A regularization path: value `a(t)` and derivative `ȧ(t)`.
///
/// Implemented by [`Schedule`] and by [`FrozenParameter`], the constant path
/// used to check the integrator against closed forms.
pub trait ParameterPath: Sync {
    fn value(&self, t: f64) -> f64;
    fn rate(&self, t: f64) -> f64;
}

/// Constant `a(t) ≡ a`. Not a valid DSM schedule (it does not decay).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenParameter(pub f64);

impl ParameterPath for FrozenParameter {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }

    fn rate(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Faster power law on `[0, switch_time]`, joined continuously to the main
/// schedule at `switch_time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialOverride {
    pub switch_time: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    c0: f64,
    c1: f64,
    b: f64,
    initial_override: Option<InitialOverride>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            c0: 1.0,
            c1: 1.0,
            b: 0.5,
            initial_override: None,
        }
    }
}

impl Schedule {
    pub fn new(c0: f64, c1: f64, b: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(DsmError::Config(format!("c0 must be positive, got {c0}")));
        }
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(DsmError::Config(format!("c1 must be positive, got {c1}")));
        }
        if !(b > 0.0 && b < 1.0) {
            return Err(DsmError::Config(format!(
                "exponent b must lie in (0, 1), got {b}"
            )));
        }
        Ok(Self {
            c0,
            c1,
            b,
            initial_override: None,
        })
    }

    /// Splices a power law with exponent `exponent ≥ b` onto `[0, switch_time]`.
    pub fn with_initial_override(mut self, switch_time: f64, exponent: f64) -> Result<Self> {
        if !(switch_time >= 0.0 && switch_time.is_finite()) {
            return Err(DsmError::Config(format!(
                "switch time must be nonnegative, got {switch_time}"
            )));
        }
        if !(exponent >= self.b && exponent.is_finite()) {
            return Err(DsmError::Config(format!(
                "initial exponent must be at least b = {}, got {exponent}",
                self.b
            )));
        }
        self.initial_override = Some(InitialOverride {
            switch_time,
            exponent,
        });
        Ok(self)
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn initial_override(&self) -> Option<InitialOverride> {
        self.initial_override
    }

    /// `(a(t), ȧ(t))`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(DsmError::Domain(format!(
                "time must be nonnegative, got {t}"
            )));
        }
        Ok((self.value_unchecked(t), self.rate_unchecked(t)))
    }

    /// `a(0)`.
    pub fn initial_value(&self) -> f64 {
        self.value_unchecked(0.0)
    }

    fn tail_value(&self, t: f64) -> f64 {
        self.c0 / (self.c1 + t).powf(self.b)
    }

    fn value_unchecked(&self, t: f64) -> f64 {
        match self.initial_override {
            Some(ov) if t < ov.switch_time => {
                let joint = self.tail_value(ov.switch_time);
                joint * ((self.c1 + ov.switch_time) / (self.c1 + t)).powf(ov.exponent)
            }
            _ => self.tail_value(t),
        }
    }

    fn rate_unchecked(&self, t: f64) -> f64 {
        let exponent = match self.initial_override {
            Some(ov) if t < ov.switch_time => ov.exponent,
            _ => self.b,
        };
        -exponent * self.value_unchecked(t) / (self.c1 + t)
    }

    /// Solves `a(t) = a_target` for `t ≥ 0`.
    pub fn inverse_time(&self, a_target: f64) -> Result<f64> {
        if !(a_target > 0.0 && a_target.is_finite()) {
            return Err(DsmError::Domain(format!(
                "target parameter must be positive, got {a_target}"
            )));
        }
        let a0 = self.initial_value();
        if a_target > a0 {
            return Err(DsmError::NoSolution(format!(
                "target {a_target:e} exceeds a(0) = {a0:e}"
            )));
        }
        if a_target == a0 {
            return Ok(0.0);
        }
        match self.initial_override {
            None => Ok(((self.c0 / a_target).powf(1.0 / self.b) - self.c1).max(0.0)),
            Some(ov) => {
                let mut hi = ov.switch_time.max(1.0);
                while self.value_unchecked(hi) > a_target {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(DsmError::NoSolution(format!(
                            "target {a_target:e} is below the representable range of the schedule"
                        )));
                    }
                }
                let root = bisect(
                    |t| self.value_unchecked(t) / a_target - 1.0,
                    0.0,
                    hi,
                    Split::Arithmetic,
                    400,
                )?;
                Ok(root.x)
            }
        }
    }

    /// Samples `|ȧ|/a` and `|ȧ|/a²` on a geometric grid ending at `horizon`
    /// and reports whether each sequence decreases strictly once past the
    /// initial override (if any).
    pub fn check_conditions(&self, horizon: f64, samples: usize) -> Result<ConditionReport> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(DsmError::InvalidInput(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if samples < 2 {
            return Err(DsmError::InvalidInput(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        let start = if horizon > 1.0 { 1.0 } else { horizon * 1e-3 };
        let ratio = horizon / start;
        let times: Vec<f64> = (0..samples)
            .map(|k| {
                if k + 1 == samples {
                    horizon
                } else {
                    start * ratio.powf(k as f64 / (samples - 1) as f64)
                }
            })
            .collect();
        let (log_rate, rate_over_square): (Vec<f64>, Vec<f64>) = times
            .iter()
            .map(|&t| {
                let a = self.value_unchecked(t);
                let rate = self.rate_unchecked(t).abs();
                (rate / a, rate / (a * a))
            })
            .unzip();
        let settle = self.initial_override.map_or(0.0, |ov| ov.switch_time);
        let tail = times
            .iter()
            .position(|&t| t >= settle)
            .unwrap_or(times.len());
        let decreasing = |seq: &[f64]| seq[tail..].windows(2).all(|w| w[1] < w[0]);
        Ok(ConditionReport {
            log_rate_decreasing: decreasing(&log_rate),
            rate_over_square_decreasing: decreasing(&rate_over_square),
            times,
            log_rate,
            rate_over_square,
        })
    }
}

impl ParameterPath for Schedule {
    fn value(&self, t: f64) -> f64 {
        self.value_unchecked(t.max(0.0))
    }

    fn rate(&self, t: f64) -> f64 {
        self.rate_unchecked(t.max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub times: Vec<f64>,
    /// `|ȧ|/a`
    pub log_rate: Vec<f64>,
    /// `|ȧ|/a²`
    pub rate_over_square: Vec<f64>,
    pub log_rate_decreasing: bool,
    pub rate_over_square_decreasing: bool,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c0={},c1={},b={}", self.c0, self.c1, self.b)?;
        if let Some(ov) = self.initial_override {
            write!(f, ",switch={},fast={}", ov.switch_time, ov.exponent)?;
        }
        Ok(())
    }
}

/// Parses `c0=<v>,c1=<v>,b=<v>`, with optional `switch=<T>,fast=<p>`.
/// Omitted constants keep their defaults.
impl FromStr for Schedule {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        let defaults = Schedule::default();
        let (mut c0, mut c1, mut b) = (defaults.c0, defaults.c1, defaults.b);
        let mut switch = None;
        let mut fast = None;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| DsmError::Parse(format!("expected key=value, got '{part}'")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| DsmError::Parse(format!("bad number in '{part}'")))?;
            match key.trim() {
                "c0" => c0 = value,
                "c1" => c1 = value,
                "b" => b = value,
                "switch" => switch = Some(value),
                "fast" => fast = Some(value),
                other => return Err(DsmError::Parse(format!("unknown schedule key '{other}'"))),
            }
        }
        let schedule = Schedule::new(c0, c1, b)?;
        match (switch, fast) {
            (None, None) => Ok(schedule),
            (Some(t), Some(p)) => schedule.with_initial_override(t, p),
            _ => Err(DsmError::Parse(
                "initial override needs both 'switch' and 'fast'".to_string(),
            )),
        }
    }
}
