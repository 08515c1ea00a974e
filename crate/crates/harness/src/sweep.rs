//! δ-sweeps over one problem with one or both stopping rules.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use dsm_core::io::{format_float, load_matrix};
use dsm_core::problems::FredholmKind;
use dsm_core::{
    fredholm_problem, perturb, solve_theorem1, solve_theorem2, synthetic_problem, DenseOperator,
    DiscrepancyConfig, DsmError, DsmResult, IntegratorConfig, ProblemInstance, Schedule,
};

use crate::HarnessError;

/// Which problem to build.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// `n × n`, `σᵢ = 1/i²`, `y = Σ vᵢ/i`, random bases from the sweep seed.
    Synthetic,
    Fredholm(FredholmKind),
    /// Operator file (`.mtx` or CSV) and solution vector file (CSV).
    File {
        matrix: PathBuf,
        solution: PathBuf,
    },
}

impl FromStr for ProblemSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        if let Some(rest) = s.strip_prefix("file:") {
            let (matrix, solution) = rest.split_once(',').ok_or_else(|| {
                HarnessError::Usage(format!(
                    "file problem needs 'file:<matrix>,<solution>', got '{s}'"
                ))
            })?;
            return Ok(ProblemSpec::File {
                matrix: matrix.into(),
                solution: solution.into(),
            });
        }
        match s {
            "synthetic" => Ok(ProblemSpec::Synthetic),
            other => other
                .parse::<FredholmKind>()
                .map(ProblemSpec::Fredholm)
                .map_err(|_| HarnessError::Usage(format!("unknown problem '{other}'"))),
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Synthetic => f.write_str("synthetic"),
            ProblemSpec::Fredholm(kind) => write!(f, "{kind}"),
            ProblemSpec::File { matrix, solution } => {
                write!(f, "file:{},{}", matrix.display(), solution.display())
            }
        }
    }
}

impl ProblemSpec {
    pub fn build(&self, n: usize, seed: u64) -> Result<ProblemInstance, HarnessError> {
        let problem = match self {
            ProblemSpec::Synthetic => {
                let sigmas: Vec<f64> = (1..=n).map(|i| 1.0 / (i * i) as f64).collect();
                let coeffs: Vec<f64> = (1..=n).map(|i| 1.0 / i as f64).collect();
                synthetic_problem(&sigmas, &coeffs, n, n, seed)?
            }
            ProblemSpec::Fredholm(kind) => fredholm_problem(*kind, n)?,
            ProblemSpec::File { matrix, solution } => {
                let a = load_matrix(matrix)?;
                let y: DVector<f64> =
                    dsm_core::io::read_csv_vector(std::fs::File::open(solution)?)?;
                ProblemInstance::from_solution(DenseOperator::new(a)?, y, self.to_string())?
            }
        };
        Ok(problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleChoice {
    Integral,
    Root,
    Both,
}

impl FromStr for RuleChoice {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "integral" => Ok(RuleChoice::Integral),
            "root" => Ok(RuleChoice::Root),
            "both" => Ok(RuleChoice::Both),
            other => Err(HarnessError::Usage(format!("unknown rule '{other}'"))),
        }
    }
}

impl RuleChoice {
    fn rules(&self) -> &'static [&'static str] {
        match self {
            RuleChoice::Integral => &["integral"],
            RuleChoice::Root => &["root"],
            RuleChoice::Both => &["integral", "root"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub problem: ProblemSpec,
    pub n: usize,
    /// Strictly decreasing noise levels.
    pub deltas: Vec<f64>,
    pub c: f64,
    pub schedule: Schedule,
    pub rule: RuleChoice,
    pub seed: u64,
    pub quad_tolerance: f64,
    pub t_max: f64,
    /// Write `wall_time_ms` as an empty field so reports are byte-reproducible.
    pub omit_timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::Synthetic,
            n: 32,
            deltas: vec![1e-1, 1e-2, 1e-3, 1e-4],
            c: 1.5,
            schedule: Schedule::default(),
            rule: RuleChoice::Both,
            seed: 0,
            quad_tolerance: IntegratorConfig::default().quad_tolerance,
            t_max: 1e20,
            omit_timing: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.deltas.is_empty() {
            return Err(HarnessError::Usage("no noise levels given".into()));
        }
        if self.deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(HarnessError::Usage("noise levels must be positive".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(HarnessError::Usage(
                "noise levels must be strictly decreasing".into(),
            ));
        }
        if !(self.c > 1.0 && self.c < 2.0) {
            return Err(HarnessError::Usage(format!(
                "c must lie in (1, 2), got {}",
                self.c
            )));
        }
        if !(self.quad_tolerance > 0.0) {
            return Err(HarnessError::Usage(
                "quadrature tolerance must be positive".into(),
            ));
        }
        if !(self.t_max > 0.0) {
            return Err(HarnessError::Usage("t_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub delta: f64,
    pub rule: &'static str,
    pub outcome: Result<DsmResult, String>,
    pub wall_time_ms: f64,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "delta",
    "rule",
    "a_delta",
    "t_delta",
    "error",
    "residual",
    "delta_over_sqrt_a",
    "wall_time_ms",
    "status",
];

/// Runs every `(δ, rule)` pair. Solver failures become rows with an error
/// status; the sweep continues.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, HarnessError> {
    cfg.validate()?;
    let problem = cfg.problem.build(cfg.n, cfg.seed)?;
    log::info!(
        "sweep on {} ({}x{}), {} noise levels",
        problem.label(),
        problem.operator().rows(),
        problem.operator().cols(),
        cfg.deltas.len()
    );
    let dcfg = DiscrepancyConfig::with_c(cfg.c);
    let icfg = IntegratorConfig {
        quad_tolerance: cfg.quad_tolerance,
        ..IntegratorConfig::default()
    };
    let jobs: Vec<(f64, &'static str)> = cfg
        .deltas
        .iter()
        .flat_map(|&d| cfg.rule.rules().iter().map(move |&r| (d, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(delta, rule)| {
            let start = Instant::now();
            let outcome = perturb(&problem, delta, cfg.seed).and_then(|noisy| match rule {
                "integral" => {
                    solve_theorem1(&problem, &noisy, &cfg.schedule, &dcfg, &icfg, cfg.t_max)
                }
                _ => solve_theorem2(&problem, &noisy, &cfg.schedule, &dcfg, &icfg),
            });
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            if let Err(e) = &outcome {
                log::warn!("δ = {delta:e}, rule {rule}: {e}");
            }
            SweepRow {
                delta,
                rule,
                outcome: outcome.map_err(|e: DsmError| e.code().to_string()),
                wall_time_ms,
            }
        })
        .collect();
    Ok(rows)
}

/// RFC 4180 CSV with a header row and `%.16e` numbers.
pub fn write_report<W: Write>(
    writer: W,
    rows: &[SweepRow],
    omit_timing: bool,
) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for row in rows {
        let timing = if omit_timing {
            String::new()
        } else {
            format!("{:.3}", row.wall_time_ms)
        };
        let record: Vec<String> = match &row.outcome {
            Ok(res) => vec![
                format_float(row.delta),
                row.rule.to_string(),
                format_float(res.stopping.a_delta),
                format_float(res.stopping.t_delta),
                res.error_to_y.map(format_float).unwrap_or_default(),
                format_float(res.residual_norm),
                format_float(res.delta_over_sqrt_a),
                timing,
                "ok".to_string(),
            ],
            Err(code) => vec![
                format_float(row.delta),
                row.rule.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                timing,
                code.clone(),
            ],
        };
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}
