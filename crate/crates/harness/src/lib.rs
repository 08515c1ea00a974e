//! Convergence sweeps, invariant verification and problem export built on
//! `dsm-core`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod sweep;
pub mod verify;

use dsm_core::DsmError;

pub use sweep::{run_sweep, write_report, ProblemSpec, RuleChoice, SweepConfig, SweepRow};
pub use verify::{run_verify, CheckOutcome, Suite, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] DsmError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Process exit status for the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    VerificationFailure = 1,
    Usage = 2,
    Precondition = 3,
}

impl HarnessError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            HarnessError::Usage(_) => ExitStatus::Usage,
            HarnessError::Solver(e) if e.is_precondition() => ExitStatus::Precondition,
            HarnessError::Solver(_) => ExitStatus::Usage,
            HarnessError::Io(_) | HarnessError::Csv(_) => ExitStatus::Usage,
        }
    }
}
