//! Per-iteration solver records.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub elapsed_sec: f64,
    /// `<C, X>` for transport, composite objective for logistic.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Optimality-condition residual `R(t+1)`.
    pub r_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    IterationLimit,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Converged => "converged",
            TerminationReason::IterationLimit => "iteration limit",
        }
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered trace: `iter` strictly increasing, `elapsed_sec` nondecreasing,
/// residuals nonnegative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        for (name, value) in [
            ("primal_residual", record.primal_residual),
            ("dual_residual", record.dual_residual),
            ("r_residual", record.r_residual),
        ] {
            if !(value >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "residuals must be nonnegative",
                });
            }
        }
        if !(record.elapsed_sec >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "elapsed_sec",
                value: record.elapsed_sec,
                reason: "must be nonnegative",
            });
        }
        if let Some(last) = self.records.last() {
            if record.iter <= last.iter {
                return Err(Error::InvalidParameter {
                    name: "iter",
                    value: record.iter as f64,
                    reason: "must strictly increase",
                });
            }
            if record.elapsed_sec < last.elapsed_sec {
                return Err(Error::InvalidParameter {
                    name: "elapsed_sec",
                    value: record.elapsed_sec,
                    reason: "must not decrease",
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
