//! Solver configuration and the step parameters it resolves to.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::framework::sqrt_t_schedule;

/// Which divergence drives the transport updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Bregman ADMM with generalized KL: closed-form multiplicative updates.
    BadmmKL,
    /// Classical ADMM: Euclidean projections onto scaled simplices.
    AdmmEuclidean,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::BadmmKL => "badmm-kl",
            Variant::AdmmEuclidean => "admm",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "badmm-kl" | "badmm" => Ok(Variant::BadmmKL),
            "admm" | "admm-euclidean" => Ok(Variant::AdmmEuclidean),
            other => Err(Error::Format(format!("unknown variant '{other}'"))),
        }
    }
}

/// How `rho`, `tau`, `rho_x`, `rho_z` are chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// Use the configured values as-is.
    Constant,
    /// Fix the horizon `T = max_iters` and set `rho_x = rho_z = c1 sqrt(T)`,
    /// `tau = c2 sqrt(T)`, `rho = sqrt(T)` for the whole run.
    SqrtT { c1: f64, c2: f64 },
}

/// Penalty and step parameters of one generalized BADMM run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub rho: f64,
    pub tau: f64,
    pub rho_x: f64,
    pub rho_z: f64,
    /// Only enters diagnostics; never the iterates.
    pub gamma: f64,
}

impl StepParams {
    /// Exact BADMM: no proximal terms, `tau = rho`.
    pub fn exact(rho: f64) -> Self {
        StepParams {
            rho,
            tau: rho,
            rho_x: 0.0,
            rho_z: 0.0,
            gamma: DEFAULT_GAMMA,
        }
    }
}

pub const DEFAULT_RHO: f64 = 1e-3;
pub const DEFAULT_MAX_ITERS: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-4;
/// With `alpha = sigma = 1` this admits `tau = 3 rho / 4`.
pub const DEFAULT_GAMMA: f64 = 0.125;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rho: f64,
    /// `tau = tau_ratio * rho`.
    pub tau_ratio: f64,
    pub rho_x: f64,
    pub rho_z: f64,
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop once `max(primal, dual)` residual is at most this.
    /// `f64::INFINITY` disables the test and runs exactly `max_iters` sweeps.
    pub tol: f64,
    pub variant: Variant,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: DEFAULT_RHO,
            tau_ratio: 1.0,
            rho_x: 0.0,
            rho_z: 0.0,
            gamma: DEFAULT_GAMMA,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            variant: Variant::BadmmKL,
            schedule: Schedule::Constant,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        positive("rho", self.rho)?;
        positive("tau_ratio", self.tau_ratio)?;
        nonnegative("rho_x", self.rho_x)?;
        nonnegative("rho_z", self.rho_z)?;
        positive("gamma", self.gamma)?;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                value: self.tol,
                reason: "must be positive",
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if let Schedule::SqrtT { c1, c2 } = self.schedule {
            nonnegative("c1", c1)?;
            positive("c2", c2)?;
        }
        Ok(())
    }

    /// Resolves the schedule into the parameters used for every iteration.
    pub fn step_params(&self) -> Result<StepParams> {
        self.validate()?;
        Ok(match self.schedule {
            Schedule::Constant => StepParams {
                rho: self.rho,
                tau: self.tau_ratio * self.rho,
                rho_x: self.rho_x,
                rho_z: self.rho_z,
                gamma: self.gamma,
            },
            Schedule::SqrtT { c1, c2 } => {
                let (rho_x, rho_z, tau, rho) = sqrt_t_schedule(self.max_iters, c1, c2)?;
                StepParams {
                    rho,
                    tau,
                    rho_x,
                    rho_z,
                    gamma: self.gamma,
                }
            }
        })
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be nonnegative and finite",
        })
    }
}
