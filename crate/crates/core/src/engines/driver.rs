//! The relaxation loop `z⁺ = z + ρ⁽ⁱ⁾(T z − z)` shared by every method.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;
use std::sync::Arc;

use super::validate::ValidationReport;
use super::{IterState, StepMap, StepOutcome};
use crate::error::{Error, Result};

/// Relaxation sequence `i ↦ ρ⁽ⁱ⁾`.
#[derive(Clone)]
pub enum RhoSchedule {
    Constant(f64),
    /// Linear ramp from `from` to `to` over the first `over` iterations.
    Ramp {
        from: f64,
        to: f64,
        over: usize,
    },
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for RhoSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoSchedule::Constant(r) => write!(f, "Constant({r})"),
            RhoSchedule::Ramp { from, to, over } => write!(f, "Ramp({from} -> {to} over {over})"),
            RhoSchedule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl RhoSchedule {
    pub fn at(&self, i: usize) -> f64 {
        match self {
            RhoSchedule::Constant(r) => *r,
            RhoSchedule::Ramp { from, to, over } => {
                if *over == 0 || i >= *over {
                    *to
                } else {
                    from + (to - from) * i as f64 / *over as f64
                }
            }
            RhoSchedule::Custom(f) => f(i),
        }
    }

    /// Values taken over `0..n`, used by the validator.
    pub fn values(&self, n: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..n).map(move |i| (i, self.at(i)))
    }
}

impl FromStr for RhoSchedule {
    type Err = Error;

    /// `a` for a constant, `a:b:ramp` for a ramp from `a` to `b` over 100
    /// iterations, `a:b:ramp:k` for a ramp over `k` iterations.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse relaxation schedule `{s}`"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        match parts.as_slice() {
            [a] => Ok(RhoSchedule::Constant(num(a).ok_or_else(bad)?)),
            [a, b, "ramp"] => Ok(RhoSchedule::Ramp {
                from: num(a).ok_or_else(bad)?,
                to: num(b).ok_or_else(bad)?,
                over: 100,
            }),
            [a, b, "ramp", k] => Ok(RhoSchedule::Ramp {
                from: num(a).ok_or_else(bad)?,
                to: num(b).ok_or_else(bad)?,
                over: k.trim().parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DriveConfig {
    pub rho: RhoSchedule,
    pub max_iter: usize,
    pub stop_tol: f64,
}

impl DriveConfig {
    pub fn new(rho: RhoSchedule, max_iter: usize, stop_tol: f64) -> Self {
        DriveConfig {
            rho,
            max_iter,
            stop_tol,
        }
    }
}

/// Permission to run: a validator verdict, or an explicit override.
#[derive(Clone, Copy, Debug)]
pub enum Admission<'a> {
    Validated(&'a ValidationReport),
    Unsafe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIter,
    /// The hook asked to stop.
    Halted,
}

#[derive(Clone, Debug)]
pub struct DriveOutcome {
    pub state: IterState,
    /// The last step, carrying the half-step estimates.
    pub last: Option<StepOutcome>,
    pub reason: StopReason,
    pub iterations: usize,
    pub residual: f64,
    pub unsafe_run: bool,
}

fn is_non_finite(err: &Error) -> bool {
    match err {
        Error::NonFinite { .. } => true,
        Error::Block { source, .. } => is_non_finite(source),
        _ => false,
    }
}

/// Runs the relaxed iteration. The hook sees every step with the `ρ` that
/// was applied and may stop the run early.
pub fn relaxed_drive<S, H>(
    step: &S,
    state: IterState,
    cfg: &DriveConfig,
    admission: Admission<'_>,
    mut hook: H,
) -> Result<DriveOutcome>
where
    S: StepMap + ?Sized,
    H: FnMut(&StepOutcome, f64) -> ControlFlow<()>,
{
    let unsafe_run = match admission {
        Admission::Validated(report) if !report.admissible => {
            return Err(Error::ContractViolation(format!(
                "parameters rejected by {}: {}",
                report.theorem_tag,
                report
                    .violated
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("; ")
            )))
        }
        Admission::Validated(_) => false,
        Admission::Unsafe => true,
    };
    let mut state = step.prepare(state)?;
    let mut last = None;
    let mut residual = f64::INFINITY;
    for i in 0..cfg.max_iter {
        let rho = cfg.rho.at(i);
        let outcome = step.step(&state, rho).map_err(|e| {
            if is_non_finite(&e) {
                Error::Divergence { iter: i }
            } else {
                e
            }
        })?;
        residual = outcome.residual();
        if !residual.is_finite() {
            return Err(Error::Divergence { iter: i });
        }
        let flow = hook(&outcome, rho);
        state = outcome.next.clone();
        last = Some(outcome);
        if residual <= cfg.stop_tol {
            return Ok(DriveOutcome {
                state,
                last,
                reason: StopReason::Converged,
                iterations: i + 1,
                residual,
                unsafe_run,
            });
        }
        if flow.is_break() {
            return Ok(DriveOutcome {
                state,
                last,
                reason: StopReason::Halted,
                iterations: i + 1,
                residual,
                unsafe_run,
            });
        }
    }
    Ok(DriveOutcome {
        state,
        last,
        reason: StopReason::MaxIter,
        iterations: cfg.max_iter,
        residual,
        unsafe_run,
    })
}

/// Runs `n` steps without admission checks or stopping; used by tests and
/// the equivalence harness.
pub fn iterate<S: StepMap + ?Sized>(
    step: &S,
    state: IterState,
    rho: &RhoSchedule,
    n: usize,
) -> Result<Vec<StepOutcome>> {
    let mut state = step.prepare(state)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let o = step.step(&state, rho.at(i))?;
        state = o.next.clone();
        out.push(o);
    }
    Ok(out)
}
