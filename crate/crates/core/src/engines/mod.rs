//! Step maps for every splitting method, the relaxation driver and the
//! parameter validator.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::space::DenseVector;

pub mod driver;
pub mod gcp;
pub mod primal;
pub mod primal_dual;
pub mod setup;
pub mod solve;
pub mod validate;

pub use driver::{
    iterate, relaxed_drive, Admission, DriveConfig, DriveOutcome, RhoSchedule, StopReason,
};
pub use gcp::{Egcp, Gcp};
pub use primal::{Admm, AdmmAlt, DavisYin, DouglasRachford, ForwardBackward, LiftedAdmm};
pub use primal_dual::{
    ChambollePock, CondatVu, Form, LorisVerhoeven, Pd3o, PddrQuad, Pdfp, ProximalMultipliers,
};
pub use setup::{Algorithm, GSource, Roles, SolverConfig};
pub use solve::{recommend, Recommendation, Solution, Solver, RECOMMEND_EPS};
pub use validate::{
    check, validate_params, validate_roles, Condition, NormTable, ParamInput, Theorem,
    ValidationReport,
};

/// Live iterate blocks of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct IterState {
    pub primary: DenseVector,
    pub duals: Vec<DenseVector>,
    /// Buffers of the economical forms, e.g. `L*u`.
    pub aux: BTreeMap<&'static str, DenseVector>,
    pub iter: usize,
}

impl IterState {
    pub fn new(primary: DenseVector) -> Self {
        Self::with_duals(primary, Vec::new())
    }

    pub fn with_duals(primary: DenseVector, duals: Vec<DenseVector>) -> Self {
        IterState {
            primary,
            duals,
            aux: BTreeMap::new(),
            iter: 0,
        }
    }

    pub fn dual(&self, i: usize) -> Result<&DenseVector> {
        self.duals
            .get(i)
            .ok_or_else(|| Error::ContractViolation(format!("state carries no dual block {i}")))
    }

    pub fn aux(&self, name: &'static str) -> Result<&DenseVector> {
        self.aux
            .get(name)
            .ok_or_else(|| Error::ContractViolation(format!("state carries no buffer `{name}`")))
    }

    /// Successor with the given blocks and an advanced counter.
    pub(crate) fn successor(&self, primary: DenseVector, duals: Vec<DenseVector>) -> IterState {
        IterState {
            primary,
            duals,
            aux: BTreeMap::new(),
            iter: self.iter + 1,
        }
    }

    pub(crate) fn with_aux(mut self, name: &'static str, v: DenseVector) -> IterState {
        self.aux.insert(name, v);
        self
    }

    /// `(primary, duals…)` as one list.
    pub fn blocks(&self) -> Vec<DenseVector> {
        std::iter::once(self.primary.clone())
            .chain(self.duals.iter().cloned())
            .collect()
    }
}

/// Result of one application of a step map.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub next: IterState,
    /// Relaxed blocks `z` before the step.
    pub z: Vec<DenseVector>,
    /// Their images `T z` under the unrelaxed map.
    pub tz: Vec<DenseVector>,
    /// Primal estimate `x^{(i+½)}`.
    pub estimate: DenseVector,
    /// Dual estimates at the half step, when the method produces them.
    pub dual_estimates: Vec<DenseVector>,
}

impl StepOutcome {
    /// `‖T z − z‖ / (1 + ‖z‖)`
    pub fn residual(&self) -> f64 {
        let mut diff = 0.0;
        let mut norm = 0.0;
        for (z, tz) in self.z.iter().zip(&self.tz) {
            diff += z
                .as_slice()
                .iter()
                .zip(tz.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            norm += z.norm_sq();
        }
        diff.sqrt() / (1.0 + norm.sqrt())
    }
}

pub trait StepMap {
    fn name(&self) -> &'static str;

    /// Fills the buffers the economical forms keep alongside the iterate.
    fn prepare(&self, state: IterState) -> Result<IterState> {
        Ok(state)
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome>;
}

impl<S: StepMap + ?Sized> StepMap for Box<S> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn prepare(&self, state: IterState) -> Result<IterState> {
        (**self).prepare(state)
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        (**self).step(state, rho)
    }
}

/// Relaxes every pair `(z_k, t_k)` with the same `ρ`.
pub(crate) fn relax_all(
    z: &[DenseVector],
    tz: &[DenseVector],
    rho: f64,
) -> Result<Vec<DenseVector>> {
    z.iter().zip(tz).map(|(a, b)| a.relax(b, rho)).collect()
}
