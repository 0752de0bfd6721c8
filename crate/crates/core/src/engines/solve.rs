//! One-call entry point: assign roles, bound norms, validate, iterate.

use std::ops::ControlFlow;

use super::driver::{relaxed_drive, Admission, DriveConfig, DriveOutcome};
use super::setup::{Roles, SolverConfig};
use super::validate::{validate_roles, NormTable, ValidationReport};
use super::StepOutcome;
use crate::error::Result;
use crate::problems::ProblemSpec;
use crate::space::DenseVector;

/// A configured method on a fixed problem.
#[derive(Clone, Debug)]
pub struct Solver {
    pub cfg: SolverConfig,
    pub roles: Roles,
    pub norms: NormTable,
    pub report: ValidationReport,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Primal estimate of the last step.
    pub x: DenseVector,
    /// One dual per problem term.
    pub term_duals: Vec<DenseVector>,
    pub outcome: DriveOutcome,
}

impl Solver {
    pub fn new(problem: &ProblemSpec, cfg: SolverConfig) -> Result<Solver> {
        cfg.check_relevant()?;
        let roles = Roles::assign(cfg.algorithm, problem)?;
        let norms = NormTable::estimate(&cfg, &roles)?;
        let report = validate_roles(&cfg, &roles, &norms)?;
        Ok(Solver {
            cfg,
            roles,
            norms,
            report,
        })
    }

    pub fn run(&self, x0: Option<&DenseVector>, allow_unsafe: bool) -> Result<Solution> {
        self.run_with(x0, allow_unsafe, |_, _| ControlFlow::Continue(()))
    }

    /// Runs with a hook that sees every step and the `ρ` applied.
    pub fn run_with<H>(
        &self,
        x0: Option<&DenseVector>,
        allow_unsafe: bool,
        hook: H,
    ) -> Result<Solution>
    where
        H: FnMut(&StepOutcome, f64) -> ControlFlow<()>,
    {
        let step = self.roles.step_map(&self.cfg)?;
        let state = self.roles.initial_state(&self.cfg, x0)?;
        let admission = if allow_unsafe {
            Admission::Unsafe
        } else {
            Admission::Validated(&self.report)
        };
        let drive = DriveConfig::new(self.cfg.rho.clone(), self.cfg.max_iter, self.cfg.stop_tol);
        let outcome = relaxed_drive(&step, state, &drive, admission, hook)?;
        let (x, term_duals) = match &outcome.last {
            Some(last) => {
                let duals = match last.dual_estimates.first() {
                    Some(u) => self.roles.term_duals(u)?,
                    None => Vec::new(),
                };
                (last.estimate.clone(), duals)
            }
            None => (
                x0.cloned()
                    .unwrap_or_else(|| DenseVector::zeros(self.roles.dim)),
                Vec::new(),
            ),
        };
        Ok(Solution {
            x,
            term_duals,
            outcome,
        })
    }
}

/// Margin used for the recommended settings.
pub const RECOMMEND_EPS: f64 = 0.01;

/// One forward–backward setting with its verdict.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Recommendation {
    pub gamma: f64,
    pub rho: f64,
    pub quadratic_mode: bool,
    pub report: ValidationReport,
    /// Set when `h` is not quadratic and only the general setting applies.
    pub restricted: bool,
}

/// The three forward–backward settings worth trying, with `ξ = 1/β`:
/// `(γ = (2−ε)ξ, ρ = 1)`, `(γ = ξ, ρ = 1)` and `(γ = ξ, ρ = 2−ε)`. Only the
/// first is offered when `h` is not quadratic.
pub fn recommend(problem: &ProblemSpec) -> Result<Vec<Recommendation>> {
    use super::setup::Algorithm;
    let roles = Roles::assign(Algorithm::Fb, problem)?;
    let info = roles
        .h
        .smooth_info()
        .ok_or(crate::error::Error::NotSmooth("h"))?;
    if info.lipschitz <= 0.0 {
        return Err(crate::error::Error::InvalidArgument(
            "h has no curvature; any step size is admissible".into(),
        ));
    }
    let xi = 1.0 / info.lipschitz;
    let eps = RECOMMEND_EPS;
    let mut settings = vec![((2.0 - eps) * xi, 1.0, false)];
    if info.is_quadratic {
        settings.push((xi, 1.0, true));
        settings.push((xi, 2.0 - eps, true));
    }
    settings
        .into_iter()
        .map(|(gamma, rho, quadratic_mode)| {
            let cfg = SolverConfig::new(Algorithm::Fb)
                .gamma(gamma)
                .rho(rho)
                .quadratic_mode(quadratic_mode);
            let report = validate_roles(&cfg, &roles, &NormTable::estimate(&cfg, &roles)?)?;
            Ok(Recommendation {
                gamma,
                rho,
                quadratic_mode,
                report,
                restricted: !info.is_quadratic,
            })
        })
        .collect()
}
