//! Convergence conditions for each method and the admissible relaxation
//! range they imply.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::driver::RhoSchedule;
use super::setup::{Algorithm, Roles, SolverConfig};
use crate::error::{Error, Result};
use crate::problems::ProblemSpec;
use crate::space::{LinOp, NORM_MAX_ITER, NORM_SEED, NORM_TOL};

/// Relative slack when comparing a product of step sizes with its bound.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Margin keeping relaxation values inside `[ε, δ − ε]` after burn-in.
pub const RHO_MARGIN: f64 = 1e-3;

/// Schedule values checked by the validator when `max_iter` is larger.
pub const RHO_CHECK_HORIZON: usize = 1_000_000;

pub const NORM_L: &str = "L";
pub const NORM_K: &str = "K";
pub const NORM_Q_PLUS_SIGMA_LTL: &str = "Q + sigma L*L";
pub const NORM_TAU_KKT_PLUS_Q: &str = "tau K K* + Q";
pub const NORM_PARALLEL: &str = "sum sigma_m L_m* L_m";
pub const NORM_Q_PLUS_PARALLEL: &str = "Q + sum sigma_m L_m* L_m";

/// The convergence statements the validator knows, one per distinct set of
/// hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    FbGeneral,
    FbQuadratic,
    ProximalPoint,
    DouglasRachford,
    Admm,
    AdmmAlt,
    AdmmLifted,
    LvStrict,
    LvBoundary,
    LvQuadratic,
    PdfpAffine,
    PdfpGeneral,
    CpStrict,
    CpBoundary,
    Pmm,
    GcpStrict,
    GcpBoundary,
    CvGeneral,
    CvQuadratic,
    Egcp,
    Pd3oStrict,
    Pd3oBoundary,
    DavisYin,
    PddrQuadratic,
    ParallelDr,
    ParallelCp,
    ParallelLvStrict,
    ParallelLvBoundary,
    ParallelLvQuadratic,
    ParallelCv,
    ParallelCvQuadratic,
    ParallelDy,
    ParallelPd3o,
}

impl Theorem {
    pub fn tag(self) -> &'static str {
        match self {
            Theorem::FbGeneral => "fb.general",
            Theorem::FbQuadratic => "fb.quadratic",
            Theorem::ProximalPoint => "ppa",
            Theorem::DouglasRachford => "dr",
            Theorem::Admm => "admm",
            Theorem::AdmmAlt => "admm.alt",
            Theorem::AdmmLifted => "admm.lifted",
            Theorem::LvStrict => "lv.strict",
            Theorem::LvBoundary => "lv.boundary",
            Theorem::LvQuadratic => "lv.quadratic",
            Theorem::PdfpAffine => "pdfp.affine",
            Theorem::PdfpGeneral => "pdfp.general",
            Theorem::CpStrict => "cp.strict",
            Theorem::CpBoundary => "cp.boundary",
            Theorem::Pmm => "pmm",
            Theorem::GcpStrict => "gcp.strict",
            Theorem::GcpBoundary => "gcp.boundary",
            Theorem::CvGeneral => "cv.general",
            Theorem::CvQuadratic => "cv.quadratic",
            Theorem::Egcp => "egcp",
            Theorem::Pd3oStrict => "pd3o.strict",
            Theorem::Pd3oBoundary => "pd3o.boundary",
            Theorem::DavisYin => "dy",
            Theorem::PddrQuadratic => "pddr.quadratic",
            Theorem::ParallelDr => "parallel.dr",
            Theorem::ParallelCp => "parallel.cp",
            Theorem::ParallelLvStrict => "parallel.lv.strict",
            Theorem::ParallelLvBoundary => "parallel.lv.boundary",
            Theorem::ParallelLvQuadratic => "parallel.lv.quadratic",
            Theorem::ParallelCv => "parallel.cv",
            Theorem::ParallelCvQuadratic => "parallel.cv.quadratic",
            Theorem::ParallelDy => "parallel.dy",
            Theorem::ParallelPd3o => "parallel.pd3o",
        }
    }

    /// Whether the statement assumes a quadratic `h`.
    pub fn needs_quadratic(self) -> bool {
        matches!(
            self,
            Theorem::FbQuadratic
                | Theorem::LvQuadratic
                | Theorem::CvQuadratic
                | Theorem::PddrQuadratic
                | Theorem::ParallelLvQuadratic
                | Theorem::ParallelCvQuadratic
        )
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One inequality `lhs < rhs` or `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub satisfied: bool,
}

impl Condition {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, strict: bool) -> Self {
        let satisfied = if !lhs.is_finite() {
            false
        } else if rhs == f64::INFINITY {
            true
        } else if strict {
            lhs < rhs
        } else {
            lhs <= rhs + BOUNDARY_RTOL * rhs.abs().max(1.0)
        };
        Condition {
            name: name.into(),
            lhs,
            rhs,
            strict,
            satisfied,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.strict { "<" } else { "<=" };
        write!(f, "{}: {} {op} {}", self.name, self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub admissible: bool,
    /// Largest relaxation the statement allows.
    pub delta: f64,
    pub violated: Vec<Condition>,
    pub conditions: Vec<Condition>,
    pub theorem_tag: String,
    #[serde(skip)]
    pub theorem: Option<Theorem>,
}

/// Certified operator-norm bounds by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NormTable(pub BTreeMap<String, f64>);

impl NormTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn insert(&mut self, key: &str, value: f64) {
        self.0.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.0
            .get(key)
            .copied()
            .ok_or_else(|| Error::MissingNorm(key.to_string()))
    }

    /// Bounds every norm that the chosen method's conditions refer to.
    pub fn estimate(cfg: &SolverConfig, roles: &Roles) -> Result<NormTable> {
        let mut table = NormTable::new();
        table.insert(NORM_L, bound(&roles.l)?);
        if let Some(k) = &roles.k {
            table.insert(NORM_K, bound(k)?);
        }
        let sigma = cfg.sigma.unwrap_or(0.0);
        if let (Some(q), true) = (
            roles.quadratic_operator(),
            matches!(cfg.algorithm, Algorithm::CvI | Algorithm::CvII),
        ) {
            let sum = LinOp::scaled_sum(vec![(1.0, q), (sigma, LinOp::gram(roles.l.clone()))])?;
            table.insert(
                NORM_Q_PLUS_SIGMA_LTL,
                sum.estimate_norm(NORM_TOL, NORM_MAX_ITER, NORM_SEED)?,
            );
        }
        if let (Some(k), Some(qd), Some(tau)) = (&roles.k, &roles.qdual, cfg.tau) {
            let kk = LinOp::gram(LinOp::adjoint(k.clone()));
            let sum = LinOp::scaled_sum(vec![(tau, kk), (1.0, qd.clone())])?;
            table.insert(
                NORM_TAU_KKT_PLUS_Q,
                sum.estimate_norm(NORM_TOL, NORM_MAX_ITER, NORM_SEED)?,
            );
        }
        Ok(table)
    }
}

fn bound(op: &LinOp) -> Result<f64> {
    match op.norm_bound() {
        Some(b) => Ok(b),
        None => op.estimate_norm(NORM_TOL, NORM_MAX_ITER, NORM_SEED),
    }
}

/// Scalar inputs of the conditions.
#[derive(Clone, Debug)]
pub struct ParamInput<'a> {
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    /// Lipschitz constant of `∇h`.
    pub beta: f64,
    pub h_quadratic: bool,
    pub norms: &'a NormTable,
    pub rho: &'a RhoSchedule,
    pub max_iter: usize,
    pub burn_in: usize,
}

fn require(name: &str, v: Option<f64>) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {x}"
        ))),
        None => Err(Error::InvalidArgument(format!("{name} is required"))),
    }
}

fn over_beta(scale: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        f64::INFINITY
    } else {
        scale / beta
    }
}

/// Conditions and `δ` of one statement, without the relaxation check.
fn step_conditions(theorem: Theorem, p: &ParamInput<'_>) -> Result<(Vec<Condition>, f64)> {
    use Theorem as T;
    let beta = p.beta;
    let mut conds = Vec::new();
    let delta;
    match theorem {
        T::FbGeneral | T::FbQuadratic => {
            let gamma = require("gamma", p.gamma)?;
            if theorem == T::FbGeneral {
                conds.push(Condition::new(
                    "gamma < 2/beta",
                    gamma,
                    over_beta(2.0, beta),
                    true,
                ));
                delta = 2.0 - gamma * beta / 2.0;
            } else {
                conds.push(Condition::new(
                    "gamma <= 1/beta",
                    gamma,
                    over_beta(1.0, beta),
                    false,
                ));
                delta = 2.0;
            }
        }
        T::ProximalPoint | T::DouglasRachford | T::Admm | T::AdmmLifted | T::ParallelDr => {
            require("tau", p.tau.or(p.gamma))?;
            delta = 2.0;
        }
        T::AdmmAlt => {
            require("tau", p.tau)?;
            delta = (1.0 + 5f64.sqrt()) / 2.0;
        }
        T::LvStrict
        | T::LvBoundary
        | T::PdfpAffine
        | T::PdfpGeneral
        | T::Pd3oStrict
        | T::Pd3oBoundary => {
            let (tau, sigma) = (require("tau", p.tau)?, require("sigma", p.sigma)?);
            let l = p.norms.get(NORM_L)?;
            conds.push(Condition::new(
                "tau < 2/beta",
                tau,
                over_beta(2.0, beta),
                true,
            ));
            let strict = !matches!(theorem, T::LvBoundary | T::Pd3oBoundary);
            let name = if strict {
                "sigma tau ||L||^2 < 1"
            } else {
                "sigma tau ||L||^2 <= 1"
            };
            conds.push(Condition::new(name, sigma * tau * l * l, 1.0, strict));
            delta = if theorem == T::PdfpGeneral {
                1.0
            } else {
                2.0 - tau * beta / 2.0
            };
        }
        T::LvQuadratic => {
            let (tau, sigma) = (require("tau", p.tau)?, require("sigma", p.sigma)?);
            let l = p.norms.get(NORM_L)?;
            conds.push(Condition::new(
                "tau <= 1/beta",
                tau,
                over_beta(1.0, beta),
                false,
            ));
            conds.push(Condition::new(
                "sigma tau ||L||^2 <= 1",
                sigma * tau * l * l,
                1.0,
                false,
            ));
            delta = 2.0;
        }
        T::CpStrict | T::CpBoundary | T::Pmm => {
            let (tau, sigma) = (require("tau", p.tau)?, require("sigma", p.sigma)?);
            let l = p.norms.get(NORM_L)?;
            let strict = theorem == T::CpStrict;
            let name = if strict {
                "sigma tau ||L||^2 < 1"
            } else {
                "sigma tau ||L||^2 <= 1"
            };
            conds.push(Condition::new(name, sigma * tau * l * l, 1.0, strict));
            delta = 2.0;
        }
        T::GcpStrict | T::GcpBoundary | T::Egcp => {
            let (tau, sigma, eta) = (
                require("tau", p.tau)?,
                require("sigma", p.sigma)?,
                require("eta", p.eta)?,
            );
            let (l, k) = (p.norms.get(NORM_L)?, p.norms.get(NORM_K)?);
            let strict = theorem != T::GcpBoundary;
            let op = if strict { "<" } else { "<=" };
            conds.push(Condition::new(
                format!("tau sigma ||L||^2 {op} 1"),
                tau * sigma * l * l,
                1.0,
                strict,
            ));
            conds.push(Condition::new(
                format!("tau eta ||K||^2 {op} 1"),
                tau * eta * k * k,
                1.0,
                strict,
            ));
            if theorem == T::Egcp {
                let m = p.norms.get(NORM_TAU_KKT_PLUS_Q)?;
                conds.push(Condition::new(
                    "eta ||tau K K* + Q|| <= 1",
                    eta * m,
                    1.0,
                    false,
                ));
            }
            delta = 2.0;
        }
        T::CvGeneral | T::ParallelCv => {
            let tau = require("tau", p.tau)?;
            let spread = if theorem == T::CvGeneral {
                let l = p.norms.get(NORM_L)?;
                require("sigma", p.sigma)? * l * l
            } else {
                p.norms.get(NORM_PARALLEL)?
            };
            conds.push(Condition::new(
                "tau (sigma ||L||^2 + beta/2) < 1",
                tau * (spread + beta / 2.0),
                1.0,
                true,
            ));
            let gap = 1.0 / tau - spread;
            delta = if gap > 0.0 {
                2.0 - (beta / 2.0) / gap
            } else {
                f64::NAN
            };
        }
        T::CvQuadratic | T::ParallelCvQuadratic => {
            let tau = require("tau", p.tau)?;
            let (spread, combined) = if theorem == T::CvQuadratic {
                let l = p.norms.get(NORM_L)?;
                (
                    require("sigma", p.sigma)? * l * l,
                    p.norms.get(NORM_Q_PLUS_SIGMA_LTL)?,
                )
            } else {
                (
                    p.norms.get(NORM_PARALLEL)?,
                    p.norms.get(NORM_Q_PLUS_PARALLEL)?,
                )
            };
            conds.push(Condition::new(
                "tau sigma ||L||^2 < 1",
                tau * spread,
                1.0,
                true,
            ));
            conds.push(Condition::new(
                "tau ||Q + sigma L*L|| <= 1",
                tau * combined,
                1.0,
                false,
            ));
            delta = 2.0;
        }
        T::DavisYin | T::ParallelDy => {
            let tau = require("tau", p.tau)?;
            conds.push(Condition::new(
                "tau < 2/beta",
                tau,
                over_beta(2.0, beta),
                true,
            ));
            delta = 2.0 - tau * beta / 2.0;
        }
        T::PddrQuadratic => {
            let (tau, sigma) = (require("tau", p.tau)?, require("sigma", p.sigma)?);
            let l = p.norms.get(NORM_L)?;
            conds.push(Condition::new(
                "tau < 2/beta",
                tau,
                over_beta(2.0, beta),
                true,
            ));
            conds.push(Condition::new(
                "sigma tau ||L||^2 < 1",
                sigma * tau * l * l,
                1.0,
                true,
            ));
            delta = 2.0;
        }
        T::ParallelCp => {
            let tau = require("tau", p.tau)?;
            let s = p.norms.get(NORM_PARALLEL)?;
            conds.push(Condition::new(
                "tau ||sum sigma_m L_m* L_m|| <= 1",
                tau * s,
                1.0,
                false,
            ));
            delta = 2.0;
        }
        T::ParallelLvStrict | T::ParallelLvBoundary | T::ParallelPd3o => {
            let tau = require("tau", p.tau)?;
            let s = p.norms.get(NORM_PARALLEL)?;
            conds.push(Condition::new(
                "tau < 2/beta",
                tau,
                over_beta(2.0, beta),
                true,
            ));
            let strict = theorem == T::ParallelLvStrict;
            let op = if strict { "<" } else { "<=" };
            conds.push(Condition::new(
                format!("tau ||sum sigma_m L_m* L_m|| {op} 1"),
                tau * s,
                1.0,
                strict,
            ));
            delta = 2.0 - tau * beta / 2.0;
        }
        T::ParallelLvQuadratic => {
            let tau = require("tau", p.tau)?;
            let s = p.norms.get(NORM_PARALLEL)?;
            conds.push(Condition::new(
                "tau <= 1/beta",
                tau,
                over_beta(1.0, beta),
                false,
            ));
            conds.push(Condition::new(
                "tau ||sum sigma_m L_m* L_m|| <= 1",
                tau * s,
                1.0,
                false,
            ));
            delta = 2.0;
        }
    }
    Ok((conds, delta))
}

/// Evaluates one statement, including the relaxation schedule.
pub fn check(theorem: Theorem, p: &ParamInput<'_>) -> Result<ValidationReport> {
    if theorem.needs_quadratic() && !p.h_quadratic {
        return Err(Error::ContractViolation(format!(
            "{} assumes a quadratic smooth term",
            theorem.tag()
        )));
    }
    let (mut conditions, delta) = step_conditions(theorem, p)?;
    let steps_ok = conditions.iter().all(|c| c.satisfied);
    let horizon = p.max_iter.min(RHO_CHECK_HORIZON).max(1);
    if theorem == Theorem::PdfpGeneral {
        let worst = p
            .rho
            .values(horizon)
            .map(|(_, r)| (r - 1.0).abs())
            .fold(0.0, f64::max);
        conditions.push(Condition::new(
            "|rho - 1| (relaxation is not covered)",
            worst,
            0.0,
            false,
        ));
    } else if steps_ok && delta.is_finite() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut pre_lo, mut pre_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, r) in p.rho.values(horizon) {
            if i < p.burn_in {
                pre_lo = pre_lo.min(r);
                pre_hi = pre_hi.max(r);
            } else {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        if pre_lo.is_finite() {
            conditions.push(Condition::new(
                "rho during burn-in >= 0",
                -pre_lo,
                0.0,
                false,
            ));
            conditions.push(Condition::new(
                "rho during burn-in <= delta",
                pre_hi,
                delta,
                false,
            ));
        }
        if lo.is_finite() {
            conditions.push(Condition::new("rho >= eps", RHO_MARGIN, lo, false));
            conditions.push(Condition::new(
                "rho <= delta - eps",
                hi,
                delta - RHO_MARGIN,
                false,
            ));
        }
    }
    let violated: Vec<Condition> = conditions
        .iter()
        .filter(|c| !c.satisfied)
        .cloned()
        .collect();
    Ok(ValidationReport {
        admissible: violated.is_empty() && delta.is_finite() && delta > 0.0,
        delta,
        violated,
        conditions,
        theorem_tag: theorem.tag().to_string(),
        theorem: Some(theorem),
    })
}

/// Candidate statements for a method, tried in order.
pub fn candidates(cfg: &SolverConfig, roles: &Roles) -> Vec<Theorem> {
    use Algorithm as A;
    use Theorem as T;
    let q = cfg.quadratic_mode;
    match cfg.algorithm {
        A::Fb if q => vec![T::FbQuadratic],
        A::Fb => vec![T::FbGeneral],
        A::Ppa => vec![T::ProximalPoint],
        A::Dr => vec![T::DouglasRachford],
        A::Admm => vec![T::Admm],
        A::AdmmAlt => vec![T::AdmmAlt],
        A::LiftedAdmm => vec![T::AdmmLifted],
        A::CpI | A::CpII => vec![T::CpStrict, T::CpBoundary],
        A::Pmm => vec![T::Pmm],
        A::Lv if q => vec![T::LvQuadratic],
        A::Lv => vec![T::LvStrict, T::LvBoundary],
        A::Pdfp if roles.f.has_affine_prox() => vec![T::PdfpAffine],
        A::Pdfp => vec![T::PdfpGeneral],
        A::Gcp => vec![T::GcpStrict, T::GcpBoundary],
        A::CvI | A::CvII if q => vec![T::CvQuadratic],
        A::CvI | A::CvII => vec![T::CvGeneral],
        A::Egcp => vec![T::Egcp],
        A::Pd3o => vec![T::Pd3oStrict, T::Pd3oBoundary],
        A::Dy => vec![T::DavisYin],
        A::PddrQuadI | A::PddrQuadII => vec![T::PddrQuadratic],
    }
}

/// Checks the configuration against the statements for its method and
/// returns the first admissible verdict, or the last one tried.
pub fn validate_params(
    cfg: &SolverConfig,
    problem: &ProblemSpec,
    norms: &NormTable,
) -> Result<ValidationReport> {
    let roles = Roles::assign(cfg.algorithm, problem)?;
    validate_roles(cfg, &roles, norms)
}

pub fn validate_roles(
    cfg: &SolverConfig,
    roles: &Roles,
    norms: &NormTable,
) -> Result<ValidationReport> {
    let smooth = roles.h.smooth_info().ok_or(Error::NotSmooth("h"))?;
    if cfg.quadratic_mode {
        if !matches!(
            cfg.algorithm,
            Algorithm::Fb | Algorithm::Lv | Algorithm::CvI | Algorithm::CvII
        ) {
            return Err(Error::ContractViolation(format!(
                "quadratic mode has no meaning for {}",
                cfg.algorithm
            )));
        }
        if !smooth.is_quadratic {
            return Err(Error::ContractViolation(format!(
                "quadratic mode needs a quadratic h, got {}",
                roles.h.kind_name()
            )));
        }
    }
    let input = ParamInput {
        tau: cfg.tau,
        sigma: cfg.sigma,
        eta: cfg.eta,
        gamma: cfg.gamma,
        beta: smooth.lipschitz,
        h_quadratic: smooth.is_quadratic,
        norms,
        rho: &cfg.rho,
        max_iter: cfg.max_iter,
        burn_in: cfg.burn_in,
    };
    let mut last = None;
    for theorem in candidates(cfg, roles) {
        let report = check(theorem, &input)?;
        if report.admissible {
            return Ok(report);
        }
        last = Some(report);
    }
    last.ok_or_else(|| Error::ContractViolation("no applicable convergence statement".into()))
}
