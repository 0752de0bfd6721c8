//! Method selection: how a [`ProblemSpec`] maps onto the slots of each
//! method, the matching step map, initial state and reference fixed point.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use super::driver::RhoSchedule;
use super::gcp::{Egcp, Gcp};
use super::primal::{Admm, AdmmAlt, DavisYin, DouglasRachford, ForwardBackward, LiftedAdmm};
use super::primal_dual::{
    ChambollePock, CondatVu, Form, LorisVerhoeven, Pd3o, PddrQuad, Pdfp, ProximalMultipliers,
};
use super::{IterState, StepMap};
use crate::error::{Error, Result};
use crate::problems::ProblemSpec;
use crate::prox::FunSpec;
use crate::space::{DenseVector, LinOp, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    Fb,
    Ppa,
    Dr,
    Admm,
    AdmmAlt,
    LiftedAdmm,
    CpI,
    CpII,
    Pmm,
    Lv,
    Pdfp,
    Gcp,
    CvI,
    CvII,
    Egcp,
    Pd3o,
    Dy,
    PddrQuadI,
    PddrQuadII,
}

impl Algorithm {
    pub const ALL: [Algorithm; 19] = [
        Algorithm::Fb,
        Algorithm::Ppa,
        Algorithm::Dr,
        Algorithm::Admm,
        Algorithm::AdmmAlt,
        Algorithm::LiftedAdmm,
        Algorithm::CpI,
        Algorithm::CpII,
        Algorithm::Pmm,
        Algorithm::Lv,
        Algorithm::Pdfp,
        Algorithm::Gcp,
        Algorithm::CvI,
        Algorithm::CvII,
        Algorithm::Egcp,
        Algorithm::Pd3o,
        Algorithm::Dy,
        Algorithm::PddrQuadI,
        Algorithm::PddrQuadII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fb => "fb",
            Algorithm::Ppa => "ppa",
            Algorithm::Dr => "dr",
            Algorithm::Admm => "admm",
            Algorithm::AdmmAlt => "admm_alt",
            Algorithm::LiftedAdmm => "lifted_admm",
            Algorithm::CpI => "cp_i",
            Algorithm::CpII => "cp_ii",
            Algorithm::Pmm => "pmm",
            Algorithm::Lv => "lv",
            Algorithm::Pdfp => "pdfp",
            Algorithm::Gcp => "gcp",
            Algorithm::CvI => "cv_i",
            Algorithm::CvII => "cv_ii",
            Algorithm::Egcp => "egcp",
            Algorithm::Pd3o => "pd3o",
            Algorithm::Dy => "dy",
            Algorithm::PddrQuadI => "pddr_quad_i",
            Algorithm::PddrQuadII => "pddr_quad_ii",
        }
    }

    /// Step sizes the method reads.
    pub fn step_sizes(self) -> &'static [&'static str] {
        match self {
            Algorithm::Fb | Algorithm::Ppa => &["gamma"],
            Algorithm::Dr
            | Algorithm::Admm
            | Algorithm::AdmmAlt
            | Algorithm::LiftedAdmm
            | Algorithm::Dy => &["tau"],
            Algorithm::Gcp | Algorithm::Egcp => &["tau", "sigma", "eta"],
            _ => &["tau", "sigma"],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match key.as_str() {
            "cp" => "cp_i",
            "cv" => "cv_i",
            "pddr" | "pddr_quad" => "pddr_quad_i",
            other => other,
        };
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == alias)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub rho: RhoSchedule,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub quadratic_mode: bool,
    /// Iterations during which `ρ` may leave `[ε, δ − ε]`.
    pub burn_in: usize,
    /// Run the economical form where one exists.
    pub buffered: bool,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        SolverConfig {
            algorithm,
            tau: None,
            sigma: None,
            eta: None,
            gamma: None,
            rho: RhoSchedule::Constant(1.0),
            max_iter: 10_000,
            stop_tol: 1e-10,
            quadratic_mode: false,
            burn_in: 0,
            buffered: false,
        }
    }

    pub fn tau(mut self, v: f64) -> Self {
        self.tau = Some(v);
        self
    }

    pub fn sigma(mut self, v: f64) -> Self {
        self.sigma = Some(v);
        self
    }

    pub fn eta(mut self, v: f64) -> Self {
        self.eta = Some(v);
        self
    }

    pub fn gamma(mut self, v: f64) -> Self {
        self.gamma = Some(v);
        self
    }

    pub fn rho(mut self, v: f64) -> Self {
        self.rho = RhoSchedule::Constant(v);
        self
    }

    pub fn schedule(mut self, rho: RhoSchedule) -> Self {
        self.rho = rho;
        self
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    pub fn quadratic_mode(mut self, on: bool) -> Self {
        self.quadratic_mode = on;
        self
    }

    pub fn buffered(mut self, on: bool) -> Self {
        self.buffered = on;
        self
    }

    /// Rejects step sizes the method does not use.
    pub fn check_relevant(&self) -> Result<()> {
        let used = self.algorithm.step_sizes();
        for (name, value) in [
            ("tau", self.tau),
            ("sigma", self.sigma),
            ("eta", self.eta),
            ("gamma", self.gamma),
        ] {
            if value.is_some() && !used.contains(&name) {
                return Err(Error::InvalidArgument(format!(
                    "{name} is not a parameter of {}",
                    self.algorithm
                )));
            }
        }
        Ok(())
    }

    fn step(&self, name: &str) -> Result<f64> {
        let v = match name {
            "tau" => self.tau,
            "sigma" => self.sigma,
            "eta" => self.eta,
            _ => self.gamma,
        };
        match v {
            Some(x) if x.is_finite() && x > 0.0 => Ok(x),
            Some(x) => Err(Error::InvalidArgument(format!(
                "{name} must be positive, got {x}"
            ))),
            None => Err(Error::InvalidArgument(format!(
                "{} needs {name}",
                self.algorithm
            ))),
        }
    }
}

/// Where the `g` slot of a method came from.
#[derive(Clone, Debug)]
pub enum GSource {
    /// No composite term; `g = 0`, `L = Id`.
    Empty,
    /// The problem's terms, stacked with weights when there are several.
    Terms { dims: Vec<usize>, weights: Vec<f64> },
    /// The terms plus a block `½‖R x‖²` carrying the quadratic part of `h`.
    TermsWithFactor {
        dims: Vec<usize>,
        weights: Vec<f64>,
        factor: LinOp,
    },
    /// The smooth term moved into `g` with `L = Id`.
    Smooth,
}

/// The functions and operators each slot of a method receives.
#[derive(Clone, Debug)]
pub struct Roles {
    pub algorithm: Algorithm,
    pub dim: usize,
    pub f: FunSpec,
    pub g: FunSpec,
    pub l: LinOp,
    pub h: FunSpec,
    pub k: Option<LinOp>,
    pub c: Option<DenseVector>,
    /// `Q` on the `v` dual of the extended method.
    pub qdual: Option<LinOp>,
    pub t: Option<DenseVector>,
    /// `(Q, c)` of the quadratic `h` for the primal–dual Douglas–Rachford method.
    pub quadratic: Option<(LinOp, DenseVector)>,
    pub g_source: GSource,
}

fn not_applicable(algorithm: Algorithm, reason: impl Into<String>) -> Error {
    Error::NotApplicable {
        algorithm: algorithm.name(),
        reason: reason.into(),
    }
}

fn merge(a: FunSpec, b: FunSpec) -> Option<FunSpec> {
    match (a.is_zero(), b.is_zero()) {
        (_, true) => Some(a),
        (true, false) => Some(b),
        (false, false) => None,
    }
}

fn is_identity(l: &LinOp) -> bool {
    l.identity_scale() == Some(1.0) && l.in_dim() == l.out_dim()
}

/// `(Q, c)` of a function that is quadratic in the catalog sense.
pub fn quadratic_parts(h: &FunSpec, n: usize) -> Option<(LinOp, DenseVector)> {
    match h {
        FunSpec::Zero => Some((LinOp::zero(n, n), DenseVector::zeros(n))),
        FunSpec::LinearTerm { c } => Some((LinOp::zero(n, n), c.clone())),
        FunSpec::SquaredL2 { weight } => Some((
            LinOp::scaled(*weight, LinOp::identity(n)).ok()?,
            DenseVector::zeros(n),
        )),
        FunSpec::Quadratic(q) => Some((q.q().clone(), q.c().clone())),
        _ => None,
    }
}

/// `R` with `RᵀR = Q`, from the eigendecomposition of `Q`.
fn square_root_factor(q: &LinOp) -> Result<LinOp> {
    let m = q.materialize()?.to_nalgebra();
    let eig = nalgebra::SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut r = DMatrix::zeros(n, n);
    for k in 0..n {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        for j in 0..n {
            r[(k, j)] = s * eig.eigenvectors[(j, k)];
        }
    }
    Ok(LinOp::dense(Matrix::from_nalgebra(&r)))
}

impl Roles {
    /// Assigns the problem's functions to the slots of `algorithm`.
    pub fn assign(algorithm: Algorithm, p: &ProblemSpec) -> Result<Roles> {
        use Algorithm as A;
        p.check()?;
        let n = p.dim;
        let (g, l, g_source) = match p.terms.len() {
            0 => (FunSpec::Zero, LinOp::identity(n), GSource::Empty),
            1 => (
                p.terms[0].g.clone(),
                p.terms[0].l.clone(),
                GSource::Terms {
                    dims: vec![p.terms[0].l.out_dim()],
                    weights: vec![1.0],
                },
            ),
            m => {
                let weights = vec![1.0 / m as f64; m];
                let dims: Vec<usize> = p.terms.iter().map(|t| t.l.out_dim()).collect();
                let g = FunSpec::block_separable(
                    p.terms.iter().map(|t| t.g.clone()).collect(),
                    dims.clone(),
                    weights.clone(),
                )?;
                let l = LinOp::stacked(
                    p.terms.iter().map(|t| t.l.clone()).collect(),
                    weights.clone(),
                )?;
                (g, l, GSource::Terms { dims, weights })
            }
        };
        let mut roles = Roles {
            algorithm,
            dim: n,
            f: p.f.clone(),
            g,
            l,
            h: p.h.clone(),
            k: None,
            c: None,
            qdual: None,
            t: None,
            quadratic: None,
            g_source,
        };
        let has_term = !p.terms.is_empty();
        let identity_g = !has_term || (p.terms.len() == 1 && is_identity(&roles.l));
        match algorithm {
            A::Fb | A::Ppa | A::Dr | A::Admm | A::AdmmAlt | A::Dy => {
                if !identity_g {
                    return Err(not_applicable(algorithm, "needs a single term with L = Id"));
                }
            }
            _ => {}
        }
        match algorithm {
            A::Fb => {
                let g = std::mem::replace(&mut roles.g, FunSpec::Zero);
                roles.f = merge(roles.f, g)
                    .ok_or_else(|| not_applicable(algorithm, "two nonsmooth terms"))?;
                roles.g_source = GSource::Empty;
            }
            A::Ppa => {
                let g = std::mem::replace(&mut roles.g, FunSpec::Zero);
                let h = std::mem::replace(&mut roles.h, FunSpec::Zero);
                roles.f = merge(roles.f, g)
                    .and_then(|f| merge(f, h))
                    .ok_or_else(|| not_applicable(algorithm, "more than one nonzero term"))?;
                roles.g_source = GSource::Empty;
            }
            A::Dr | A::Admm | A::AdmmAlt => {
                let h = std::mem::replace(&mut roles.h, FunSpec::Zero);
                if h.is_zero() {
                } else if let (A::Dr, FunSpec::LinearTerm { c }) = (algorithm, &h) {
                    roles.c = Some(c.clone());
                } else if roles.f.is_zero() {
                    roles.f = h;
                } else if roles.g.is_zero() {
                    roles.g = h;
                    roles.g_source = GSource::Smooth;
                } else {
                    return Err(not_applicable(algorithm, "f, g and h are all nonzero"));
                }
            }
            A::LiftedAdmm => {
                let h = std::mem::replace(&mut roles.h, FunSpec::Zero);
                roles.f = merge(roles.f, h)
                    .ok_or_else(|| not_applicable(algorithm, "f and h are both nonzero"))?;
                if !matches!(
                    roles.f,
                    FunSpec::Zero
                        | FunSpec::LinearTerm { .. }
                        | FunSpec::Quadratic(_)
                        | FunSpec::AffineIndicator(_)
                ) && !is_identity(&roles.l)
                {
                    return Err(Error::UnsupportedPostcomposition(roles.f.kind_name()));
                }
                let m = roles.l.out_dim();
                roles.k = Some(LinOp::scaled(-1.0, LinOp::identity(m))?);
                roles.c = Some(DenseVector::zeros(m));
            }
            A::CpI | A::CpII => {
                let h = std::mem::replace(&mut roles.h, FunSpec::Zero);
                if h.is_zero() {
                } else if roles.f.is_zero() {
                    roles.f = h;
                } else if !has_term {
                    roles.g = h;
                    roles.g_source = GSource::Smooth;
                } else {
                    return Err(not_applicable(algorithm, "f, g and h are all nonzero"));
                }
            }
            A::Pmm => {
                let f = std::mem::replace(&mut roles.f, FunSpec::Zero);
                let h = std::mem::replace(&mut roles.h, FunSpec::Zero);
                let linear = match f {
                    FunSpec::Zero => None,
                    FunSpec::LinearTerm { c } => Some(c),
                    _ => return Err(not_applicable(algorithm, "f must be zero or linear")),
                };
                let (q, c) = quadratic_parts(&h, n)
                    .ok_or_else(|| not_applicable(algorithm, "h must be quadratic"))?;
                let c = match linear {
                    Some(extra) => c.add(&extra)?,
                    None => c,
                };
                roles.c = Some(c);
                if !matches!(h, FunSpec::Zero | FunSpec::LinearTerm { .. }) {
                    let factor = square_root_factor(&q)?.certified()?;
                    let (dims, weights) = match &roles.g_source {
                        GSource::Terms { dims, weights } => (dims.clone(), weights.clone()),
                        _ => (Vec::new(), Vec::new()),
                    };
                    let g = std::mem::replace(&mut roles.g, FunSpec::Zero);
                    let l = roles.l.clone();
                    let (parts, ops) = if has_term {
                        (vec![g, FunSpec::squared_l2(1.0)?], vec![l, factor.clone()])
                    } else {
                        (vec![FunSpec::squared_l2(1.0)?], vec![factor.clone()])
                    };
                    let block_dims: Vec<usize> = ops.iter().map(|o| o.out_dim()).collect();
                    let unit = vec![1.0; ops.len()];
                    roles.g = FunSpec::block_separable(parts, block_dims, unit.clone())?;
                    roles.l = if ops.len() == 1 {
                        factor.clone()
                    } else {
                        LinOp::stacked(ops, unit)?
                    };
                    roles.g_source = GSource::TermsWithFactor {
                        dims,
                        weights,
                        factor,
                    };
                }
            }
            A::Lv => {
                if !roles.f.is_zero() {
                    return Err(not_applicable(algorithm, "f must be zero"));
                }
            }
            A::Gcp | A::Egcp => {
                let h = std::mem::replace(&mut roles.h, FunSpec::Zero);
                match h {
                    FunSpec::Zero => {}
                    FunSpec::LinearTerm { c } => roles.c = Some(c),
                    other if roles.f.is_zero() => roles.f = other,
                    _ => {
                        return Err(not_applicable(
                            algorithm,
                            "f and a nonlinear h are both nonzero",
                        ))
                    }
                }
                roles.k = Some(LinOp::identity(n));
                if algorithm == A::Egcp {
                    roles.qdual = Some(LinOp::zero(n, n));
                    roles.t = Some(DenseVector::zeros(n));
                }
            }
            A::PddrQuadI | A::PddrQuadII => {
                let parts = quadratic_parts(&roles.h, n)
                    .ok_or_else(|| not_applicable(algorithm, "h must be quadratic"))?;
                roles.quadratic = Some(parts);
            }
            A::Pdfp | A::CvI | A::CvII | A::Pd3o | A::Dy => {}
        }
        Ok(roles)
    }

    /// `Q` of a quadratic `h`, when there is one.
    pub fn quadratic_operator(&self) -> Option<LinOp> {
        quadratic_parts(&self.h, self.dim).map(|(q, _)| q)
    }

    /// Builds the step map for `cfg`.
    pub fn step_map<'a>(&'a self, cfg: &SolverConfig) -> Result<Box<dyn StepMap + 'a>> {
        use Algorithm as A;
        let alg = cfg.algorithm;
        if alg != self.algorithm {
            return Err(Error::ContractViolation(format!(
                "roles were assigned for {}, not {alg}",
                self.algorithm
            )));
        }
        cfg.check_relevant()?;
        let (f, g, l, h) = (&self.f, &self.g, &self.l, &self.h);
        Ok(match alg {
            A::Fb => Box::new(ForwardBackward::new(f, h, cfg.step("gamma")?)),
            A::Ppa => Box::new(ForwardBackward::proximal_point(f, cfg.step("gamma")?)),
            A::Dr => Box::new(DouglasRachford {
                f,
                g,
                tau: cfg.step("tau")?,
                drift: self.c.as_ref(),
            }),
            A::Admm => Box::new(Admm {
                f,
                g,
                tau: cfg.step("tau")?,
            }),
            A::AdmmAlt => Box::new(AdmmAlt {
                f,
                g,
                tau: cfg.step("tau")?,
            }),
            A::LiftedAdmm => Box::new(LiftedAdmm {
                f,
                l,
                g,
                k: self.k.as_ref().expect("lifted roles carry K"),
                c: self.c.as_ref().expect("lifted roles carry c"),
                tau: cfg.step("tau")?,
            }),
            A::CpI | A::CpII => Box::new(ChambollePock::new(
                f,
                g,
                l,
                cfg.step("tau")?,
                cfg.step("sigma")?,
                if alg == A::CpI { Form::I } else { Form::II },
            )),
            A::Pmm => Box::new(ProximalMultipliers {
                g,
                l,
                c: self.c.as_ref(),
                tau: cfg.step("tau")?,
                sigma: cfg.step("sigma")?,
            }),
            A::Lv => Box::new(LorisVerhoeven {
                g,
                l,
                h,
                tau: cfg.step("tau")?,
                sigma: cfg.step("sigma")?,
                buffered: cfg.buffered,
            }),
            A::Pdfp => Box::new(Pdfp {
                f,
                g,
                l,
                h,
                tau: cfg.step("tau")?,
                sigma: cfg.step("sigma")?,
            }),
            A::Gcp | A::Egcp => {
                let base = Gcp {
                    f,
                    k: self.k.as_ref().expect("gcp roles carry K"),
                    g,
                    l,
                    c: self.c.as_ref(),
                    tau: cfg.step("tau")?,
                    sigma: cfg.step("sigma")?,
                    eta: cfg.step("eta")?,
                    efficient: cfg.buffered && alg == A::Gcp,
                };
                if alg == A::Gcp {
                    Box::new(base)
                } else {
                    Box::new(Egcp {
                        base,
                        qdual: self.qdual.as_ref().expect("extended roles carry Q"),
                        t: self.t.as_ref().expect("extended roles carry t"),
                    })
                }
            }
            A::CvI | A::CvII => Box::new(CondatVu {
                f,
                g,
                l,
                h,
                tau: cfg.step("tau")?,
                sigma: cfg.step("sigma")?,
                form: if alg == A::CvI { Form::I } else { Form::II },
            }),
            A::Pd3o => Box::new(Pd3o {
                f,
                g,
                l,
                h,
                tau: cfg.step("tau")?,
                sigma: cfg.step("sigma")?,
                compact: cfg.buffered,
            }),
            A::Dy => Box::new(DavisYin {
                f,
                g,
                h,
                tau: cfg.step("tau")?,
            }),
            A::PddrQuadI | A::PddrQuadII => {
                let (q, c) = self.quadratic.as_ref().expect("pddr roles carry Q");
                Box::new(PddrQuad {
                    f,
                    g,
                    l,
                    q,
                    c,
                    tau: cfg.step("tau")?,
                    sigma: cfg.step("sigma")?,
                    form: if alg == A::PddrQuadI {
                        Form::I
                    } else {
                        Form::II
                    },
                })
            }
        })
    }

    /// Starting state from the primal point `x0` with zero duals.
    pub fn initial_state(&self, cfg: &SolverConfig, x0: Option<&DenseVector>) -> Result<IterState> {
        use Algorithm as A;
        let x0 = match x0 {
            Some(x) => {
                x.ensure_dim(self.dim, "initial point")?;
                x.clone()
            }
            None => DenseVector::zeros(self.dim),
        };
        let u0 = || DenseVector::zeros(self.l.out_dim());
        Ok(match cfg.algorithm {
            A::Fb | A::Ppa | A::Dr | A::Dy => IterState::new(x0),
            A::Admm | A::AdmmAlt => IterState::with_duals(x0, vec![DenseVector::zeros(self.dim)]),
            A::LiftedAdmm => IterState::new(self.l.apply(&x0)?),
            A::Gcp if cfg.buffered => IterState::with_duals(
                x0.scale(1.0 / cfg.step("tau")?)?,
                vec![u0(), DenseVector::zeros(self.dim)],
            ),
            A::Gcp | A::Egcp => IterState::with_duals(x0, vec![u0(), DenseVector::zeros(self.dim)]),
            _ => IterState::with_duals(x0, vec![u0()]),
        })
    }

    /// Dual of the `g` slot built from the problem's term duals.
    pub fn slot_dual(
        &self,
        x_star: &DenseVector,
        term_duals: &[DenseVector],
    ) -> Result<DenseVector> {
        let lifted = |dims: &[usize], weights: &[f64]| -> Result<Vec<DenseVector>> {
            if term_duals.len() != dims.len() {
                return Err(Error::DimensionMismatch {
                    context: "term duals",
                    expected: dims.len(),
                    actual: term_duals.len(),
                });
            }
            term_duals
                .iter()
                .zip(weights)
                .map(|(u, w)| u.scale(1.0 / w))
                .collect()
        };
        match &self.g_source {
            GSource::Empty => Ok(DenseVector::zeros(self.l.out_dim())),
            GSource::Smooth => self.g.grad(x_star),
            GSource::Terms { dims, weights } => Ok(DenseVector::concat(&lifted(dims, weights)?)),
            GSource::TermsWithFactor {
                dims,
                weights,
                factor,
            } => {
                let mut blocks = lifted(dims, weights)?;
                blocks.push(factor.apply(x_star)?);
                Ok(DenseVector::concat(&blocks))
            }
        }
    }

    /// Term duals `u_m = ω_m ũ_m` recovered from the slot dual.
    pub fn term_duals(&self, slot: &DenseVector) -> Result<Vec<DenseVector>> {
        match &self.g_source {
            GSource::Empty | GSource::Smooth => Ok(Vec::new()),
            GSource::Terms { dims, weights } | GSource::TermsWithFactor { dims, weights, .. } => {
                let total: usize = dims.iter().sum();
                let mut all = dims.clone();
                if slot.dim() > total {
                    all.push(slot.dim() - total);
                }
                let blocks = slot.split(&all)?;
                blocks
                    .iter()
                    .zip(weights)
                    .map(|(b, w)| b.scale(*w))
                    .collect()
            }
        }
    }

    /// `p ∈ ∂f(x*)` from stationarity, `p = −(L*u + ∇h(x*) + c)`.
    pub fn f_subgradient(&self, x_star: &DenseVector, u: &DenseVector) -> Result<DenseVector> {
        let mut r = self.l.adjoint_apply(u)?.add(&self.h.grad(x_star)?)?;
        if let (Some(c), false) = (&self.c, self.algorithm == Algorithm::LiftedAdmm) {
            r = r.add(c)?;
        }
        r.scale(-1.0)
    }

    /// Fixed point of the step map built from a primal–dual solution.
    pub fn fixed_point(
        &self,
        cfg: &SolverConfig,
        x_star: &DenseVector,
        term_duals: &[DenseVector],
    ) -> Result<IterState> {
        use Algorithm as A;
        let u = self.slot_dual(x_star, term_duals)?;
        let p = self.f_subgradient(x_star, &u)?;
        let x = x_star.clone();
        Ok(match cfg.algorithm {
            A::Fb | A::Ppa => IterState::new(x),
            A::Dr => {
                let tau = cfg.step("tau")?;
                IterState::new(DenseVector::lin_comb(&[(1.0, &x), (-tau, &u)])?)
            }
            A::Admm | A::AdmmAlt => {
                let tau = cfg.step("tau")?;
                IterState::with_duals(x, vec![u.scale(tau)?])
            }
            A::LiftedAdmm => {
                let tau = cfg.step("tau")?;
                IterState::new(DenseVector::lin_comb(&[
                    (1.0, &self.l.apply(&x)?),
                    (-tau, &u),
                ])?)
            }
            A::Dy => {
                let tau = cfg.step("tau")?;
                IterState::new(DenseVector::lin_comb(&[(1.0, &x), (tau, &p)])?)
            }
            A::Pd3o => {
                let tau = cfg.step("tau")?;
                let s = DenseVector::lin_comb(&[(1.0, &x), (tau, &p)])?;
                let primary = if cfg.buffered {
                    DenseVector::lin_comb(&[(1.0, &s), (tau, &self.l.adjoint_apply(&u)?)])?
                } else {
                    s
                };
                IterState::with_duals(primary, vec![u])
            }
            A::Gcp | A::Egcp => {
                let primary = if cfg.buffered && cfg.algorithm == A::Gcp {
                    x.scale(1.0 / cfg.step("tau")?)?
                } else {
                    x
                };
                IterState::with_duals(primary, vec![u, p])
            }
            A::PddrQuadI | A::PddrQuadII => {
                let tau = cfg.step("tau")?;
                let (q, _) = self.quadratic.as_ref().expect("pddr roles carry Q");
                let lu = self.l.adjoint_apply(&u)?;
                let rhs = if cfg.algorithm == A::PddrQuadI {
                    DenseVector::lin_comb(&[(1.0, &x), (-tau, &q.apply(&x)?), (-tau, &lu)])?
                } else {
                    DenseVector::lin_comb(&[(1.0, &x), (tau, &lu)])?
                };
                let half = LinOp::scaled_sum(vec![
                    (1.0, LinOp::identity(self.dim)),
                    (-0.5 * tau, q.clone()),
                ])?;
                IterState::with_duals(solve_dense(&half, &rhs)?, vec![u])
            }
            A::CpI | A::CpII | A::Pmm | A::Lv | A::Pdfp | A::CvI | A::CvII => {
                IterState::with_duals(x, vec![u])
            }
        })
    }

    /// `‖a − b‖²_P` in the metric in which the method is Fejér monotone. The
    /// ADMM variant with relaxed multiplier and PDFP with a non-affine `f`
    /// are not averaged maps; for them this is the weighted norm observed
    /// to decrease.
    pub fn metric_distance_sq(
        &self,
        cfg: &SolverConfig,
        a: &IterState,
        b: &IterState,
    ) -> Result<f64> {
        use Algorithm as A;
        let tau = cfg.tau.or(cfg.gamma).unwrap_or(1.0);
        let sigma = cfg.sigma.unwrap_or(1.0);
        let qform = |d: &DenseVector| -> Result<f64> {
            Ok(match self.quadratic_operator() {
                Some(q) => d.dot(&q.apply(d)?),
                None => 0.0,
            })
        };
        // ‖du‖²_{1/σ − τLL*}
        let dual_lv = |du: &DenseVector| -> Result<f64> {
            Ok(du.norm_sq() / sigma - tau * self.l.adjoint_apply(du)?.norm_sq())
        };
        // ⟨dx, dx⟩/τ ∓ 2⟨L dx, du⟩ + ⟨du, du⟩/σ
        let coupled = |dx: &DenseVector, du: &DenseVector, sign: f64| -> Result<f64> {
            Ok(dx.norm_sq() / tau + sign * 2.0 * self.l.apply(dx)?.dot(du) + du.norm_sq() / sigma)
        };
        let diff = |x: &DenseVector, y: &DenseVector| x.sub(y);
        Ok(match cfg.algorithm {
            A::Fb | A::Ppa => {
                let d = diff(&a.primary, &b.primary)?;
                if cfg.quadratic_mode {
                    d.norm_sq() / tau - qform(&d)?
                } else {
                    d.norm_sq()
                }
            }
            A::Dr | A::Dy | A::LiftedAdmm => diff(&a.primary, &b.primary)?.norm_sq(),
            A::Admm => {
                let sa = a.primary.sub(a.dual(0)?)?;
                let sb = b.primary.sub(b.dual(0)?)?;
                diff(&sa, &sb)?.norm_sq()
            }
            A::AdmmAlt => {
                let rho = cfg.rho.at(0);
                diff(&a.primary, &b.primary)?.norm_sq()
                    + diff(a.dual(0)?, b.dual(0)?)?.norm_sq() / (rho * rho)
            }
            A::Lv | A::Pd3o => {
                let (pa, pb) = if cfg.algorithm == A::Pd3o && cfg.buffered {
                    let back = |s: &IterState| -> Result<DenseVector> {
                        DenseVector::lin_comb(&[
                            (1.0, &s.primary),
                            (-tau, &self.l.adjoint_apply(s.dual(0)?)?),
                        ])
                    };
                    (back(a)?, back(b)?)
                } else {
                    (a.primary.clone(), b.primary.clone())
                };
                let dx = diff(&pa, &pb)?;
                let du = diff(a.dual(0)?, b.dual(0)?)?;
                let top = if cfg.quadratic_mode && cfg.algorithm == A::Lv {
                    dx.norm_sq() / tau - qform(&dx)?
                } else {
                    dx.norm_sq() / tau
                };
                top + dual_lv(&du)?
            }
            A::Pdfp => {
                let dx = diff(&a.primary, &b.primary)?;
                let du = diff(a.dual(0)?, b.dual(0)?)?;
                if !self.f.has_affine_prox() {
                    return Ok(dx.norm_sq() / tau + du.norm_sq() / sigma);
                }
                let ldu = self.l.adjoint_apply(&du)?;
                let zero = DenseVector::zeros(self.dim);
                let r = self
                    .f
                    .prox_point(tau, &ldu)?
                    .sub(&self.f.prox_point(tau, &zero)?)?;
                dx.norm_sq() / tau + du.norm_sq() / sigma - tau * ldu.dot(&r)
            }
            A::CpI | A::CpII | A::Pmm | A::CvI | A::CvII => {
                let dx = diff(&a.primary, &b.primary)?;
                let du = diff(a.dual(0)?, b.dual(0)?)?;
                let sign = if matches!(cfg.algorithm, A::CpII | A::CvII) {
                    1.0
                } else {
                    -1.0
                };
                let base = coupled(&dx, &du, sign)?;
                if cfg.quadratic_mode && matches!(cfg.algorithm, A::CvI | A::CvII) {
                    base - qform(&dx)?
                } else {
                    base
                }
            }
            A::Gcp | A::Egcp => {
                let eta = cfg.eta.unwrap_or(1.0);
                let scale = if cfg.buffered && cfg.algorithm == A::Gcp {
                    tau
                } else {
                    1.0
                };
                let dx = diff(&a.primary, &b.primary)?.scale(scale)?;
                let du = diff(a.dual(0)?, b.dual(0)?)?;
                let dv = diff(a.dual(1)?, b.dual(1)?)?;
                let k = self.k.as_ref().expect("gcp roles carry K");
                coupled(&dx, &du, -1.0)? + dv.norm_sq() / eta
                    - tau * k.adjoint_apply(&dv)?.norm_sq()
            }
            A::PddrQuadI | A::PddrQuadII => {
                let ds = diff(&a.primary, &b.primary)?;
                let du = diff(a.dual(0)?, b.dual(0)?)?;
                ds.norm_sq() / tau - 0.5 * qform(&ds)? + dual_lv(&du)?
            }
        })
    }
}

fn solve_dense(op: &LinOp, rhs: &DenseVector) -> Result<DenseVector> {
    let m = op.materialize()?.to_nalgebra();
    let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let sol = m.lu().solve(&b).ok_or(Error::SingularNormalEquations)?;
    DenseVector::new(sol.as_slice().to_vec())
}
