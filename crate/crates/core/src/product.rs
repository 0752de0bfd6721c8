//! Product-space lifting of `Σ_m g_m(L_m x)` and the parallel forms of the
//! splitting methods.
//!
//! Per-block proxes are independent and may run on worker threads.
//! Cross-block sums add the terms of each coordinate in sorted order, so
//! permuting the blocks leaves the primal iterates bitwise unchanged.

use std::ops::ControlFlow;

use serde::Serialize;

use crate::engines::driver::{relaxed_drive, Admission, DriveConfig};
use crate::engines::setup::{quadratic_parts, Algorithm, SolverConfig};
use crate::engines::validate::{check, NormTable, ParamInput, Theorem, ValidationReport};
use crate::engines::validate::{NORM_PARALLEL, NORM_Q_PLUS_PARALLEL};
use crate::engines::{IterState, Solution, StepMap, StepOutcome};
use crate::error::{Error, Result};
use crate::problems::{ProblemSpec, Term};
use crate::prox::{Consensus, FunSpec, Replicated};
use crate::space::{DenseVector, LinOp, NORM_MAX_ITER, NORM_SEED, NORM_TOL};

/// Tolerance on `Σ ω_m = 1` for consensus weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LiftMode {
    /// Copies of `x`, one per term, tied by an equality constraint.
    Consensus,
    /// One dual block per term on the stacked range space.
    Stacked,
}

#[derive(Clone, Debug)]
pub struct LiftedProblem {
    pub mode: LiftMode,
    pub weights: Vec<f64>,
    pub base: ProblemSpec,
}

fn is_identity(l: &LinOp, n: usize) -> bool {
    l.identity_scale() == Some(1.0) && l.in_dim() == n && l.out_dim() == n
}

/// Lifts the terms of `problem`. Stacked weights default to `1/M`.
pub fn lift(
    problem: &ProblemSpec,
    mode: LiftMode,
    weights: Option<Vec<f64>>,
) -> Result<LiftedProblem> {
    problem.check()?;
    let m = problem.terms.len();
    if m == 0 {
        return Err(Error::InvalidArgument(
            "lifting needs at least one term".into(),
        ));
    }
    let weights = weights.unwrap_or_else(|| vec![1.0 / m as f64; m]);
    if weights.len() != m {
        return Err(Error::DimensionMismatch {
            context: "lift weights",
            expected: m,
            actual: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "weights must be positive, got {w}"
        )));
    }
    if mode == LiftMode::Consensus {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::ContractViolation(format!(
                "consensus weights sum to {sum}, not 1"
            )));
        }
        if let Some(k) = problem
            .terms
            .iter()
            .position(|t| !is_identity(&t.l, problem.dim))
        {
            return Err(Error::ContractViolation(format!(
                "consensus lifting needs L_m = Id; term {k} has {}",
                problem.terms[k].l.kind_name()
            )));
        }
    }
    Ok(LiftedProblem {
        mode,
        weights,
        base: problem.clone(),
    })
}

impl LiftedProblem {
    pub fn blocks(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    /// `σ_m = σ ω_m`
    pub fn sigmas(&self, sigma: f64) -> Vec<f64> {
        self.weights.iter().map(|w| sigma * w).collect()
    }

    /// The lifted problem as a single-term problem for the plain engines.
    pub fn as_problem(&self) -> Result<ProblemSpec> {
        let n = self.base.dim;
        let m = self.blocks();
        let parts: Vec<FunSpec> = self.base.terms.iter().map(|t| t.g.clone()).collect();
        match self.mode {
            LiftMode::Stacked => {
                let dims: Vec<usize> = self.base.terms.iter().map(|t| t.l.out_dim()).collect();
                let g = FunSpec::block_separable(parts, dims, self.weights.clone())?;
                let l = LinOp::stacked(
                    self.base.terms.iter().map(|t| t.l.clone()).collect(),
                    self.weights.clone(),
                )?;
                ProblemSpec::new(
                    self.base.f.clone(),
                    vec![Term { g, l }],
                    self.base.h.clone(),
                    n,
                )
            }
            LiftMode::Consensus => {
                let f = FunSpec::Consensus(Consensus {
                    inner: Box::new(self.base.f.clone()),
                    dim: n,
                    weights: self.weights.clone(),
                });
                let g = FunSpec::block_separable(parts, vec![n; m], self.weights.clone())?;
                let h = if self.base.h.is_zero() {
                    FunSpec::Zero
                } else {
                    FunSpec::Replicated(Replicated {
                        inner: Box::new(self.base.h.clone()),
                        dim: n,
                        weights: self.weights.clone(),
                    })
                };
                ProblemSpec::new(
                    f,
                    vec![Term {
                        g,
                        l: LinOp::identity(m * n),
                    }],
                    h,
                    m * n,
                )
            }
        }
    }

    /// `x ↦ (x, …, x)` in consensus mode, the identity otherwise.
    pub fn lift_point(&self, x: &DenseVector) -> DenseVector {
        match self.mode {
            LiftMode::Consensus => DenseVector::concat(&vec![x.clone(); self.blocks()]),
            LiftMode::Stacked => x.clone(),
        }
    }

    /// Splits a dual of the lifted problem and multiplies block `m` by `ω_m`,
    /// giving duals of the original problem.
    pub fn rescale_duals(&self, lifted: &DenseVector) -> Result<Vec<DenseVector>> {
        let dims: Vec<usize> = self.base.terms.iter().map(|t| t.l.out_dim()).collect();
        lifted
            .split(&dims)?
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| u.scale(*w))
            .collect()
    }

    /// `‖Σ_m σ_m L_m* L_m‖`, estimated by power iteration.
    pub fn parallel_norm(&self, sigmas: &[f64], extra: Option<LinOp>) -> Result<f64> {
        let mut terms: Vec<(f64, LinOp)> = self
            .base
            .terms
            .iter()
            .zip(sigmas)
            .map(|(t, s)| (*s, LinOp::gram(t.l.clone())))
            .collect();
        if let Some(q) = extra {
            terms.push((1.0, q));
        }
        LinOp::scaled_sum(terms)?.estimate_norm(NORM_TOL, NORM_MAX_ITER, NORM_SEED)
    }
}

/// Coordinatewise `Σ_m w_m v_m`, adding each coordinate's terms in sorted order.
pub fn ordered_sum(parts: &[DenseVector], weights: &[f64]) -> Result<DenseVector> {
    let n = parts.first().map(DenseVector::dim).ok_or(Error::Empty)?;
    let mut terms = Vec::with_capacity(parts.len());
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        terms.clear();
        for (p, w) in parts.iter().zip(weights) {
            p.ensure_dim(n, "block sum")?;
            terms.push(w * p.as_slice()[k]);
        }
        terms.sort_by(|a, b| a.total_cmp(b));
        out.push(terms.iter().fold(0.0, |acc, t| acc + t));
    }
    DenseVector::new(out)
}

/// Evaluates `work(m)` for every block, on up to `threads` scoped workers.
/// Results come back in block order.
fn map_blocks<T, F>(threads: usize, count: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let run = |m: usize| work(m).map_err(|e| e.in_block(m));
    if threads <= 1 || count <= 1 {
        return (0..count).map(run).collect();
    }
    let workers = threads.min(count);
    let chunk = count.div_ceil(workers);
    let mut slots: Vec<Option<Result<T>>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (c, slot_chunk) in slots.chunks_mut(chunk).enumerate() {
            let run = &run;
            scope.spawn(move || {
                for (j, slot) in slot_chunk.iter_mut().enumerate() {
                    *slot = Some(run(c * chunk + j));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every block slot is filled"))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConsensusFamily {
    DrI,
    DrII,
    Dy,
}

/// Douglas–Rachford and Davis–Yin over `f + Σ g_m + h` with one copy
/// `s_m` per term. State: `s = (s_1, …, s_M)` stacked.
pub struct ParallelConsensus<'a> {
    pub f: &'a FunSpec,
    pub gs: Vec<&'a FunSpec>,
    pub h: &'a FunSpec,
    pub weights: &'a [f64],
    pub dim: usize,
    pub tau: f64,
    pub family: ConsensusFamily,
    pub threads: usize,
}

impl<'a> ParallelConsensus<'a> {
    pub fn new(
        lifted: &'a LiftedProblem,
        tau: f64,
        family: ConsensusFamily,
        threads: usize,
    ) -> Result<Self> {
        if lifted.mode != LiftMode::Consensus {
            return Err(Error::ContractViolation(
                "parallel DR and DY need a consensus lifting".into(),
            ));
        }
        let base = &lifted.base;
        if family != ConsensusFamily::Dy && !base.h.is_zero() {
            return Err(Error::NotApplicable {
                algorithm: "parallel douglas-rachford",
                reason: "h must be zero; use the davis-yin family".into(),
            });
        }
        Ok(ParallelConsensus {
            f: &base.f,
            gs: base.terms.iter().map(|t| &t.g).collect(),
            h: &base.h,
            weights: &lifted.weights,
            dim: base.dim,
            tau,
            family,
            threads,
        })
    }

    /// `s⁰ = (x⁰, …, x⁰)`
    pub fn initial_state(&self, x0: &DenseVector) -> IterState {
        IterState::new(DenseVector::concat(&vec![x0.clone(); self.gs.len()]))
    }
}

impl StepMap for ParallelConsensus<'_> {
    fn name(&self) -> &'static str {
        match self.family {
            ConsensusFamily::DrI => "parallel douglas-rachford I",
            ConsensusFamily::DrII => "parallel douglas-rachford II",
            ConsensusFamily::Dy => "parallel davis-yin",
        }
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let count = self.gs.len();
        let s = state.primary.split(&vec![self.dim; count])?;
        let tau = self.tau;
        let block_step = |m: usize| tau / self.weights[m];
        let (xh, targets, duals) = match self.family {
            ConsensusFamily::DrI | ConsensusFamily::Dy => {
                let xh = self.f.prox_point(tau, &ordered_sum(&s, self.weights)?)?;
                let gh = match self.family {
                    ConsensusFamily::Dy => Some(self.h.grad(&xh)?),
                    _ => None,
                };
                let blocks = map_blocks(self.threads, count, |m| {
                    let arg = match &gh {
                        Some(g) => DenseVector::lin_comb(&[(2.0, &xh), (-1.0, &s[m]), (-tau, g)])?,
                        None => DenseVector::lin_comb(&[(2.0, &xh), (-1.0, &s[m])])?,
                    };
                    let y = self.gs[m].prox_point(block_step(m), &arg)?;
                    let u = arg.sub(&y)?.scale(self.weights[m] / tau)?;
                    let ts = DenseVector::lin_comb(&[(1.0, &s[m]), (1.0, &y), (-1.0, &xh)])?;
                    Ok((ts, u))
                })?;
                let (targets, duals) = blocks.into_iter().unzip();
                (xh, targets, duals)
            }
            ConsensusFamily::DrII => {
                let xs = map_blocks(self.threads, count, |m| {
                    self.gs[m].prox_point(block_step(m), &s[m])
                })?;
                let reflected = xs
                    .iter()
                    .zip(&s)
                    .map(|(x, sm)| DenseVector::lin_comb(&[(2.0, x), (-1.0, sm)]))
                    .collect::<Result<Vec<_>>>()?;
                let xh = self
                    .f
                    .prox_point(tau, &ordered_sum(&reflected, self.weights)?)?;
                let mut targets = Vec::with_capacity(count);
                let mut duals = Vec::with_capacity(count);
                for m in 0..count {
                    targets.push(DenseVector::lin_comb(&[
                        (1.0, &s[m]),
                        (1.0, &xh),
                        (-1.0, &xs[m]),
                    ])?);
                    duals.push(s[m].sub(&xs[m])?.scale(self.weights[m] / tau)?);
                }
                (xh, targets, duals)
            }
        };
        let z = DenseVector::concat(&s);
        let tz = DenseVector::concat(&targets);
        let next = z.relax(&tz, rho)?;
        Ok(StepOutcome {
            next: state.successor(next, Vec::new()),
            z: vec![z],
            tz: vec![tz],
            estimate: xh,
            dual_estimates: duals,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PrimalDualFamily {
    CpI,
    CpII,
    Lv,
    CvI,
    CvII,
    Pd3o,
}

/// Primal–dual methods with one dual block `u_m` per term and `σ_m = σ ω_m`.
/// State: `(x, [u_1, …, u_M])`; the Loris–Verhoeven and PD3O families carry
/// `s̃ = x + τ Σ L_m* u_m` (resp. `s + τ Σ L_m* u_m`) as primary.
pub struct ParallelPrimalDual<'a> {
    pub f: &'a FunSpec,
    pub gs: Vec<&'a FunSpec>,
    pub ls: Vec<&'a LinOp>,
    pub h: &'a FunSpec,
    pub tau: f64,
    pub sigmas: Vec<f64>,
    pub family: PrimalDualFamily,
    pub threads: usize,
}

impl<'a> ParallelPrimalDual<'a> {
    pub fn new(
        lifted: &'a LiftedProblem,
        tau: f64,
        sigma: f64,
        family: PrimalDualFamily,
        threads: usize,
    ) -> Result<Self> {
        let base = &lifted.base;
        let reason = match family {
            PrimalDualFamily::CpI | PrimalDualFamily::CpII if !base.h.is_zero() => {
                Some("h must be zero")
            }
            PrimalDualFamily::Lv if !base.f.is_zero() => Some("f must be zero"),
            _ => None,
        };
        if let Some(reason) = reason {
            return Err(Error::NotApplicable {
                algorithm: "parallel primal-dual",
                reason: reason.into(),
            });
        }
        Ok(ParallelPrimalDual {
            f: &base.f,
            gs: base.terms.iter().map(|t| &t.g).collect(),
            ls: base.terms.iter().map(|t| &t.l).collect(),
            h: &base.h,
            tau,
            sigmas: lifted.sigmas(sigma),
            family,
            threads,
        })
    }

    fn carries_compact(&self) -> bool {
        matches!(self.family, PrimalDualFamily::Lv | PrimalDualFamily::Pd3o)
    }

    /// `Σ_m L_m* u_m`
    pub fn adjoint_sum(&self, us: &[DenseVector]) -> Result<DenseVector> {
        let parts = map_blocks(self.threads, self.ls.len(), |m| {
            self.ls[m].adjoint_apply(&us[m])
        })?;
        ordered_sum(&parts, &vec![1.0; parts.len()])
    }

    /// Zero duals; the compact families start from `s̃⁰ = x⁰`.
    pub fn initial_state(&self, x0: &DenseVector) -> IterState {
        let duals = self
            .ls
            .iter()
            .map(|l| DenseVector::zeros(l.out_dim()))
            .collect();
        IterState::with_duals(x0.clone(), duals)
    }

    /// Primal point `x` carried by a state.
    pub fn primal(&self, state: &IterState) -> Result<DenseVector> {
        if self.carries_compact() {
            let lu = self.adjoint_sum(&state.duals)?;
            DenseVector::lin_comb(&[(1.0, &state.primary), (-self.tau, &lu)])
        } else {
            Ok(state.primary.clone())
        }
    }

    fn dual_prox(&self, us: &[DenseVector], point: &DenseVector) -> Result<Vec<DenseVector>> {
        map_blocks(self.threads, self.gs.len(), |m| {
            let arg = DenseVector::lin_comb(&[
                (1.0, &us[m]),
                (self.sigmas[m], &self.ls[m].apply(point)?),
            ])?;
            self.gs[m].prox_conjugate_point(self.sigmas[m], &arg)
        })
    }

    fn forward(&self, x: &DenseVector) -> Result<DenseVector> {
        if self.h.is_zero() {
            Ok(x.clone())
        } else {
            DenseVector::lin_comb(&[(1.0, x), (-self.tau, &self.h.grad(x)?)])
        }
    }
}

impl StepMap for ParallelPrimalDual<'_> {
    fn name(&self) -> &'static str {
        match self.family {
            PrimalDualFamily::CpI => "parallel chambolle-pock I",
            PrimalDualFamily::CpII => "parallel chambolle-pock II",
            PrimalDualFamily::Lv => "parallel loris-verhoeven",
            PrimalDualFamily::CvI => "parallel condat-vu I",
            PrimalDualFamily::CvII => "parallel condat-vu II",
            PrimalDualFamily::Pd3o => "parallel pd3o",
        }
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        use PrimalDualFamily as P;
        let us = &state.duals;
        if us.len() != self.gs.len() {
            return Err(Error::DimensionMismatch {
                context: "parallel dual blocks",
                expected: self.gs.len(),
                actual: us.len(),
            });
        }
        let tau = self.tau;
        let (primary_target, xh, uhs) = match self.family {
            P::CpI | P::CvI => {
                let x = &state.primary;
                let lu = self.adjoint_sum(us)?;
                let xh = self.f.prox_point(
                    tau,
                    &DenseVector::lin_comb(&[(1.0, &self.forward(x)?), (-tau, &lu)])?,
                )?;
                let uhs = self.dual_prox(us, &DenseVector::lin_comb(&[(2.0, &xh), (-1.0, x)])?)?;
                (xh.clone(), xh, uhs)
            }
            P::CpII | P::CvII => {
                let x = &state.primary;
                let uhs = self.dual_prox(us, x)?;
                let extrapolated = uhs
                    .iter()
                    .zip(us)
                    .map(|(uh, u)| DenseVector::lin_comb(&[(2.0, uh), (-1.0, u)]))
                    .collect::<Result<Vec<_>>>()?;
                let lu = self.adjoint_sum(&extrapolated)?;
                let xh = self.f.prox_point(
                    tau,
                    &DenseVector::lin_comb(&[(1.0, &self.forward(x)?), (-tau, &lu)])?,
                )?;
                (xh.clone(), xh, uhs)
            }
            P::Lv => {
                let st = &state.primary;
                let lu = self.adjoint_sum(us)?;
                let x = DenseVector::lin_comb(&[(1.0, st), (-tau, &lu)])?;
                let fx = self.forward(&x)?;
                let a = fx.sub(st)?;
                let uhs = self.dual_prox(us, &x.add(&a)?)?;
                let luh = self.adjoint_sum(&uhs)?;
                let xh = DenseVector::lin_comb(&[(1.0, &fx), (-tau, &luh)])?;
                (st.add(&a)?, xh, uhs)
            }
            P::Pd3o => {
                let st = &state.primary;
                let lu = self.adjoint_sum(us)?;
                let xh = self
                    .f
                    .prox_point(tau, &DenseVector::lin_comb(&[(1.0, st), (-tau, &lu)])?)?;
                let a = self.forward(&xh)?.sub(st)?;
                let uhs = self.dual_prox(us, &xh.add(&a)?)?;
                (st.add(&a)?, xh, uhs)
            }
        };
        let mut z = vec![state.primary.clone()];
        z.extend(us.iter().cloned());
        let mut tz = vec![primary_target];
        tz.extend(uhs.iter().cloned());
        let mut relaxed = z
            .iter()
            .zip(&tz)
            .map(|(a, b)| a.relax(b, rho))
            .collect::<Result<Vec<_>>>()?;
        let primary = relaxed.remove(0);
        Ok(StepOutcome {
            next: state.successor(primary, relaxed),
            z,
            tz,
            estimate: xh,
            dual_estimates: uhs,
        })
    }
}

/// The parallel method behind a plain algorithm name, when one exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ParallelFamily {
    Consensus(ConsensusFamily),
    PrimalDual(PrimalDualFamily),
}

impl ParallelFamily {
    pub fn of(algorithm: Algorithm) -> Option<ParallelFamily> {
        use Algorithm as A;
        Some(match algorithm {
            A::Dr => ParallelFamily::Consensus(ConsensusFamily::DrI),
            A::Dy => ParallelFamily::Consensus(ConsensusFamily::Dy),
            A::CpI => ParallelFamily::PrimalDual(PrimalDualFamily::CpI),
            A::CpII => ParallelFamily::PrimalDual(PrimalDualFamily::CpII),
            A::Lv => ParallelFamily::PrimalDual(PrimalDualFamily::Lv),
            A::CvI => ParallelFamily::PrimalDual(PrimalDualFamily::CvI),
            A::CvII => ParallelFamily::PrimalDual(PrimalDualFamily::CvII),
            A::Pd3o => ParallelFamily::PrimalDual(PrimalDualFamily::Pd3o),
            _ => return None,
        })
    }

    pub fn mode(self) -> LiftMode {
        match self {
            ParallelFamily::Consensus(_) => LiftMode::Consensus,
            ParallelFamily::PrimalDual(_) => LiftMode::Stacked,
        }
    }
}

fn parallel_candidates(family: ParallelFamily, quadratic_mode: bool) -> Vec<Theorem> {
    use ConsensusFamily as C;
    use PrimalDualFamily as P;
    use Theorem as T;
    match family {
        ParallelFamily::Consensus(C::DrI | C::DrII) => vec![T::ParallelDr],
        ParallelFamily::Consensus(C::Dy) => vec![T::ParallelDy],
        ParallelFamily::PrimalDual(P::CpI | P::CpII) => vec![T::ParallelCp],
        ParallelFamily::PrimalDual(P::Lv) if quadratic_mode => vec![T::ParallelLvQuadratic],
        ParallelFamily::PrimalDual(P::Lv) => vec![T::ParallelLvStrict, T::ParallelLvBoundary],
        ParallelFamily::PrimalDual(P::CvI | P::CvII) if quadratic_mode => {
            vec![T::ParallelCvQuadratic]
        }
        ParallelFamily::PrimalDual(P::CvI | P::CvII) => vec![T::ParallelCv],
        ParallelFamily::PrimalDual(P::Pd3o) => vec![T::ParallelPd3o],
    }
}

/// Checks the parallel conditions, with `‖Σ σ_m L_m* L_m‖` in place of `σ‖L‖²`.
pub fn validate_parallel(
    lifted: &LiftedProblem,
    family: ParallelFamily,
    cfg: &SolverConfig,
) -> Result<ValidationReport> {
    let smooth = lifted.base.h.smooth_info().ok_or(Error::NotSmooth("h"))?;
    let mut norms = NormTable::new();
    if let (ParallelFamily::PrimalDual(_), Some(sigma)) = (family, cfg.sigma) {
        let sigmas = lifted.sigmas(sigma);
        norms.insert(NORM_PARALLEL, lifted.parallel_norm(&sigmas, None)?);
        if cfg.quadratic_mode {
            let (q, _) = quadratic_parts(&lifted.base.h, lifted.dim()).ok_or_else(|| {
                Error::ContractViolation("quadratic mode needs a quadratic h".into())
            })?;
            norms.insert(
                NORM_Q_PLUS_PARALLEL,
                lifted.parallel_norm(&sigmas, Some(q))?,
            );
        }
    }
    let input = ParamInput {
        tau: cfg.tau,
        sigma: cfg.sigma,
        eta: None,
        gamma: None,
        beta: smooth.lipschitz,
        h_quadratic: smooth.is_quadratic,
        norms: &norms,
        rho: &cfg.rho,
        max_iter: cfg.max_iter,
        burn_in: cfg.burn_in,
    };
    let mut last = None;
    for theorem in parallel_candidates(family, cfg.quadratic_mode) {
        let report = check(theorem, &input)?;
        if report.admissible {
            return Ok(report);
        }
        last = Some(report);
    }
    last.ok_or_else(|| Error::ContractViolation("no applicable convergence statement".into()))
}

/// A parallel method on a lifted problem.
pub struct ParallelSolver {
    pub lifted: LiftedProblem,
    pub family: ParallelFamily,
    pub cfg: SolverConfig,
    pub threads: usize,
    pub report: ValidationReport,
}

impl ParallelSolver {
    pub fn new(problem: &ProblemSpec, cfg: SolverConfig, threads: usize) -> Result<ParallelSolver> {
        cfg.check_relevant()?;
        let family = ParallelFamily::of(cfg.algorithm).ok_or(Error::NotApplicable {
            algorithm: cfg.algorithm.name(),
            reason: "no parallel form".into(),
        })?;
        let lifted = lift(problem, family.mode(), None)?;
        let report = validate_parallel(&lifted, family, &cfg)?;
        Ok(ParallelSolver {
            lifted,
            family,
            cfg,
            threads: threads.max(1),
            report,
        })
    }

    fn step_map(&self) -> Result<Box<dyn StepMap + '_>> {
        let tau = self
            .cfg
            .tau
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs tau", self.cfg.algorithm)))?;
        Ok(match self.family {
            ParallelFamily::Consensus(c) => {
                Box::new(ParallelConsensus::new(&self.lifted, tau, c, self.threads)?)
            }
            ParallelFamily::PrimalDual(p) => {
                let sigma = self.cfg.sigma.ok_or_else(|| {
                    Error::InvalidArgument(format!("{} needs sigma", self.cfg.algorithm))
                })?;
                Box::new(ParallelPrimalDual::new(
                    &self.lifted,
                    tau,
                    sigma,
                    p,
                    self.threads,
                )?)
            }
        })
    }

    pub fn run_with<H>(
        &self,
        x0: Option<&DenseVector>,
        allow_unsafe: bool,
        hook: H,
    ) -> Result<Solution>
    where
        H: FnMut(&StepOutcome, f64) -> ControlFlow<()>,
    {
        let x0 = x0
            .cloned()
            .unwrap_or_else(|| DenseVector::zeros(self.lifted.dim()));
        let step = self.step_map()?;
        let state = match self.family {
            ParallelFamily::Consensus(_) => IterState::new(self.lifted.lift_point(&x0)),
            ParallelFamily::PrimalDual(_) => {
                let duals = self
                    .lifted
                    .base
                    .terms
                    .iter()
                    .map(|t| DenseVector::zeros(t.l.out_dim()))
                    .collect();
                IterState::with_duals(x0.clone(), duals)
            }
        };
        let admission = if allow_unsafe {
            Admission::Unsafe
        } else {
            Admission::Validated(&self.report)
        };
        let drive = DriveConfig::new(self.cfg.rho.clone(), self.cfg.max_iter, self.cfg.stop_tol);
        let outcome = relaxed_drive(&step, state, &drive, admission, hook)?;
        let (x, term_duals) = match &outcome.last {
            Some(last) => (last.estimate.clone(), last.dual_estimates.clone()),
            None => (x0, Vec::new()),
        };
        Ok(Solution {
            x,
            term_duals,
            outcome,
        })
    }

    pub fn run(&self, x0: Option<&DenseVector>, allow_unsafe: bool) -> Result<Solution> {
        self.run_with(x0, allow_unsafe, |_, _| ControlFlow::Continue(()))
    }
}
