//! Methods whose relaxed variable lives in the primal space.

use super::{IterState, StepMap, StepOutcome};
use crate::error::Result;
use crate::prox::{prox_postcomposition, FunSpec};
use crate::space::{DenseVector, LinOp};

pub(crate) static ZERO: FunSpec = FunSpec::Zero;

/// `x^{+½} = prox_{γf}(x − γ∇h(x))`, optionally in the diagonal metric `P`.
pub struct ForwardBackward<'a> {
    pub f: &'a FunSpec,
    pub h: &'a FunSpec,
    pub gamma: f64,
    /// Diagonal of the preconditioner `P`.
    pub metric: Option<DenseVector>,
}

impl<'a> ForwardBackward<'a> {
    pub fn new(f: &'a FunSpec, h: &'a FunSpec, gamma: f64) -> Self {
        ForwardBackward {
            f,
            h,
            gamma,
            metric: None,
        }
    }

    pub fn proximal_point(f: &'a FunSpec, gamma: f64) -> Self {
        Self::new(f, &ZERO, gamma)
    }

    pub fn preconditioned(mut self, diag: DenseVector) -> Self {
        self.metric = Some(diag);
        self
    }

    pub fn half_step(&self, x: &DenseVector) -> Result<DenseVector> {
        let g = self.h.grad(x)?;
        match &self.metric {
            None => {
                let arg = DenseVector::lin_comb(&[(1.0, x), (-self.gamma, &g)])?;
                self.f.prox_point(self.gamma, &arg)
            }
            Some(p) => {
                let arg = x.zip_with(&g.zip_with(p, |gi, pi| gi / pi)?, |xi, di| {
                    xi - self.gamma * di
                })?;
                let steps = p.map(|pi| self.gamma / pi)?;
                self.f.prox_diagonal(&steps, &arg)
            }
        }
    }
}

impl StepMap for ForwardBackward<'_> {
    fn name(&self) -> &'static str {
        if self.h.is_zero() {
            "proximal point"
        } else {
            "forward-backward"
        }
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let x = &state.primary;
        let xh = self.half_step(x)?;
        let next = x.relax(&xh, rho)?;
        Ok(StepOutcome {
            next: state.successor(next, Vec::new()),
            z: vec![x.clone()],
            tz: vec![xh.clone()],
            estimate: xh,
            dual_estimates: Vec::new(),
        })
    }
}

/// Douglas–Rachford on `f + g + ⟨c,·⟩` with the drift folded into the `f` step.
pub struct DouglasRachford<'a> {
    pub f: &'a FunSpec,
    pub g: &'a FunSpec,
    pub tau: f64,
    pub drift: Option<&'a DenseVector>,
}

impl<'a> DouglasRachford<'a> {
    pub fn new(f: &'a FunSpec, g: &'a FunSpec, tau: f64) -> Self {
        DouglasRachford {
            f,
            g,
            tau,
            drift: None,
        }
    }

    pub fn with_drift(mut self, c: &'a DenseVector) -> Self {
        self.drift = Some(c);
        self
    }
}

impl StepMap for DouglasRachford<'_> {
    fn name(&self) -> &'static str {
        "douglas-rachford"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let s = &state.primary;
        let tau = self.tau;
        let arg = match self.drift {
            Some(c) => DenseVector::lin_comb(&[(1.0, s), (-tau, c)])?,
            None => s.clone(),
        };
        let xh = self.f.prox_point(tau, &arg)?;
        let reflected = DenseVector::lin_comb(&[(2.0, &xh), (-1.0, s)])?;
        let y = self.g.prox_point(tau, &reflected)?;
        let ts = DenseVector::lin_comb(&[(1.0, s), (1.0, &y), (-1.0, &xh)])?;
        // element of ∂g(y), the dual variable of the compact primal form
        let u = DenseVector::lin_comb(&[(1.0 / tau, &reflected), (-1.0 / tau, &y)])?;
        let next = s.relax(&ts, rho)?;
        Ok(StepOutcome {
            next: state.successor(next, Vec::new()),
            z: vec![s.clone()],
            tz: vec![ts],
            estimate: xh,
            dual_estimates: vec![u],
        })
    }
}

/// ADMM with state `(w, ṽ)`; the relaxed variable is `s = w − ṽ`.
pub struct Admm<'a> {
    pub f: &'a FunSpec,
    pub g: &'a FunSpec,
    pub tau: f64,
}

impl StepMap for Admm<'_> {
    fn name(&self) -> &'static str {
        "admm"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let w = &state.primary;
        let v = state.dual(0)?;
        let s = w.sub(v)?;
        let xh = self.f.prox_point(self.tau, &s)?;
        let vh = DenseVector::lin_comb(&[(1.0, v), (1.0, &xh), (-1.0, w)])?;
        let w_next = self.g.prox_point(self.tau, &xh.add(&vh)?)?;
        let v_next = DenseVector::lin_comb(&[(1.0, &vh), (rho - 1.0, &xh), (1.0 - rho, &w_next)])?;
        let ts = DenseVector::lin_comb(&[(1.0, &s), (1.0, &w_next), (-1.0, &xh)])?;
        let u = vh.scale(1.0 / self.tau)?;
        Ok(StepOutcome {
            next: state.successor(w_next, vec![v_next]),
            z: vec![s],
            tz: vec![ts],
            estimate: xh,
            dual_estimates: vec![u],
        })
    }
}

/// ADMM variant with the relaxation applied inside the `ṽ` update. The
/// residual is measured on consecutive iterates `(w, ṽ)`.
pub struct AdmmAlt<'a> {
    pub f: &'a FunSpec,
    pub g: &'a FunSpec,
    pub tau: f64,
}

impl StepMap for AdmmAlt<'_> {
    fn name(&self) -> &'static str {
        "admm-alt"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let w = &state.primary;
        let v = state.dual(0)?;
        let xh = self.f.prox_point(self.tau, &w.sub(v)?)?;
        let v_next = DenseVector::lin_comb(&[(1.0, v), (rho, &xh), (-rho, w)])?;
        let w_next = self.g.prox_point(self.tau, &v_next.add(&xh)?)?;
        let u = v_next.scale(1.0 / self.tau)?;
        Ok(StepOutcome {
            next: state.successor(w_next.clone(), vec![v_next.clone()]),
            z: vec![w.clone(), v.clone()],
            tz: vec![w_next, v_next],
            estimate: xh,
            dual_estimates: vec![u],
        })
    }
}

/// Douglas–Rachford form of ADMM for `min f(x) + g(y)` s.t. `Lx + Ky = c`.
pub struct LiftedAdmm<'a> {
    pub f: &'a FunSpec,
    pub l: &'a LinOp,
    pub g: &'a FunSpec,
    pub k: &'a LinOp,
    pub c: &'a DenseVector,
    pub tau: f64,
}

impl LiftedAdmm<'_> {
    /// `s⁰ = −K y⁰ + c − ṽ⁰`
    pub fn initial_s(&self, y0: &DenseVector, v0: &DenseVector) -> Result<DenseVector> {
        DenseVector::lin_comb(&[(-1.0, &self.k.apply(y0)?), (1.0, self.c), (-1.0, v0)])
    }
}

impl StepMap for LiftedAdmm<'_> {
    fn name(&self) -> &'static str {
        "lifted admm"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let s = &state.primary;
        let (lx, x) = prox_postcomposition(self.f, self.l, self.tau, s)?;
        let target = DenseVector::lin_comb(&[(1.0, self.c), (-2.0, &lx), (1.0, s)])?;
        let (ky, y) = prox_postcomposition(self.g, self.k, self.tau, &target)?;
        let gap = DenseVector::lin_comb(&[(1.0, &lx), (1.0, &ky), (-1.0, self.c)])?;
        let ts = s.sub(&gap)?;
        let next = s.relax(&ts, rho)?;
        let u = lx.sub(s)?.scale(1.0 / self.tau)?;
        Ok(StepOutcome {
            next: state.successor(next, Vec::new()).with_aux("y", y),
            z: vec![s.clone()],
            tz: vec![ts],
            estimate: x,
            dual_estimates: vec![u],
        })
    }
}

/// Davis–Yin three-operator splitting.
pub struct DavisYin<'a> {
    pub f: &'a FunSpec,
    pub g: &'a FunSpec,
    pub h: &'a FunSpec,
    pub tau: f64,
}

impl StepMap for DavisYin<'_> {
    fn name(&self) -> &'static str {
        "davis-yin"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let s = &state.primary;
        let tau = self.tau;
        let xh = self.f.prox_point(tau, s)?;
        let gh = self.h.grad(&xh)?;
        let arg = DenseVector::lin_comb(&[(2.0, &xh), (-1.0, s), (-tau, &gh)])?;
        let y = self.g.prox_point(tau, &arg)?;
        let ts = DenseVector::lin_comb(&[(1.0, s), (1.0, &y), (-1.0, &xh)])?;
        let u = arg.sub(&y)?.scale(1.0 / tau)?;
        let next = s.relax(&ts, rho)?;
        Ok(StepOutcome {
            next: state.successor(next, Vec::new()),
            z: vec![s.clone()],
            tz: vec![ts],
            estimate: xh,
            dual_estimates: vec![u],
        })
    }
}
