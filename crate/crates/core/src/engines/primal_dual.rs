//! Primal–dual methods for `f(x) + g(Lx) + h(x)`.

use super::primal::ZERO;
use super::{relax_all, IterState, StepMap, StepOutcome};
use crate::error::{Error, Result};
use crate::prox::FunSpec;
use crate::space::{DenseVector, LinOp};

/// Which of the two mirrored orderings a primal–dual method uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Form {
    /// Primal update first.
    I,
    /// Dual update first.
    II,
}

/// Condat–Vũ; with `h = 0` this is Chambolle–Pock.
pub struct CondatVu<'a> {
    pub f: &'a FunSpec,
    pub g: &'a FunSpec,
    pub l: &'a LinOp,
    pub h: &'a FunSpec,
    pub tau: f64,
    pub sigma: f64,
    pub form: Form,
}

pub struct ChambollePock<'a>(pub CondatVu<'a>);

impl<'a> ChambollePock<'a> {
    pub fn new(
        f: &'a FunSpec,
        g: &'a FunSpec,
        l: &'a LinOp,
        tau: f64,
        sigma: f64,
        form: Form,
    ) -> Self {
        ChambollePock(CondatVu {
            f,
            g,
            l,
            h: &ZERO,
            tau,
            sigma,
            form,
        })
    }
}

impl StepMap for ChambollePock<'_> {
    fn name(&self) -> &'static str {
        match self.0.form {
            Form::I => "chambolle-pock I",
            Form::II => "chambolle-pock II",
        }
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        self.0.step(state, rho)
    }
}

impl StepMap for CondatVu<'_> {
    fn name(&self) -> &'static str {
        match self.form {
            Form::I => "condat-vu I",
            Form::II => "condat-vu II",
        }
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let x = &state.primary;
        let u = state.dual(0)?;
        let (tau, sigma) = (self.tau, self.sigma);
        let grad = if self.h.is_zero() {
            None
        } else {
            Some(self.h.grad(x)?)
        };
        let primal_arg = |lu: &DenseVector| -> Result<DenseVector> {
            match &grad {
                Some(g) => DenseVector::lin_comb(&[(1.0, x), (-tau, g), (-tau, lu)]),
                None => DenseVector::lin_comb(&[(1.0, x), (-tau, lu)]),
            }
        };
        let (xh, uh) = match self.form {
            Form::I => {
                let xh = self
                    .f
                    .prox_point(tau, &primal_arg(&self.l.adjoint_apply(u)?)?)?;
                let ext = DenseVector::lin_comb(&[(2.0, &xh), (-1.0, x)])?;
                let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&ext)?)])?;
                (xh, self.g.prox_conjugate_point(sigma, &arg)?)
            }
            Form::II => {
                let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(x)?)])?;
                let uh = self.g.prox_conjugate_point(sigma, &arg)?;
                let ext = DenseVector::lin_comb(&[(2.0, &uh), (-1.0, u)])?;
                let xh = self
                    .f
                    .prox_point(tau, &primal_arg(&self.l.adjoint_apply(&ext)?)?)?;
                (xh, uh)
            }
        };
        let z = vec![x.clone(), u.clone()];
        let tz = vec![xh.clone(), uh.clone()];
        let mut next = relax_all(&z, &tz, rho)?;
        let u_next = next.pop().expect("two blocks");
        let x_next = next.pop().expect("two blocks");
        Ok(StepOutcome {
            next: state.successor(x_next, vec![u_next]),
            z,
            tz,
            estimate: xh,
            dual_estimates: vec![uh],
        })
    }
}

/// Proximal method of multipliers for `g(Lx) + ⟨c, x⟩`, compact form.
pub struct ProximalMultipliers<'a> {
    pub g: &'a FunSpec,
    pub l: &'a LinOp,
    pub c: Option<&'a DenseVector>,
    pub tau: f64,
    pub sigma: f64,
}

impl StepMap for ProximalMultipliers<'_> {
    fn name(&self) -> &'static str {
        "proximal method of multipliers"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let x = &state.primary;
        let u = state.dual(0)?;
        let (tau, sigma) = (self.tau, self.sigma);
        let lu = self.l.adjoint_apply(u)?;
        let a = match self.c {
            Some(c) => lu.add(c)?,
            None => lu,
        };
        let inner = DenseVector::lin_comb(&[(1.0, x), (-2.0 * tau, &a)])?;
        let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&inner)?)])?;
        let uh = self.g.prox_conjugate_point(sigma, &arg)?;
        let xh = DenseVector::lin_comb(&[(1.0, x), (-tau, &a)])?;
        let x_next = DenseVector::lin_comb(&[(1.0, x), (-rho * tau, &a)])?;
        let u_next = u.relax(&uh, rho)?;
        Ok(StepOutcome {
            next: state.successor(x_next, vec![u_next]),
            z: vec![x.clone(), u.clone()],
            tz: vec![xh.clone(), uh.clone()],
            estimate: xh,
            dual_estimates: vec![uh],
        })
    }
}

/// Loris–Verhoeven for `g(Lx) + h(x)`. The buffered form keeps `l = L*u`
/// so that each step calls `∇h` and `L*` once.
pub struct LorisVerhoeven<'a> {
    pub g: &'a FunSpec,
    pub l: &'a LinOp,
    pub h: &'a FunSpec,
    pub tau: f64,
    pub sigma: f64,
    pub buffered: bool,
}

impl StepMap for LorisVerhoeven<'_> {
    fn name(&self) -> &'static str {
        "loris-verhoeven"
    }

    fn prepare(&self, state: IterState) -> Result<IterState> {
        if !self.buffered {
            return Ok(state);
        }
        let lu = self.l.adjoint_apply(state.dual(0)?)?;
        Ok(state.with_aux("l", lu))
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let x = &state.primary;
        let u = state.dual(0)?;
        let (tau, sigma) = (self.tau, self.sigma);
        let b = self.h.grad(x)?;
        let lu = if self.buffered {
            state.aux("l")?.clone()
        } else {
            self.l.adjoint_apply(u)?
        };
        let inner = DenseVector::lin_comb(&[(1.0, x), (-tau, &b), (-tau, &lu)])?;
        let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&inner)?)])?;
        let uh = self.g.prox_conjugate_point(sigma, &arg)?;
        let luh = self.l.adjoint_apply(&uh)?;
        let xh = DenseVector::lin_comb(&[(1.0, x), (-tau, &b), (-tau, &luh)])?;
        let x_next = DenseVector::lin_comb(&[(1.0, x), (-rho * tau, &b), (-rho * tau, &luh)])?;
        let u_next = u.relax(&uh, rho)?;
        let mut next = state.successor(x_next, vec![u_next]);
        if self.buffered {
            next = next.with_aux("l", lu.relax(&luh, rho)?);
        }
        Ok(StepOutcome {
            next,
            z: vec![x.clone(), u.clone()],
            tz: vec![xh.clone(), uh.clone()],
            estimate: xh,
            dual_estimates: vec![uh],
        })
    }
}

/// Primal–dual fixed-point method; two `prox_{τf}` calls per step.
pub struct Pdfp<'a> {
    pub f: &'a FunSpec,
    pub g: &'a FunSpec,
    pub l: &'a LinOp,
    pub h: &'a FunSpec,
    pub tau: f64,
    pub sigma: f64,
}

impl StepMap for Pdfp<'_> {
    fn name(&self) -> &'static str {
        "pdfp"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let x = &state.primary;
        let u = state.dual(0)?;
        let (tau, sigma) = (self.tau, self.sigma);
        let b = self.h.grad(x)?;
        let forward = DenseVector::lin_comb(&[(1.0, x), (-tau, &b)])?;
        let lu = self.l.adjoint_apply(u)?;
        let predictor = self.f.prox_point(
            tau,
            &DenseVector::lin_comb(&[(1.0, &forward), (-tau, &lu)])?,
        )?;
        let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&predictor)?)])?;
        let uh = self.g.prox_conjugate_point(sigma, &arg)?;
        let luh = self.l.adjoint_apply(&uh)?;
        let xh = self.f.prox_point(
            tau,
            &DenseVector::lin_comb(&[(1.0, &forward), (-tau, &luh)])?,
        )?;
        let z = vec![x.clone(), u.clone()];
        let tz = vec![xh.clone(), uh.clone()];
        let next = relax_all(&z, &tz, rho)?;
        Ok(StepOutcome {
            next: state.successor(next[0].clone(), vec![next[1].clone()]),
            z,
            tz,
            estimate: xh,
            dual_estimates: vec![uh],
        })
    }
}

/// PD3O on `(s, u)`; the compact form runs on `(s̃, u)` with `s̃ = s + τL*u`.
pub struct Pd3o<'a> {
    pub f: &'a FunSpec,
    pub g: &'a FunSpec,
    pub l: &'a LinOp,
    pub h: &'a FunSpec,
    pub tau: f64,
    pub sigma: f64,
    pub compact: bool,
}

impl Pd3o<'_> {
    /// Converts `(s, u)` into the compact variable `s̃`.
    pub fn compact_primary(&self, s: &DenseVector, u: &DenseVector) -> Result<DenseVector> {
        DenseVector::lin_comb(&[(1.0, s), (self.tau, &self.l.adjoint_apply(u)?)])
    }
}

impl StepMap for Pd3o<'_> {
    fn name(&self) -> &'static str {
        "pd3o"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let u = state.dual(0)?;
        let (tau, sigma) = (self.tau, self.sigma);
        let lu = self.l.adjoint_apply(u)?;
        if self.compact {
            let st = &state.primary;
            let s = DenseVector::lin_comb(&[(1.0, st), (-tau, &lu)])?;
            let xh = self.f.prox_point(tau, &s)?;
            let gh = self.h.grad(&xh)?;
            let a = DenseVector::lin_comb(&[(1.0, &xh), (-tau, &gh), (-1.0, st)])?;
            let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&xh.add(&a)?)?)])?;
            let uh = self.g.prox_conjugate_point(sigma, &arg)?;
            let tst = st.add(&a)?;
            let st_next = DenseVector::lin_comb(&[(1.0, st), (rho, &a)])?;
            let u_next = u.relax(&uh, rho)?;
            return Ok(StepOutcome {
                next: state.successor(st_next, vec![u_next]),
                z: vec![st.clone(), u.clone()],
                tz: vec![tst, uh.clone()],
                estimate: xh,
                dual_estimates: vec![uh],
            });
        }
        let s = &state.primary;
        let xh = self.f.prox_point(tau, s)?;
        let gh = self.h.grad(&xh)?;
        let inner = DenseVector::lin_comb(&[(2.0, &xh), (-1.0, s), (-tau, &gh), (-tau, &lu)])?;
        let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&inner)?)])?;
        let uh = self.g.prox_conjugate_point(sigma, &arg)?;
        let luh = self.l.adjoint_apply(&uh)?;
        let sh = DenseVector::lin_comb(&[(1.0, &xh), (-tau, &gh), (-tau, &luh)])?;
        let z = vec![s.clone(), u.clone()];
        let tz = vec![sh, uh.clone()];
        let next = relax_all(&z, &tz, rho)?;
        Ok(StepOutcome {
            next: state.successor(next[0].clone(), vec![next[1].clone()]),
            z,
            tz,
            estimate: xh,
            dual_estimates: vec![uh],
        })
    }
}

/// Primal–dual Douglas–Rachford for `f + g∘L + ½⟨·,Q·⟩ + ⟨c,·⟩`, splitting
/// the quadratic evenly between the two resolvents.
pub struct PddrQuad<'a> {
    pub f: &'a FunSpec,
    pub g: &'a FunSpec,
    pub l: &'a LinOp,
    pub q: &'a LinOp,
    pub c: &'a DenseVector,
    pub tau: f64,
    pub sigma: f64,
    pub form: Form,
}

impl<'a> PddrQuad<'a> {
    /// Builds the method from a quadratic `h`.
    pub fn from_quadratic(
        f: &'a FunSpec,
        g: &'a FunSpec,
        l: &'a LinOp,
        h: &'a FunSpec,
        tau: f64,
        sigma: f64,
        form: Form,
    ) -> Result<Self> {
        let quad = h.as_quadratic().ok_or_else(|| {
            Error::ContractViolation(format!(
                "the primal-dual Douglas-Rachford method needs a quadratic h, got {}",
                h.kind_name()
            ))
        })?;
        Ok(PddrQuad {
            f,
            g,
            l,
            q: quad.q(),
            c: quad.c(),
            tau,
            sigma,
            form,
        })
    }
}

impl StepMap for PddrQuad<'_> {
    fn name(&self) -> &'static str {
        match self.form {
            Form::I => "primal-dual douglas-rachford I",
            Form::II => "primal-dual douglas-rachford II",
        }
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let s = &state.primary;
        let u = state.dual(0)?;
        let (tau, sigma) = (self.tau, self.sigma);
        let half = 0.5 * tau;
        let qs = self.q.apply(s)?;
        let lu = self.l.adjoint_apply(u)?;
        match self.form {
            Form::I => {
                let xh = self.f.prox_point(
                    tau,
                    &DenseVector::lin_comb(&[(1.0, s), (-half, &qs), (-tau, self.c)])?,
                )?;
                let w = DenseVector::lin_comb(&[(2.0, &xh), (-1.0, s)])?;
                let qw = self.q.apply(&w)?;
                let inner = DenseVector::lin_comb(&[(1.0, &w), (-half, &qw), (-tau, &lu)])?;
                let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&inner)?)])?;
                let uh = self.g.prox_conjugate_point(sigma, &arg)?;
                let luh = self.l.adjoint_apply(&uh)?;
                let sh = DenseVector::lin_comb(&[(1.0, &xh), (-half, &qw), (-tau, &luh)])?;
                let z = vec![s.clone(), u.clone()];
                let tz = vec![sh, uh.clone()];
                let next = relax_all(&z, &tz, rho)?;
                Ok(StepOutcome {
                    next: state.successor(next[0].clone(), vec![next[1].clone()]),
                    z,
                    tz,
                    estimate: xh,
                    dual_estimates: vec![uh],
                })
            }
            Form::II => {
                let inner = DenseVector::lin_comb(&[(1.0, s), (-half, &qs), (-tau, &lu)])?;
                let arg = DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&inner)?)])?;
                let uh = self.g.prox_conjugate_point(sigma, &arg)?;
                let luh = self.l.adjoint_apply(&uh)?;
                let y = DenseVector::lin_comb(&[(1.0, s), (-half, &qs), (-tau, &luh)])?;
                let p = DenseVector::lin_comb(&[(2.0, &y), (-1.0, s)])?;
                let qp = self.q.apply(&p)?;
                let xh = self.f.prox_point(
                    tau,
                    &DenseVector::lin_comb(&[(1.0, &p), (-half, &qp), (-tau, self.c)])?,
                )?;
                let sh = DenseVector::lin_comb(&[(1.0, s), (1.0, &xh), (-1.0, &y)])?;
                let z = vec![s.clone(), u.clone()];
                let tz = vec![sh, uh.clone()];
                let next = relax_all(&z, &tz, rho)?;
                Ok(StepOutcome {
                    next: state.successor(next[0].clone(), vec![next[1].clone()]),
                    z,
                    tz,
                    estimate: xh,
                    dual_estimates: vec![uh],
                })
            }
        }
    }
}
