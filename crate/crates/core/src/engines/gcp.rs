//! Generalized Chambolle–Pock for `f(Kx) + g(Lx) + ⟨c, x⟩` and its
//! extension with a smooth quadratic term on the `v` dual.

use super::{relax_all, IterState, StepMap, StepOutcome};
use crate::error::Result;
use crate::prox::FunSpec;
use crate::space::{DenseVector, LinOp};

/// State is `(x, [u, v])`; the efficient form carries `x̃ = x/τ` as primary
/// with buffers `b = K*v` and `l = L*u + b + c`.
pub struct Gcp<'a> {
    pub f: &'a FunSpec,
    pub k: &'a LinOp,
    pub g: &'a FunSpec,
    pub l: &'a LinOp,
    pub c: Option<&'a DenseVector>,
    pub tau: f64,
    pub sigma: f64,
    pub eta: f64,
    pub efficient: bool,
}

impl Gcp<'_> {
    /// Converts a plain state to the scaled efficient variable.
    pub fn scaled_primary(&self, x: &DenseVector) -> Result<DenseVector> {
        x.scale(1.0 / self.tau)
    }

    fn with_c(&self, v: DenseVector) -> Result<DenseVector> {
        match self.c {
            Some(c) => v.add(c),
            None => Ok(v),
        }
    }

    fn plain_step(
        &self,
        state: &IterState,
        rho: f64,
        forward: Option<(&LinOp, &DenseVector)>,
    ) -> Result<StepOutcome> {
        let x = &state.primary;
        let u = state.dual(0)?;
        let v = state.dual(1)?;
        let (tau, sigma, eta) = (self.tau, self.sigma, self.eta);
        let lu = self.l.adjoint_apply(u)?;
        let r = self.with_c(lu.add(&self.k.adjoint_apply(v)?)?)?;
        let inner = DenseVector::lin_comb(&[(1.0, x), (-tau, &r)])?;
        let mut arg = DenseVector::lin_comb(&[(1.0, v), (eta, &self.k.apply(&inner)?)])?;
        if let Some((q, t)) = forward {
            arg = DenseVector::lin_comb(&[(1.0, &arg), (-eta, &q.apply(v)?), (-eta, t)])?;
        }
        let vh = self.f.prox_conjugate_point(eta, &arg)?;
        let rh = self.with_c(lu.add(&self.k.adjoint_apply(&vh)?)?)?;
        let xh = DenseVector::lin_comb(&[(1.0, x), (-tau, &rh)])?;
        let ext = DenseVector::lin_comb(&[(2.0, &xh), (-1.0, x)])?;
        let uh = self.g.prox_conjugate_point(
            sigma,
            &DenseVector::lin_comb(&[(1.0, u), (sigma, &self.l.apply(&ext)?)])?,
        )?;
        let z = vec![x.clone(), u.clone(), v.clone()];
        let tz = vec![xh.clone(), uh.clone(), vh.clone()];
        let next = relax_all(&z, &tz, rho)?;
        Ok(StepOutcome {
            next: state.successor(next[0].clone(), vec![next[1].clone(), next[2].clone()]),
            z,
            tz,
            estimate: xh,
            dual_estimates: vec![uh, vh],
        })
    }

    fn efficient_step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        let xt = &state.primary;
        let u = state.dual(0)?;
        let v = state.dual(1)?;
        let (tau, sigma, eta) = (self.tau, self.sigma, self.eta);
        let b = state.aux("b")?;
        let l = state.aux("l")?;
        let arg = DenseVector::lin_comb(&[(1.0, v), (eta * tau, &self.k.apply(&xt.sub(l)?)?)])?;
        let vh = self.f.prox_conjugate_point(eta, &arg)?;
        let bh = self.k.adjoint_apply(&vh)?;
        let lh = DenseVector::lin_comb(&[(1.0, l), (1.0, &bh), (-1.0, b)])?;
        let inner = DenseVector::lin_comb(&[(1.0, xt), (-2.0, &lh)])?;
        let uh = self.g.prox_conjugate_point(
            sigma,
            &DenseVector::lin_comb(&[(1.0, u), (sigma * tau, &self.l.apply(&inner)?)])?,
        )?;
        let xt_next = DenseVector::lin_comb(&[(1.0, xt), (-rho, &lh)])?;
        let u_next = u.relax(&uh, rho)?;
        let v_next = v.relax(&vh, rho)?;
        let b_next = DenseVector::lin_comb(&[(1.0, b), (rho, &lh), (-rho, l)])?;
        let l_next = self.with_c(self.l.adjoint_apply(&u_next)?.add(&b_next)?)?;
        let x = xt.scale(tau)?;
        let xh = DenseVector::lin_comb(&[(tau, xt), (-tau, &lh)])?;
        Ok(StepOutcome {
            next: state
                .successor(xt_next, vec![u_next, v_next])
                .with_aux("b", b_next)
                .with_aux("l", l_next),
            z: vec![x, u.clone(), v.clone()],
            tz: vec![xh.clone(), uh.clone(), vh.clone()],
            estimate: xh,
            dual_estimates: vec![uh, vh],
        })
    }
}

impl StepMap for Gcp<'_> {
    fn name(&self) -> &'static str {
        "generalized chambolle-pock"
    }

    fn prepare(&self, state: IterState) -> Result<IterState> {
        if !self.efficient {
            return Ok(state);
        }
        let b = self.k.adjoint_apply(state.dual(1)?)?;
        let l = self.with_c(self.l.adjoint_apply(state.dual(0)?)?.add(&b)?)?;
        Ok(state.with_aux("b", b).with_aux("l", l))
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        if self.efficient {
            self.efficient_step(state, rho)
        } else {
            self.plain_step(state, rho, None)
        }
    }
}

/// Adds the forward term `−η(Q v + t)` to the `v` update.
pub struct Egcp<'a> {
    pub base: Gcp<'a>,
    pub qdual: &'a LinOp,
    pub t: &'a DenseVector,
}

impl StepMap for Egcp<'_> {
    fn name(&self) -> &'static str {
        "extended generalized chambolle-pock"
    }

    fn step(&self, state: &IterState, rho: f64) -> Result<StepOutcome> {
        self.base.plain_step(state, rho, Some((self.qdual, self.t)))
    }
}
