//! Pairs of methods whose iterates coincide under a variable correspondence.
//! Each check runs both methods for `ITERS` steps under a varying relaxation
//! and returns the largest deviation between corresponding quantities.

use std::sync::Arc;

use proxsplit::engines::{
    iterate, Admm, ChambollePock, CondatVu, DavisYin, DouglasRachford, Form, ForwardBackward, Gcp,
    IterState, LorisVerhoeven, Pd3o, Pdfp, ProximalMultipliers, RhoSchedule, StepMap, StepOutcome,
};
use proxsplit::space::Matrix;
use proxsplit::{DenseVector, FunSpec, LinOp};
use rand_chacha::ChaCha8Rng;

use super::{random_vector, rng};

pub const ITERS: usize = 50;
pub const TOL: f64 = 1e-10;

pub struct Identity {
    pub name: &'static str,
    pub check: fn(u64) -> f64,
}

pub fn identities() -> Vec<Identity> {
    vec![
        Identity {
            name: "loris-verhoeven = forward-backward (L = Id, sigma = 1/tau)",
            check: lv_fb,
        },
        Identity {
            name: "chambolle-pock = douglas-rachford (L = Id, sigma = 1/tau)",
            check: cp_dr,
        },
        Identity {
            name: "condat-vu = chambolle-pock (h = 0)",
            check: cv_cp,
        },
        Identity {
            name: "pd3o = chambolle-pock, loris-verhoeven, davis-yin",
            check: pd3o_family,
        },
        Identity {
            name: "pdfp = loris-verhoeven (f = 0 and f quadratic)",
            check: pdfp_lv,
        },
        Identity {
            name: "generalized chambolle-pock = chambolle-pock (K = Id, eta = 1/tau)",
            check: gcp_cp,
        },
        Identity {
            name: "generalized chambolle-pock = loris-verhoeven (quadratic g)",
            check: gcp_lv,
        },
        Identity {
            name: "proximal multipliers = loris-verhoeven = chambolle-pock",
            check: pmm_lv_cp,
        },
        Identity {
            name: "admm = douglas-rachford",
            check: admm_dr,
        },
        Identity {
            name: "douglas-rachford self-duality",
            check: dr_self_dual,
        },
    ]
}

/// Cycles through over- and under-relaxation.
pub fn varying_rho() -> RhoSchedule {
    RhoSchedule::Custom(Arc::new(|i| [1.0, 1.6, 0.7, 1.9, 1.3][i % 5]))
}

fn run(step: &dyn StepMap, state: IterState, rho: &RhoSchedule) -> Vec<StepOutcome> {
    iterate(step, state, rho, ITERS).expect("steps succeed")
}

fn dev(a: &DenseVector, b: &DenseVector) -> f64 {
    a.max_abs_diff(b)
}

fn lin(terms: &[(f64, &DenseVector)]) -> DenseVector {
    DenseVector::lin_comb(terms).unwrap()
}

pub fn random_op(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> LinOp {
    let scale = 1.0 / (cols as f64).sqrt();
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| random_vector(rng, cols, scale).into_vec())
        .collect();
    LinOp::dense(Matrix::from_rows(&data).unwrap())
}

/// `½‖Ax − y‖²` with random `A` and `y`.
pub fn random_least_squares(rng: &mut ChaCha8Rng, n: usize) -> FunSpec {
    let a = random_op(rng, n + 5, n);
    let y = random_vector(rng, n + 5, 1.0);
    FunSpec::Quadratic(proxsplit::Quadratic::least_squares(&a, &y).unwrap())
}

fn weighted_l1(rng: &mut ChaCha8Rng, n: usize) -> FunSpec {
    FunSpec::l1(0.3)
        .unwrap()
        .translated(random_vector(rng, n, 0.5))
}

fn unit_box(n: usize) -> FunSpec {
    FunSpec::boxed(vec![-0.8; n], vec![0.6; n]).unwrap()
}

fn beta(h: &FunSpec) -> f64 {
    h.smooth_info().unwrap().lipschitz
}

fn lv_fb(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = 24;
    let g = weighted_l1(&mut rng, n);
    let h = random_least_squares(&mut rng, n);
    let id = LinOp::identity(n);
    let tau = 1.5 / beta(&h);
    let x0 = random_vector(&mut rng, n, 1.0);
    let u0 = random_vector(&mut rng, n, 1.0);
    let rho = varying_rho();
    let lv = LorisVerhoeven {
        g: &g,
        l: &id,
        h: &h,
        tau,
        sigma: 1.0 / tau,
        buffered: false,
    };
    let fb = ForwardBackward::new(&g, &h, tau);
    let a = run(&lv, IterState::with_duals(x0.clone(), vec![u0]), &rho);
    let b = run(&fb, IterState::new(x0), &rho);
    a.iter()
        .zip(&b)
        .map(|(p, q)| dev(&p.next.primary, &q.next.primary).max(dev(&p.estimate, &q.estimate)))
        .fold(0.0, f64::max)
}

fn cp_dr(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = 30;
    let f = unit_box(n);
    let g = weighted_l1(&mut rng, n);
    let id = LinOp::identity(n);
    let tau = 0.8;
    let x0 = random_vector(&mut rng, n, 1.0);
    let u0 = random_vector(&mut rng, n, 1.0);
    let rho = varying_rho();
    let cp = ChambollePock::new(&f, &g, &id, tau, 1.0 / tau, Form::I);
    let dr = DouglasRachford::new(&f, &g, tau);
    let s0 = lin(&[(1.0, &x0), (-tau, &u0)]);
    let a = run(&cp, IterState::with_duals(x0, vec![u0]), &rho);
    let b = run(&dr, IterState::new(s0), &rho);
    a.iter()
        .zip(&b)
        .map(|(p, q)| {
            let s = lin(&[(1.0, &p.next.primary), (-tau, &p.next.duals[0])]);
            dev(&s, &q.next.primary).max(dev(&p.estimate, &q.estimate))
        })
        .fold(0.0, f64::max)
}

fn cv_cp(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (n, m) = (20, 14);
    let f = weighted_l1(&mut rng, n);
    let g = unit_box(m);
    let l = random_op(&mut rng, m, n);
    let (tau, sigma) = (0.9, 0.7);
    let x0 = random_vector(&mut rng, n, 1.0);
    let u0 = random_vector(&mut rng, m, 1.0);
    let rho = varying_rho();
    let zero = FunSpec::Zero;
    let mut worst: f64 = 0.0;
    for form in [Form::I, Form::II] {
        let cv = CondatVu {
            f: &f,
            g: &g,
            l: &l,
            h: &zero,
            tau,
            sigma,
            form,
        };
        let cp = ChambollePock::new(&f, &g, &l, tau, sigma, form);
        let a = run(
            &cv,
            IterState::with_duals(x0.clone(), vec![u0.clone()]),
            &rho,
        );
        let b = run(
            &cp,
            IterState::with_duals(x0.clone(), vec![u0.clone()]),
            &rho,
        );
        for (p, q) in a.iter().zip(&b) {
            worst = worst
                .max(dev(&p.next.primary, &q.next.primary))
                .max(dev(&p.next.duals[0], &q.next.duals[0]));
        }
    }
    worst
}

fn pd3o_family(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (n, m) = (18, 12);
    let f = unit_box(n);
    let g = weighted_l1(&mut rng, m);
    let l = random_op(&mut rng, m, n);
    let h = random_least_squares(&mut rng, n);
    let zero = FunSpec::Zero;
    let tau = 1.2 / beta(&h);
    let sigma = 0.5 / tau;
    let x0 = random_vector(&mut rng, n, 1.0);
    let u0 = random_vector(&mut rng, m, 1.0);
    let rho = varying_rho();
    let mut worst: f64 = 0.0;

    // h = 0: chambolle-pock I with s = x − τL*u
    let pd3o = Pd3o {
        f: &f,
        g: &g,
        l: &l,
        h: &zero,
        tau,
        sigma,
        compact: false,
    };
    let cp = ChambollePock::new(&f, &g, &l, tau, sigma, Form::I);
    let s0 = lin(&[(1.0, &x0), (-tau, &l.adjoint_apply(&u0).unwrap())]);
    let a = run(&pd3o, IterState::with_duals(s0, vec![u0.clone()]), &rho);
    let b = run(
        &cp,
        IterState::with_duals(x0.clone(), vec![u0.clone()]),
        &rho,
    );
    for (p, q) in a.iter().zip(&b) {
        let s = lin(&[
            (1.0, &q.next.primary),
            (-tau, &l.adjoint_apply(&q.next.duals[0]).unwrap()),
        ]);
        worst = worst
            .max(dev(&p.next.primary, &s))
            .max(dev(&p.next.duals[0], &q.next.duals[0]))
            .max(dev(&p.estimate, &q.estimate));
    }

    // f = 0: loris-verhoeven with s playing x
    let pd3o = Pd3o {
        f: &zero,
        g: &g,
        l: &l,
        h: &h,
        tau,
        sigma,
        compact: false,
    };
    let lv = LorisVerhoeven {
        g: &g,
        l: &l,
        h: &h,
        tau,
        sigma,
        buffered: false,
    };
    let a = run(
        &pd3o,
        IterState::with_duals(x0.clone(), vec![u0.clone()]),
        &rho,
    );
    let b = run(
        &lv,
        IterState::with_duals(x0.clone(), vec![u0.clone()]),
        &rho,
    );
    for (p, q) in a.iter().zip(&b) {
        worst = worst
            .max(dev(&p.next.primary, &q.next.primary))
            .max(dev(&p.next.duals[0], &q.next.duals[0]));
    }

    // L = Id, σ = 1/τ: davis-yin on the same s
    let id = LinOp::identity(n);
    let g_id = weighted_l1(&mut rng, n);
    let u_id = random_vector(&mut rng, n, 1.0);
    let pd3o = Pd3o {
        f: &f,
        g: &g_id,
        l: &id,
        h: &h,
        tau,
        sigma: 1.0 / tau,
        compact: false,
    };
    let dy = DavisYin {
        f: &f,
        g: &g_id,
        h: &h,
        tau,
    };
    let a = run(&pd3o, IterState::with_duals(x0.clone(), vec![u_id]), &rho);
    let b = run(&dy, IterState::new(x0), &rho);
    for (p, q) in a.iter().zip(&b) {
        worst = worst
            .max(dev(&p.next.primary, &q.next.primary))
            .max(dev(&p.estimate, &q.estimate));
    }
    worst
}

fn pdfp_lv(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (n, m) = (22, 15);
    let g = weighted_l1(&mut rng, m);
    let l = random_op(&mut rng, m, n);
    let h = random_least_squares(&mut rng, n);
    let zero = FunSpec::Zero;
    let x0 = random_vector(&mut rng, n, 1.0);
    let u0 = random_vector(&mut rng, m, 1.0);
    let rho = varying_rho();
    let mut worst: f64 = 0.0;
    let mut compare = |a: &[StepOutcome], b: &[StepOutcome]| {
        for (p, q) in a.iter().zip(b) {
            worst = worst
                .max(dev(&p.next.primary, &q.next.primary))
                .max(dev(&p.next.duals[0], &q.next.duals[0]));
        }
    };

    let tau = 1.1 / beta(&h);
    let sigma = 0.6 / tau;
    let pdfp = Pdfp {
        f: &zero,
        g: &g,
        l: &l,
        h: &h,
        tau,
        sigma,
    };
    let lv = LorisVerhoeven {
        g: &g,
        l: &l,
        h: &h,
        tau,
        sigma,
        buffered: false,
    };
    let state = || IterState::with_duals(x0.clone(), vec![u0.clone()]);
    compare(&run(&pdfp, state(), &rho), &run(&lv, state(), &rho));

    // f = (κ/2)‖·‖² with step τ′ is loris-verhoeven on h + f with τ = τ′/(1 + τ′κ)
    let kappa = 0.7;
    let f = FunSpec::squared_l2(kappa).unwrap();
    let merged = match &h {
        FunSpec::Quadratic(q) => {
            let shifted = q.q_matrix().to_nalgebra() + nalgebra::DMatrix::identity(n, n) * kappa;
            FunSpec::quadratic(
                LinOp::dense(Matrix::from_nalgebra(&shifted)),
                q.c().clone(),
                q.t(),
            )
            .unwrap()
        }
        _ => unreachable!("least squares is quadratic"),
    };
    let tau_prime = 1.3 / beta(&h);
    let tau_lv = tau_prime / (1.0 + tau_prime * kappa);
    let pdfp = Pdfp {
        f: &f,
        g: &g,
        l: &l,
        h: &h,
        tau: tau_prime,
        sigma,
    };
    let lv = LorisVerhoeven {
        g: &g,
        l: &l,
        h: &merged,
        tau: tau_lv,
        sigma,
        buffered: false,
    };
    compare(&run(&pdfp, state(), &rho), &run(&lv, state(), &rho));
    worst
}

fn gcp_cp(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (n, m) = (20, 16);
    let g = weighted_l1(&mut rng, m);
    let l = random_op(&mut rng, m, n);
    let id = LinOp::identity(n);
    let (tau, sigma) = (0.9, 0.8);
    let x0 = random_vector(&mut rng, n, 1.0);
    let u0 = random_vector(&mut rng, m, 1.0);
    let v0 = random_vector(&mut rng, n, 1.0);
    let rho = varying_rho();
    let mut worst: f64 = 0.0;

    // f = ℓ1 without drift, then a quadratic f whose linear part absorbs c
    let c = random_vector(&mut rng, n, 0.5);
    let f_l1 = weighted_l1(&mut rng, n);
    let q_diag: Vec<f64> = (0..n).map(|i| 0.5 + (i % 3) as f64 * 0.25).collect();
    let c_f = random_vector(&mut rng, n, 0.5);
    let f_quad = FunSpec::quadratic(LinOp::diagonal(&q_diag).unwrap(), c_f.clone(), 0.0).unwrap();
    let f_quad_c =
        FunSpec::quadratic(LinOp::diagonal(&q_diag).unwrap(), c_f.add(&c).unwrap(), 0.0).unwrap();
    let cases = [(&f_l1, None, &f_l1), (&f_quad, Some(&c), &f_quad_c)];
    for (f, drift, f_cp) in cases {
        let gcp = Gcp {
            f,
            k: &id,
            g: &g,
            l: &l,
            c: drift,
            tau,
            sigma,
            eta: 1.0 / tau,
            efficient: false,
        };
        let cp = ChambollePock::new(f_cp, &g, &l, tau, sigma, Form::I);
        let a = run(
            &gcp,
            IterState::with_duals(x0.clone(), vec![u0.clone(), v0.clone()]),
            &rho,
        );
        let b = run(
            &cp,
            IterState::with_duals(x0.clone(), vec![u0.clone()]),
            &rho,
        );
        for (p, q) in a.iter().zip(&b) {
            worst = worst
                .max(dev(&p.next.primary, &q.next.primary))
                .max(dev(&p.next.duals[0], &q.next.duals[0]));
        }
    }
    worst
}

fn gcp_lv(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (n, m, p) = (16, 10, 12);
    let f = weighted_l1(&mut rng, p);
    let k = random_op(&mut rng, p, n);
    let l = random_op(&mut rng, m, n);
    let c = random_vector(&mut rng, n, 0.5);
    let g = FunSpec::squared_l2(1.0).unwrap();
    let h = FunSpec::quadratic(LinOp::dense(l.gram_matrix().unwrap()), c.clone(), 0.0).unwrap();
    let (tau, eta) = (0.7, 0.6);
    let x0 = random_vector(&mut rng, n, 1.0);
    let v0 = random_vector(&mut rng, p, 1.0);
    let u0 = l.apply(&x0).unwrap();
    let rho = varying_rho();
    let gcp = Gcp {
        f: &f,
        k: &k,
        g: &g,
        l: &l,
        c: Some(&c),
        tau,
        sigma: 1.0,
        eta,
        efficient: false,
    };
    let lv = LorisVerhoeven {
        g: &f,
        l: &k,
        h: &h,
        tau,
        sigma: eta,
        buffered: false,
    };
    let a = run(
        &gcp,
        IterState::with_duals(x0.clone(), vec![u0, v0.clone()]),
        &rho,
    );
    let b = run(&lv, IterState::with_duals(x0, vec![v0]), &rho);
    a.iter()
        .zip(&b)
        .map(|(p, q)| {
            let slaved = dev(&p.next.duals[0], &l.apply(&p.next.primary).unwrap());
            dev(&p.next.primary, &q.next.primary)
                .max(dev(&p.next.duals[1], &q.next.duals[0]))
                .max(slaved)
        })
        .fold(0.0, f64::max)
}

fn pmm_lv_cp(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (n, m) = (20, 26);
    let g = weighted_l1(&mut rng, m);
    let l = random_op(&mut rng, m, n);
    let c = random_vector(&mut rng, n, 0.5);
    let linear = FunSpec::linear(c.clone());
    let (tau, sigma) = (0.8, 0.9);
    let x0 = random_vector(&mut rng, n, 1.0);
    let u0 = random_vector(&mut rng, m, 1.0);
    let rho = varying_rho();
    let pmm = ProximalMultipliers {
        g: &g,
        l: &l,
        c: Some(&c),
        tau,
        sigma,
    };
    let cp = ChambollePock::new(&linear, &g, &l, tau, sigma, Form::I);
    let lv = LorisVerhoeven {
        g: &g,
        l: &l,
        h: &linear,
        tau,
        sigma,
        buffered: false,
    };
    // x_LV = x − τ(L*u + c)
    let shift = |x: &DenseVector, u: &DenseVector| {
        lin(&[(1.0, x), (-tau, &l.adjoint_apply(u).unwrap()), (-tau, &c)])
    };
    let a = run(
        &pmm,
        IterState::with_duals(x0.clone(), vec![u0.clone()]),
        &rho,
    );
    let b = run(
        &cp,
        IterState::with_duals(x0.clone(), vec![u0.clone()]),
        &rho,
    );
    let lv_x0 = shift(&x0, &u0);
    let d = run(&lv, IterState::with_duals(lv_x0, vec![u0]), &rho);
    let mut worst: f64 = 0.0;
    for ((p, q), r) in a.iter().zip(&b).zip(&d) {
        worst = worst
            .max(dev(&p.next.primary, &q.next.primary))
            .max(dev(&p.next.duals[0], &q.next.duals[0]))
            .max(dev(
                &r.next.primary,
                &shift(&q.next.primary, &q.next.duals[0]),
            ))
            .max(dev(&r.next.duals[0], &q.next.duals[0]));
    }
    worst
}

fn admm_dr(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = 25;
    let f = random_least_squares(&mut rng, n);
    let g = weighted_l1(&mut rng, n);
    let tau = 0.6;
    let w0 = random_vector(&mut rng, n, 1.0);
    let v0 = random_vector(&mut rng, n, 1.0);
    let rho = varying_rho();
    let admm = Admm { f: &f, g: &g, tau };
    let dr = DouglasRachford::new(&f, &g, tau);
    let a = run(
        &admm,
        IterState::with_duals(w0.clone(), vec![v0.clone()]),
        &rho,
    );
    let b = run(&dr, IterState::new(w0.sub(&v0).unwrap()), &rho);
    a.iter()
        .zip(&b)
        .map(|(p, q)| {
            let s = p.next.primary.sub(&p.next.duals[0]).unwrap();
            dev(&s, &q.next.primary).max(dev(&p.estimate, &q.estimate))
        })
        .fold(0.0, f64::max)
}

fn dr_self_dual(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = 20;
    let f = weighted_l1(&mut rng, n);
    let g = unit_box(n);
    let f_dual = f.clone().conjugate().reflected();
    let g_dual = g.clone().conjugate();
    let tau = 0.7;
    let s0 = random_vector(&mut rng, n, 1.0);
    let rho = varying_rho();
    let primal = DouglasRachford::new(&f, &g, tau);
    let dual = DouglasRachford::new(&f_dual, &g_dual, 1.0 / tau);
    let a = run(&primal, IterState::new(s0.clone()), &rho);
    let b = run(&dual, IterState::new(s0.scale(-1.0 / tau).unwrap()), &rho);
    a.iter()
        .zip(&b)
        .map(|(p, q)| dev(&p.next.primary.scale(-1.0 / tau).unwrap(), &q.next.primary))
        .fold(0.0, f64::max)
}
