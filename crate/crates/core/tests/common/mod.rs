#![allow(dead_code)]

use proxsplit::engines::{Algorithm, Roles, SolverConfig};
use proxsplit::problems::{build, ProblemKind, ProblemSpec};
use proxsplit::space::{NORM_MAX_ITER, NORM_SEED, NORM_TOL};
use proxsplit::{DenseVector, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn beta(roles: &Roles) -> f64 {
    roles.h.smooth_info().expect("smooth h").lipschitz
}

pub fn norm_l(roles: &Roles) -> f64 {
    match roles.l.norm_bound() {
        Some(b) => b,
        None => roles
            .l
            .estimate_norm(NORM_TOL, NORM_MAX_ITER, NORM_SEED)
            .unwrap(),
    }
}

/// Step sizes strictly inside the admissible region of each method, with
/// `ρ = 1`. `None` when the method does not fit the problem.
pub fn safe_config(alg: Algorithm, problem: &ProblemSpec) -> Option<SolverConfig> {
    let roles = match Roles::assign(alg, problem) {
        Ok(r) => r,
        Err(Error::NotApplicable { .. } | Error::UnsupportedPostcomposition(_)) => return None,
        Err(e) => panic!("{alg}: {e}"),
    };
    let b = beta(&roles);
    let tau_smooth = if b > 0.0 { 1.0 / b } else { 1.0 };
    let l2 = norm_l(&roles).powi(2).max(1e-12);
    let cfg = SolverConfig::new(alg);
    use Algorithm as A;
    Some(match alg {
        A::Fb => cfg.gamma(tau_smooth),
        A::Ppa => cfg.gamma(1.0),
        A::Dr | A::Admm | A::AdmmAlt | A::LiftedAdmm => cfg.tau(1.0),
        A::Dy => cfg.tau(tau_smooth),
        A::CpI | A::CpII | A::Pmm => cfg.tau(1.0).sigma(0.99 / l2),
        A::Lv | A::Pdfp | A::Pd3o | A::PddrQuadI | A::PddrQuadII => {
            cfg.tau(tau_smooth).sigma(0.99 / (tau_smooth * l2))
        }
        A::CvI | A::CvII => cfg.tau(tau_smooth).sigma(0.45 / (tau_smooth * l2)),
        A::Gcp | A::Egcp => cfg.tau(1.0).sigma(0.99 / l2).eta(0.99),
    })
}

pub fn desk_problem(kind: ProblemKind, seed: u64, n: usize) -> ProblemSpec {
    build(kind, seed, n, kind.default_reg()).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DenseVector {
    DenseVector::new(
        (0..n)
            .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
            .collect(),
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gap(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / (1.0 + reference.abs())
}

/// `f + Σ_m g_m(L_m x) + h` with `blocks` terms cycling through a weighted
/// ℓ1 distance, a squared distance and a box. Operators are identities when
/// `identity_ops`, otherwise a random dense map, a difference operator and
/// the identity in turn.
pub fn multi_term_problem(
    seed: u64,
    n: usize,
    blocks: usize,
    identity_ops: bool,
    f: proxsplit::FunSpec,
    h: proxsplit::FunSpec,
) -> ProblemSpec {
    use proxsplit::problems::Term;
    use proxsplit::space::Matrix;
    use proxsplit::{FunSpec, LinOp};
    let mut rng = rng(seed);
    let terms = (0..blocks)
        .map(|m| {
            let l = if identity_ops {
                LinOp::identity(n)
            } else {
                match m % 3 {
                    0 => {
                        let rows: Vec<Vec<f64>> = (0..5)
                            .map(|_| random_vector(&mut rng, n, 1.0).into_vec())
                            .collect();
                        LinOp::dense(Matrix::from_rows(&rows).unwrap())
                    }
                    1 => LinOp::diff1d(n).unwrap(),
                    _ => LinOp::identity(n),
                }
            };
            let k = l.out_dim();
            let g = match m % 3 {
                0 => FunSpec::l1(0.3)
                    .unwrap()
                    .translated(random_vector(&mut rng, k, 1.0)),
                1 => FunSpec::squared_l2(0.5)
                    .unwrap()
                    .translated(random_vector(&mut rng, k, 1.0)),
                _ => FunSpec::boxed(vec![-0.5; k], vec![0.5; k]).unwrap(),
            };
            Term { g, l }
        })
        .collect();
    ProblemSpec::new(f, terms, h, n).unwrap()
}

/// `½‖x‖² + ⟨c, x⟩` for a random `c`.
pub fn smooth_fit(seed: u64, n: usize) -> proxsplit::FunSpec {
    let mut rng = rng(seed);
    let c = random_vector(&mut rng, n, 2.0);
    proxsplit::FunSpec::quadratic(proxsplit::LinOp::identity(n), c, 0.0).unwrap()
}

pub mod equivalence;
pub mod fejer;
pub mod lifting;
pub mod prox_props;
