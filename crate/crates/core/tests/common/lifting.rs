//! Parallel product-space iterations compared with the plain engines run on
//! the original problem (one block) or on the explicitly lifted problem.

use proxsplit::engines::{iterate, Algorithm, RhoSchedule, Roles, SolverConfig, StepOutcome};
use proxsplit::problems::ProblemSpec;
use proxsplit::product::{
    lift, ConsensusFamily, LiftedProblem, ParallelConsensus, ParallelFamily, ParallelPrimalDual,
    PrimalDualFamily,
};
use proxsplit::{DenseVector, FunSpec};

use super::{multi_term_problem, smooth_fit};

pub const ITERS: usize = 50;
pub const TOL: f64 = 1e-10;
pub const TAU: f64 = 0.7;
pub const SIGMA: f64 = 0.3;
pub const RHO: f64 = 1.5;

pub struct Case {
    pub algorithm: Algorithm,
    pub family: ParallelFamily,
    pub f: FunSpec,
    pub smooth: bool,
    pub identity_ops: bool,
}

pub fn cases(n: usize) -> Vec<Case> {
    use ConsensusFamily as C;
    use PrimalDualFamily as P;
    let boxed = || FunSpec::boxed(vec![-1.0; n], vec![1.0; n]).unwrap();
    let l1 = || FunSpec::l1(0.2).unwrap();
    let case = |algorithm, family, f, smooth, identity_ops| Case {
        algorithm,
        family,
        f,
        smooth,
        identity_ops,
    };
    vec![
        case(
            Algorithm::Dr,
            ParallelFamily::Consensus(C::DrI),
            boxed(),
            false,
            true,
        ),
        case(
            Algorithm::Dy,
            ParallelFamily::Consensus(C::Dy),
            boxed(),
            true,
            true,
        ),
        case(
            Algorithm::CpI,
            ParallelFamily::PrimalDual(P::CpI),
            l1(),
            false,
            false,
        ),
        case(
            Algorithm::CpII,
            ParallelFamily::PrimalDual(P::CpII),
            l1(),
            false,
            false,
        ),
        case(
            Algorithm::CvI,
            ParallelFamily::PrimalDual(P::CvI),
            boxed(),
            true,
            false,
        ),
        case(
            Algorithm::CvII,
            ParallelFamily::PrimalDual(P::CvII),
            boxed(),
            true,
            false,
        ),
        case(
            Algorithm::Lv,
            ParallelFamily::PrimalDual(P::Lv),
            FunSpec::Zero,
            true,
            false,
        ),
        case(
            Algorithm::Pd3o,
            ParallelFamily::PrimalDual(P::Pd3o),
            l1(),
            true,
            false,
        ),
    ]
}

pub fn problem_for(case: &Case, seed: u64, n: usize, blocks: usize) -> ProblemSpec {
    let h = if case.smooth {
        smooth_fit(seed + 1, n)
    } else {
        FunSpec::Zero
    };
    multi_term_problem(seed, n, blocks, case.identity_ops, case.f.clone(), h)
}

pub fn run_parallel(
    lifted: &LiftedProblem,
    family: ParallelFamily,
    threads: usize,
    x0: &DenseVector,
) -> Vec<StepOutcome> {
    let rho = RhoSchedule::Constant(RHO);
    match family {
        ParallelFamily::Consensus(c) => {
            let step = ParallelConsensus::new(lifted, TAU, c, threads).unwrap();
            iterate(&step, step.initial_state(x0), &rho, ITERS).unwrap()
        }
        ParallelFamily::PrimalDual(p) => {
            let step = ParallelPrimalDual::new(lifted, TAU, SIGMA, p, threads).unwrap();
            iterate(&step, step.initial_state(x0), &rho, ITERS).unwrap()
        }
    }
}

pub fn run_plain(
    algorithm: Algorithm,
    problem: &ProblemSpec,
    x0: &DenseVector,
) -> (Roles, Vec<StepOutcome>) {
    let mut cfg = SolverConfig::new(algorithm).tau(TAU).rho(RHO);
    if !matches!(algorithm, Algorithm::Dr | Algorithm::Dy) {
        cfg = cfg.sigma(SIGMA);
    }
    let roles = Roles::assign(algorithm, problem).unwrap();
    let state = roles.initial_state(&cfg, Some(x0)).unwrap();
    let out = iterate(&roles.step_map(&cfg).unwrap(), state, &cfg.rho, ITERS).unwrap();
    (roles, out)
}

/// Largest primal or dual deviation between a parallel form and the plain
/// engine, with one term and no lifting.
pub fn single_block_deviation(case: &Case, n: usize) -> f64 {
    let problem = problem_for(case, 11, n, 1);
    let lifted = lift(&problem, case.family.mode(), None).unwrap();
    let x0 = DenseVector::filled(n, 0.25).unwrap();
    let parallel = run_parallel(&lifted, case.family, 1, &x0);
    let (roles, plain) = run_plain(case.algorithm, &problem, &x0);
    let mut worst: f64 = 0.0;
    for (p, q) in parallel.iter().zip(&plain) {
        let duals = roles.term_duals(&q.dual_estimates[0]).unwrap();
        worst = worst.max(p.estimate.max_abs_diff(&q.estimate));
        worst = worst.max(p.dual_estimates[0].max_abs_diff(&duals[0]));
    }
    worst
}

/// Largest deviation between a parallel form over `blocks` terms and the
/// plain engine run on the lifted problem, after mapping both into the
/// lifted space.
pub fn lifted_deviation(case: &Case, n: usize, blocks: usize) -> f64 {
    let problem = problem_for(case, 20 + blocks as u64, n, blocks);
    let lifted = lift(&problem, case.family.mode(), None).unwrap();
    let x0 = DenseVector::filled(n, -0.2).unwrap();
    let parallel = run_parallel(&lifted, case.family, 1, &x0);
    let big = lifted.as_problem().unwrap();
    let (roles, plain) = run_plain(case.algorithm, &big, &lifted.lift_point(&x0));
    let mut worst: f64 = 0.0;
    for (p, q) in parallel.iter().zip(&plain) {
        worst = worst.max(lifted.lift_point(&p.estimate).max_abs_diff(&q.estimate));
        let slot = &roles.term_duals(&q.dual_estimates[0]).unwrap()[0];
        for (u, v) in p
            .dual_estimates
            .iter()
            .zip(lifted.rescale_duals(slot).unwrap())
        {
            worst = worst.max(u.max_abs_diff(&v));
        }
    }
    worst
}
