mod common;

use common::{desk_problem, gap, safe_config};
use proxsplit::engines::{Algorithm, Solver};
use proxsplit::problems::oracle::oracle_solve;
use proxsplit::problems::ProblemKind;

#[test]
fn every_admitted_method_reaches_the_oracle_objective() {
    let sizes = [
        (ProblemKind::Lasso, 20),
        (ProblemKind::Tv1d, 30),
        (ProblemKind::ConstrainedLs, 12),
        (ProblemKind::SplitQuadratic, 16),
    ];
    let mut failures = Vec::new();
    let mut ran = 0;
    for (kind, n) in sizes {
        let problem = desk_problem(kind, 7, n);
        let oracle = oracle_solve(&problem).unwrap();
        for alg in Algorithm::ALL {
            let Some(cfg) = safe_config(alg, &problem) else {
                continue;
            };
            let cfg = cfg.max_iter(50_000).stop_tol(1e-13);
            let solver = Solver::new(&problem, cfg).unwrap();
            assert!(
                solver.report.admissible,
                "{kind}/{alg}: {:?}",
                solver.report.violated
            );
            let sol = solver.run(None, false).unwrap();
            let value = problem.objective(&sol.x).unwrap();
            ran += 1;
            if !(gap(value, oracle.objective) <= 1e-6) {
                failures.push(format!(
                    "{kind}/{alg}: F = {value}, F* = {}, iters {}, residual {:e}",
                    oracle.objective, sol.outcome.iterations, sol.outcome.residual
                ));
            }
        }
    }
    assert!(ran >= 40, "only {ran} runs");
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
