//! Fejér monotonicity of every admitted method towards the oracle fixed
//! point, measured in the metric the method is nonexpansive in.

use proxsplit::engines::{iterate, Algorithm, Solver};
use proxsplit::problems::oracle::oracle_solve;
use proxsplit::problems::ProblemKind;

use super::{desk_problem, safe_config};

pub const KINDS: [(ProblemKind, usize); 4] = [
    (ProblemKind::Lasso, 12),
    (ProblemKind::Tv1d, 20),
    (ProblemKind::ConstrainedLs, 10),
    (ProblemKind::SplitQuadratic, 12),
];

const ITERS: usize = 1000;
const SLACK: f64 = 1e-9;

/// Runs each method at `ρ = δ − 0.05` and returns one line per run whose
/// distance to the fixed point ever increases.
pub fn violations(seeds: std::ops::Range<u64>) -> Vec<String> {
    let mut failures = Vec::new();
    for (kind, n) in KINDS {
        for seed in seeds.clone() {
            let problem = desk_problem(kind, 100 + seed, n);
            let oracle = oracle_solve(&problem).unwrap();
            let duals = oracle.duals.clone().unwrap();
            for (alg, buffered) in Algorithm::ALL
                .into_iter()
                .flat_map(|a| [(a, false), (a, true)])
            {
                if buffered && !matches!(alg, Algorithm::Lv | Algorithm::Pd3o | Algorithm::Gcp) {
                    continue;
                }
                let Some(base) = safe_config(alg, &problem) else {
                    continue;
                };
                let base = base.buffered(buffered);
                let probe = Solver::new(&problem, base.clone()).unwrap();
                // general-f PDFP admits no relaxation
                let rho = if probe.report.theorem_tag == "pdfp.general" {
                    1.0
                } else {
                    probe.report.delta - 0.05
                };
                let cfg = base.rho(rho);
                let solver = Solver::new(&problem, cfg.clone()).unwrap();
                if !solver.report.admissible {
                    failures.push(format!("{kind}/{alg}: rho {rho} not admitted"));
                    continue;
                }
                let star = solver
                    .roles
                    .fixed_point(&cfg, &oracle.x_star, &duals)
                    .unwrap();
                let step = solver.roles.step_map(&cfg).unwrap();
                let start = solver.roles.initial_state(&cfg, None).unwrap();
                let mut last = solver
                    .roles
                    .metric_distance_sq(&cfg, &start, &star)
                    .unwrap();
                let outs = iterate(&step, start, &cfg.rho, ITERS).unwrap();
                for (i, o) in outs.iter().enumerate() {
                    let d = solver
                        .roles
                        .metric_distance_sq(&cfg, &o.next, &star)
                        .unwrap();
                    if d > last + SLACK {
                        failures.push(format!("{kind}/{alg} buffered={buffered} seed {seed} rho {rho}: iter {i} {last:e} -> {d:e}"));
                        break;
                    }
                    last = d;
                }
            }
        }
    }
    failures
}
