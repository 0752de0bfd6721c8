//! Desk-scale model problems and their independent reference solutions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::{FunSpec, Quadratic};
use crate::space::{DenseVector, LinOp, Matrix};

pub mod oracle;

pub use oracle::{oracle_solve, OracleMethod, OracleSolution};

/// Largest dimension the generators accept.
pub const MAX_DIM: usize = 200;

/// One composite term `g(L x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Term {
    pub g: FunSpec,
    pub l: LinOp,
}

/// `minimize f(x) + Σ_m g_m(L_m x) + h(x)`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub f: FunSpec,
    pub terms: Vec<Term>,
    pub h: FunSpec,
    pub dim: usize,
    #[serde(default)]
    pub description: String,
    /// Generator that produced the instance, when known.
    #[serde(default)]
    pub kind: Option<ProblemKind>,
}

impl ProblemSpec {
    pub fn new(f: FunSpec, terms: Vec<Term>, h: FunSpec, dim: usize) -> Result<Self> {
        let p = ProblemSpec {
            f,
            terms,
            h,
            dim,
            description: String::new(),
            kind: None,
        };
        p.check()?;
        Ok(p)
    }

    pub fn describe(mut self, text: impl Into<String>) -> Self {
        self.description = text.into();
        self
    }

    /// Checks dimensions and smoothness of `h`.
    pub fn check(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Empty);
        }
        for (name, fun) in [("f", &self.f), ("h", &self.h)] {
            if let Some(n) = fun.dim() {
                if n != self.dim {
                    return Err(Error::DimensionMismatch {
                        context: if name == "f" {
                            "problem f"
                        } else {
                            "problem h"
                        },
                        expected: self.dim,
                        actual: n,
                    });
                }
            }
        }
        if self.h.smooth_info().is_none() {
            return Err(Error::NotSmooth(self.h.kind_name()));
        }
        for (m, term) in self.terms.iter().enumerate() {
            let check = || -> Result<()> {
                if term.l.in_dim() != self.dim {
                    return Err(Error::DimensionMismatch {
                        context: "term operator input",
                        expected: self.dim,
                        actual: term.l.in_dim(),
                    });
                }
                if let Some(n) = term.g.dim() {
                    if n != term.l.out_dim() {
                        return Err(Error::DimensionMismatch {
                            context: "term function",
                            expected: term.l.out_dim(),
                            actual: n,
                        });
                    }
                }
                Ok(())
            };
            check().map_err(|e| e.in_block(m))?;
        }
        Ok(())
    }

    /// `f(x) + Σ g_m(L_m x) + h(x)`, infinite outside the domain.
    pub fn objective(&self, x: &DenseVector) -> Result<f64> {
        x.ensure_dim(self.dim, "objective argument")?;
        let mut total = self.f.value(x)? + self.h.value(x)?;
        for term in &self.terms {
            total += term.g.value(&term.l.apply(x)?)?;
        }
        Ok(total)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: ProblemSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        p.check()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `½‖Ax − y‖² + λ‖x‖₁`
    Lasso,
    /// `½‖x − y‖² + λ‖Dx‖₁` with forward differences `D`
    Tv1d,
    /// `½‖Ax − y‖²` subject to `Bx = d`
    ConstrainedLs,
    /// Box constraint, a diagonal quadratic on the first half of the
    /// coordinates and `λ‖Sx − b‖₁` on the second half.
    SplitQuadratic,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Lasso,
        ProblemKind::Tv1d,
        ProblemKind::ConstrainedLs,
        ProblemKind::SplitQuadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Lasso => "lasso",
            ProblemKind::Tv1d => "tv1d",
            ProblemKind::ConstrainedLs => "constrained_ls",
            ProblemKind::SplitQuadratic => "split_quadratic",
        }
    }

    pub fn default_reg(self) -> f64 {
        match self {
            ProblemKind::Lasso => 0.1,
            ProblemKind::Tv1d => 0.5,
            ProblemKind::ConstrainedLs => 0.0,
            ProblemKind::SplitQuadratic => 1.0,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == key || (key == "tv" && *k == ProblemKind::Tv1d))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown problem kind `{s}`")))
    }
}

fn reg_term(reg: f64, l: LinOp) -> Result<Term> {
    if !(reg.is_finite() && reg >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularization must be nonnegative, got {reg}"
        )));
    }
    let g = if reg == 0.0 {
        FunSpec::Zero
    } else {
        FunSpec::l1(reg)?
    };
    Ok(Term { g, l })
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Result<Matrix> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Matrix::new(
        rows,
        cols,
        (0..rows * cols).map(|_| normal.sample(rng)).collect(),
    )
}

fn sparse_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let support = (n / 4).max(1);
    let mut x = vec![0.0; n];
    for _ in 0..support {
        let i = rng.random_range(0..n);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        x[i] = sign * rng.random_range(1.0..2.0);
    }
    x
}

/// Builds a seeded instance. `reg` is the absolute weight of the `ℓ1` term.
pub fn build(kind: ProblemKind, seed: u64, n: usize, reg: f64) -> Result<ProblemSpec> {
    if n == 0 {
        return Err(Error::Empty);
    }
    if n > MAX_DIM {
        return Err(Error::TooLarge { n, max: MAX_DIM });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut spec = match kind {
        ProblemKind::Lasso => {
            let m = (3 * n).div_ceil(2);
            let a = LinOp::dense(gaussian_matrix(&mut rng, m, n, (1.0 / m as f64).sqrt())?);
            let truth = DenseVector::new(sparse_signal(&mut rng, n))?;
            let clean = a.apply(&truth)?;
            let y = DenseVector::new(
                clean
                    .as_slice()
                    .iter()
                    .map(|v| v + 0.01 * noise.sample(&mut rng))
                    .collect(),
            )?;
            let h = FunSpec::Quadratic(Quadratic::least_squares(&a, &y)?);
            ProblemSpec::new(
                FunSpec::Zero,
                vec![reg_term(reg, LinOp::identity(n))?],
                h,
                n,
            )?
            .describe(format!("lasso n={n} m={m} lambda={reg} seed={seed}"))
        }
        ProblemKind::Tv1d => {
            if n < 2 {
                return Err(Error::InvalidArgument(
                    "total variation needs n >= 2".into(),
                ));
            }
            let jumps = (n / 10).clamp(1, 6);
            let mut breaks: Vec<usize> = (0..jumps).map(|_| rng.random_range(1..n)).collect();
            breaks.sort_unstable();
            let mut level = rng.random_range(-2.0..2.0);
            let mut y = Vec::with_capacity(n);
            let mut next = 0;
            for i in 0..n {
                while next < breaks.len() && breaks[next] == i {
                    level = rng.random_range(-2.0..2.0);
                    next += 1;
                }
                y.push(level + 0.3 * noise.sample(&mut rng));
            }
            let y = DenseVector::new(y)?;
            let h = FunSpec::quadratic(LinOp::identity(n), y.scale(-1.0)?, 0.5 * y.norm_sq())?;
            ProblemSpec::new(FunSpec::Zero, vec![reg_term(reg, LinOp::diff1d(n)?)?], h, n)?
                .describe(format!("tv1d n={n} lambda={reg} seed={seed}"))
        }
        ProblemKind::ConstrainedLs => {
            let m = (3 * n).div_ceil(2);
            let p = (n / 2).max(1);
            let a = LinOp::dense(gaussian_matrix(&mut rng, m, n, (1.0 / m as f64).sqrt())?);
            let y = DenseVector::new((0..m).map(|_| noise.sample(&mut rng)).collect())?;
            let b = LinOp::dense(gaussian_matrix(&mut rng, p, n, 1.0)?);
            let anchor = DenseVector::new((0..n).map(|_| noise.sample(&mut rng)).collect())?;
            let d = b.apply(&anchor)?;
            let h = FunSpec::Quadratic(Quadratic::least_squares(&a, &y)?);
            ProblemSpec::new(FunSpec::affine(&b, d)?, Vec::new(), h, n)?.describe(format!(
                "constrained least squares n={n} m={m} p={p} seed={seed}"
            ))
        }
        ProblemKind::SplitQuadratic => split_quadratic(&mut rng, n, reg, 1.0, 1.0)?
            .describe(format!("split quadratic n={n} lambda={reg} seed={seed}")),
    };
    spec.kind = Some(kind);
    Ok(spec)
}

/// Box `[−1, 1]ⁿ`, `h = ½ Σ_{i<n/2} q (x_i − a_i)²` and
/// `g = λ‖· − b‖₁` composed with `L = l·(restriction to the second half)`.
pub fn split_quadratic(
    rng: &mut ChaCha8Rng,
    n: usize,
    reg: f64,
    curvature: f64,
    coupling: f64,
) -> Result<ProblemSpec> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument(
            "split quadratic needs an even n >= 2".into(),
        ));
    }
    if !(reg > 0.0 && curvature > 0.0 && coupling != 0.0) {
        return Err(Error::InvalidArgument(
            "split quadratic needs positive weights and nonzero coupling".into(),
        ));
    }
    let half = n / 2;
    let targets: Vec<f64> = (0..half).map(|_| rng.random_range(-2.0..2.0)).collect();
    let offsets: Vec<f64> = (0..half).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut diag = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut t = 0.0;
    for i in 0..half {
        diag[i] = curvature;
        c[i] = -curvature * targets[i];
        t += 0.5 * curvature * targets[i] * targets[i];
    }
    let h = FunSpec::quadratic(LinOp::diagonal(&diag)?, DenseVector::new(c)?, t)?;
    let mut rows = Vec::with_capacity(half);
    for i in 0..half {
        let mut row = vec![0.0; n];
        row[half + i] = coupling;
        rows.push(row);
    }
    let l = LinOp::dense(Matrix::from_rows(&rows)?).with_norm_bound(coupling.abs())?;
    let g = FunSpec::l1(reg)?.translated(DenseVector::new(offsets)?);
    let f = FunSpec::boxed(vec![-1.0; n], vec![1.0; n])?;
    let mut spec = ProblemSpec::new(f, vec![Term { g, l }], h, n)?;
    spec.kind = Some(ProblemKind::SplitQuadratic);
    Ok(spec)
}

/// A built-in instance `kind:seed:n[:reg]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuiltinProblem {
    pub kind: ProblemKind,
    pub seed: u64,
    pub n: usize,
    pub reg: f64,
}

impl BuiltinProblem {
    pub fn build(&self) -> Result<ProblemSpec> {
        build(self.kind, self.seed, self.n, self.reg)
    }
}

impl FromStr for BuiltinProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected kind:seed:n[:reg], got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let kind: ProblemKind = parts[0].parse()?;
        let seed = parts[1].trim().parse().map_err(|_| bad())?;
        let n = parts[2].trim().parse().map_err(|_| bad())?;
        let reg = match parts.get(3) {
            Some(r) => r.trim().parse().map_err(|_| bad())?,
            None => kind.default_reg(),
        };
        Ok(BuiltinProblem { kind, seed, n, reg })
    }
}
