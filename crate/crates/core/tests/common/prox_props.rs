//! Randomised checks of every function kind in the catalog: Moreau
//! decomposition, firm nonexpansiveness, subgradient optimality and
//! gradients against central differences.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use proxsplit::prox::{Consensus, CustomFun, Replicated};
use proxsplit::space::Matrix;
use proxsplit::{DenseVector, FunSpec, LinOp};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{random_vector, rng};

pub const CASES: u32 = 100;
const MAX_DIM: usize = 6;
const MOREAU_TOL: f64 = 1e-12;
const FIRM_SLACK: f64 = 1e-10;
const SMOOTH_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;
const DOMAIN_SAMPLES: usize = 8;

type ConjugateProx = Box<dyn Fn(f64, &DenseVector) -> DenseVector>;

/// A sampled function together with the coordinate weights of the inner
/// product its prox is taken in and, when available, a closed form for the
/// prox of its conjugate.
pub struct Instance {
    pub f: FunSpec,
    pub metric: Vec<f64>,
    conjugate_prox: Option<ConjugateProx>,
}

impl Instance {
    fn plain(f: FunSpec, n: usize) -> Instance {
        Instance {
            f,
            metric: vec![1.0; n],
            conjugate_prox: None,
        }
    }

    fn with_conjugate(
        mut self,
        prox: impl Fn(f64, &DenseVector) -> DenseVector + 'static,
    ) -> Instance {
        self.conjugate_prox = Some(Box::new(prox));
        self
    }

    fn dim(&self) -> usize {
        self.metric.len()
    }

    fn inner(&self, a: &DenseVector, b: &DenseVector) -> f64 {
        self.metric
            .iter()
            .zip(a.as_slice().iter().zip(b.as_slice()))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }
}

pub struct Kind {
    pub name: &'static str,
    pub sample: fn(&mut ChaCha8Rng) -> Instance,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Coverage {
    pub cases: u32,
    pub conjugate_oracle: bool,
    pub gradient: bool,
    pub subgradient_inequality: bool,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn sample_box(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let lo: Vec<f64> = (0..n).map(|_| uniform(rng, -1.5, 0.5)).collect();
    let hi = lo.iter().map(|l| l + uniform(rng, 0.0, 2.0)).collect();
    (lo, hi)
}

fn map(x: &DenseVector, f: impl Fn(usize, f64) -> f64) -> DenseVector {
    DenseVector::new(
        x.as_slice()
            .iter()
            .enumerate()
            .map(|(i, v)| f(i, *v))
            .collect(),
    )
    .unwrap()
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Prox of the support function of `[lo, hi]`, coordinatewise.
fn support_prox(lo: &[f64], hi: &[f64], sigma: f64, x: &DenseVector) -> DenseVector {
    map(x, |i, v| {
        if v > sigma * hi[i] {
            v - sigma * hi[i]
        } else if v < sigma * lo[i] {
            v - sigma * lo[i]
        } else {
            0.0
        }
    })
}

fn to_nalgebra(x: &DenseVector) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

fn from_nalgebra(x: &DVector<f64>) -> DenseVector {
    DenseVector::from_slice(x.as_slice()).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| uniform(rng, -1.0, 1.0))
}

fn dense(m: &DMatrix<f64>) -> LinOp {
    LinOp::dense(Matrix::from_nalgebra(m))
}

fn zero(_: &mut ChaCha8Rng) -> Instance {
    Instance::plain(FunSpec::Zero, 4).with_conjugate(|_, x| DenseVector::zeros(x.dim()))
}

fn l1(rng: &mut ChaCha8Rng) -> Instance {
    let w = uniform(rng, 0.1, 2.0);
    Instance::plain(FunSpec::l1(w).unwrap(), 4)
        .with_conjugate(move |_, x| map(x, |_, v| v.clamp(-w, w)))
}

fn squared_l2(rng: &mut ChaCha8Rng) -> Instance {
    let w = uniform(rng, 0.1, 3.0);
    Instance::plain(FunSpec::squared_l2(w).unwrap(), 4)
        .with_conjugate(move |s, x| x.scale(w / (w + s)).unwrap())
}

/// `Q = AᵀA + εI` with `f*(v) = ½(v − c)ᵀQ⁻¹(v − c) − t`, whose prox solves
/// `(Q + σI)p = Qx + σc`.
fn quadratic(rng: &mut ChaCha8Rng) -> Instance {
    let n = 4;
    let a = random_matrix(rng, n, n);
    let q = a.transpose() * &a + DMatrix::identity(n, n) * 0.05;
    let c = random_vector(rng, n, 1.0);
    let t = uniform(rng, -1.0, 1.0);
    let f = FunSpec::quadratic(dense(&q), c.clone(), t).unwrap();
    let c = to_nalgebra(&c);
    Instance::plain(f, n).with_conjugate(move |s, x| {
        let lhs = &q + DMatrix::identity(n, n) * s;
        let rhs = &q * to_nalgebra(x) + &c * s;
        from_nalgebra(&lhs.lu().solve(&rhs).unwrap())
    })
}

/// The conjugate of `ι{Ax = y}` is `⟨x₀, ·⟩` on `range Aᵀ` with `x₀ = A⁺y`,
/// so its prox is the projection of `x − σx₀` onto `range Aᵀ`.
fn affine(rng: &mut ChaCha8Rng) -> Instance {
    let (rows, n) = (2, 4);
    let a = random_matrix(rng, rows, n);
    let y = random_vector(rng, rows, 1.0);
    let f = FunSpec::affine(&dense(&a), y.clone()).unwrap();
    let gram_inv = (&a * a.transpose()).try_inverse().unwrap();
    let x0 = a.transpose() * &gram_inv * to_nalgebra(&y);
    let range = a.transpose() * &gram_inv * &a;
    Instance::plain(f, n)
        .with_conjugate(move |s, x| from_nalgebra(&(&range * (to_nalgebra(x) - &x0 * s))))
}

fn boxed(rng: &mut ChaCha8Rng) -> Instance {
    let n = 4;
    let (lo, hi) = sample_box(rng, n);
    let f = FunSpec::boxed(lo.clone(), hi.clone()).unwrap();
    Instance::plain(f, n).with_conjugate(move |s, x| support_prox(&lo, &hi, s, x))
}

fn linear(rng: &mut ChaCha8Rng) -> Instance {
    let c = random_vector(rng, 4, 2.0);
    Instance::plain(FunSpec::linear(c.clone()), 4).with_conjugate(move |_, _| c.clone())
}

/// `(g(· − s))* = g* + ⟨s, ·⟩`, so the conjugate prox shifts its input by `σs`.
fn translated(rng: &mut ChaCha8Rng) -> Instance {
    let w = uniform(rng, 0.1, 2.0);
    let shift = random_vector(rng, 4, 1.5);
    let f = FunSpec::l1(w).unwrap().translated(shift.clone());
    Instance::plain(f, 4).with_conjugate(move |s, x| {
        let moved = DenseVector::lin_comb(&[(1.0, x), (-s, &shift)]).unwrap();
        map(&moved, |_, v| v.clamp(-w, w))
    })
}

fn reflected(rng: &mut ChaCha8Rng) -> Instance {
    let n = 4;
    let (lo, hi) = sample_box(rng, n);
    let f = FunSpec::boxed(lo.clone(), hi.clone()).unwrap().reflected();
    Instance::plain(f, n).with_conjugate(move |s, x| {
        support_prox(&lo, &hi, s, &x.scale(-1.0).unwrap())
            .scale(-1.0)
            .unwrap()
    })
}

/// The conjugate of `(w‖·‖₁)*` is `w‖·‖₁` itself, so its prox soft-thresholds.
fn conjugate(rng: &mut ChaCha8Rng) -> Instance {
    let w = uniform(rng, 0.1, 2.0);
    Instance::plain(FunSpec::l1(w).unwrap().conjugate(), 4)
        .with_conjugate(move |s, x| map(x, |_, v| soft(v, s * w)))
}

fn block_separable(rng: &mut ChaCha8Rng) -> Instance {
    let dims = vec![2, 3];
    let weights = vec![uniform(rng, 0.3, 2.0), uniform(rng, 0.3, 2.0)];
    let (lo, hi) = sample_box(rng, 3);
    let parts = vec![
        FunSpec::l1(uniform(rng, 0.1, 2.0)).unwrap(),
        FunSpec::boxed(lo, hi).unwrap(),
    ];
    let metric = dims
        .iter()
        .zip(&weights)
        .flat_map(|(d, w)| vec![*w; *d])
        .collect();
    Instance {
        f: FunSpec::block_separable(parts, dims, weights).unwrap(),
        metric,
        conjugate_prox: None,
    }
}

fn normalised_weights(rng: &mut ChaCha8Rng, blocks: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..blocks).map(|_| uniform(rng, 0.2, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

fn consensus(rng: &mut ChaCha8Rng) -> Instance {
    let (dim, weights) = (2, normalised_weights(rng, 3));
    let inner = Box::new(FunSpec::l1(uniform(rng, 0.1, 2.0)).unwrap());
    let metric = weights.iter().flat_map(|w| vec![*w; dim]).collect();
    Instance {
        f: FunSpec::Consensus(Consensus {
            inner,
            dim,
            weights,
        }),
        metric,
        conjugate_prox: None,
    }
}

fn replicated(rng: &mut ChaCha8Rng) -> Instance {
    let (dim, weights) = (
        2,
        vec![
            uniform(rng, 0.2, 2.0),
            uniform(rng, 0.2, 2.0),
            uniform(rng, 0.2, 2.0),
        ],
    );
    let a = random_matrix(rng, dim, dim);
    let q = a.transpose() * &a;
    let inner = Box::new(FunSpec::quadratic(dense(&q), random_vector(rng, dim, 1.0), 0.0).unwrap());
    let metric = weights.iter().flat_map(|w| vec![*w; dim]).collect();
    Instance {
        f: FunSpec::Replicated(Replicated {
            inner,
            dim,
            weights,
        }),
        metric,
        conjugate_prox: None,
    }
}

/// Distance to a ball: `r·max(‖x‖ − radius, 0)` has no catalog entry, so it
/// exercises the callback path.
fn custom(rng: &mut ChaCha8Rng) -> Instance {
    let (radius, slope) = (uniform(rng, 0.2, 1.5), uniform(rng, 0.1, 1.0));
    let prox = move |tau: f64, x: &DenseVector| {
        let norm = x.norm();
        let target = if norm <= radius {
            norm
        } else if norm <= radius + tau * slope {
            radius
        } else {
            norm - tau * slope
        };
        if norm == 0.0 {
            Ok(x.clone())
        } else {
            x.scale(target / norm)
        }
    };
    let value = move |x: &DenseVector| Ok(slope * (x.norm() - radius).max(0.0));
    let f = FunSpec::Custom(CustomFun {
        name: "ball distance".into(),
        prox: Arc::new(prox),
        value: Some(Arc::new(value)),
    });
    Instance::plain(f, 4)
}

pub fn kinds() -> Vec<Kind> {
    let kind = |name, sample| Kind { name, sample };
    vec![
        kind("zero", zero as fn(&mut ChaCha8Rng) -> Instance),
        kind("l1", l1),
        kind("squared_l2", squared_l2),
        kind("quadratic", quadratic),
        kind("affine_indicator", affine),
        kind("box", boxed),
        kind("linear", linear),
        kind("translated", translated),
        kind("reflected", reflected),
        kind("conjugate", conjugate),
        kind("block_separable", block_separable),
        kind("consensus", consensus),
        kind("replicated", replicated),
        kind("custom", custom),
    ]
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(message()))
    }
}

fn fail(e: proxsplit::Error) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn truncated(v: &[f64], n: usize) -> DenseVector {
    DenseVector::from_slice(&v[..n]).unwrap()
}

fn check_moreau(
    inst: &Instance,
    tau: f64,
    x: &DenseVector,
    p: &DenseVector,
) -> Result<(), TestCaseError> {
    let dual = inst
        .f
        .prox_conjugate_point(1.0 / tau, &x.scale(1.0 / tau).unwrap())
        .map_err(fail)?;
    let sum = DenseVector::lin_comb(&[(1.0, p), (tau, &dual)]).unwrap();
    let err = sum.max_abs_diff(x);
    ensure(err <= MOREAU_TOL * (1.0 + x.norm_inf()), || {
        format!("Moreau decomposition off by {err:e}")
    })?;
    if let Some(closed_form) = &inst.conjugate_prox {
        let expected = closed_form(tau, x);
        let actual = inst.f.prox_conjugate_point(tau, x).map_err(fail)?;
        let err = actual.max_abs_diff(&expected);
        ensure(err <= 1e-10 * (1.0 + expected.norm_inf()), || {
            format!("conjugate prox {actual:?} differs from the closed form {expected:?}")
        })?;
    }
    Ok(())
}

fn check_firm(
    inst: &Instance,
    tau: f64,
    x: &DenseVector,
    y: &DenseVector,
) -> Result<(), TestCaseError> {
    let (px, py) = (
        inst.f.prox_point(tau, x).map_err(fail)?,
        inst.f.prox_point(tau, y).map_err(fail)?,
    );
    let dp = px.sub(&py).unwrap();
    let dx = x.sub(y).unwrap();
    let (lhs, rhs) = (inst.inner(&dp, &dp), inst.inner(&dx, &dp));
    ensure(lhs <= rhs + FIRM_SLACK, || {
        format!("‖Δp‖² = {lhs} exceeds ⟨Δx, Δp⟩ = {rhs}")
    })
}

/// `v = (x − p)/τ` must be a subgradient of `f` at `p` in the instance metric.
fn check_subgradient(
    inst: &Instance,
    tau: f64,
    x: &DenseVector,
    p: &DenseVector,
    domain_seed: u64,
    coverage: &mut Coverage,
) -> Result<(), TestCaseError> {
    let v = x.sub(p).unwrap().scale(1.0 / tau).unwrap();
    if let FunSpec::L1 { weight } = inst.f {
        for (pi, vi) in p.as_slice().iter().zip(v.as_slice()) {
            let ok = match pi.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => (vi - weight).abs() <= 1e-12 * (1.0 + weight),
                Some(std::cmp::Ordering::Less) => (vi + weight).abs() <= 1e-12 * (1.0 + weight),
                _ => vi.abs() <= weight * (1.0 + 1e-12),
            };
            ensure(ok, || {
                format!("p = {pi}, v = {vi} violates the sign condition for weight {weight}")
            })?;
        }
    }
    if inst.f.smooth_info().is_some() {
        let g = inst.f.grad(p).map_err(fail)?;
        let err = v.sub(&g).unwrap().norm();
        ensure(err <= SMOOTH_TOL * (1.0 + x.norm()), || {
            format!("(x − p)/τ misses ∇f(p) by {err:e}")
        })?;
    }
    let fp = match inst.f.value(p) {
        Ok(value) => value,
        Err(proxsplit::Error::Unsupported { .. }) => return Ok(()),
        Err(e) => return Err(fail(e)),
    };
    ensure(fp.is_finite(), || format!("f(p) = {fp} at the prox point"))?;
    coverage.subgradient_inequality = true;
    let mut rng = rng(domain_seed);
    for _ in 0..DOMAIN_SAMPLES {
        let w = random_vector(&mut rng, inst.dim(), 4.0);
        let z = inst
            .f
            .prox_point(uniform(&mut rng, 0.01, 3.0), &w)
            .map_err(fail)?;
        let fz = inst.f.value(&z).map_err(fail)?;
        let bound = fp + inst.inner(&v, &z.sub(p).unwrap());
        let slack = 1e-9 * (1.0 + fz.abs() + fp.abs() + v.norm() * z.sub(p).unwrap().norm());
        ensure(fz >= bound - slack, || {
            format!("f(z) = {fz} below the supporting value {bound}")
        })?;
    }
    Ok(())
}

/// Central differences of the value against the metric gradient, whose
/// Euclidean counterpart is `metric ⊙ grad`.
fn check_gradient(inst: &Instance, x: &DenseVector) -> Result<(), TestCaseError> {
    let g = inst.f.grad(x).map_err(fail)?;
    let mut fd = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        let e = DenseVector::basis(x.dim(), i);
        let up = inst
            .f
            .value(&DenseVector::lin_comb(&[(1.0, x), (FD_STEP, &e)]).unwrap())
            .map_err(fail)?;
        let down = inst
            .f
            .value(&DenseVector::lin_comb(&[(1.0, x), (-FD_STEP, &e)]).unwrap())
            .map_err(fail)?;
        fd.push((up - down) / (2.0 * FD_STEP) / inst.metric[i]);
    }
    let err = DenseVector::new(fd).unwrap().sub(&g).unwrap().norm();
    ensure(err <= FD_TOL * g.norm().max(1.0), || {
        format!("finite differences miss the gradient by {err:e}")
    })
}

fn inputs() -> impl Strategy<Value = (u64, f64, Vec<f64>, Vec<f64>)> {
    (
        any::<u64>(),
        0.05f64..5.0,
        vec(-5.0f64..5.0, MAX_DIM),
        vec(-5.0f64..5.0, MAX_DIM),
    )
}

/// Runs every property on `CASES` deterministic random inputs.
pub fn check_kind(kind: &Kind) -> Result<Coverage, String> {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let coverage = std::cell::Cell::new(Coverage::default());
    runner
        .run(&inputs(), |(seed, tau, x, y)| {
            let inst = (kind.sample)(&mut rng(seed));
            let n = inst.dim();
            let (x, y) = (truncated(&x, n), truncated(&y, n));
            let mut seen = coverage.get();
            seen.cases += 1;
            let p = inst.f.prox_point(tau, &x).map_err(fail)?;
            check_moreau(&inst, tau, &x, &p)?;
            check_firm(&inst, tau, &x, &y)?;
            check_subgradient(&inst, tau, &x, &p, seed ^ 0x5eed, &mut seen)?;
            if inst.f.smooth_info().is_some() {
                check_gradient(&inst, &x)?;
                seen.gradient = true;
            }
            seen.conjugate_oracle |= inst.conjugate_prox.is_some();
            coverage.set(seen);
            Ok(())
        })
        .map_err(|e| format!("{}: {e}", kind.name))?;
    Ok(coverage.get())
}
