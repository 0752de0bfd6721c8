//! Closed convex functions with exact proximity operators.
//!
//! Conjugates never get a formula of their own: `prox_{τf*}` always goes
//! through the Moreau identity `prox_{τf*}(x) = x − τ prox_{f/τ}(x/τ)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{check_weights, DenseVector, LinOp, Matrix, NORM_TOL};

/// Ridge added to rank-deficient normal equations.
pub const RIDGE: f64 = 1e-12;
/// Relative slack used when evaluating indicator functions.
pub const INDICATOR_TOL: f64 = 1e-8;
const CG_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothInfo {
    pub lipschitz: f64,
    pub is_quadratic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxResult {
    pub point: DenseVector,
    pub objective_at_point: Option<f64>,
}

/// `½⟨x, Qx⟩ + ⟨c, x⟩ + t` with `Q` symmetric positive semidefinite.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "QuadraticParts", into = "QuadraticParts")]
pub struct Quadratic {
    q: LinOp,
    c: DenseVector,
    t: f64,
    q_dense: Matrix,
    lipschitz: f64,
}

#[derive(Clone, Serialize, Deserialize)]
struct QuadraticParts {
    q: LinOp,
    c: DenseVector,
    t: f64,
}

impl TryFrom<QuadraticParts> for Quadratic {
    type Error = Error;
    fn try_from(p: QuadraticParts) -> Result<Self> {
        Quadratic::new(p.q, p.c, p.t)
    }
}

impl From<Quadratic> for QuadraticParts {
    fn from(q: Quadratic) -> Self {
        QuadraticParts {
            q: q.q,
            c: q.c,
            t: q.t,
        }
    }
}

impl Quadratic {
    pub fn new(q: LinOp, c: DenseVector, t: f64) -> Result<Self> {
        let n = q.in_dim();
        if q.out_dim() != n {
            return Err(Error::DimensionMismatch {
                context: "quadratic form",
                expected: n,
                actual: q.out_dim(),
            });
        }
        c.ensure_dim(n, "quadratic linear term")?;
        if !t.is_finite() {
            return Err(Error::NonFinite {
                context: "quadratic constant",
            });
        }
        let q_dense = q.materialize()?;
        let m = q_dense.to_nalgebra();
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidArgument("Q is not symmetric".into()));
        }
        let eig = nalgebra::SymmetricEigen::new(m);
        let min = eig.eigenvalues.min();
        if min < -1e-10 {
            return Err(Error::InvalidArgument(format!(
                "Q is not positive semidefinite (smallest eigenvalue {min:e})"
            )));
        }
        let lipschitz = eig.eigenvalues.max().max(0.0) * (1.0 + NORM_TOL);
        Ok(Quadratic {
            q,
            c,
            t,
            q_dense,
            lipschitz,
        })
    }

    /// `½‖Ax − y‖²` stored as `Q = A*A`, `c = −A*y`, `t = ½‖y‖²`.
    pub fn least_squares(a: &LinOp, y: &DenseVector) -> Result<Self> {
        let ata = a.gram_matrix()?;
        let c = a.adjoint_apply(y)?.scale(-1.0)?;
        Self::new(LinOp::dense(ata), c, 0.5 * y.norm_sq())
    }

    pub fn q(&self) -> &LinOp {
        &self.q
    }

    pub fn q_matrix(&self) -> &Matrix {
        &self.q_dense
    }

    pub fn c(&self) -> &DenseVector {
        &self.c
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Returns the same function with `Q` replaced by an equivalent operator,
    /// e.g. an instrumented one.
    pub fn with_operator(&self, q: LinOp) -> Result<Self> {
        Self::new(q, self.c.clone(), self.t)
    }

    fn solve_shifted(&self, tau: f64, rhs: &DenseVector) -> Result<DenseVector> {
        let n = self.dim();
        let mut m = self.q_dense.to_nalgebra() * tau;
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        let b = DVector::from_column_slice(rhs.as_slice());
        if let Some(ch) = m.clone().cholesky() {
            return DenseVector::checked(ch.solve(&b).as_slice().to_vec(), "quadratic prox");
        }
        conjugate_gradient(&m, &b)
    }
}

fn conjugate_gradient(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DenseVector> {
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let stop = CG_TOL * CG_TOL * b.dot(b).max(f64::MIN_POSITIVE);
    for _ in 0..10 * b.len().max(10) {
        if rr <= stop {
            break;
        }
        let mp = m * &p;
        let alpha = rr / p.dot(&mp);
        x += alpha * &p;
        r -= alpha * mp;
        let next = r.dot(&r);
        p = &r + (next / rr) * p;
        rr = next;
    }
    DenseVector::checked(x.as_slice().to_vec(), "conjugate gradient")
}

/// Indicator of `{x : Ax = y}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "AffineParts", into = "AffineParts")]
pub struct AffineSet {
    a: Matrix,
    y: DenseVector,
    normal: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

#[derive(Clone, Serialize, Deserialize)]
struct AffineParts {
    a: Matrix,
    y: DenseVector,
}

impl TryFrom<AffineParts> for AffineSet {
    type Error = Error;
    fn try_from(p: AffineParts) -> Result<Self> {
        AffineSet::new(&LinOp::dense(p.a), p.y)
    }
}

impl From<AffineSet> for AffineParts {
    fn from(s: AffineSet) -> Self {
        AffineParts { a: s.a, y: s.y }
    }
}

impl AffineSet {
    pub fn new(a: &LinOp, y: DenseVector) -> Result<Self> {
        y.ensure_dim(a.out_dim(), "affine right-hand side")?;
        let a = a.materialize()?;
        let am = a.to_nalgebra();
        let normal = (&am * am.transpose()).cholesky();
        Ok(AffineSet { a, y, normal })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &DenseVector {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn residual(&self, x: &DenseVector) -> Result<DenseVector> {
        x.ensure_dim(self.dim(), "affine set")?;
        DenseVector::new(self.a.mul_vec(x.as_slice()))?.sub(&self.y)
    }

    pub fn project(&self, x: &DenseVector) -> Result<DenseVector> {
        let normal = self.normal.as_ref().ok_or(Error::SingularNormalEquations)?;
        let r = self.residual(x)?;
        let mult = normal.solve(&DVector::from_column_slice(r.as_slice()));
        let corr = DenseVector::checked(self.a.tr_mul_vec(mult.as_slice()), "affine projection")?;
        x.sub(&corr)
    }
}

/// Per-coordinate bounds; infinite entries mean unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxParts", into = "BoxParts")]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct BoxParts {
    lo: Vec<Option<f64>>,
    hi: Vec<Option<f64>>,
}

impl TryFrom<BoxParts> for BoxSet {
    type Error = Error;
    fn try_from(p: BoxParts) -> Result<Self> {
        BoxSet::new(
            p.lo.into_iter()
                .map(|v| v.unwrap_or(f64::NEG_INFINITY))
                .collect(),
            p.hi.into_iter()
                .map(|v| v.unwrap_or(f64::INFINITY))
                .collect(),
        )
    }
}

impl From<BoxSet> for BoxParts {
    fn from(b: BoxSet) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        BoxParts {
            lo: b.lo.into_iter().map(finite).collect(),
            hi: b.hi.into_iter().map(finite).collect(),
        }
    }
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::Empty);
        }
        for (l, h) in lo.iter().zip(&hi) {
            if l.is_nan() || h.is_nan() || l > h || *l == f64::INFINITY || *h == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!("box bounds [{l}, {h}]")));
            }
        }
        Ok(BoxSet { lo, hi })
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn project(&self, x: &DenseVector) -> Result<DenseVector> {
        x.ensure_dim(self.lo.len(), "box projection")?;
        DenseVector::checked(
            x.as_slice()
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
            "box projection",
        )
    }

    fn contains(&self, x: &DenseVector) -> bool {
        x.as_slice()
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| {
                let slack = INDICATOR_TOL * (1.0 + v.abs());
                *v >= l - slack && *v <= h + slack
            })
    }
}

/// `Σ_m g_m(x_m)` on a product space whose inner product is weighted by `ω`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockSeparable {
    pub parts: Vec<FunSpec>,
    pub dims: Vec<usize>,
    pub weights: Vec<f64>,
}

/// `f(x_1) + ι_{x_1 = … = x_M}` on `X^M` with weights summing to one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Consensus {
    pub inner: Box<FunSpec>,
    pub dim: usize,
    pub weights: Vec<f64>,
}

/// `Σ_m ω_m h(x_m)` on `X^M`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Replicated {
    pub inner: Box<FunSpec>,
    pub dim: usize,
    pub weights: Vec<f64>,
}

type ProxFn = Arc<dyn Fn(f64, &DenseVector) -> Result<DenseVector> + Send + Sync>;
type ValueFn = Arc<dyn Fn(&DenseVector) -> Result<f64> + Send + Sync>;

/// A function known only through its prox. The `Send + Sync` bounds make
/// every catalog entry shareable across block workers.
#[derive(Clone)]
pub struct CustomFun {
    pub name: String,
    pub prox: ProxFn,
    pub value: Option<ValueFn>,
}

impl fmt::Debug for CustomFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomFun({})", self.name)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum FunSpec {
    Zero,
    Quadratic(Quadratic),
    /// `weight·‖x‖₁`
    L1 {
        weight: f64,
    },
    /// `(weight/2)·‖x‖²`
    SquaredL2 {
        weight: f64,
    },
    AffineIndicator(AffineSet),
    Box(BoxSet),
    /// `⟨c, x⟩`
    LinearTerm {
        c: DenseVector,
    },
    /// `x ↦ inner(x − shift)`
    Translated {
        inner: Box<FunSpec>,
        shift: DenseVector,
    },
    /// `x ↦ inner(−x)`
    Reflected(Box<FunSpec>),
    Conjugate(Box<FunSpec>),
    BlockSeparable(BlockSeparable),
    Consensus(Consensus),
    Replicated(Replicated),
    #[serde(skip)]
    Custom(CustomFun),
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl FunSpec {
    pub fn l1(weight: f64) -> Result<FunSpec> {
        positive("l1 weight", weight)?;
        Ok(FunSpec::L1 { weight })
    }

    pub fn squared_l2(weight: f64) -> Result<FunSpec> {
        positive("squared-l2 weight", weight)?;
        Ok(FunSpec::SquaredL2 { weight })
    }

    pub fn quadratic(q: LinOp, c: DenseVector, t: f64) -> Result<FunSpec> {
        Ok(FunSpec::Quadratic(Quadratic::new(q, c, t)?))
    }

    pub fn affine(a: &LinOp, y: DenseVector) -> Result<FunSpec> {
        Ok(FunSpec::AffineIndicator(AffineSet::new(a, y)?))
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<FunSpec> {
        Ok(FunSpec::Box(BoxSet::new(lo, hi)?))
    }

    pub fn linear(c: DenseVector) -> FunSpec {
        FunSpec::LinearTerm { c }
    }

    pub fn translated(self, shift: DenseVector) -> FunSpec {
        FunSpec::Translated {
            inner: Box::new(self),
            shift,
        }
    }

    pub fn reflected(self) -> FunSpec {
        FunSpec::Reflected(Box::new(self))
    }

    pub fn conjugate(self) -> FunSpec {
        FunSpec::Conjugate(Box::new(self))
    }

    pub fn block_separable(
        parts: Vec<FunSpec>,
        dims: Vec<usize>,
        weights: Vec<f64>,
    ) -> Result<FunSpec> {
        check_weights(&weights)?;
        if parts.len() != dims.len() || parts.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "block-separable function",
                expected: parts.len(),
                actual: dims.len().min(weights.len()),
            });
        }
        Ok(FunSpec::BlockSeparable(BlockSeparable {
            parts,
            dims,
            weights,
        }))
    }

    pub fn custom(
        name: impl Into<String>,
        prox: impl Fn(f64, &DenseVector) -> Result<DenseVector> + Send + Sync + 'static,
    ) -> FunSpec {
        FunSpec::Custom(CustomFun {
            name: name.into(),
            prox: Arc::new(prox),
            value: None,
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FunSpec::Zero => "zero",
            FunSpec::Quadratic(_) => "quadratic",
            FunSpec::L1 { .. } => "l1 norm",
            FunSpec::SquaredL2 { .. } => "squared l2 norm",
            FunSpec::AffineIndicator(_) => "affine indicator",
            FunSpec::Box(_) => "box indicator",
            FunSpec::LinearTerm { .. } => "linear term",
            FunSpec::Translated { .. } => "translated function",
            FunSpec::Reflected(_) => "reflected function",
            FunSpec::Conjugate(_) => "conjugate function",
            FunSpec::BlockSeparable(_) => "block-separable function",
            FunSpec::Consensus(_) => "consensus function",
            FunSpec::Replicated(_) => "replicated function",
            FunSpec::Custom(_) => "custom function",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FunSpec::Zero)
    }

    /// Dimension when the function fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FunSpec::Quadratic(q) => Some(q.dim()),
            FunSpec::AffineIndicator(a) => Some(a.dim()),
            FunSpec::Box(b) => Some(b.lo.len()),
            FunSpec::LinearTerm { c } => Some(c.dim()),
            FunSpec::Translated { shift, .. } => Some(shift.dim()),
            FunSpec::Reflected(f) | FunSpec::Conjugate(f) => f.dim(),
            FunSpec::BlockSeparable(b) => Some(b.dims.iter().sum()),
            FunSpec::Consensus(c) => Some(c.dim * c.weights.len()),
            FunSpec::Replicated(r) => Some(r.dim * r.weights.len()),
            _ => None,
        }
    }

    pub fn smooth_info(&self) -> Option<SmoothInfo> {
        let quad = |lipschitz| {
            Some(SmoothInfo {
                lipschitz,
                is_quadratic: true,
            })
        };
        match self {
            FunSpec::Zero => quad(0.0),
            FunSpec::Quadratic(q) => quad(q.lipschitz),
            FunSpec::SquaredL2 { weight } => quad(*weight),
            FunSpec::LinearTerm { .. } => quad(0.0),
            FunSpec::Translated { inner, .. } | FunSpec::Reflected(inner) => inner.smooth_info(),
            FunSpec::Replicated(r) => r.inner.smooth_info(),
            FunSpec::Conjugate(inner) => match inner.as_ref() {
                FunSpec::SquaredL2 { weight } => quad(1.0 / weight),
                _ => None,
            },
            _ => None,
        }
    }

    /// Quadratic data `(Q, c)` of a quadratic function in the catalog sense.
    pub fn as_quadratic(&self) -> Option<&Quadratic> {
        match self {
            FunSpec::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    /// True when the prox is an affine map.
    pub fn has_affine_prox(&self) -> bool {
        match self {
            FunSpec::Zero
            | FunSpec::Quadratic(_)
            | FunSpec::SquaredL2 { .. }
            | FunSpec::LinearTerm { .. }
            | FunSpec::AffineIndicator(_) => true,
            FunSpec::Translated { inner, .. }
            | FunSpec::Reflected(inner)
            | FunSpec::Conjugate(inner) => inner.has_affine_prox(),
            FunSpec::BlockSeparable(b) => b.parts.iter().all(FunSpec::has_affine_prox),
            FunSpec::Consensus(c) => c.inner.has_affine_prox(),
            FunSpec::Replicated(r) => r.inner.has_affine_prox(),
            _ => false,
        }
    }

    fn check_dim(&self, x: &DenseVector) -> Result<()> {
        match self.dim() {
            Some(n) => x.ensure_dim(n, self.kind_name()),
            None => Ok(()),
        }
    }

    pub fn value(&self, x: &DenseVector) -> Result<f64> {
        self.check_dim(x)?;
        let v = match self {
            FunSpec::Zero => 0.0,
            FunSpec::Quadratic(q) => 0.5 * x.dot(&q.q.apply(x)?) + q.c.dot(x) + q.t,
            FunSpec::L1 { weight } => weight * x.as_slice().iter().map(|v| v.abs()).sum::<f64>(),
            FunSpec::SquaredL2 { weight } => 0.5 * weight * x.norm_sq(),
            FunSpec::AffineIndicator(a) => {
                if a.residual(x)?.norm() <= INDICATOR_TOL * (1.0 + a.y.norm() + x.norm()) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            FunSpec::Box(b) => {
                if b.contains(x) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            FunSpec::LinearTerm { c } => c.dot(x),
            FunSpec::Translated { inner, shift } => inner.value(&x.sub(shift)?)?,
            FunSpec::Reflected(inner) => inner.value(&x.scale(-1.0)?)?,
            FunSpec::Conjugate(inner) => conjugate_value(inner, x)?,
            FunSpec::BlockSeparable(b) => {
                let blocks = x.split(&b.dims)?;
                let mut total = 0.0;
                for (m, (g, xm)) in b.parts.iter().zip(&blocks).enumerate() {
                    total += g.value(xm).map_err(|e| e.in_block(m))?;
                }
                total
            }
            FunSpec::Consensus(c) => {
                let blocks = x.split(&vec![c.dim; c.weights.len()])?;
                let spread = blocks
                    .iter()
                    .map(|b| b.max_abs_diff(&blocks[0]))
                    .fold(0.0, f64::max);
                if spread > INDICATOR_TOL * (1.0 + blocks[0].norm_inf()) {
                    f64::INFINITY
                } else {
                    c.inner.value(&blocks[0])?
                }
            }
            FunSpec::Replicated(r) => {
                let blocks = x.split(&vec![r.dim; r.weights.len()])?;
                let mut total = 0.0;
                for (w, b) in r.weights.iter().zip(&blocks) {
                    total += w * r.inner.value(b)?;
                }
                total
            }
            FunSpec::Custom(c) => match &c.value {
                Some(f) => f(x)?,
                None => {
                    return Err(Error::Unsupported {
                        operation: "evaluation",
                        kind: "custom function without a value callback",
                    })
                }
            },
        };
        Ok(v)
    }

    pub fn grad(&self, x: &DenseVector) -> Result<DenseVector> {
        self.check_dim(x)?;
        match self {
            FunSpec::Zero => Ok(DenseVector::zeros(x.dim())),
            FunSpec::Quadratic(q) => q.q.apply(x)?.add(&q.c),
            FunSpec::SquaredL2 { weight } => x.scale(*weight),
            FunSpec::LinearTerm { c } => Ok(c.clone()),
            FunSpec::Translated { inner, shift } => inner.grad(&x.sub(shift)?),
            FunSpec::Reflected(inner) => inner.grad(&x.scale(-1.0)?)?.scale(-1.0),
            FunSpec::Conjugate(inner) => match inner.as_ref() {
                FunSpec::SquaredL2 { weight } => x.scale(1.0 / weight),
                _ => Err(Error::NotSmooth(self.kind_name())),
            },
            FunSpec::Replicated(r) => {
                let blocks = x.split(&vec![r.dim; r.weights.len()])?;
                let grads = blocks
                    .iter()
                    .map(|b| r.inner.grad(b))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DenseVector::concat(&grads))
            }
            _ => Err(Error::NotSmooth(self.kind_name())),
        }
    }

    pub fn prox(&self, tau: f64, x: &DenseVector) -> Result<ProxResult> {
        let point = self.prox_point(tau, x)?;
        let objective_at_point = match self {
            FunSpec::Zero
            | FunSpec::L1 { .. }
            | FunSpec::SquaredL2 { .. }
            | FunSpec::LinearTerm { .. }
            | FunSpec::Box(_) => self.value(&point).ok(),
            _ => None,
        };
        Ok(ProxResult {
            point,
            objective_at_point,
        })
    }

    /// `argmin_p f(p) + (1/2τ)‖x − p‖²`
    pub fn prox_point(&self, tau: f64, x: &DenseVector) -> Result<DenseVector> {
        positive("prox step", tau)?;
        self.check_dim(x)?;
        match self {
            FunSpec::Zero => Ok(x.clone()),
            FunSpec::Quadratic(q) => {
                let rhs = DenseVector::lin_comb(&[(1.0, x), (-tau, &q.c)])?;
                q.solve_shifted(tau, &rhs)
            }
            FunSpec::L1 { weight } => {
                let t = tau * weight;
                x.map(|v| soft_threshold(v, t))
            }
            FunSpec::SquaredL2 { weight } => x.scale(1.0 / (1.0 + tau * weight)),
            FunSpec::AffineIndicator(a) => a.project(x),
            FunSpec::Box(b) => b.project(x),
            FunSpec::LinearTerm { c } => DenseVector::lin_comb(&[(1.0, x), (-tau, c)]),
            FunSpec::Translated { inner, shift } => {
                inner.prox_point(tau, &x.sub(shift)?)?.add(shift)
            }
            FunSpec::Reflected(inner) => inner.prox_point(tau, &x.scale(-1.0)?)?.scale(-1.0),
            FunSpec::Conjugate(inner) => inner.prox_conjugate_point(tau, x),
            FunSpec::BlockSeparable(b) => {
                let blocks = x.split(&b.dims)?;
                let mut out = Vec::with_capacity(blocks.len());
                for (m, ((g, xm), w)) in b.parts.iter().zip(&blocks).zip(&b.weights).enumerate() {
                    out.push(g.prox_point(tau / w, xm).map_err(|e| e.in_block(m))?);
                }
                Ok(DenseVector::concat(&out))
            }
            FunSpec::Consensus(c) => {
                let blocks = x.split(&vec![c.dim; c.weights.len()])?;
                let avg = weighted_sum(&c.weights, &blocks)?;
                let p = c.inner.prox_point(tau, &avg)?;
                Ok(DenseVector::concat(&vec![p; c.weights.len()]))
            }
            FunSpec::Replicated(r) => {
                let blocks = x.split(&vec![r.dim; r.weights.len()])?;
                let out = blocks
                    .iter()
                    .enumerate()
                    .map(|(m, b)| r.inner.prox_point(tau, b).map_err(|e| e.in_block(m)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DenseVector::concat(&out))
            }
            FunSpec::Custom(c) => {
                let p = (c.prox)(tau, x).map_err(|e| match e {
                    Error::Custom(_) => e,
                    other => Error::Custom(other.to_string()),
                })?;
                p.ensure_dim(x.dim(), "custom prox output")?;
                Ok(p)
            }
        }
    }

    /// `prox_{τf*}(x) = x − τ prox_{f/τ}(x/τ)`
    pub fn prox_conjugate(&self, tau: f64, x: &DenseVector) -> Result<ProxResult> {
        Ok(ProxResult {
            point: self.prox_conjugate_point(tau, x)?,
            objective_at_point: None,
        })
    }

    pub fn prox_conjugate_point(&self, tau: f64, x: &DenseVector) -> Result<DenseVector> {
        positive("prox step", tau)?;
        let inner = self.prox_point(1.0 / tau, &x.scale(1.0 / tau)?)?;
        DenseVector::lin_comb(&[(1.0, x), (-tau, &inner)])
    }

    /// Prox in the metric `diag(1/steps)`, for coordinate-separable kinds.
    pub fn prox_diagonal(&self, steps: &DenseVector, x: &DenseVector) -> Result<DenseVector> {
        steps.ensure_dim(x.dim(), "diagonal prox steps")?;
        if steps.as_slice().iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidArgument(
                "diagonal steps must be positive".into(),
            ));
        }
        self.check_dim(x)?;
        let s = steps.as_slice();
        match self {
            FunSpec::Zero => Ok(x.clone()),
            FunSpec::L1 { weight } => x.zip_with(steps, |v, t| soft_threshold(v, t * weight)),
            FunSpec::SquaredL2 { weight } => x.zip_with(steps, |v, t| v / (1.0 + t * weight)),
            FunSpec::Box(b) => b.project(x),
            FunSpec::LinearTerm { c } => DenseVector::checked(
                (0..x.dim())
                    .map(|i| x.as_slice()[i] - s[i] * c.as_slice()[i])
                    .collect(),
                "diagonal prox",
            ),
            FunSpec::Translated { inner, shift } => {
                inner.prox_diagonal(steps, &x.sub(shift)?)?.add(shift)
            }
            FunSpec::Reflected(inner) => inner.prox_diagonal(steps, &x.scale(-1.0)?)?.scale(-1.0),
            _ => Err(Error::Unsupported {
                operation: "diagonal-metric prox",
                kind: self.kind_name(),
            }),
        }
    }
}

fn conjugate_value(inner: &FunSpec, x: &DenseVector) -> Result<f64> {
    let indicator = |inside: bool| if inside { 0.0 } else { f64::INFINITY };
    match inner {
        FunSpec::Zero => Ok(indicator(x.norm_inf() <= INDICATOR_TOL)),
        FunSpec::L1 { weight } => Ok(indicator(x.norm_inf() <= weight * (1.0 + INDICATOR_TOL))),
        FunSpec::SquaredL2 { weight } => Ok(0.5 * x.norm_sq() / weight),
        FunSpec::LinearTerm { c } => Ok(indicator(
            x.max_abs_diff(c) <= INDICATOR_TOL * (1.0 + c.norm_inf()),
        )),
        FunSpec::Conjugate(f) => f.value(x),
        _ => Err(Error::Unsupported {
            operation: "conjugate evaluation",
            kind: inner.kind_name(),
        }),
    }
}

pub(crate) fn weighted_sum(weights: &[f64], blocks: &[DenseVector]) -> Result<DenseVector> {
    DenseVector::lin_comb(
        &weights
            .iter()
            .copied()
            .zip(blocks.iter())
            .collect::<Vec<_>>(),
    )
}

pub fn prox(f: &FunSpec, tau: f64, x: &DenseVector) -> Result<ProxResult> {
    f.prox(tau, x)
}

pub fn prox_conjugate(f: &FunSpec, tau: f64, x: &DenseVector) -> Result<ProxResult> {
    f.prox_conjugate(tau, x)
}

pub fn grad(h: &FunSpec, x: &DenseVector) -> Result<DenseVector> {
    h.grad(x)
}

/// Returns `(L x̂, x̂)` with `x̂ ∈ argmin_x τf(x) + ½‖Lx − r‖²`.
pub fn prox_postcomposition(
    f: &FunSpec,
    l: &LinOp,
    tau: f64,
    r: &DenseVector,
) -> Result<(DenseVector, DenseVector)> {
    positive("prox step", tau)?;
    r.ensure_dim(l.out_dim(), "postcomposition target")?;
    if let Some(a) = l.identity_scale().filter(|a| *a != 0.0) {
        let x = f.prox_point(tau / (a * a), &r.scale(1.0 / a)?)?;
        return Ok((x.scale(a)?, x));
    }
    let n = l.in_dim();
    let mut m = l.gram_matrix()?.to_nalgebra();
    for i in 0..n {
        m[(i, i)] += RIDGE;
    }
    let ltr = l.adjoint_apply(r)?;
    let x = match f {
        FunSpec::Zero => solve_spd(m, &ltr)?,
        FunSpec::LinearTerm { c } => {
            solve_spd(m, &DenseVector::lin_comb(&[(1.0, &ltr), (-tau, c)])?)?
        }
        FunSpec::Quadratic(q) => {
            q.c.ensure_dim(n, "postcomposition")?;
            m += q.q_dense.to_nalgebra() * tau;
            solve_spd(m, &DenseVector::lin_comb(&[(1.0, &ltr), (-tau, &q.c)])?)?
        }
        FunSpec::AffineIndicator(a) => {
            let p = a.a.rows();
            let am = a.a.to_nalgebra();
            let mut kkt = DMatrix::zeros(n + p, n + p);
            kkt.view_mut((0, 0), (n, n)).copy_from(&m);
            kkt.view_mut((0, n), (n, p)).copy_from(&am.transpose());
            kkt.view_mut((n, 0), (p, n)).copy_from(&am);
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n).copy_from_slice(ltr.as_slice());
            rhs.rows_mut(n, p).copy_from_slice(a.y.as_slice());
            let sol = kkt.lu().solve(&rhs).ok_or(Error::SingularNormalEquations)?;
            DenseVector::checked(sol.rows(0, n).iter().copied().collect(), "postcomposition")?
        }
        other => return Err(Error::UnsupportedPostcomposition(other.kind_name())),
    };
    Ok((l.apply(&x)?, x))
}

fn solve_spd(m: DMatrix<f64>, rhs: &DenseVector) -> Result<DenseVector> {
    let b = DVector::from_column_slice(rhs.as_slice());
    let sol = match m.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => m.lu().solve(&b).ok_or(Error::SingularNormalEquations)?,
    };
    DenseVector::checked(sol.as_slice().to_vec(), "normal equations")
}
