//! Dense vectors, weighted block vectors and linear operators.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by [`LinOp::certified`].
pub const NORM_TOL: f64 = 1e-8;
pub const NORM_MAX_ITER: usize = 200_000;
pub const NORM_SEED: u64 = 0x5eed;

/// A nonempty vector of finite reals.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DenseVector(Vec<f64>);

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        DenseVector::new(v)
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.0
    }
}

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::checked(entries, "vector construction")
    }

    pub(crate) fn checked(entries: Vec<f64>, context: &'static str) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context });
        }
        Ok(DenseVector(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(entries.to_vec())
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "vectors must have at least one entry");
        DenseVector(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot product of mismatched vectors");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn ensure_dim(&self, expected: usize, context: &'static str) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                actual: self.dim(),
            });
        }
        Ok(())
    }

    /// Returns `Σ a_k v_k`.
    pub fn lin_comb(terms: &[(f64, &DenseVector)]) -> Result<DenseVector> {
        let n = terms.first().ok_or(Error::Empty)?.1.dim();
        let mut out = vec![0.0; n];
        for (a, v) in terms {
            v.ensure_dim(n, "linear combination")?;
            for (o, x) in out.iter_mut().zip(&v.0) {
                *o += a * x;
            }
        }
        Self::checked(out, "linear combination")
    }

    pub fn add(&self, other: &DenseVector) -> Result<DenseVector> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, a: f64) -> Result<DenseVector> {
        self.map(|x| a * x)
    }

    /// `self + rho (target - self)`
    pub fn relax(&self, target: &DenseVector, rho: f64) -> Result<DenseVector> {
        self.zip_with(target, |z, t| z + rho * (t - z))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<DenseVector> {
        Self::checked(self.0.iter().map(|&x| f(x)).collect(), "elementwise map")
    }

    pub fn zip_with(
        &self,
        other: &DenseVector,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseVector> {
        other.ensure_dim(self.dim(), "elementwise operation")?;
        Self::checked(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            "elementwise operation",
        )
    }

    pub fn concat(parts: &[DenseVector]) -> DenseVector {
        DenseVector(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub fn split(&self, dims: &[usize]) -> Result<Vec<DenseVector>> {
        self.ensure_dim(dims.iter().sum(), "block split")?;
        let mut out = Vec::with_capacity(dims.len());
        let mut start = 0;
        for &d in dims {
            out.push(Self::new(self.0[start..start + d].to_vec())?);
            start += d;
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &DenseVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Blocks of a product space with inner product `Σ_m ω_m ⟨a_m, b_m⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockVector {
    blocks: Vec<DenseVector>,
    weights: Vec<f64>,
}

impl BlockVector {
    pub fn new(blocks: Vec<DenseVector>, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        if blocks.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "block weights",
                expected: blocks.len(),
                actual: weights.len(),
            });
        }
        Ok(BlockVector { blocks, weights })
    }

    pub fn blocks(&self) -> &[DenseVector] {
        &self.blocks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weighted_inner(&self, other: &BlockVector) -> Result<f64> {
        if self.weights != other.weights {
            return Err(Error::InvalidArgument(
                "block vectors carry different weights".into(),
            ));
        }
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::DimensionMismatch {
                context: "weighted inner product",
                expected: self.blocks.len(),
                actual: other.blocks.len(),
            });
        }
        let mut total = 0.0;
        for ((a, b), w) in self.blocks.iter().zip(&other.blocks).zip(&self.weights) {
            b.ensure_dim(a.dim(), "weighted inner product")?;
            total += w * a.dot(b);
        }
        Ok(total)
    }

    pub fn norm(&self) -> f64 {
        self.weighted_inner(self).unwrap_or(f64::NAN).sqrt()
    }
}

pub fn weighted_inner(a: &BlockVector, b: &BlockVector) -> Result<f64> {
    a.weighted_inner(b)
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "weights must be positive and finite, got {w}"
        )));
    }
    Ok(())
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "matrix construction",
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                context: "matrix rows",
                expected: cols,
                actual: r.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        Self::new(n, n, m.data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn tr_mul_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, ui) in u.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * ui;
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matrix product",
                expected: self.cols,
                actual: other.rows,
            });
        }
        Ok(Matrix::from_nalgebra(
            &(self.to_nalgebra() * other.to_nalgebra()),
        ))
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Matrix {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        Matrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

type VecMap = Arc<dyn Fn(&DenseVector) -> Result<DenseVector> + Send + Sync>;

/// Operator given by closures; used for instrumentation and matrix-free maps.
#[derive(Clone)]
pub struct CustomOp {
    pub name: String,
    pub apply: VecMap,
    pub adjoint: VecMap,
}

impl fmt::Debug for CustomOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomOp({})", self.name)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum LinOpKind {
    Identity,
    Dense(Matrix),
    /// Forward differences `x ↦ (x_{k+1} − x_k)_k`.
    Diff1D,
    /// `x ↦ (L_1 x, …, L_M x)` with output metric weighted by `weights`.
    Stacked {
        ops: Vec<LinOp>,
        weights: Vec<f64>,
    },
    ScaledSum(Vec<(f64, LinOp)>),
    /// `L*L` for the wrapped `L`.
    Gram(Box<LinOp>),
    /// `L*` as an operator in its own right.
    Adjoint(Box<LinOp>),
    #[serde(skip)]
    Custom(CustomOp),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinOp {
    kind: LinOpKind,
    in_dim: usize,
    out_dim: usize,
    #[serde(default)]
    norm_bound: Option<f64>,
}

impl LinOp {
    pub fn identity(n: usize) -> LinOp {
        assert!(n > 0);
        LinOp {
            kind: LinOpKind::Identity,
            in_dim: n,
            out_dim: n,
            norm_bound: Some(1.0),
        }
    }

    pub fn dense(m: Matrix) -> LinOp {
        LinOp {
            in_dim: m.cols(),
            out_dim: m.rows(),
            kind: LinOpKind::Dense(m),
            norm_bound: None,
        }
    }

    pub fn diagonal(d: &[f64]) -> Result<LinOp> {
        Ok(Self::dense(Matrix::diag(d)?))
    }

    pub fn zero(in_dim: usize, out_dim: usize) -> LinOp {
        let mut op = Self::dense(Matrix::zeros(out_dim, in_dim));
        op.norm_bound = Some(0.0);
        op
    }

    pub fn diff1d(n: usize) -> Result<LinOp> {
        if n < 2 {
            return Err(Error::InvalidArgument(
                "forward differences need at least two samples".into(),
            ));
        }
        Ok(LinOp {
            kind: LinOpKind::Diff1D,
            in_dim: n,
            out_dim: n - 1,
            norm_bound: None,
        })
    }

    pub fn stacked(ops: Vec<LinOp>, weights: Vec<f64>) -> Result<LinOp> {
        check_weights(&weights)?;
        if ops.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "stacked operator weights",
                expected: ops.len(),
                actual: weights.len(),
            });
        }
        let in_dim = ops[0].in_dim;
        for op in &ops {
            if op.in_dim != in_dim {
                return Err(Error::DimensionMismatch {
                    context: "stacked operator input",
                    expected: in_dim,
                    actual: op.in_dim,
                });
            }
        }
        Ok(LinOp {
            in_dim,
            out_dim: ops.iter().map(|o| o.out_dim).sum(),
            kind: LinOpKind::Stacked { ops, weights },
            norm_bound: None,
        })
    }

    pub fn scaled_sum(terms: Vec<(f64, LinOp)>) -> Result<LinOp> {
        let first = terms.first().ok_or(Error::Empty)?;
        let (in_dim, out_dim) = (first.1.in_dim, first.1.out_dim);
        for (a, op) in &terms {
            if !a.is_finite() {
                return Err(Error::NonFinite {
                    context: "scaled sum coefficient",
                });
            }
            if op.in_dim != in_dim || op.out_dim != out_dim {
                return Err(Error::DimensionMismatch {
                    context: "scaled sum terms",
                    expected: in_dim,
                    actual: op.in_dim,
                });
            }
        }
        let norm_bound = terms
            .iter()
            .map(|(a, op)| op.norm_bound.map(|b| a.abs() * b))
            .sum::<Option<f64>>();
        Ok(LinOp {
            kind: LinOpKind::ScaledSum(terms),
            in_dim,
            out_dim,
            norm_bound,
        })
    }

    pub fn scaled(a: f64, op: LinOp) -> Result<LinOp> {
        Self::scaled_sum(vec![(a, op)])
    }

    pub fn gram(op: LinOp) -> LinOp {
        let n = op.in_dim;
        LinOp {
            norm_bound: op.norm_bound.map(|b| b * b),
            kind: LinOpKind::Gram(Box::new(op)),
            in_dim: n,
            out_dim: n,
        }
    }

    pub fn adjoint(op: LinOp) -> LinOp {
        LinOp {
            in_dim: op.out_dim,
            out_dim: op.in_dim,
            norm_bound: op.norm_bound,
            kind: LinOpKind::Adjoint(Box::new(op)),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        in_dim: usize,
        out_dim: usize,
        apply: impl Fn(&DenseVector) -> Result<DenseVector> + Send + Sync + 'static,
        adjoint: impl Fn(&DenseVector) -> Result<DenseVector> + Send + Sync + 'static,
    ) -> LinOp {
        LinOp {
            kind: LinOpKind::Custom(CustomOp {
                name: name.into(),
                apply: Arc::new(apply),
                adjoint: Arc::new(adjoint),
            }),
            in_dim,
            out_dim,
            norm_bound: None,
        }
    }

    pub fn kind(&self) -> &LinOpKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LinOpKind::Identity => "identity",
            LinOpKind::Dense(_) => "dense matrix",
            LinOpKind::Diff1D => "forward differences",
            LinOpKind::Stacked { .. } => "stacked operator",
            LinOpKind::ScaledSum(_) => "scaled sum",
            LinOpKind::Gram(_) => "Gram operator",
            LinOpKind::Adjoint(_) => "adjoint operator",
            LinOpKind::Custom(_) => "custom operator",
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn norm_bound(&self) -> Option<f64> {
        self.norm_bound
    }

    /// Attaches a caller-supplied bound; it must dominate the true norm.
    pub fn with_norm_bound(mut self, bound: f64) -> Result<LinOp> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidArgument(format!("norm bound {bound}")));
        }
        self.norm_bound = Some(bound);
        Ok(self)
    }

    /// Returns the operator with its norm bound set by [`LinOp::estimate_norm`]
    /// using the default tolerance, unless a bound is already known.
    pub fn certified(self) -> Result<LinOp> {
        if self.norm_bound.is_some() {
            return Ok(self);
        }
        let b = self.estimate_norm(NORM_TOL, NORM_MAX_ITER, NORM_SEED)?;
        self.with_norm_bound(b)
    }

    /// Scale `a` when the operator is `a·Id`.
    pub fn identity_scale(&self) -> Option<f64> {
        match &self.kind {
            LinOpKind::Identity => Some(1.0),
            LinOpKind::ScaledSum(terms) => terms
                .iter()
                .map(|(a, op)| op.identity_scale().map(|s| a * s))
                .sum(),
            _ => None,
        }
    }

    pub fn block_dims(&self) -> Vec<usize> {
        match &self.kind {
            LinOpKind::Stacked { ops, .. } => ops.iter().map(|o| o.out_dim).collect(),
            _ => vec![self.out_dim],
        }
    }

    pub fn apply(&self, x: &DenseVector) -> Result<DenseVector> {
        x.ensure_dim(self.in_dim, "operator apply")?;
        match &self.kind {
            LinOpKind::Identity => Ok(x.clone()),
            LinOpKind::Dense(m) => DenseVector::checked(m.mul_vec(x.as_slice()), "matrix apply"),
            LinOpKind::Diff1D => DenseVector::checked(
                x.as_slice().windows(2).map(|w| w[1] - w[0]).collect(),
                "forward differences",
            ),
            LinOpKind::Stacked { ops, .. } => {
                let parts = ops
                    .iter()
                    .map(|op| op.apply(x))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DenseVector::concat(&parts))
            }
            LinOpKind::ScaledSum(terms) => {
                let parts = terms
                    .iter()
                    .map(|(a, op)| Ok((*a, op.apply(x)?)))
                    .collect::<Result<Vec<_>>>()?;
                DenseVector::lin_comb(&parts.iter().map(|(a, v)| (*a, v)).collect::<Vec<_>>())
            }
            LinOpKind::Gram(op) => op.adjoint_apply(&op.apply(x)?),
            LinOpKind::Adjoint(op) => op.adjoint_apply(x),
            LinOpKind::Custom(c) => {
                let y = (c.apply)(x)?;
                y.ensure_dim(self.out_dim, "custom operator output")?;
                Ok(y)
            }
        }
    }

    pub fn adjoint_apply(&self, u: &DenseVector) -> Result<DenseVector> {
        u.ensure_dim(self.out_dim, "adjoint apply")?;
        match &self.kind {
            LinOpKind::Identity => Ok(u.clone()),
            LinOpKind::Dense(m) => {
                DenseVector::checked(m.tr_mul_vec(u.as_slice()), "matrix adjoint")
            }
            LinOpKind::Diff1D => {
                let u = u.as_slice();
                let n = self.in_dim;
                let out = (0..n)
                    .map(|k| {
                        let left = if k > 0 { u[k - 1] } else { 0.0 };
                        let right = if k < n - 1 { u[k] } else { 0.0 };
                        left - right
                    })
                    .collect();
                DenseVector::checked(out, "negative divergence")
            }
            LinOpKind::Stacked { ops, weights } => {
                let blocks = u.split(&self.block_dims())?;
                let parts = ops
                    .iter()
                    .zip(&blocks)
                    .map(|(op, b)| op.adjoint_apply(b))
                    .collect::<Result<Vec<_>>>()?;
                DenseVector::lin_comb(
                    &weights
                        .iter()
                        .copied()
                        .zip(parts.iter())
                        .collect::<Vec<_>>(),
                )
            }
            LinOpKind::ScaledSum(terms) => {
                let parts = terms
                    .iter()
                    .map(|(a, op)| Ok((*a, op.adjoint_apply(u)?)))
                    .collect::<Result<Vec<_>>>()?;
                DenseVector::lin_comb(&parts.iter().map(|(a, v)| (*a, v)).collect::<Vec<_>>())
            }
            LinOpKind::Gram(_) => self.apply(u),
            LinOpKind::Adjoint(op) => op.apply(u),
            LinOpKind::Custom(c) => {
                let y = (c.adjoint)(u)?;
                y.ensure_dim(self.in_dim, "custom operator adjoint")?;
                Ok(y)
            }
        }
    }

    /// Power iteration on `L*L` from a seeded start. The returned estimate is
    /// inflated by `1 + tol`.
    pub fn estimate_norm(&self, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {tol}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = (0..self.in_dim)
            .map(|_| 1.0 + rng.random_range(-0.5..0.5))
            .collect();
        let mut v = DenseVector::new(start)?;
        v = v.scale(1.0 / v.norm())?;
        let mut rayleigh = 0.0;
        for _ in 0..max_iter {
            let w = self.adjoint_apply(&self.apply(&v)?)?;
            let wn = w.norm();
            if wn == 0.0 {
                return Ok(0.0);
            }
            rayleigh = v.dot(&w);
            let residual = DenseVector::lin_comb(&[(1.0, &w), (-rayleigh, &v)])?.norm();
            if residual <= tol * wn {
                return Ok(rayleigh.max(0.0).sqrt() * (1.0 + tol));
            }
            v = w.scale(1.0 / wn)?;
        }
        Err(Error::NormEstimate {
            rayleigh,
            iterations: max_iter,
        })
    }

    /// Dense matrix of the operator, built column by column.
    pub fn materialize(&self) -> Result<Matrix> {
        if let LinOpKind::Dense(m) = &self.kind {
            return Ok(m.clone());
        }
        let mut data = vec![0.0; self.out_dim * self.in_dim];
        for j in 0..self.in_dim {
            let col = self.apply(&DenseVector::basis(self.in_dim, j))?;
            for (i, v) in col.as_slice().iter().enumerate() {
                data[i * self.in_dim + j] = *v;
            }
        }
        Matrix::new(self.out_dim, self.in_dim, data)
    }

    /// Matrix of `L*L` taken with respect to the output metric of the operator.
    pub fn gram_matrix(&self) -> Result<Matrix> {
        LinOp::gram(self.clone()).materialize()
    }
}

pub fn apply(op: &LinOp, x: &DenseVector) -> Result<DenseVector> {
    op.apply(x)
}

pub fn adjoint_apply(op: &LinOp, u: &DenseVector) -> Result<DenseVector> {
    op.adjoint_apply(u)
}

pub fn estimate_norm(op: &LinOp, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
    op.estimate_norm(tol, max_iter, seed)
}
