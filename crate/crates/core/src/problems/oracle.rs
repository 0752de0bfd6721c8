//! Reference solutions computed without any splitting method: a homotopy
//! path for LASSO, Condat's direct algorithm for 1-D total variation,
//! KKT linear solves and per-coordinate minimization. Each result carries a
//! first-order optimality certificate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::ProblemSpec;
use crate::error::{Error, Result};
use crate::prox::{FunSpec, Quadratic};
use crate::space::{DenseVector, LinOpKind};

/// Largest accepted first-order residual.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// Largest dimension for the brute-force cross-checks.
pub const ENUMERATION_MAX_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Homotopy,
    TautString,
    KktSolve,
    Separable,
    Enumeration,
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub x_star: DenseVector,
    /// One dual per term, `u_m ∈ ∂g_m(L_m x*)`.
    pub duals: Option<Vec<DenseVector>>,
    pub objective: f64,
    pub method: OracleMethod,
    pub certificate: f64,
}

fn oracle_err(msg: impl Into<String>) -> Error {
    Error::Oracle(msg.into())
}

fn quadratic_of(h: &FunSpec) -> Result<&Quadratic> {
    h.as_quadratic()
        .ok_or_else(|| oracle_err(format!("expected a quadratic h, got {}", h.kind_name())))
}

fn l1_weight(g: &FunSpec) -> Option<f64> {
    match g {
        FunSpec::Zero => Some(0.0),
        FunSpec::L1 { weight } => Some(*weight),
        _ => None,
    }
}

fn finish(p: &ProblemSpec, sol: OracleSolution) -> Result<OracleSolution> {
    if !(sol.certificate <= CERTIFICATE_TOL) {
        return Err(oracle_err(format!(
            "{:?} certificate {:e} exceeds {CERTIFICATE_TOL:e}",
            sol.method, sol.certificate
        )));
    }
    let objective = p.objective(&sol.x_star)?;
    if !objective.is_finite() {
        return Err(oracle_err("reference point lies outside the domain"));
    }
    Ok(OracleSolution { objective, ..sol })
}

/// Solves a problem produced by the generators, or any instance with the
/// same structure.
pub fn oracle_solve(p: &ProblemSpec) -> Result<OracleSolution> {
    p.check()?;
    match (&p.f, p.terms.as_slice()) {
        (FunSpec::Zero, []) => kkt_oracle(p, None),
        (FunSpec::AffineIndicator(_), []) => kkt_oracle(p, Some(&p.f)),
        (FunSpec::Zero, [term]) if l1_weight(&term.g).is_some() => match term.l.kind() {
            LinOpKind::Identity => lasso_oracle(p),
            LinOpKind::Diff1D => tv_oracle(p),
            _ => Err(oracle_err("unsupported operator for an l1 term")),
        },
        (FunSpec::Box(_), [_]) => separable_oracle(p),
        _ => Err(oracle_err("no reference solver for this problem structure")),
    }
}

fn kkt_oracle(p: &ProblemSpec, affine: Option<&FunSpec>) -> Result<OracleSolution> {
    let q = quadratic_of(&p.h)?;
    let n = p.dim;
    let qm = q.q_matrix().to_nalgebra();
    let c = DVector::from_column_slice(q.c().as_slice());
    let (x, certificate) = match affine {
        None => {
            let x = qm
                .clone()
                .cholesky()
                .ok_or_else(|| oracle_err("quadratic is not positive definite"))?
                .solve(&(-&c));
            let cert = (&qm * &x + &c).amax();
            (x, cert)
        }
        Some(FunSpec::AffineIndicator(set)) => {
            let b = set.matrix().to_nalgebra();
            let d = DVector::from_column_slice(set.rhs().as_slice());
            let k = b.nrows();
            let mut kkt = DMatrix::zeros(n + k, n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(&qm);
            kkt.view_mut((0, n), (n, k)).copy_from(&b.transpose());
            kkt.view_mut((n, 0), (k, n)).copy_from(&b);
            let mut rhs = DVector::zeros(n + k);
            rhs.rows_mut(0, n).copy_from(&(-&c));
            rhs.rows_mut(n, k).copy_from(&d);
            let sol = kkt
                .lu()
                .solve(&rhs)
                .ok_or_else(|| oracle_err("singular KKT system"))?;
            let x = sol.rows(0, n).into_owned();
            let mu = sol.rows(n, k).into_owned();
            let stationarity = (&qm * &x + &c + b.transpose() * &mu).amax();
            let feasibility = (&b * &x - &d).amax();
            (x, stationarity.max(feasibility))
        }
        Some(_) => return Err(oracle_err("unsupported constraint")),
    };
    finish(
        p,
        OracleSolution {
            x_star: DenseVector::new(x.as_slice().to_vec())?,
            duals: Some(Vec::new()),
            objective: 0.0,
            method: OracleMethod::KktSolve,
            certificate,
        },
    )
}

/// Minimizes `½⟨x,Qx⟩ − ⟨b,x⟩ + λ‖x‖₁` for positive definite `Q` by
/// following the solution path from `λ = ‖b‖∞` down to `lambda`.
pub fn lasso_homotopy(q: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = b.len();
    let mut x = DVector::<f64>::zeros(n);
    if lambda == 0.0 {
        return q
            .clone()
            .cholesky()
            .map(|ch| ch.solve(b))
            .ok_or_else(|| oracle_err("quadratic is not positive definite"));
    }
    let mut level = b.amax();
    if level <= lambda {
        return Ok(x);
    }
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let first = b.iamax();
    active.push(first);
    signs.push(b[first].signum());
    for _ in 0..50 * n.max(10) {
        let k = active.len();
        let sub = DMatrix::from_fn(k, k, |i, j| q[(active[i], active[j])]);
        let ch = sub
            .cholesky()
            .ok_or_else(|| oracle_err("active block is not positive definite"))?;
        let dir = ch.solve(&DVector::from_column_slice(&signs));
        let corr = b - q * &x;
        let mut step = level - lambda;
        let mut event: Option<(bool, usize)> = None;
        for j in 0..n {
            if active.contains(&j) {
                continue;
            }
            let slope: f64 = active
                .iter()
                .zip(dir.iter())
                .map(|(&i, d)| q[(j, i)] * d)
                .sum();
            for (num, den) in [
                (level - corr[j], 1.0 - slope),
                (level + corr[j], 1.0 + slope),
            ] {
                if den > 1e-14 {
                    let t = num / den;
                    if t > 1e-15 && t < step {
                        step = t;
                        event = Some((true, j));
                    }
                }
            }
        }
        for (pos, (&i, d)) in active.iter().zip(dir.iter()).enumerate() {
            if *d != 0.0 {
                let t = -x[i] / d;
                if t > 1e-15 && t < step {
                    step = t;
                    event = Some((false, pos));
                }
            }
        }
        for (&i, d) in active.iter().zip(dir.iter()) {
            x[i] += step * d;
        }
        level -= step;
        match event {
            None => return Ok(x),
            Some((true, j)) => {
                let c = corr[j]
                    - step
                        * active
                            .iter()
                            .zip(dir.iter())
                            .map(|(&i, d)| q[(j, i)] * d)
                            .sum::<f64>();
                active.push(j);
                signs.push(c.signum());
            }
            Some((false, pos)) => {
                x[active[pos]] = 0.0;
                active.remove(pos);
                signs.remove(pos);
                if active.is_empty() {
                    let corr = b - q * &x;
                    let j = corr.iamax();
                    active.push(j);
                    signs.push(corr[j].signum());
                }
            }
        }
    }
    Err(oracle_err(
        "homotopy did not reach the target regularization",
    ))
}

/// Re-solves on the support of `x` and returns the refined point together
/// with the worst violation of the optimality conditions.
fn lasso_polish(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    x: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    let mut refined = DVector::zeros(x.len());
    if !support.is_empty() {
        let k = support.len();
        let sub = DMatrix::from_fn(k, k, |i, j| q[(support[i], support[j])]);
        let rhs = DVector::from_fn(k, |i, _| b[support[i]] - lambda * x[support[i]].signum());
        if let Some(ch) = sub.cholesky() {
            let xs = ch.solve(&rhs);
            for (i, &s) in support.iter().enumerate() {
                refined[s] = xs[i];
            }
        }
        if support
            .iter()
            .any(|&s| refined[s].signum() != x[s].signum())
        {
            refined = x.clone();
        }
    }
    let cert = lasso_certificate(q, b, lambda, &refined);
    let raw = lasso_certificate(q, b, lambda, x);
    if raw < cert {
        (x.clone(), raw)
    } else {
        (refined, cert)
    }
}

fn lasso_certificate(q: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, x: &DVector<f64>) -> f64 {
    let corr = b - q * x;
    (0..x.len())
        .map(|i| {
            if x[i] != 0.0 {
                (corr[i] - lambda * x[i].signum()).abs()
            } else {
                (corr[i].abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn lasso_oracle(p: &ProblemSpec) -> Result<OracleSolution> {
    let q = quadratic_of(&p.h)?;
    let lambda = l1_weight(&p.terms[0].g).unwrap_or(0.0);
    let qm = q.q_matrix().to_nalgebra();
    let b = -DVector::from_column_slice(q.c().as_slice());
    let path = lasso_homotopy(&qm, &b, lambda)?;
    let (x, certificate) = lasso_polish(&qm, &b, lambda, &path);
    let dual = &b - &qm * &x;
    finish(
        p,
        OracleSolution {
            x_star: DenseVector::new(x.as_slice().to_vec())?,
            duals: Some(vec![DenseVector::new(dual.as_slice().to_vec())?]),
            objective: 0.0,
            method: OracleMethod::Homotopy,
            certificate,
        },
    )
}

/// Exact minimizer of `½‖x − y‖² + λ Σ|x_{k+1} − x_k|` by Condat's direct
/// algorithm.
pub fn tv1d_denoise(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    if n == 0 {
        return Vec::new();
    }
    if lambda == 0.0 {
        return y.to_vec();
    }
    let mut x = vec![0.0; n];
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let (mut umin, mut umax) = (lambda, -lambda);
    let (mut vmin, mut vmax) = (y[0] - lambda, y[0] + lambda);
    let twolambda = 2.0 * lambda;
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                loop {
                    x[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = y[k];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    x[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = y[k];
                umax = -lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    x[k0] = vmin;
                    k0 += 1;
                }
                return x;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < -lambda {
            loop {
                x[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = y[k];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > lambda {
            loop {
                x[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = y[k];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = -lambda;
        } else {
            k += 1;
            if umin >= lambda {
                kminus = k;
                vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
                umin = lambda;
            }
            if umax <= -lambda {
                kplus = k;
                vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
                umax = -lambda;
            }
        }
    }
}

/// Dual of the difference term, `u` with `Dᵀu = y − x`, and the worst
/// violation of `u ∈ λ∂‖·‖₁(Dx)`.
fn tv_dual(y: &[f64], x: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut u = Vec::with_capacity(n - 1);
    let mut acc = 0.0;
    for k in 0..n - 1 {
        acc -= y[k] - x[k];
        u.push(acc);
    }
    let mut worst = (acc - (y[n - 1] - x[n - 1])).abs();
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..n - 1 {
        let jump = x[k + 1] - x[k];
        let v = if jump.abs() > 1e-13 * scale {
            (u[k] - lambda * jump.signum()).abs()
        } else {
            (u[k].abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    (u, worst)
}

fn tv_oracle(p: &ProblemSpec) -> Result<OracleSolution> {
    let q = quadratic_of(&p.h)?;
    let n = p.dim;
    let qm = q.q_matrix();
    let identity = (0..n).all(|i| (0..n).all(|j| qm.get(i, j) == if i == j { 1.0 } else { 0.0 }));
    if !identity {
        return Err(oracle_err("total variation oracle needs h = ½‖x − y‖²"));
    }
    let y: Vec<f64> = q.c().as_slice().iter().map(|v| -v).collect();
    let lambda = l1_weight(&p.terms[0].g).unwrap_or(0.0);
    let x = tv1d_denoise(&y, lambda);
    let (u, certificate) = tv_dual(&y, &x, lambda);
    finish(
        p,
        OracleSolution {
            x_star: DenseVector::new(x)?,
            duals: Some(vec![DenseVector::new(u)?]),
            objective: 0.0,
            method: OracleMethod::TautString,
            certificate,
        },
    )
}

/// Box constraint with a diagonal quadratic and a translated `ℓ1` term
/// whose operator touches each remaining coordinate through one row.
fn separable_oracle(p: &ProblemSpec) -> Result<OracleSolution> {
    let FunSpec::Box(bx) = &p.f else {
        return Err(oracle_err("expected a box constraint"));
    };
    let q = quadratic_of(&p.h)?;
    let term = &p.terms[0];
    let (lambda, offsets) = match &term.g {
        FunSpec::Translated { inner, shift } => match inner.as_ref() {
            FunSpec::L1 { weight } => (*weight, shift.as_slice().to_vec()),
            _ => return Err(oracle_err("expected a translated l1 term")),
        },
        FunSpec::L1 { weight } => (*weight, vec![0.0; term.l.out_dim()]),
        _ => return Err(oracle_err("expected an l1 term")),
    };
    let n = p.dim;
    let qm = q.q_matrix();
    let lm = term.l.materialize()?;
    let c = q.c().as_slice();
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; lm.rows()];
    let mut owner: Vec<Option<(usize, f64)>> = vec![None; n];
    for r in 0..lm.rows() {
        let nz: Vec<usize> = (0..n).filter(|&j| lm.get(r, j) != 0.0).collect();
        if nz.len() != 1 || owner[nz[0]].is_some() {
            return Err(oracle_err(
                "operator rows must select distinct single coordinates",
            ));
        }
        owner[nz[0]] = Some((r, lm.get(r, nz[0])));
    }
    let (lo, hi) = (bx.lo(), bx.hi());
    let mut certificate: f64 = 0.0;
    for i in 0..n {
        let off_diag = (0..n).any(|j| j != i && qm.get(i, j) != 0.0);
        if off_diag {
            return Err(oracle_err("quadratic must be diagonal"));
        }
        let qi = qm.get(i, i);
        match (qi > 0.0, owner[i]) {
            (true, None) => {
                x[i] = (-c[i] / qi).clamp(lo[i], hi[i]);
                let g = qi * x[i] + c[i];
                certificate = certificate.max(normal_violation(-g, x[i], lo[i], hi[i]));
            }
            (false, Some((r, coef))) => {
                if c[i] != 0.0 {
                    return Err(oracle_err("coupled coordinate carries a linear term"));
                }
                x[i] = (offsets[r] / coef).clamp(lo[i], hi[i]);
                let resid = coef * x[i] - offsets[r];
                u[r] = if resid.abs() <= 1e-14 * (1.0 + offsets[r].abs()) {
                    0.0
                } else {
                    lambda * resid.signum()
                };
                certificate = certificate.max(normal_violation(-coef * u[r], x[i], lo[i], hi[i]));
            }
            _ => return Err(oracle_err("each coordinate needs exactly one of Q or L")),
        }
    }
    finish(
        p,
        OracleSolution {
            x_star: DenseVector::new(x)?,
            duals: Some(vec![DenseVector::new(u)?]),
            objective: 0.0,
            method: OracleMethod::Separable,
            certificate,
        },
    )
}

/// Distance of `v` from the normal cone of `[lo, hi]` at `x`.
fn normal_violation(v: f64, x: f64, lo: f64, hi: f64) -> f64 {
    let at_lo = x <= lo;
    let at_hi = x >= hi;
    match (at_lo, at_hi) {
        (true, true) => 0.0,
        (true, false) => v.max(0.0),
        (false, true) => (-v).max(0.0),
        (false, false) => v.abs(),
    }
}

/// Exhaustive LASSO solve over all sign patterns, for small `n`.
pub fn lasso_enumerate(q: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = b.len();
    if n > ENUMERATION_MAX_DIM {
        return Err(Error::TooLarge {
            n,
            max: ENUMERATION_MAX_DIM,
        });
    }
    let objective = |x: &DVector<f64>| {
        0.5 * x.dot(&(q * x)) - b.dot(x) + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut best = DVector::zeros(n);
    let mut best_val = 0.0;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut signs = vec![0.0; n];
        let mut rest = code;
        for s in signs.iter_mut() {
            *s = (rest % 3) as f64 - 1.0;
            rest /= 3;
        }
        let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0.0).collect();
        let k = support.len();
        if k == 0 {
            continue;
        }
        let sub = DMatrix::from_fn(k, k, |i, j| q[(support[i], support[j])]);
        let rhs = DVector::from_fn(k, |i, _| b[support[i]] - lambda * signs[support[i]]);
        let Some(ch) = sub.cholesky() else { continue };
        let xs = ch.solve(&rhs);
        let mut x = DVector::zeros(n);
        for (i, &s) in support.iter().enumerate() {
            x[s] = xs[i];
        }
        let v = objective(&x);
        if v < best_val {
            best_val = v;
            best = x;
        }
    }
    Ok(best)
}

/// Exhaustive 1-D total-variation solve over all jump sets and signs, for
/// small `n`.
pub fn tv1d_enumerate(y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n > ENUMERATION_MAX_DIM {
        return Err(Error::TooLarge {
            n,
            max: ENUMERATION_MAX_DIM,
        });
    }
    let objective = |x: &[f64]| {
        0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            + lambda * x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
    };
    let mut best: Vec<f64> = vec![y.iter().sum::<f64>() / n as f64; n];
    let mut best_val = objective(&best);
    for jumps in 0u32..(1u32 << (n - 1)) {
        let mut starts = vec![0usize];
        for k in 0..n - 1 {
            if jumps & (1 << k) != 0 {
                starts.push(k + 1);
            }
        }
        let segs = starts.len();
        let bounds: Vec<(usize, usize)> = (0..segs)
            .map(|j| (starts[j], if j + 1 < segs { starts[j + 1] } else { n }))
            .collect();
        for sign_code in 0u32..(1u32 << (segs - 1)) {
            let sign = |j: usize| -> f64 {
                if j + 1 >= segs {
                    0.0
                } else if sign_code & (1 << j) != 0 {
                    1.0
                } else {
                    -1.0
                }
            };
            let mut x = vec![0.0; n];
            for (j, &(a, b)) in bounds.iter().enumerate() {
                let len = (b - a) as f64;
                let mean = y[a..b].iter().sum::<f64>() / len;
                let before = if j == 0 { 0.0 } else { sign(j - 1) };
                let v = mean - lambda * (before - sign(j)) / len;
                x[a..b].iter_mut().for_each(|e| *e = v);
            }
            let val = objective(&x);
            if val < best_val {
                best_val = val;
                best = x;
            }
        }
    }
    Ok(best)
}
