//! Small dense-free linear algebra for symmetric tridiagonal operators.
//!
//! Every discrete operator in this crate couples only nearest neighbours, so a
//! symmetric tridiagonal matrix plus diagonal weights covers stiffness, mass,
//! Jacobians and the pencils of the eigenvalue problems.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// Symmetric tridiagonal matrix. `off[i]` couples rows `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        SymTridiag {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Adds `d[i]` to the diagonal.
    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (a, b) in self.diag.iter_mut().zip(d) {
            *a += b;
        }
    }

    /// Principal submatrix on the contiguous index range `lo..hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> SymTridiag {
        SymTridiag {
            diag: self.diag[lo..hi].to_vec(),
            off: if hi > lo {
                self.off[lo..hi - 1].to_vec()
            } else {
                Vec::new()
            },
        }
    }

    /// Solves `A x = b` by LU with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (x, _) = solve_bordered(self, &[], &[], 0.0, b, 0.0, false)?;
        Ok(x)
    }

    /// True when every pivot of the unpivoted `LDLᵀ` factorization is positive,
    /// i.e. the matrix is positive definite.
    pub fn is_positive_definite(&self) -> bool {
        let n = self.dim();
        let mut d = 0.0;
        for i in 0..n {
            d = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.off[i - 1] * self.off[i - 1] / d
            };
            if d <= 0.0 || !d.is_finite() {
                return false;
            }
        }
        true
    }
}

/// Solves the bordered system
///
/// ```text
/// [ A   b ] [x]   [f]
/// [ cᵀ  d ] [y] = [g]
/// ```
///
/// with `A` symmetric tridiagonal, by Gaussian elimination with row pivoting
/// inside the band and a final 2×2 pivot against the border row. This stays
/// well posed when `A` is singular but the bordered matrix is not (folds).
/// With `border = false` the border is ignored and a plain solve is done.
pub fn solve_bordered(
    a: &SymTridiag,
    b: &[f64],
    c: &[f64],
    d: f64,
    f: &[f64],
    g: f64,
    border: bool,
) -> Result<(Vec<f64>, f64)> {
    let n = a.dim();
    if n == 0 || f.len() != n || (border && (b.len() != n || c.len() != n)) {
        return Err(Error::invalid("bordered solve: dimension mismatch"));
    }
    let scale = a
        .diag
        .iter()
        .chain(a.off.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let tiny = 1e-300;

    // Working rows. Row i holds columns i..i+2 in (u0,u1,u2), border in ub.
    let mut u0 = a.diag.clone();
    let mut u1: Vec<f64> = (0..n).map(|i| if i + 1 < n { a.off[i] } else { 0.0 }).collect();
    let mut u2 = vec![0.0; n];
    let mut ub: Vec<f64> = if border { b.to_vec() } else { vec![0.0; n] };
    // Sub-diagonal entry of row i+1 at column i.
    let mut lo: Vec<f64> = (0..n).map(|i| if i + 1 < n { a.off[i] } else { 0.0 }).collect();
    let mut rhs = f.to_vec();
    let mut last: Vec<f64> = if border { c.to_vec() } else { vec![0.0; n] };
    let mut dn = d;
    let mut gn = g;

    let elim_end = if border { n - 1 } else { n };
    for j in 0..elim_end {
        if j + 1 < n && lo[j].abs() > u0[j].abs() {
            // Swap row j with row j+1. Row j+1 holds (lo[j], u0[j+1], u1[j+1]) at cols j..j+2.
            let (r0, r1, r2, rb, rr) = (lo[j], u0[j + 1], u1[j + 1], ub[j + 1], rhs[j + 1]);
            lo[j] = u0[j];
            u0[j + 1] = u1[j];
            u1[j + 1] = u2[j];
            ub[j + 1] = ub[j];
            rhs[j + 1] = rhs[j];
            u0[j] = r0;
            u1[j] = r1;
            u2[j] = r2;
            ub[j] = rb;
            rhs[j] = rr;
        }
        if u0[j].abs() <= tiny {
            if border && j + 1 == n {
                break;
            }
            return Err(Error::numeric("singular tridiagonal pivot", j));
        }
        if j + 1 < n {
            let m = lo[j] / u0[j];
            u0[j + 1] -= m * u1[j];
            u1[j + 1] -= m * u2[j];
            ub[j + 1] -= m * ub[j];
            rhs[j + 1] -= m * rhs[j];
        }
        if border {
            let m = last[j] / u0[j];
            if j + 1 < n {
                last[j + 1] -= m * u1[j];
            }
            if j + 2 < n {
                last[j + 2] -= m * u2[j];
            }
            dn -= m * ub[j];
            gn -= m * rhs[j];
        }
    }

    let mut x = vec![0.0; n];
    let mut y = 0.0;
    if border {
        // Remaining 2x2 block: rows n-1 and border over columns n-1 and y.
        let (mut a11, mut a12, mut r1) = (u0[n - 1], ub[n - 1], rhs[n - 1]);
        let (mut a21, mut a22, mut r2) = (last[n - 1], dn, gn);
        if a21.abs() > a11.abs() {
            core::mem::swap(&mut a11, &mut a21);
            core::mem::swap(&mut a12, &mut a22);
            core::mem::swap(&mut r1, &mut r2);
        }
        if a11.abs() <= tiny {
            return Err(Error::numeric("singular bordered system", n));
        }
        let m = a21 / a11;
        let s = a22 - m * a12;
        if s.abs() <= 1e-15 * scale * f64::EPSILON {
            return Err(Error::numeric("singular bordered system", n));
        }
        y = (r2 - m * r1) / s;
        x[n - 1] = (r1 - a12 * y) / a11;
        for j in (0..n - 1).rev() {
            let mut s = rhs[j] - u1[j] * x[j + 1] - ub[j] * y;
            if j + 2 < n {
                s -= u2[j] * x[j + 2];
            }
            x[j] = s / u0[j];
        }
    } else {
        for j in (0..n).rev() {
            let mut s = rhs[j];
            if j + 1 < n {
                s -= u1[j] * x[j + 1];
            }
            if j + 2 < n {
                s -= u2[j] * x[j + 2];
            }
            x[j] = s / u0[j];
        }
    }
    if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
        return Err(Error::numeric("non-finite linear solve", n));
    }
    Ok((x, y))
}

/// Bordered solve followed by one step of iterative refinement.
pub fn solve_bordered_refined(
    a: &SymTridiag,
    b: &[f64],
    c: &[f64],
    d: f64,
    f: &[f64],
    g: f64,
) -> Result<(Vec<f64>, f64)> {
    let (mut x, mut y) = solve_bordered(a, b, c, d, f, g, true)?;
    let ax = a.matvec(&x);
    let r: Vec<f64> = (0..x.len()).map(|i| f[i] - ax[i] - b[i] * y).collect();
    let rg = g - dot(c, &x) - d * y;
    let (dx, dy) = solve_bordered(a, b, c, d, &r, rg, true)?;
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += di;
    }
    y += dy;
    Ok((x, y))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Number of eigenvalues of the symmetric tridiagonal `t` below `x`.
fn sturm_count(t: &SymTridiag, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..t.dim() {
        let e2 = if i == 0 { 0.0 } else { t.off[i - 1] * t.off[i - 1] };
        q = t.diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (t.diag[i].abs() + x.abs() + 1e-300);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenpair of the pencil `A x = μ W x` with `W = diag(w)`, `w > 0`.
///
/// The pencil is scaled to `W^{-1/2} A W^{-1/2}`; the eigenvalue is bracketed by
/// Sturm-sequence bisection and the vector comes from inverse iteration. The
/// returned vector is `W`-normalized with a nonnegative sum.
pub fn smallest_eigenpair(a: &SymTridiag, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = a.dim();
    if n == 0 || w.len() != n {
        return Err(Error::invalid("eigenpair: dimension mismatch"));
    }
    if w.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("eigenpair: weights must be positive"));
    }
    let s: Vec<f64> = w.iter().map(|&v| 1.0 / sqrt(v)).collect();
    let mut t = SymTridiag::zeros(n);
    for i in 0..n {
        t.diag[i] = a.diag[i] * s[i] * s[i];
        if i + 1 < n {
            t.off[i] = a.off[i] * s[i] * s[i + 1];
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { t.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { t.off[i].abs() } else { 0.0 };
        lo = lo.min(t.diag[i] - r);
        hi = hi.max(t.diag[i] + r);
    }
    let width = (hi - lo).abs().max(1e-300);
    let mut iters = 0;
    while hi - lo > 4.0 * f64::EPSILON * (lo.abs().max(hi.abs()) + f64::EPSILON * width) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(&t, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
        if iters > 2000 {
            return Err(Error::numeric("Sturm bisection did not settle", iters));
        }
    }
    let mu = 0.5 * (lo + hi);

    // Inverse iteration with a shift a hair below the eigenvalue.
    let shift = mu - 64.0 * f64::EPSILON * (mu.abs() + width * 1e-3);
    let mut shifted = t.clone();
    for d in shifted.diag.iter_mut() {
        *d -= shift;
    }
    let mut y = vec![1.0 / sqrt(n as f64); n];
    for k in 0..4 {
        let z = match shifted.solve(&y) {
            Ok(z) => z,
            Err(_) => return Err(Error::numeric("inverse iteration breakdown", k)),
        };
        let nz = sqrt(dot(&z, &z));
        if !(nz > 0.0) || !nz.is_finite() {
            return Err(Error::numeric("inverse iteration breakdown", k));
        }
        y = z.iter().map(|v| v / nz).collect();
    }
    let ty = t.matvec(&y);
    let rq = dot(&y, &ty);
    let mut x: Vec<f64> = y.iter().zip(&s).map(|(a, b)| a * b).collect();
    if x.iter().sum::<f64>() < 0.0 {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
    Ok((rq, x))
}
