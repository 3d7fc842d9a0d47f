//! Small dense-matrix kernel.
//!
//! Everything in this crate runs at desk scale (state dimensions 2 or 4,
//! global systems of a few hundred rows), so the kernel is a plain row-major
//! `Vec<f64>` matrix with LU factorization, norms, a Hager-style 1-norm
//! inverse estimator, and polynomial root utilities. No BLAS, no SIMD; the
//! arithmetic order is fixed so identical inputs give identical bits.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from a row-major slice; `data.len()` must equal `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(alloc::format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data: data.to_vec() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "vector length must equal column count");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *a -= *b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// 1-norm (maximum absolute column sum).
    pub fn norm_1(&self) -> f64 {
        let mut best = 0.0_f64;
        for j in 0..self.cols {
            let mut s = 0.0;
            for i in 0..self.rows {
                s += libm::fabs(self[(i, j)]);
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let mut best = 0.0_f64;
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += libm::fabs(self[(i, j)]);
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    /// Debug dump: one line per row, space-separated, 17 significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{:.16e}", self[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Debug dump of a vector: one entry per line, 17 significant digits.
pub fn dump_vector(v: &[f64]) -> String {
    let mut out = String::new();
    for x in v {
        let _ = writeln!(out, "{x:.16e}");
    }
    out
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    /// Sign of the permutation, for determinants.
    perm_sign: f64,
}

impl Lu {
    /// Factor a square matrix. Fails on non-square input or when a pivot
    /// column is exactly zero (structurally singular); near-singularity is
    /// left to the caller's condition estimate.
    pub fn factor(a: &Mat) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "LU needs a square matrix, got {}x{}",
                a.rows,
                a.cols
            )));
        }
        if !a.is_finite() {
            return Err(Error::NonFiniteMatrix);
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut perm_sign = 1.0;
        for k in 0..n {
            // pivot search
            let mut p = k;
            let mut best = libm::fabs(lu[(k, k)]);
            for i in (k + 1)..n {
                let v = libm::fabs(lu[(i, k)]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularSystem { cond_estimate: f64::INFINITY });
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                perm_sign = -perm_sign;
            }
            let piv = lu[(k, k)];
            for i in (k + 1)..n {
                let m = lu[(i, k)] / piv;
                lu[(i, k)] = m;
                for j in (k + 1)..n {
                    let lkj = lu[(k, j)];
                    lu[(i, j)] -= m * lkj;
                }
            }
        }
        Ok(Lu { lu, perm, perm_sign })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        // apply permutation
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // forward substitution with unit lower triangle
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        // back substitution
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Solve `A^T x = b` (used by the 1-norm estimator).
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // A^T = U^T L^T P, so solve U^T y = b, then L^T z = y, then undo P.
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(j, i)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[(j, i)] * x[j];
            }
            x[i] = acc;
        }
        let mut out = vec![0.0; n];
        for (row, &p) in self.perm.iter().enumerate() {
            out[p] = x[row];
        }
        out
    }

    /// Solve for a matrix right-hand side, column by column.
    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let n = self.dim();
        assert_eq!(b.rows, n);
        let mut out = Mat::zeros(n, b.cols);
        let mut col = vec![0.0; n];
        for j in 0..b.cols {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let mut d = self.perm_sign;
        for i in 0..self.dim() {
            d *= self.lu[(i, i)];
        }
        d
    }
}

/// Hager-style estimate of `norm1(A^-1)` from an LU factorization.
///
/// Classic alternating solve with `A` and `A^T`, at most five sweeps.
/// Returns a lower bound on the true norm, usually within a small factor.
pub fn normest1_inv(lu: &Lu) -> f64 {
    let n = lu.dim();
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut best = 0.0_f64;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = lu.solve(&x);
        let y1: f64 = y.iter().map(|v| libm::fabs(*v)).sum();
        if y1 > best {
            best = y1;
        }
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let z = lu.solve_transpose(&xi);
        let (mut j_max, mut z_max) = (0, 0.0);
        for (j, zv) in z.iter().enumerate() {
            let a = libm::fabs(*zv);
            if a > z_max {
                z_max = a;
                j_max = j;
            }
        }
        let zx: f64 = z.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        if z_max <= zx || j_max == last_j {
            break;
        }
        last_j = j_max;
        x.iter_mut().for_each(|v| *v = 0.0);
        x[j_max] = 1.0;
    }
    best
}

/// 1-norm condition estimate of `a` given its factorization.
pub fn condest1(a: &Mat, lu: &Lu) -> f64 {
    a.norm_1() * normest1_inv(lu)
}

/// Expand a monic polynomial from its roots, keeping real arithmetic.
///
/// Conjugate pairs are folded into real quadratic factors, so the returned
/// coefficients are exactly real. Input must be conjugate-closed (checked by
/// greedy pairing). Coefficients are returned lowest power first with the
/// leading 1 omitted: for roots `l_1..l_n` the result `c` satisfies
/// `prod (s - l_i) = s^n + c[n-1] s^(n-1) + ... + c[0]`.
pub fn poly_from_roots(roots: &[Complex64]) -> Result<Vec<f64>> {
    let (reals, pairs) = split_conjugate_roots(roots)?;
    // poly as full coefficient list, lowest power first, starting at 1
    let mut poly = vec![1.0_f64];
    for r in &reals {
        poly = conv(&poly, &[-r, 1.0]);
    }
    for (a, b) in &pairs {
        poly = conv(&poly, &[a * a + b * b, -2.0 * a, 1.0]);
    }
    poly.pop(); // drop the leading 1
    Ok(poly)
}

/// Separate a conjugate-closed root set into real roots and `(re, im > 0)`
/// pair representatives. Tolerance for the pairing is relative to magnitude.
pub fn split_conjugate_roots(roots: &[Complex64]) -> Result<(Vec<f64>, Vec<(f64, f64)>)> {
    let mut reals = Vec::new();
    let mut pos: Vec<Complex64> = Vec::new();
    let mut neg: Vec<Complex64> = Vec::new();
    for r in roots {
        let tol = 1e-12 * (1.0 + r.norm());
        if libm::fabs(r.im) <= tol {
            reals.push(r.re);
        } else if r.im > 0.0 {
            pos.push(*r);
        } else {
            neg.push(*r);
        }
    }
    if pos.len() != neg.len() {
        return Err(Error::ConjugateClosure(alloc::format!(
            "{} roots above the real axis, {} below",
            pos.len(),
            neg.len()
        )));
    }
    let mut pairs = Vec::with_capacity(pos.len());
    let mut used = vec![false; neg.len()];
    for p in &pos {
        let want = p.conj();
        let tol = 1e-9 * (1.0 + p.norm());
        let mut found = None;
        for (k, q) in neg.iter().enumerate() {
            if !used[k] && (q - want).norm() <= tol {
                found = Some(k);
                break;
            }
        }
        match found {
            Some(k) => {
                used[k] = true;
                // fold the pair to its exact conjugate representative
                pairs.push((p.re, p.im));
            }
            None => {
                return Err(Error::ConjugateClosure(alloc::format!(
                    "no conjugate found for root {p}"
                )));
            }
        }
    }
    Ok((reals, pairs))
}

fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Roots of the monic polynomial `s^n + c[n-1] s^(n-1) + ... + c[0]` by the
/// Aberth-Ehrlich simultaneous iteration. Exact zero roots are deflated
/// first so that nilpotent companion systems resolve without iteration.
/// Output is sorted by real part, then imaginary part; residual imaginary
/// noise on real roots is snapped to zero.
pub fn monic_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut zeros = 0usize;
    while zeros < coeffs.len() && coeffs[zeros] == 0.0 {
        zeros += 1;
    }
    let reduced = &coeffs[zeros..];
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    roots.extend(aberth(reduced));
    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap())
    });
    roots
}

fn aberth(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Complex64::new(-coeffs[0], 0.0)];
    }
    // Cauchy radius bound for the starting circle
    let mut radius = 0.0_f64;
    for c in coeffs {
        let a = libm::fabs(*c);
        if a > radius {
            radius = a;
        }
    }
    radius += 1.0;
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * core::f64::consts::PI * (k as f64) / (n as f64) + 0.4;
            Complex64::new(radius * libm::cos(angle), radius * libm::sin(angle))
        })
        .collect();
    let eval = |x: Complex64| -> (Complex64, Complex64) {
        // Horner for p and p' with the implicit leading 1
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for j in 0..n {
            let (p, dp) = eval(z[j]);
            if p.norm() == 0.0 {
                continue;
            }
            let w = if dp.norm() == 0.0 { Complex64::new(1e-12, 1e-12) } else { p / dp };
            let mut repulse = Complex64::new(0.0, 0.0);
            for k in 0..n {
                if k != j {
                    let d = z[j] - z[k];
                    if d.norm() > 0.0 {
                        repulse += Complex64::new(1.0, 0.0) / d;
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - w * repulse;
            let step = if denom.norm() == 0.0 { w } else { w / denom };
            z[j] -= step;
            let rel = step.norm() / (1.0 + z[j].norm());
            if rel > max_step {
                max_step = rel;
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    // snap conjugate-noise imaginary parts of essentially-real roots
    for r in z.iter_mut() {
        if libm::fabs(r.im) <= 1e-11 * (1.0 + libm::fabs(r.re)) {
            r.im = 0.0;
        }
    }
    z
}
