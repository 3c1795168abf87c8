//! Small dense complex linear algebra kit.
//!
//! The simulator only ever factors small matrices (the K x K precoder Gram,
//! the M x K channel for the null-space projector), so the routines here are
//! straightforward textbook implementations that stay generic over the
//! scalar type instead of binding to LAPACK.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex;

use crate::{real, Mat, Real, Result, SimError};

/// Conjugate transpose.
pub fn herm<T: Real>(a: &ArrayView2<'_, Complex<T>>) -> Mat<T> {
    let mut out = Array2::zeros((a.ncols(), a.nrows()));
    for ((i, j), v) in a.indexed_iter() {
        out[(j, i)] = v.conj();
    }
    out
}

/// Frobenius norm.
pub fn fro_norm<T: Real>(a: &ArrayView2<'_, Complex<T>>) -> T {
    a.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
}

/// `A^H B` without materializing the conjugate transpose.
pub fn herm_mul<T: Real>(a: &ArrayView2<'_, Complex<T>>, b: &ArrayView2<'_, Complex<T>>) -> Mat<T> {
    assert_eq!(a.nrows(), b.nrows(), "herm_mul inner dimensions");
    let (m, k) = (a.nrows(), a.ncols());
    let n = b.ncols();
    let mut out = Array2::zeros((k, n));
    for i in 0..k {
        for j in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for r in 0..m {
                acc += a[(r, i)].conj() * b[(r, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Cholesky factor `L` (lower) of a Hermitian positive-definite matrix.
pub fn cholesky<T: Real>(a: &ArrayView2<'_, Complex<T>>) -> Result<Mat<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SimError::ShapeMismatch("cholesky needs a square matrix".into()));
    }
    let mut l: Mat<T> = Array2::zeros((n, n));
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > T::zero()) {
            return Err(SimError::Numeric(format!(
                "matrix not positive definite at pivot {j} (value {:e})",
                diag.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let djj = diag.sqrt();
        l[(j, j)] = Complex::new(djj, T::zero());
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `A X = B` for Hermitian positive-definite `A` via Cholesky.
pub fn solve_hpd<T: Real>(
    a: &ArrayView2<'_, Complex<T>>,
    b: &ArrayView2<'_, Complex<T>>,
) -> Result<Mat<T>> {
    let l = cholesky(a)?;
    let n = l.nrows();
    if b.nrows() != n {
        return Err(SimError::ShapeMismatch(format!(
            "rhs has {} rows, expected {n}",
            b.nrows()
        )));
    }
    let mut x = b.to_owned();
    // forward: L y = b
    for col in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)].re;
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)].re;
        }
    }
    Ok(x)
}

/// Solves `A X = B` for general square `A` by LU with partial pivoting.
pub fn solve_lu<T: Real>(
    a: &ArrayView2<'_, Complex<T>>,
    b: &ArrayView2<'_, Complex<T>>,
) -> Result<Mat<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SimError::ShapeMismatch("solve_lu needs a square matrix".into()));
    }
    if b.nrows() != n {
        return Err(SimError::ShapeMismatch(format!(
            "rhs has {} rows, expected {n}",
            b.nrows()
        )));
    }
    let mut lu = a.to_owned();
    let mut x = b.to_owned();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pv) = (k, lu[(k, k)].norm_sqr());
        for i in (k + 1)..n {
            let v = lu[(i, k)].norm_sqr();
            if v > pv {
                pi = i;
                pv = v;
            }
        }
        if pv == T::zero() {
            return Err(SimError::Numeric(format!("singular matrix at pivot {k}")));
        }
        if pi != k {
            piv.swap(pi, k);
            for j in 0..n {
                lu.swap((pi, j), (k, j));
            }
            for j in 0..x.ncols() {
                x.swap((pi, j), (k, j));
            }
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                let upd = lu[(k, j)] * f;
                lu[(i, j)] -= upd;
            }
            for j in 0..x.ncols() {
                let upd = x[(k, j)] * f;
                x[(i, j)] -= upd;
            }
        }
    }
    for col in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                s -= lu[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Thin orthonormal basis of the column space, via Householder QR.
///
/// Returns `Q` (`m x k`, `Q^H Q = I`) together with the diagonal magnitudes
/// of `R`, which callers use as a rank diagnostic. Requires `m >= k`.
pub fn orthonormal_basis<T: Real>(a: &ArrayView2<'_, Complex<T>>) -> Result<(Mat<T>, Vec<T>)> {
    let (m, k) = (a.nrows(), a.ncols());
    if m < k {
        return Err(SimError::ShapeMismatch(format!(
            "orthonormal_basis needs m >= k, got {m} x {k}"
        )));
    }
    let mut r = a.to_owned();
    // Householder vectors stored below the diagonal, scaling factors in tau.
    let mut vs: Vec<Array1<Complex<T>>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v: Array1<Complex<T>> = Array1::zeros(m - j);
        let mut norm = T::zero();
        for i in j..m {
            v[i - j] = r[(i, j)];
            norm += r[(i, j)].norm_sqr();
        }
        let norm = norm.sqrt();
        if norm > T::zero() {
            let x0 = v[0];
            let phase = if x0.norm() > T::zero() {
                x0 / Complex::new(x0.norm(), T::zero())
            } else {
                Complex::new(T::one(), T::zero())
            };
            v[0] += phase * norm;
            let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
            if vnorm > T::zero() {
                for z in v.iter_mut() {
                    *z = *z / vnorm;
                }
                // apply reflector to trailing columns
                for col in j..k {
                    let mut dot = Complex::new(T::zero(), T::zero());
                    for i in j..m {
                        dot += v[i - j].conj() * r[(i, col)];
                    }
                    let two = Complex::new(real::<T>(2.0), T::zero());
                    for i in j..m {
                        let upd = two * v[i - j] * dot;
                        r[(i, col)] -= upd;
                    }
                }
            }
        }
        vs.push(v);
    }
    let rdiag: Vec<T> = (0..k).map(|j| r[(j, j)].norm()).collect();
    // accumulate Q = H_0 H_1 ... H_{k-1} applied to the first k identity columns
    let mut q: Mat<T> = Array2::zeros((m, k));
    for j in 0..k {
        q[(j, j)] = Complex::new(T::one(), T::zero());
    }
    for j in (0..k).rev() {
        let v = &vs[j];
        for col in 0..k {
            let mut dot = Complex::new(T::zero(), T::zero());
            for i in j..m {
                dot += v[i - j].conj() * q[(i, col)];
            }
            let two = Complex::new(real::<T>(2.0), T::zero());
            for i in j..m {
                let upd = two * v[i - j] * dot;
                q[(i, col)] -= upd;
            }
        }
    }
    Ok((q, rdiag))
}

/// Spectral radius estimate by power iteration (dominant |eigenvalue|).
pub fn spectral_radius<T: Real>(a: &ArrayView2<'_, Complex<T>>, iterations: usize) -> T {
    let n = a.nrows();
    if n == 0 {
        return T::zero();
    }
    // deterministic start vector with a mild ramp to break symmetries
    let mut v: Array1<Complex<T>> = Array1::from_iter(
        (0..n).map(|i| Complex::new(T::one(), real::<T>(0.37) * real::<T>(i as f64 / n as f64))),
    );
    let mut lambda = T::zero();
    for _ in 0..iterations {
        let w = a.dot(&v);
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        lambda = norm / v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        v = w.mapv(|z| z / norm);
    }
    lambda
}

/// Complex identity matrix.
pub fn eye<T: Real>(n: usize) -> Mat<T> {
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        out[(i, i)] = Complex::new(T::one(), T::zero());
    }
    out
}

/// Mean of per-element values along rows (helper for power audits).
pub fn mean_power<T: Real>(a: &ArrayView2<'_, Complex<T>>) -> T {
    let n = a.len();
    if n == 0 {
        return T::zero();
    }
    a.iter().map(|v| v.norm_sqr()).sum::<T>() / real::<T>(n as f64)
}

#[allow(unused_imports)]
use num_traits::ToPrimitive;
