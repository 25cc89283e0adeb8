//! Linear algebra on `E = R^{2d}`, viewed as `C^d` with coordinates
//! interleaved as `(x_0, y_0, x_1, y_1, ...)`.
//!
//! The complex structure `J` maps `(x, y)` to `(-y, x)` in every plane.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `out = J v`.
pub fn apply_j(v: &[f64], out: &mut [f64]) {
    for (o, p) in out.chunks_exact_mut(2).zip(v.chunks_exact(2)) {
        o[0] = -p[1];
        o[1] = p[0];
    }
}

pub fn j_vec(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    apply_j(v, &mut out);
    out
}

/// `J` applied to a complex coefficient vector (real-linear extension).
pub fn j_cvec(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for (o, p) in out.chunks_exact_mut(2).zip(v.chunks_exact(2)) {
        o[0] = -p[1];
        o[1] = p[0];
    }
    out
}

/// `out = e^{angle J} v`.
pub fn rotate_into(v: &[f64], angle: f64, out: &mut [f64]) {
    let (s, c) = angle.sin_cos();
    rotate_cs(v, c, s, out);
}

#[inline]
pub(crate) fn rotate_cs(v: &[f64], c: f64, s: f64, out: &mut [f64]) {
    for (o, p) in out.chunks_exact_mut(2).zip(v.chunks_exact(2)) {
        o[0] = c * p[0] - s * p[1];
        o[1] = s * p[0] + c * p[1];
    }
}

pub fn rotate(v: &[f64], angle: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    rotate_into(v, angle, &mut out);
    out
}

/// Matrix of `J` on `R^{2d}`.
pub fn j_matrix(d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for p in 0..d {
        m[(2 * p, 2 * p + 1)] = -1.0;
        m[(2 * p + 1, 2 * p)] = 1.0;
    }
    m
}

/// Real `2d x 2d` form of a complex `d x d` matrix.
pub fn realify(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let d = a.nrows();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for p in 0..d {
        for q in 0..d {
            let z = a[(p, q)];
            m[(2 * p, 2 * q)] = z.re;
            m[(2 * p, 2 * q + 1)] = -z.im;
            m[(2 * p + 1, 2 * q)] = z.im;
            m[(2 * p + 1, 2 * q + 1)] = z.re;
        }
    }
    m
}

/// A basis of the Lie algebra `u(d)` in real form. Each element is a real
/// skew-symmetric matrix commuting with `J`; the first `d` are the plane
/// rotations `i E_pp`.
pub fn unitary_generators(d: usize) -> Vec<DMatrix<f64>> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(d * d);
    for p in 0..d {
        let mut a = DMatrix::zeros(d, d);
        a[(p, p)] = i;
        out.push(realify(&a));
    }
    for p in 0..d {
        for q in p + 1..d {
            let mut a = DMatrix::zeros(d, d);
            a[(p, q)] = one;
            a[(q, p)] = -one;
            out.push(realify(&a));
            let mut b = DMatrix::zeros(d, d);
            b[(p, q)] = i;
            b[(q, p)] = i;
            out.push(realify(&b));
        }
    }
    out
}

/// Apply a `2d x 2d` matrix to every `2d`-chunk of `v`.
pub fn apply_blockwise(g: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let dim = g.nrows();
    let mut out = Vec::with_capacity(v.len());
    for chunk in v.chunks_exact(dim) {
        let w = g * DVector::from_column_slice(chunk);
        out.extend(w.iter());
    }
    out
}

/// Complex variant of [`apply_blockwise`] for Fourier coefficients.
pub fn apply_blockwise_c(g: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    let dim = g.nrows();
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for (o, chunk) in out.chunks_exact_mut(dim).zip(v.chunks_exact(dim)) {
        for r in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..dim {
                acc += chunk[c] * g[(r, c)];
            }
            o[r] = acc;
        }
    }
    out
}

/// Unitary matrix (real form) from the QR factor of a complex matrix.
/// Feeding random entries gives a random element of `U(d)`.
pub fn unitary_from_entries(d: usize, entries: &[(f64, f64)]) -> DMatrix<f64> {
    assert!(entries.len() >= d * d);
    let a = DMatrix::from_fn(d, d, |r, c| {
        let (re, im) = entries[r * d + c];
        Complex64::new(re, im)
    });
    let q = a.qr().q();
    realify(&q)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalise `vectors` under `inner`, dropping those whose residual
/// norm falls below `rel_tol` times their original norm.
pub(crate) fn orthonormalize<T, F, A, S>(
    vectors: Vec<T>,
    rel_tol: f64,
    inner: F,
    axpy: A,
    scale: S,
) -> Vec<T>
where
    F: Fn(&T, &T) -> f64,
    A: Fn(&mut T, f64, &T),
    S: Fn(&mut T, f64),
{
    let mut basis: Vec<T> = Vec::new();
    for mut v in vectors {
        let n0 = inner(&v, &v).sqrt();
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &v);
                axpy(&mut v, -c, b);
            }
        }
        let n1 = inner(&v, &v).sqrt();
        if n1 > rel_tol * n0 {
            scale(&mut v, 1.0 / n1);
            basis.push(v);
        }
    }
    basis
}
