//! Thin helpers over `faer` for the dense Hermitian matrices used
//! throughout the crate.
//!
//! Matrices here are small (≤ a few hundred rows), so everything is dense
//! and eigendecomposition-based. The exact spectral exponential built here
//! doubles as the reference propagator for integrator tests.

use faer::{Mat, Side};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending,
/// eigenvectors as the columns of a unitary matrix.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .expect("hermitian eigendecomposition failed to converge");
    let n = h.nrows();
    let eigvals: Vec<f64> = (0..n).map(|j| evd.S()[j].re).collect();
    (eigvals, evd.U().to_owned())
}

/// Builds V·diag(f(ε))·V† from eigendata.
pub fn spectral_function(eigvals: &[f64], eigvecs: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let n = eigvals.len();
    let mut scaled = CMat::zeros(n, n);
    for (j, &e) in eigvals.iter().enumerate() {
        let fe = f(e);
        for i in 0..n {
            scaled[(i, j)] = eigvecs[(i, j)] * fe;
        }
    }
    scaled * eigvecs.adjoint()
}

/// Exact unitary e^{-i t h} via diagonalization of Hermitian `h`.
pub fn exact_unitary(h: &CMat, t: f64) -> CMat {
    let (eigvals, eigvecs) = hermitian_eigen(h);
    spectral_function(&eigvals, &eigvecs, |e| C64::from_polar(1.0, -e * t))
}

pub fn identity(n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(1.0, 0.0);
    }
    m
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Tr(a·b) without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// c·m.
pub fn scaled(m: &CMat, c: C64) -> CMat {
    let mut out = m.clone();
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            out[(i, j)] *= c;
        }
    }
    out
}

/// a + c·b.
pub fn add_scaled(a: &CMat, c: C64, b: &CMat) -> CMat {
    let mut out = a.clone();
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            out[(i, j)] += c * b[(i, j)];
        }
    }
    out
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

/// ‖m − m†‖_max; zero for an exactly Hermitian construction.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

/// ‖u†u − 1‖_max. A NaN anywhere in the Gram matrix propagates to the
/// result so poisoned propagations fail the unitarity contract instead
/// of slipping past a max().
pub fn unitarity_defect(u: &CMat) -> f64 {
    let gram = u.adjoint() * u;
    let n = u.nrows();
    let mut best = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let expected = if i == j { 1.0 } else { 0.0 };
            let defect = (gram[(i, j)] - C64::new(expected, 0.0)).norm();
            if defect > best || defect.is_nan() {
                best = defect;
            }
        }
    }
    best
}

/// ‖[a, b]‖_max.
pub fn commutator_max_norm(a: &CMat, b: &CMat) -> f64 {
    let ab = a * b;
    let ba = b * a;
    max_abs_diff(&ab, &ba)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_exponential_is_unitary() {
        let mut h = CMat::zeros(3, 3);
        h[(0, 1)] = C64::new(-1.0, 0.0);
        h[(1, 0)] = C64::new(-1.0, 0.0);
        h[(1, 2)] = C64::new(-1.0, 0.2);
        h[(2, 1)] = C64::new(-1.0, -0.2);
        h[(2, 2)] = C64::new(0.4, 0.0);
        let u = exact_unitary(&h, 1.7);
        assert!(unitarity_defect(&u) < 1e-13);
    }

    #[test]
    fn two_site_eigenvalues() {
        let mut h = CMat::zeros(2, 2);
        h[(0, 1)] = C64::new(-1.0, 0.0);
        h[(1, 0)] = C64::new(-1.0, 0.0);
        let (e, v) = hermitian_eigen(&h);
        assert!((e[0] + 1.0).abs() < 1e-14);
        assert!((e[1] - 1.0).abs() < 1e-14);
        assert!(unitarity_defect(&v) < 1e-14);
    }

    #[test]
    fn trace_of_product_matches_explicit() {
        let mut a = CMat::zeros(2, 2);
        let mut b = CMat::zeros(2, 2);
        a[(0, 1)] = C64::new(0.0, 2.0);
        a[(1, 0)] = C64::new(1.0, 0.0);
        b[(0, 0)] = C64::new(3.0, 0.0);
        b[(1, 0)] = C64::new(0.0, -1.0);
        let direct = trace(&(&a * &b));
        assert!((trace_of_product(&a, &b) - direct).norm() < 1e-14);
    }
}
