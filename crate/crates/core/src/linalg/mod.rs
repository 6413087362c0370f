//! Dense helpers on complex matrices, plus the banded and Krylov solvers used
//! for lattice-sized problems.

pub mod banded;
pub mod krylov;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eig, Eigh, Inverse, Solve, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn dagger_view(a: ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let z = a[[i, j]];
            if z == ZERO {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|w| w * z));
        }
    }
    out
}

/// Largest entry modulus.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn fro_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral norm via the largest singular value.
pub fn op_norm(a: &Array2<C64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let (_, s, _) = a.svd(false, false)?;
    Ok(s.iter().cloned().fold(0.0, f64::max))
}

pub fn is_hermitian(a: &Array2<C64>, tol: f64) -> bool {
    a.is_square() && max_abs_diff(a, &dagger(a)) <= tol
}

pub fn is_unitary(a: &Array2<C64>, tol: f64) -> bool {
    a.is_square() && max_abs_diff(&dagger(a).dot(a), &eye(a.nrows())) <= tol
}

pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

pub fn hermitian_part(a: &Array2<C64>) -> Array2<C64> {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
/// Accurate to roughly machine precision; meant for small fiber matrices.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    if norm1 > 0.25 {
        squarings = (norm1 / 0.25).log2().ceil() as i32;
    }
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));
    let mut term = eye(n);
    let mut sum = eye(n);
    for k in 1..=24 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        sum = sum + &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}

/// Pull a nearly unitary matrix back onto the unitary group (Newton iteration
/// for the polar factor).
pub fn reunitarize(u: &Array2<C64>) -> Array2<C64> {
    let n = u.nrows();
    let mut x = u.clone();
    for _ in 0..4 {
        let gram = dagger(&x).dot(&x);
        if max_abs_diff(&gram, &eye(n)) < 1e-15 {
            break;
        }
        // x <- x (3 - x*x) / 2
        let corr = eye(n).mapv(|z| z * 1.5) - gram.mapv(|z| z * 0.5);
        x = x.dot(&corr);
    }
    x
}

/// Unitary polar factor of an invertible matrix.
pub fn polar_unitary(a: &Array2<C64>) -> Result<Array2<C64>> {
    let (u, _, vt) = a.svd(true, true)?;
    Ok(u.unwrap().dot(&vt.unwrap()))
}

/// Eigen-decomposition of a Hermitian matrix, ascending eigenvalues.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    // column-major copy: the row-major path returns conjugated vectors
    let h = hermitian_part(a);
    let mut hf = Array2::zeros(h.dim().f());
    hf.assign(&h);
    let (w, v) = hf.eigh(UPLO::Lower)?;
    Ok((w, v))
}

/// General complex eigen-decomposition (right eigenvectors, unit columns).
pub fn eig(a: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    let (w, mut v) = a.eig()?;
    for mut col in v.axis_iter_mut(Axis(1)) {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            col.mapv_inplace(|z| z / nrm);
        }
    }
    Ok((w, v))
}

/// Thin singular value decomposition a = u diag(s) vt.
pub fn svd(a: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    let (u, s, vt) = a.svd(true, true)?;
    Ok((u.unwrap(), s, vt.unwrap()))
}

pub fn inverse(a: &Array2<C64>) -> Result<Array2<C64>> {
    a.inv().map_err(|e| Error::Linalg(format!("inverse failed: {e}")))
}

pub fn solve(a: &Array2<C64>, b: &Array1<C64>) -> Result<Array1<C64>> {
    Ok(a.solve(b)?)
}

/// Orthonormalize columns (modified Gram-Schmidt, two passes). Columns that
/// fall below `drop_tol` after projection are discarded.
pub fn orthonormalize(cols: &Array2<C64>, drop_tol: f64) -> Array2<C64> {
    let mut kept: Vec<Array1<C64>> = Vec::new();
    for j in 0..cols.ncols() {
        let mut v = cols.column(j).to_owned();
        let start = norm(&v);
        for _ in 0..2 {
            for q in &kept {
                let p = dot(q, &v);
                v.zip_mut_with(q, |x, y| *x -= p * y);
            }
        }
        let nv = norm(&v);
        if start > 0.0 && nv > drop_tol * start.max(1.0) {
            kept.push(v.mapv(|z| z / nv));
        }
    }
    let mut out = Array2::zeros((cols.nrows(), kept.len()));
    for (j, v) in kept.iter().enumerate() {
        out.column_mut(j).assign(v);
    }
    out
}

/// Conjugate-linear in the first argument.
pub fn dot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &Array1<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn expm_of_pauli_rotation() {
        let t = 0.7;
        let a = array![[ZERO, c(0.0, -t)], [c(0.0, -t), ZERO]];
        let e = expm(&a);
        let want = array![[c(t.cos(), 0.0), c(0.0, -t.sin())], [c(0.0, -t.sin()), c(t.cos(), 0.0)]];
        assert!(max_abs_diff(&e, &want) < 1e-14);
    }

    #[test]
    fn expm_large_argument_uses_squaring() {
        let a = array![[c(0.0, 40.0), ZERO], [ZERO, c(-3.0, 0.0)]];
        let e = expm(&a);
        assert!((e[[0, 0]] - c(0.0, 40.0).exp()).norm() < 1e-12);
        assert!((e[[1, 1]].re - (-3.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn reunitarize_fixes_small_drift() {
        let u = array![[c(1.0 + 1e-7, 0.0), c(1e-8, 0.0)], [ZERO, c(0.0, 1.0 - 2e-7)]];
        let v = reunitarize(&u);
        assert!(is_unitary(&v, 1e-14));
        assert!(max_abs_diff(&u, &v) < 1e-6);
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let a = array![[ONE, ZERO], [ZERO, -ONE]];
        let b = array![[ZERO, ONE], [ONE, ZERO]];
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 1]], ONE);
        assert_eq!(k[[2, 3]], -ONE);
    }

    fn sample() -> Array2<C64> {
        Array2::from_shape_fn((5, 5), |(i, j)| c((i * 7 + j * 3) as f64 % 5.0 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0))
    }

    #[test]
    fn eigh_residual() {
        let h = hermitian_part(&sample());
        let (w, v) = eigh(&h).unwrap();
        let r = h.dot(&v) - v.dot(&Array2::from_diag(&w.mapv(|x| c(x, 0.0))));
        assert!(max_abs(&r) < 1e-12);
        assert!(w.windows(2).into_iter().all(|p| p[0] <= p[1]));
    }

    #[test]
    fn eig_residual() {
        let a = sample();
        let (w, v) = eig(&a).unwrap();
        let r = a.dot(&v) - v.dot(&Array2::from_diag(&w));
        assert!(max_abs(&r) < 1e-12);
    }

    #[test]
    fn svd_reconstructs() {
        let a = sample();
        let (u, s, vt) = svd(&a).unwrap();
        let r = u.dot(&Array2::from_diag(&s.mapv(|x| c(x, 0.0)))).dot(&vt) - &a;
        assert!(max_abs(&r) < 1e-12);
        let inv = inverse(&a).unwrap();
        assert!(max_abs_diff(&inv.dot(&a), &eye(5)) < 1e-10);
    }
}
