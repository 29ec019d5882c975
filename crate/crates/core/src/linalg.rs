//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here is deterministic: eigenpairs are sorted by descending
//! eigenvalue with index tie-break and every eigenvector is sign-normalized
//! so that its first non-negligible component is positive. That keeps model
//! fits reproducible across runs and platforms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetrize in place as (M + Mᵀ)/2.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Flip the sign of a vector so its first component with magnitude above
/// `1e-12 * max_abs` is positive. Zero vectors are returned unchanged.
pub fn sign_normalize(v: &mut DVector<f64>) {
    let max_abs = v.amax();
    if max_abs == 0.0 {
        return;
    }
    let thresh = 1e-12 * max_abs;
    for i in 0..v.len() {
        if v[i].abs() > thresh {
            if v[i] < 0.0 {
                *v *= -1.0;
            }
            return;
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Returns (values, vectors) where column k of `vectors` is the eigenvector
/// for `values[k]`, sign-normalized.
pub fn sym_eig_desc(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
            context: "symmetric eigendecomposition needs a square matrix".into(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("eigendecomposition input".into()));
    }
    let se = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut vals = DVector::zeros(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &idx) in order.iter().enumerate() {
        vals[k] = se.eigenvalues[idx];
        let mut col = DVector::from(se.eigenvectors.column(idx).into_owned());
        sign_normalize(&mut col);
        vecs.set_column(k, &col);
    }
    Ok((vals, vecs))
}

/// V diag(max(λ, eps))^(-1/2) Vᵀ for a symmetric PSD matrix.
///
/// Eigenvalue flooring makes this total: a zero matrix maps to
/// `eps^(-1/2) * I`.
pub fn inv_sqrt_floored(m: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eig_desc(m)?;
    let inv_sqrt = DVector::from_iterator(vals.len(), vals.iter().map(|&l| 1.0 / l.max(eps).sqrt()));
    Ok(&vecs * DMatrix::from_diagonal(&inv_sqrt) * vecs.transpose())
}

/// Generalized symmetric eigenproblem `M v = λ (S + eps·I) v`.
///
/// Reduced to a standard symmetric problem through B = (S + eps·I)^(-1/2):
/// eigenpairs of B M B give λ and v = B y, with vᵀ(S + eps·I)v = 1.
/// Returns eigenvalues in descending order with matching columns.
pub fn gen_sym_eig(
    m: &DMatrix<f64>,
    s: &DMatrix<f64>,
    eps: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if s.nrows() != n || s.ncols() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.nrows(),
            context: "generalized eigenproblem matrices must agree".into(),
        });
    }
    let mut s_reg = symmetrize(s);
    for i in 0..n {
        s_reg[(i, i)] += eps;
    }
    // s_reg is PD by construction; floor well below eps only to guard rounding.
    let b = inv_sqrt_floored(&s_reg, eps * 1e-9)?;
    let reduced = symmetrize(&(&b * symmetrize(m) * &b));
    let (vals, ys) = sym_eig_desc(&reduced)?;
    let mut vecs = &b * ys;
    for k in 0..n {
        let mut col = DVector::from(vecs.column(k).into_owned());
        sign_normalize(&mut col);
        vecs.set_column(k, &col);
    }
    Ok((vals, vecs))
}

/// Re-orthonormalize the rows of a wide matrix (d×D, d ≤ D) via thin QR of
/// its transpose. The R-diagonal is forced positive so the result is unique.
pub fn orthonormalize_rows(q: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = q.transpose().qr();
    let mut basis = qr.q();
    let r = qr.r();
    for k in 0..basis.ncols().min(r.nrows()) {
        if r[(k, k)] < 0.0 {
            let col = -basis.column(k).into_owned();
            basis.set_column(k, &col);
        }
    }
    basis.transpose()
}

/// N×N centering matrix I − (1/N)·11ᵀ.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::identity(n, n);
    h.add_scalar_mut(-1.0 / n as f64);
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        symmetrize(&(&a * a.transpose()))
    }

    #[test]
    fn eig_reconstructs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_sym(6, &mut rng);
        let (vals, vecs) = sym_eig_desc(&m).unwrap();
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert_abs_diff_eq!(rebuilt, m, epsilon = 1e-9);
        for k in 1..vals.len() {
            assert!(vals[k - 1] >= vals[k]);
        }
    }

    #[test]
    fn inv_sqrt_whitening() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_sym(5, &mut rng);
        let w = inv_sqrt_floored(&m, 1e-12).unwrap();
        let should_be_identity = &w * &m * &w;
        assert_abs_diff_eq!(should_be_identity, DMatrix::identity(5, 5), epsilon = 1e-7);
    }

    #[test]
    fn inv_sqrt_zero_matrix_floors() {
        let z = DMatrix::zeros(3, 3);
        let w = inv_sqrt_floored(&z, 1e-6).unwrap();
        assert_abs_diff_eq!(w, 1000.0 * DMatrix::identity(3, 3), epsilon = 1e-6);
    }

    #[test]
    fn gen_eig_solves_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_sym(5, &mut rng);
        let s = random_sym(5, &mut rng);
        let eps = 1e-10;
        let (vals, vecs) = gen_sym_eig(&m, &s, eps).unwrap();
        let mut s_reg = s.clone();
        for i in 0..5 {
            s_reg[(i, i)] += eps;
        }
        for k in 0..5 {
            let v = vecs.column(k).into_owned();
            let lhs = &m * &v;
            let rhs = vals[k] * (&s_reg * &v);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-7);
        }
    }

    #[test]
    fn orthonormalize_rows_gives_orthonormal_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let q = DMatrix::from_fn(3, 7, |_, _| rng.random_range(-1.0..1.0));
        let o = orthonormalize_rows(&q);
        let gram = &o * o.transpose();
        assert_abs_diff_eq!(gram, DMatrix::identity(3, 3), epsilon = 1e-10);
    }

    #[test]
    fn orthonormalize_is_noop_on_orthonormal_input() {
        let q = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let o = orthonormalize_rows(&q);
        assert_abs_diff_eq!(o, q, epsilon = 1e-12);
    }
}
