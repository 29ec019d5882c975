//! RBF kernel and the non-linear projection trick (NPT): an explicit
//! finite-dimensional feature map built from the centered kernel's
//! eigendecomposition, so all linear machinery applies unchanged in kernel
//! space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Eigenvalue floor below which centered-kernel directions are dropped.
pub const EPS_NPT: f64 = 1e-10;

/// Fitted NPT state. Test mapping recenters kernel columns with the stored
/// training row means and grand mean, never with test statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NptState {
    /// Training data the kernel was computed on (N×D), needed to evaluate
    /// test kernel rows.
    pub train_data: DMatrix<f64>,
    pub sigma: f64,
    /// Row means of the uncentered training kernel.
    pub kernel_row_means: DVector<f64>,
    /// Grand mean of the uncentered training kernel.
    pub kernel_grand_mean: f64,
    /// Retained eigenvectors of the centered kernel (N×r).
    pub eigvecs: DMatrix<f64>,
    /// Retained eigenvalues (length r, all > [`EPS_NPT`]).
    pub eigvals: DVector<f64>,
}

impl NptState {
    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn input_dim(&self) -> usize {
        self.train_data.ncols()
    }
}

/// K_ij = exp(−‖x_i − y_j‖² / (2σ²)) for row-sample matrices.
pub fn rbf_kernel(x: &DMatrix<f64>, y: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    if sigma <= 0.0 {
        return Err(Error::InvalidParam(format!("sigma must be > 0, got {sigma}")));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: y.ncols(),
            context: "rbf kernel operand widths".into(),
        });
    }
    let denom = 2.0 * sigma * sigma;
    let mut k = DMatrix::zeros(x.nrows(), y.nrows());
    for i in 0..x.nrows() {
        for j in 0..y.nrows() {
            let diff = x.row(i) - y.row(j);
            k[(i, j)] = (-diff.norm_squared() / denom).exp();
        }
    }
    Ok(k)
}

/// Center a training kernel, eigendecompose, and keep the components above
/// the floor. Returns the explicit map Φ (r×N, columns are mapped training
/// points) along with the state required to map test vectors.
pub fn npt_fit(
    k: &DMatrix<f64>,
    train_data: &DMatrix<f64>,
    sigma: f64,
    eps_npt: f64,
) -> Result<(DMatrix<f64>, NptState)> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.ncols(),
            context: "kernel matrix must be square".into(),
        });
    }
    if train_data.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: train_data.nrows(),
            context: "kernel size vs training rows".into(),
        });
    }
    let h = linalg::centering_matrix(n);
    let centered = linalg::symmetrize(&(&h * k * &h));
    let (vals, vecs) = linalg::sym_eig_desc(&centered)?;
    let r = vals.iter().take_while(|&&l| l > eps_npt).count();
    if r == 0 {
        return Err(Error::DegenerateKernel { floor: eps_npt });
    }
    let eigvals = DVector::from_iterator(r, vals.iter().take(r).copied());
    let eigvecs = vecs.columns(0, r).into_owned();
    // Φ = Λ^{1/2} Uᵀ, one column per training point.
    let sqrt_vals = DVector::from_iterator(r, eigvals.iter().map(|l| l.sqrt()));
    let phi = DMatrix::from_diagonal(&sqrt_vals) * eigvecs.transpose();

    let row_means = DVector::from_iterator(n, (0..n).map(|i| k.row(i).sum() / n as f64));
    let grand_mean = k.sum() / (n * n) as f64;
    Ok((
        phi,
        NptState {
            train_data: train_data.clone(),
            sigma,
            kernel_row_means: row_means,
            kernel_grand_mean: grand_mean,
            eigvecs,
            eigvals,
        },
    ))
}

/// Map a test vector into the NPT feature space:
/// k* against the training data, double-centered with the stored training
/// statistics, then projected through Λ^{-1/2}Uᵀ.
pub fn npt_map(x_star: &DVector<f64>, state: &NptState) -> Result<DVector<f64>> {
    if x_star.len() != state.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: state.input_dim(),
            found: x_star.len(),
            context: "npt_map input dimension".into(),
        });
    }
    let x_row = DMatrix::from_row_slice(1, x_star.len(), x_star.as_slice());
    let k_star = rbf_kernel(&state.train_data, &x_row, state.sigma)?; // N×1
    let n = k_star.nrows();
    let test_mean = k_star.sum() / n as f64;
    let centered = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            k_star[(i, 0)] - test_mean - state.kernel_row_means[i] + state.kernel_grand_mean
        }),
    );
    let coords = state.eigvecs.transpose() * centered;
    Ok(DVector::from_iterator(
        state.rank(),
        coords
            .iter()
            .zip(state.eigvals.iter())
            .map(|(c, l)| c / l.sqrt()),
    ))
}

/// Map every row of a table through the NPT state; rows become mapped rows.
pub fn npt_map_rows(x: &DMatrix<f64>, state: &NptState) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(x.nrows(), state.rank());
    for i in 0..x.nrows() {
        let mapped = npt_map(&x.row(i).transpose(), state)?;
        out.set_row(i, &mapped.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn rbf_pointwise_examples() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let k = rbf_kernel(&x, &x, 0.7).unwrap();
        assert_abs_diff_eq!(k[(0, 0)], 1.0, epsilon = 1e-15);

        // ‖x − y‖² = 2σ² gives exp(−1).
        let sigma = 1.3;
        let y = DMatrix::from_row_slice(1, 2, &[1.0 + sigma * 2.0_f64.sqrt(), 2.0]);
        let k = rbf_kernel(&x, &y, sigma).unwrap();
        assert_abs_diff_eq!(k[(0, 0)], (-1.0_f64).exp(), epsilon = 1e-12);

        assert!(rbf_kernel(&x, &y, 0.0).is_err());
        assert!(rbf_kernel(&x, &y, -1.0).is_err());
    }

    #[test]
    fn rbf_approaches_one_for_large_sigma() {
        let x = random_data(5, 3, 20);
        let k_100 = rbf_kernel(&x, &x, 100.0).unwrap();
        let k_1000 = rbf_kernel(&x, &x, 1000.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!(k_1000[(i, j)] >= k_100[(i, j)] - 1e-15);
                assert!(k_1000[(i, j)] > 0.999);
            }
        }
    }

    #[test]
    fn npt_identity_kernel() {
        let k = DMatrix::identity(3, 3);
        let data = random_data(3, 2, 21);
        let (phi, state) = npt_fit(&k, &data, 1.0, EPS_NPT).unwrap();
        assert_eq!(state.rank(), 2); // centering removes one dimension
        let h = crate::linalg::centering_matrix(3);
        let reconstructed = phi.transpose() * &phi;
        assert_abs_diff_eq!(reconstructed, h, epsilon = 1e-10);
    }

    #[test]
    fn npt_all_ones_kernel_is_degenerate() {
        let k = DMatrix::from_element(4, 4, 1.0);
        let data = random_data(4, 2, 22);
        assert!(matches!(
            npt_fit(&k, &data, 1.0, EPS_NPT).unwrap_err(),
            Error::DegenerateKernel { .. }
        ));
    }

    #[test]
    fn npt_reconstructs_centered_kernel() {
        let data = random_data(12, 3, 23);
        let k = rbf_kernel(&data, &data, 1.0).unwrap();
        let (phi, _) = npt_fit(&k, &data, 1.0, EPS_NPT).unwrap();
        let h = crate::linalg::centering_matrix(12);
        let centered = &h * &k * &h;
        let dev = (phi.transpose() * &phi - centered).amax();
        assert!(dev <= 1e-8, "reconstruction deviation {dev}");
    }

    #[test]
    fn npt_map_reproduces_training_columns() {
        let data = random_data(10, 2, 24);
        let k = rbf_kernel(&data, &data, 0.8).unwrap();
        let (phi, state) = npt_fit(&k, &data, 0.8, EPS_NPT).unwrap();
        for j in 0..10 {
            let mapped = npt_map(&data.row(j).transpose(), &state).unwrap();
            let col = phi.column(j).into_owned();
            assert_abs_diff_eq!(mapped, col, epsilon = 1e-6);
        }
    }

    #[test]
    fn npt_map_far_point_is_finite() {
        let data = random_data(8, 2, 25);
        let k = rbf_kernel(&data, &data, 0.5).unwrap();
        let (_, state) = npt_fit(&k, &data, 0.5, EPS_NPT).unwrap();
        let far = DVector::from_element(2, 1e6);
        let mapped = npt_map(&far, &state).unwrap();
        assert!(mapped.iter().all(|v| v.is_finite()));
        // k* ≈ 0: the image only carries the centering corrections.
        let mapped2 = npt_map(&DVector::from_element(2, -1e6), &state).unwrap();
        assert_abs_diff_eq!(mapped, mapped2, epsilon = 1e-9);
    }

    #[test]
    fn npt_map_is_stateless_across_calls() {
        let data = random_data(9, 3, 26);
        let k = rbf_kernel(&data, &data, 1.2).unwrap();
        let (_, state) = npt_fit(&k, &data, 1.2, EPS_NPT).unwrap();
        let a = DVector::from_row_slice(&[0.1, -0.2, 0.4]);
        let b = DVector::from_row_slice(&[-0.6, 0.3, 0.0]);
        let fa1 = npt_map(&a, &state).unwrap();
        let fb1 = npt_map(&b, &state).unwrap();
        let fb2 = npt_map(&b, &state).unwrap();
        let fa2 = npt_map(&a, &state).unwrap();
        assert_eq!(fa1, fa2);
        assert_eq!(fb1, fb2);
    }

    #[test]
    fn npt_distances_match_kernel_induced_distances() {
        let data = random_data(11, 3, 27);
        let k = rbf_kernel(&data, &data, 0.9).unwrap();
        let (phi, state) = npt_fit(&k, &data, 0.9, EPS_NPT).unwrap();
        assert!(state.rank() <= 10);
        for i in 0..11 {
            for j in 0..11 {
                let d2 = (phi.column(i) - phi.column(j)).norm_squared();
                let induced = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
                assert_abs_diff_eq!(d2, induced, epsilon = 1e-8);
            }
        }
    }
}
