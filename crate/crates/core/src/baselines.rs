//! Reference one-class models: the ν-parameterized one-class SVM
//! (hyperplane boundary) and the ellipsoidal SVDD, implemented as SVDD on
//! whitened inputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graphs;
use crate::linalg;
use crate::subspace::scatter_from_graph;
use crate::svdd::{self, SolverOpts, SphereModel};

/// One-class SVM dual outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel {
    pub alpha: DVector<f64>,
    pub rho: f64,
    pub nu: f64,
}

impl OcsvmModel {
    /// Decision values f = k_rows·α − ρ for kernel rows against the
    /// training set; normal iff f ≥ 0.
    pub fn decision_values(&self, k_rows: &DMatrix<f64>) -> Result<DVector<f64>> {
        if k_rows.ncols() != self.alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: self.alpha.len(),
                found: k_rows.ncols(),
                context: "kernel rows vs alpha length".into(),
            });
        }
        Ok((k_rows * &self.alpha).add_scalar(-self.rho))
    }
}

/// Solve the one-class SVM dual: minimize ½αᵀKα subject to Σα = 1 and
/// 0 ≤ α ≤ 1/(νN). ρ is averaged over the free support vectors; with none
/// free (ν = 1 pins every α to the box) the mean decision value is used.
pub fn train_ocsvm(k: &DMatrix<f64>, nu: f64) -> Result<OcsvmModel> {
    let n = k.nrows();
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParam(format!("nu must be in (0, 1], got {nu}")));
    }
    let bound = 1.0 / (nu * n as f64);
    if (n as f64) * bound < 1.0 - 1e-12 {
        return Err(Error::Infeasible {
            nc: n as f64 * bound,
        });
    }
    // minimize ½αᵀKα  ⇔  maximize −αᵀKα (zero linear term).
    let (alpha, _, _) =
        svdd::smo_box_simplex(k, &DVector::zeros(n), bound, SolverOpts::default(), false)?;
    let f_raw = k * &alpha;
    let (_, support, _) = svdd::partition_alphas(&alpha, bound, svdd::DEFAULT_PARTITION_TOL);
    let rho = if support.is_empty() {
        f_raw.sum() / n as f64
    } else {
        support.iter().map(|&i| f_raw[i]).sum::<f64>() / support.len() as f64
    };
    Ok(OcsvmModel { alpha, rho, nu })
}

/// Ellipsoidal SVDD: whiten the input space by the inverse square root of
/// the (1/N-scaled, eigenvalue-floored) total scatter, then fit a plain
/// SVDD sphere there. Returns the sphere together with the whitener.
pub fn train_esvdd(
    x: &DMatrix<f64>,
    c: f64,
    eps: f64,
) -> Result<(SphereModel, DMatrix<f64>)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::ClassTooSmall(format!(
            "esvdd needs at least 2 rows, got {n}"
        )));
    }
    let scatter = scatter_from_graph(x, &graphs::pca_laplacian(n)?)?;
    let w = linalg::inv_sqrt_floored(&scatter, eps)?;
    let p = x * &w; // w is symmetric
    let sphere = svdd::fit_sphere(&p, c, SolverOpts::default())?;
    Ok((sphere, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nu_one_forces_uniform_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let p = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let k = svdd::linear_gram(&p);
        let model = train_ocsvm(&k, 1.0).unwrap();
        for i in 0..6 {
            assert_abs_diff_eq!(model.alpha[i], 1.0 / 6.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn symmetric_kernel_gives_uniform_alpha() {
        let mut k = DMatrix::from_element(4, 4, 0.2);
        for i in 0..4 {
            k[(i, i)] = 1.0;
        }
        let model = train_ocsvm(&k, 0.5).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(model.alpha[i], 0.25, epsilon = 1e-8);
        }
    }

    #[test]
    fn support_vectors_sit_on_the_hyperplane() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let x = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
        let k = crate::kernelization::rbf_kernel(&x, &x, 1.0).unwrap();
        let model = train_ocsvm(&k, 0.4).unwrap();
        let f = model.decision_values(&k).unwrap();
        let bound = 1.0 / (0.4 * 20.0);
        let (_, support, _) =
            svdd::partition_alphas(&model.alpha, bound, svdd::DEFAULT_PARTITION_TOL);
        assert!(!support.is_empty());
        for &i in &support {
            assert!(f[i].abs() <= 1e-5, "support decision value {}", f[i]);
        }
    }

    #[test]
    fn nu_bounds_training_outlier_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let n = 40;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let k = crate::kernelization::rbf_kernel(&x, &x, 1.0).unwrap();
        for nu in [0.2, 0.5, 0.8] {
            let model = train_ocsvm(&k, nu).unwrap();
            let f = model.decision_values(&k).unwrap();
            let outliers = f.iter().filter(|&&v| v < 0.0).count();
            assert!(
                outliers as f64 / n as f64 <= nu + 2.0 / n as f64,
                "nu={nu}: outlier fraction {}",
                outliers as f64 / n as f64
            );
        }
    }

    #[test]
    fn ocsvm_rejects_bad_nu() {
        let k = DMatrix::identity(3, 3);
        assert!(train_ocsvm(&k, 0.0).is_err());
        assert!(train_ocsvm(&k, 1.5).is_err());
    }

    #[test]
    fn esvdd_equals_svdd_on_isotropic_data() {
        // Unit-square corners: the 1/N-scaled total scatter is exactly I,
        // so whitening is a pure scale and the dual argmax is unchanged.
        let x = DMatrix::from_row_slice(4, 2, &[1., 1., 1., -1., -1., 1., -1., -1.]);
        let (esvdd, _) = train_esvdd(&x, 0.6, 1e-6).unwrap();
        let plain = svdd::fit_sphere(&x, 0.6, SolverOpts::default()).unwrap();
        let dev = (&esvdd.dual.alpha - &plain.dual.alpha).amax();
        assert!(dev <= 1e-8, "alpha deviation {dev}");
    }

    #[test]
    fn esvdd_treats_anisotropic_axes_symmetrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        // Gaussian with std 10 on axis 0 and std 1 on axis 1.
        let n = 200;
        let x = DMatrix::from_fn(n, 2, |_, j| {
            let scale = if j == 0 { 10.0 } else { 1.0 };
            let (a, b): (f64, f64) = (rng.random_range(0.0f64..1.0), rng.random_range(0.0f64..1.0));
            scale
                * (-2.0 * a.max(1e-12).ln()).sqrt()
                * (2.0 * std::f64::consts::PI * b).cos()
        });
        let c = 0.1;
        let (esvdd, w) = train_esvdd(&x, c, 1e-6).unwrap();
        let plain = svdd::fit_sphere(&x, c, SolverOpts::default()).unwrap();

        // Probe points at equal Mahalanobis distance on each axis.
        for s in [5.0, 10.0, 15.0] {
            let px = DVector::from_row_slice(&[s * 10.0, 0.0]);
            let py = DVector::from_row_slice(&[0.0, s]);
            let es_x = esvdd.score(&(&w * &px)).unwrap();
            let es_y = esvdd.score(&(&w * &py)).unwrap();
            // The whitened scores match within a tolerance driven by the
            // sampled scatter's asymmetry.
            assert!(
                (es_x - es_y).abs() <= 0.35 * es_x.abs().max(es_y.abs()).max(1.0),
                "esvdd asymmetric at s={s}: {es_x} vs {es_y}"
            );
            // The plain sphere flags the long-axis probe as an outlier but
            // swallows the short-axis probe at the same Mahalanobis radius.
            let sv_x = plain.score(&px).unwrap();
            let sv_y = plain.score(&py).unwrap();
            assert!(
                sv_x > 0.0 && sv_y < 0.0,
                "svdd should treat the axes unequally: {sv_x} vs {sv_y}"
            );
        }
    }

    #[test]
    fn esvdd_two_points_closed_form() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, -1.0, 0.5]);
        let (sphere, w) = train_esvdd(&x, 1.0, 1e-6).unwrap();
        assert_abs_diff_eq!(sphere.dual.alpha[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(sphere.dual.alpha[1], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(sphere.radius, 1.0, epsilon = 1e-6);
        // Whitened points are unit distance from their midpoint.
        let p0 = (x.row(0) * &w).transpose();
        let p1 = (x.row(1) * &w).transpose();
        assert_abs_diff_eq!((p0 - p1).norm(), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn esvdd_needs_two_rows() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(train_esvdd(&x, 1.0, 1e-6).is_err());
    }
}
