//! SVDD dual solver and hypersphere geometry.
//!
//! The dual maximizes Σ_i α_i K_ii − αᵀKα subject to Σα = 1 and
//! 0 ≤ α_i ≤ C. It is solved by a two-coordinate exchange method: pick the
//! maximally violating pair under the equality constraint, solve the
//! two-variable subproblem in closed form, repeat. Pair selection breaks
//! ties toward the lowest index, so solves are deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default KKT stopping tolerance for the pair solver.
pub const DEFAULT_KKT_TOL: f64 = 1e-6;
/// Default tolerance for the inside/support/outside partition.
pub const DEFAULT_PARTITION_TOL: f64 = 1e-6;
/// Default cap on pair updates.
pub const DEFAULT_MAX_UPDATES: usize = 10_000;

/// Solver knobs; defaults follow the constants above.
#[derive(Debug, Clone, Copy)]
pub struct SolverOpts {
    pub kkt_tol: f64,
    pub max_updates: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self {
            kkt_tol: DEFAULT_KKT_TOL,
            max_updates: DEFAULT_MAX_UPDATES,
        }
    }
}

/// Outcome of the SVDD dual.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: DVector<f64>,
    pub c: f64,
    /// α ≈ 0 within tolerance: strictly inside the sphere.
    pub inside_idx: Vec<usize>,
    /// 0 < α < C: on the boundary.
    pub support_idx: Vec<usize>,
    /// α ≈ C: outside the sphere.
    pub outside_idx: Vec<usize>,
    pub objective: f64,
}

/// A fitted hypersphere over an explicit training representation.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereModel {
    pub dual: DualSolution,
    /// N×d representation the dual was solved on.
    pub train_repr: DMatrix<f64>,
    /// Center u = train_reprᵀ·α.
    pub center: DVector<f64>,
    pub radius: f64,
}

/// K_ij = ⟨p_i, p_j⟩ for row-sample matrix P (N×d).
pub fn linear_gram(p: &DMatrix<f64>) -> DMatrix<f64> {
    p * p.transpose()
}

/// Solve the SVDD dual. `tol` is the KKT stopping tolerance.
pub fn solve_dual(k: &DMatrix<f64>, c: f64, tol: f64) -> Result<DualSolution> {
    solve_dual_opts(
        k,
        c,
        SolverOpts {
            kkt_tol: tol,
            ..SolverOpts::default()
        },
    )
}

pub fn solve_dual_opts(k: &DMatrix<f64>, c: f64, opts: SolverOpts) -> Result<DualSolution> {
    let (solution, _) = solve_dual_inner(k, c, opts, false)?;
    Ok(solution)
}

/// Like [`solve_dual_opts`] but also returns the objective value after every
/// pair update (ascent trace).
pub fn solve_dual_traced(
    k: &DMatrix<f64>,
    c: f64,
    opts: SolverOpts,
) -> Result<(DualSolution, Vec<f64>)> {
    let (solution, trace) = solve_dual_inner(k, c, opts, true)?;
    Ok((solution, trace.unwrap_or_default()))
}

fn solve_dual_inner(
    k: &DMatrix<f64>,
    c: f64,
    opts: SolverOpts,
    trace: bool,
) -> Result<(DualSolution, Option<Vec<f64>>)> {
    let diag = DVector::from_iterator(k.nrows(), (0..k.nrows()).map(|i| k[(i, i)]));
    let (alpha, objective, trace) = smo_box_simplex(k, &diag, c, opts, trace)?;
    let (inside_idx, support_idx, outside_idx) =
        partition_alphas(&alpha, c, DEFAULT_PARTITION_TOL);
    Ok((
        DualSolution {
            alpha,
            c,
            inside_idx,
            support_idx,
            outside_idx,
            objective,
        },
        trace,
    ))
}

/// Maximize qᵀα − αᵀKα over the box-constrained simplex {Σα = 1,
/// 0 ≤ α ≤ c_box}. Shared by the SVDD dual (q = diag K) and the one-class
/// hyperplane dual (q = 0).
pub(crate) fn smo_box_simplex(
    k: &DMatrix<f64>,
    q: &DVector<f64>,
    c_box: f64,
    opts: SolverOpts,
    want_trace: bool,
) -> Result<(DVector<f64>, f64, Option<Vec<f64>>)> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.ncols(),
            context: "kernel matrix must be square and nonempty".into(),
        });
    }
    if !(c_box > 0.0) {
        return Err(Error::InvalidParam(format!("C must be positive, got {c_box}")));
    }
    if (n as f64) * c_box < 1.0 - 1e-12 {
        return Err(Error::Infeasible {
            nc: n as f64 * c_box,
        });
    }
    let scale = 1.0 + k.amax();
    let mut max_dev = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_dev = max_dev.max((k[(i, j)] - k[(j, i)]).abs());
        }
    }
    if max_dev > 1e-8 * scale {
        return Err(Error::NonSymmetricKernel { max_dev });
    }
    if k.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("kernel matrix".into()));
    }

    // Feasible start: uniform weights (1/N <= C by the feasibility check).
    let mut alpha = DVector::from_element(n, (1.0 / n as f64).min(c_box));
    // Gradient of the maximized objective: g = q − 2Kα.
    let mut grad = q - 2.0 * (k * &alpha);
    let mut objective = q.dot(&alpha) - alpha.dot(&(k * &alpha));
    let mut trace = want_trace.then(Vec::new);

    let mut updates = 0;
    loop {
        // Most violating pair: raise where the gradient is largest among
        // coordinates below the box, lower where it is smallest among
        // positive coordinates.
        let mut up: Option<(usize, f64)> = None;
        let mut down: Option<(usize, f64)> = None;
        for i in 0..n {
            if alpha[i] < c_box && up.map_or(true, |(_, g)| grad[i] > g) {
                up = Some((i, grad[i]));
            }
            if alpha[i] > 0.0 && down.map_or(true, |(_, g)| grad[i] < g) {
                down = Some((i, grad[i]));
            }
        }
        let (Some((i, gi)), Some((j, gj))) = (up, down) else {
            break; // fully saturated box; single feasible point
        };
        let violation = gi - gj;
        if violation <= opts.kkt_tol || i == j {
            break;
        }
        if updates >= opts.max_updates {
            return Err(Error::NoConvergence {
                updates,
                residual: violation,
            });
        }

        let curvature = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
        let room_up = c_box - alpha[i];
        let room_down = alpha[j];
        let step_opt = if curvature > 1e-12 {
            violation / (2.0 * curvature)
        } else {
            f64::INFINITY // flat/PSD-degenerate direction: take the full step
        };
        let step = step_opt.min(room_up).min(room_down);
        debug_assert!(step > 0.0);

        objective += step * violation - step * step * curvature.max(0.0);
        if step >= room_up {
            alpha[i] = c_box;
        } else {
            alpha[i] += step;
        }
        if step >= room_down {
            alpha[j] = 0.0;
        } else {
            alpha[j] -= step;
        }
        for t in 0..n {
            grad[t] -= 2.0 * step * (k[(t, i)] - k[(t, j)]);
        }
        updates += 1;
        if let Some(tr) = trace.as_mut() {
            tr.push(objective);
        }
    }

    // Exact objective at the returned point.
    let final_obj = q.dot(&alpha) - alpha.dot(&(k * &alpha));
    Ok((alpha, final_obj, trace))
}

/// Threshold α into (inside, support, outside) index sets.
/// Boundary convention: α ≤ tol is inside, α ≥ C − tol is outside,
/// everything strictly between is support.
pub fn partition_alphas(
    alpha: &DVector<f64>,
    c: f64,
    tol: f64,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut inside = Vec::new();
    let mut support = Vec::new();
    let mut outside = Vec::new();
    for i in 0..alpha.len() {
        if alpha[i] <= tol {
            inside.push(i);
        } else if alpha[i] >= c - tol {
            outside.push(i);
        } else {
            support.push(i);
        }
    }
    (inside, support, outside)
}

/// Sphere radius from a solved dual over representation P (N×d): the mean
/// distance from the center over all support vectors. With no support
/// vectors (all α at bounds) the maximum distance over outside points is
/// used instead.
pub fn radius(solution: &DualSolution, p: &DMatrix<f64>) -> Result<f64> {
    if p.nrows() != solution.alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: solution.alpha.len(),
            found: p.nrows(),
            context: "representation rows vs alpha length".into(),
        });
    }
    let center = p.transpose() * &solution.alpha;
    let dist = |i: usize| (p.row(i).transpose() - &center).norm();
    if !solution.support_idx.is_empty() {
        let sum: f64 = solution.support_idx.iter().map(|&i| dist(i)).sum();
        Ok(sum / solution.support_idx.len() as f64)
    } else if !solution.outside_idx.is_empty() {
        Ok(solution
            .outside_idx
            .iter()
            .map(|&i| dist(i))
            .fold(0.0, f64::max))
    } else {
        Err(Error::InvalidParam(
            "cannot compute radius: no support or outside points".into(),
        ))
    }
}

/// Solve the dual on the linear Gram of P and assemble the sphere.
pub fn fit_sphere(p: &DMatrix<f64>, c: f64, opts: SolverOpts) -> Result<SphereModel> {
    let gram = linear_gram(p);
    let dual = solve_dual_opts(&gram, c, opts)?;
    let r = radius(&dual, p)?;
    let center = p.transpose() * &dual.alpha;
    Ok(SphereModel {
        dual,
        train_repr: p.clone(),
        center,
        radius: r,
    })
}

impl SphereModel {
    /// Squared distance to the center minus R²; ≤ 0 means target/normal.
    pub fn score(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                found: x.len(),
                context: "score input vs sphere dimension".into(),
            });
        }
        let diff = x - &self.center;
        Ok(diff.norm_squared() - self.radius * self.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gram_small_examples() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(linear_gram(&p), DMatrix::identity(2, 2));
        let p = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        assert_eq!(
            linear_gram(&p),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 4.0])
        );
    }

    #[test]
    fn gram_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-2.0..2.0));
        let k = linear_gram(&p);
        for i in 0..6 {
            for j in 0..6 {
                let mut dot = 0.0;
                for t in 0..3 {
                    dot += p[(i, t)] * p[(j, t)];
                }
                assert_abs_diff_eq!(k[(i, j)], dot, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn equilateral_gram_gives_uniform_alpha() {
        let c_off = 0.4;
        let mut k = DMatrix::from_element(3, 3, c_off);
        for i in 0..3 {
            k[(i, i)] = 1.0;
        }
        let sol = solve_dual(&k, 1.0, 1e-8).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(sol.alpha[i], 1.0 / 3.0, epsilon = 1e-8);
        }
        assert_eq!(sol.support_idx, vec![0, 1, 2]);
    }

    #[test]
    fn two_point_line_closed_form() {
        // 1-D points (0, 2): alpha = (1/2, 1/2), objective 1, radius 1.
        let p = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let k = linear_gram(&p);
        let sol = solve_dual(&k, 1.0, 1e-9).unwrap();
        assert_abs_diff_eq!(sol.alpha[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.alpha[1], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-8);
        let r = radius(&sol, &p).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn infeasible_when_nc_below_one() {
        let k = DMatrix::identity(3, 3);
        assert!(matches!(
            solve_dual(&k, 0.2, 1e-6).unwrap_err(),
            Error::Infeasible { .. }
        ));
    }

    #[test]
    fn rejects_asymmetric_kernel() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(matches!(
            solve_dual(&k, 1.0, 1e-6).unwrap_err(),
            Error::NonSymmetricKernel { .. }
        ));
    }

    #[test]
    fn partition_examples() {
        let alpha = DVector::from_row_slice(&[0.0, 0.3, 0.5]);
        let (inside, support, outside) = partition_alphas(&alpha, 0.5, 1e-6);
        assert_eq!(inside, vec![0]);
        assert_eq!(support, vec![1]);
        assert_eq!(outside, vec![2]);

        // All uniform with C = 1: everyone is support.
        let alpha = DVector::from_element(4, 0.25);
        let (inside, support, outside) = partition_alphas(&alpha, 1.0, 1e-6);
        assert!(inside.is_empty() && outside.is_empty());
        assert_eq!(support.len(), 4);

        // Value exactly C - tol/2 counts as outside.
        let tol = 1e-6;
        let alpha = DVector::from_row_slice(&[1.0 - (0.5 - tol / 2.0), 0.5 - tol / 2.0]);
        let (_, _, outside) = partition_alphas(&alpha, 0.5, tol);
        assert_eq!(outside, vec![0, 1]);
    }

    #[test]
    fn radius_degenerate_cases() {
        // All points identical: center equals the point, radius 0.
        let p = DMatrix::from_element(4, 2, 3.0);
        let k = linear_gram(&p);
        let sol = solve_dual(&k, 1.0, 1e-9).unwrap();
        let r = radius(&sol, &p).unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn radius_unit_circumradius_triangle() {
        let h = 3.0_f64.sqrt() / 2.0;
        let p = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -0.5, h, -0.5, -h]);
        let sphere = fit_sphere(&p, 1.0, SolverOpts::default()).unwrap();
        assert_abs_diff_eq!(sphere.radius, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sphere.center.norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn score_examples() {
        let p = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let sphere = fit_sphere(&p, 1.0, SolverOpts::default()).unwrap();
        // Center scores -R^2.
        let at_center = sphere.score(&sphere.center.clone()).unwrap();
        assert_abs_diff_eq!(at_center, -1.0, epsilon = 1e-8);
        // x* = 3 scores (3-1)^2 - 1 = 3.
        let s = sphere.score(&DVector::from_element(1, 3.0)).unwrap();
        assert_abs_diff_eq!(s, 3.0, epsilon = 1e-7);
        // Support vectors sit on the boundary.
        for &i in &sphere.dual.support_idx {
            let s = sphere.score(&sphere.train_repr.row(i).transpose()).unwrap();
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-6);
        }
        // Dimension mismatch is reported.
        assert!(sphere.score(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn objective_is_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..5 {
            let n = 8;
            let p = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
            let k = linear_gram(&p);
            let (_, trace) =
                solve_dual_traced(&k, 0.3 + 0.1 * case as f64, SolverOpts::default()).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "objective decreased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn kkt_geometry_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let n = rng.random_range(5..20);
            let d = rng.random_range(1..4);
            let p = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
            let c = [0.3, 0.5, 1.0][rng.random_range(0..3)];
            if (n as f64) * c < 1.0 {
                continue;
            }
            let sphere = fit_sphere(&p, c, SolverOpts::default()).unwrap();
            let r = sphere.radius;
            for &i in &sphere.dual.support_idx {
                let dist = (p.row(i).transpose() - &sphere.center).norm();
                assert_abs_diff_eq!(dist, r, epsilon = 1e-5);
            }
            for &i in &sphere.dual.inside_idx {
                let dist = (p.row(i).transpose() - &sphere.center).norm();
                assert!(dist < r + 1e-5);
            }
            for &i in &sphere.dual.outside_idx {
                let dist = (p.row(i).transpose() - &sphere.center).norm();
                assert!(dist > r - 1e-5);
            }
            // Box-constraint bound: at most 1/C points can sit outside.
            assert!(sphere.dual.outside_idx.len() as f64 <= 1.0 / c + 1e-9);
        }
    }

    #[test]
    fn sum_alpha_and_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let n = rng.random_range(3..12);
            let p = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
            let k = linear_gram(&p);
            let c = 0.5;
            let sol = solve_dual(&k, c, 1e-7).unwrap();
            assert_abs_diff_eq!(sol.alpha.sum(), 1.0, epsilon = 1e-8);
            for i in 0..n {
                assert!(sol.alpha[i] >= -1e-10 && sol.alpha[i] <= c + 1e-10);
            }
            let all: usize =
                sol.inside_idx.len() + sol.support_idx.len() + sol.outside_idx.len();
            assert_eq!(all, n);
        }
    }
}
