//! Subspace one-class training: SSVDD and its graph-embedded
//! generalization.
//!
//! Training alternates between solving the SVDD dual in the current
//! subspace and updating the projection matrix Q by one of three solvers:
//!
//! * gradient — ascent/descent step on the Lagrangian criterion;
//! * spectral — generalized eigenvectors of M v = λ (S_x + ε I) v, taking
//!   the largest (max) or smallest (min) positive eigenvalues;
//! * spectral regression — the same eigenproblem posed in sample space,
//!   followed by a ridge fit of each target vector.
//!
//! SSVDD keeps Q row-orthonormal after each gradient step. The
//! graph-embedded family instead whitens through S_Q^{-1/2}, which already
//! normalizes the subspace metric, so its Q is left raw.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataio::{self, NormStats, TransactionTable, TARGET};
use crate::error::{Error, Result};
use crate::graphs::{self, GraphKind, LaplacianMatrix};
use crate::kernelization::NptState;
use crate::linalg;
use crate::model::{
    Boundary, Direction, Hyper, ModelSpec, PsiVariant, Solver, StoredModel, MODEL_VERSION,
};
use crate::svdd::{self, SolverOpts, SphereModel, DEFAULT_PARTITION_TOL};

/// Eigenvalue floor wherever S_x or S_Q is inverted.
pub const EPS_SCATTER: f64 = 1e-6;
/// Ridge used by the spectral-regression least-squares step.
pub const DEFAULT_RIDGE: f64 = 1e-3;
/// Default number of Q-update iterations.
pub const DEFAULT_ITERATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Ssvdd,
    Gessvdd,
}

/// Full variant descriptor for one subspace fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub family: Family,
    pub graph: GraphKind,
    pub solver: Solver,
    pub direction: Direction,
    pub psi: PsiVariant,
    pub c: f64,
    pub d: usize,
    pub beta: f64,
    pub eta: f64,
    pub iterations: usize,
    /// RBF width; `Some` switches the whole pipeline to kernel space.
    pub kernel_sigma: Option<f64>,
    pub knn_k: usize,
}

impl TrainConfig {
    pub fn from_spec(spec: &ModelSpec, hyper: &Hyper) -> Result<Self> {
        let (family, graph, solver, direction, psi) = match spec {
            ModelSpec::Ssvdd { psi, direction } => (
                Family::Ssvdd,
                GraphKind::Identity,
                Solver::Gradient,
                *direction,
                *psi,
            ),
            ModelSpec::Gessvdd {
                graph,
                solver,
                direction,
            } => (Family::Gessvdd, *graph, *solver, *direction, PsiVariant::Psi0),
            other => {
                return Err(Error::InvalidParam(format!(
                    "{other} is not a subspace model"
                )))
            }
        };
        let cfg = TrainConfig {
            family,
            graph,
            solver,
            direction,
            psi,
            c: hyper.c,
            d: hyper.d.ok_or_else(|| {
                Error::InvalidParam("subspace models need a target dimension d".into())
            })?,
            beta: hyper.beta.unwrap_or(0.0),
            eta: hyper.eta.unwrap_or(0.0),
            iterations: hyper.iterations,
            kernel_sigma: hyper.sigma,
            knn_k: hyper.knn_k,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParam(format!("C must be positive, got {}", self.c)));
        }
        if self.d == 0 {
            return Err(Error::InvalidParam("d must be >= 1".into()));
        }
        if !self.beta.is_finite() || !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::InvalidParam("beta/eta must be finite, eta >= 0".into()));
        }
        if let Some(sigma) = self.kernel_sigma {
            if !(sigma > 0.0) {
                return Err(Error::InvalidParam(format!("sigma must be > 0, got {sigma}")));
            }
        }
        if self.family == Family::Ssvdd && self.solver != Solver::Gradient {
            return Err(Error::InvalidParam(
                "ssvdd is trained with the gradient solver only".into(),
            ));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidParam("knn_k must be >= 1".into()));
        }
        Ok(())
    }

    fn model_spec(&self) -> ModelSpec {
        match self.family {
            Family::Ssvdd => ModelSpec::Ssvdd {
                psi: self.psi,
                direction: self.direction,
            },
            Family::Gessvdd => ModelSpec::Gessvdd {
                graph: self.graph,
                solver: self.solver,
                direction: self.direction,
            },
        }
    }
}

/// The learned projection and its graph geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionState {
    /// d×D projection (rows map data to the subspace).
    pub q: DMatrix<f64>,
    /// D×D graph scatter Xᵀ L X of the training representation.
    pub s_x: DMatrix<f64>,
    /// d×d subspace scatter Q S_x Qᵀ.
    pub s_q: DMatrix<f64>,
    /// S_Q^{-1/2} (identity for SSVDD).
    pub whitener: DMatrix<f64>,
}

/// Product of [`train`]: the fitted prediction pipeline
/// normalize → optional kernel map → Q → whitener → sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: TrainConfig,
    pub norm: NormStats,
    pub npt: Option<NptState>,
    pub projection: ProjectionState,
    pub sphere: SphereModel,
}

/// PCA initialization: rows of Q are the top-d eigenvectors of the total
/// scatter of X, deterministic sign and order.
pub fn init_projection(x: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let (n, dim) = (x.nrows(), x.ncols());
    if d == 0 || d > n.min(dim) {
        return Err(Error::InvalidParam(format!(
            "d={d} too large for a {n}×{dim} training representation"
        )));
    }
    let h = linalg::centering_matrix(n);
    let scatter = linalg::symmetrize(&(x.transpose() * h * x));
    let (_, vecs) = linalg::sym_eig_desc(&scatter)?;
    Ok(vecs.columns(0, d).transpose())
}

/// S_x = Xᵀ L X, symmetrized.
pub fn scatter_from_graph(x: &DMatrix<f64>, lap: &LaplacianMatrix) -> Result<DMatrix<f64>> {
    if lap.n() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: lap.n(),
            context: "graph size vs sample count".into(),
        });
    }
    Ok(linalg::symmetrize(&(x.transpose() * &lap.values * x)))
}

/// S_Q^{-1/2} with eigenvalues floored at `eps`.
pub fn whitener(s_q: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    linalg::inv_sqrt_floored(s_q, eps)
}

/// The α-dependent sample graph diag(α) − ααᵀ.
pub fn alpha_graph(alpha: &DVector<f64>) -> DMatrix<f64> {
    let mut l = -(alpha * alpha.transpose());
    for i in 0..alpha.len() {
        l[(i, i)] += alpha[i];
    }
    l
}

fn alpha_scatter(x: &DMatrix<f64>, l_alpha: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if l_alpha.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: l_alpha.nrows(),
            context: "alpha graph size vs sample count".into(),
        });
    }
    Ok(linalg::symmetrize(&(x.transpose() * l_alpha * x)))
}

/// Subspace criterion J(Q) = tr((Q S_x Qᵀ)^{-1} Q M Qᵀ) with
/// M = Xᵀ L_α X; the inverse is eigenvalue-floored at `eps`.
pub fn q_criterion(
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
    l_alpha: &DMatrix<f64>,
    s_x: &DMatrix<f64>,
    eps: f64,
) -> Result<f64> {
    let m = alpha_scatter(x, l_alpha)?;
    let s_q = linalg::symmetrize(&(q * s_x * q.transpose()));
    let w = linalg::inv_sqrt_floored(&s_q, eps)?;
    let a = linalg::symmetrize(&(q * m * q.transpose()));
    Ok((&w * a * &w).trace())
}

/// Gradient of [`q_criterion`] in Q:
/// 2 S_Q^{-1} Q M − 2 S_Q^{-1} Q M Qᵀ S_Q^{-1} Q S_x.
pub fn q_gradient(
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
    l_alpha: &DMatrix<f64>,
    s_x: &DMatrix<f64>,
    eps: f64,
) -> Result<DMatrix<f64>> {
    let m = alpha_scatter(x, l_alpha)?;
    let s_q = linalg::symmetrize(&(q * s_x * q.transpose()));
    let w = linalg::inv_sqrt_floored(&s_q, eps)?;
    let s_q_inv = &w * &w;
    let qm = q * m;
    Ok(2.0 * (&s_q_inv * &qm) - 2.0 * (&s_q_inv * (&qm * q.transpose()) * &s_q_inv * q * s_x))
}

/// SSVDD criterion tr(Q (M + β F) Qᵀ) where F is the Ψ factor.
pub fn ssvdd_criterion(
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
    l_alpha: &DMatrix<f64>,
    psi_factor: Option<(&DMatrix<f64>, f64)>,
) -> Result<f64> {
    let mut m = alpha_scatter(x, l_alpha)?;
    if let Some((f, beta)) = psi_factor {
        m += beta * f;
    }
    Ok((q * m * q.transpose()).trace())
}

/// Gradient of [`ssvdd_criterion`]: 2 Q M + β · 2 Q F.
pub fn ssvdd_gradient(
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
    l_alpha: &DMatrix<f64>,
    psi_factor: Option<(&DMatrix<f64>, f64)>,
) -> Result<DMatrix<f64>> {
    let mut m = alpha_scatter(x, l_alpha)?;
    if let Some((f, beta)) = psi_factor {
        m += beta * f;
    }
    Ok(2.0 * (q * m))
}

/// One gradient step Q ∓ η·grad (min descends, max ascends), optionally
/// followed by row re-orthonormalization (SSVDD).
pub fn gradient_update(
    q: &DMatrix<f64>,
    grad: &DMatrix<f64>,
    eta: f64,
    direction: Direction,
    reorthonormalize: bool,
) -> Result<DMatrix<f64>> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("projection gradient".into()));
    }
    if grad.shape() != q.shape() {
        return Err(Error::DimensionMismatch {
            expected: q.ncols(),
            found: grad.ncols(),
            context: "gradient vs projection shape".into(),
        });
    }
    let stepped = match direction {
        Direction::Min => q - eta * grad,
        Direction::Max => q + eta * grad,
    };
    Ok(if reorthonormalize {
        linalg::orthonormalize_rows(&stepped)
    } else {
        stepped
    })
}

/// Pick d eigenvector indices from descending-ordered eigenvalues:
/// max takes the largest positive ones, min the smallest positive ones.
/// When fewer than d positive pairs exist, the remainder is padded with the
/// smallest-|λ| leftover vectors (warned).
fn select_directed(vals: &DVector<f64>, d: usize, direction: Direction) -> Result<Vec<usize>> {
    let n = vals.len();
    if d > n {
        return Err(Error::InvalidParam(format!(
            "requested {d} eigenvectors from a {n}-dimensional problem"
        )));
    }
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let thresh = 1e-12 * scale;
    let positive: Vec<usize> = (0..n).filter(|&i| vals[i] > thresh).collect();
    let mut chosen: Vec<usize> = match direction {
        Direction::Max => positive.iter().take(d).copied().collect(),
        Direction::Min => positive.iter().rev().take(d).copied().collect(),
    };
    if chosen.len() < d {
        log::warn!(
            "only {} positive eigenvalues for d={}; padding with smallest-magnitude directions",
            positive.len(),
            d
        );
        let mut rest: Vec<usize> = (0..n).filter(|i| !positive.contains(i)).collect();
        rest.sort_by(|&a, &b| {
            vals[a]
                .abs()
                .partial_cmp(&vals[b].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for idx in rest {
            if chosen.len() == d {
                break;
            }
            chosen.push(idx);
        }
    }
    Ok(chosen)
}

/// Spectral Q-update: generalized eigenvectors of M v = λ (S_x + eps·I) v,
/// selected by the direction rule. Rows of the result are the chosen vᵀ.
pub fn spectral_update(
    m: &DMatrix<f64>,
    s_x: &DMatrix<f64>,
    d: usize,
    direction: Direction,
    eps: f64,
) -> Result<DMatrix<f64>> {
    let (vals, vecs) = linalg::gen_sym_eig(m, s_x, eps)?;
    let chosen = select_directed(&vals, d, direction)?;
    let mut q = DMatrix::zeros(d, m.nrows());
    for (row, &idx) in chosen.iter().enumerate() {
        q.set_row(row, &vecs.column(idx).transpose());
    }
    Ok(q)
}

/// Spectral-regression Q-update. Step 1 solves the sample-space problem
/// L_α t = λ (L_x + eps·I) t and selects d target vectors by the direction
/// rule; step 2 recovers each projection row from the ridge system
/// (Xᵀ X + ridge·I) q = Xᵀ t.
pub fn spectral_regression_update(
    l_alpha: &DMatrix<f64>,
    l_x: &DMatrix<f64>,
    x: &DMatrix<f64>,
    d: usize,
    direction: Direction,
    ridge: f64,
    eps: f64,
) -> Result<DMatrix<f64>> {
    if l_alpha.nrows() != x.nrows() || l_x.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: l_alpha.nrows(),
            context: "sample-space graphs vs data rows".into(),
        });
    }
    let (vals, vecs) = linalg::gen_sym_eig(l_alpha, l_x, eps)?;
    let chosen = select_directed(&vals, d, direction)?;
    let dim = x.ncols();
    let mut gram = x.transpose() * x;
    for i in 0..dim {
        gram[(i, i)] += ridge;
    }
    let chol = gram.clone().cholesky().ok_or_else(|| {
        Error::EigenFailure("ridge system not positive definite".into())
    })?;
    let mut q = DMatrix::zeros(d, dim);
    for (row, &idx) in chosen.iter().enumerate() {
        let t = vecs.column(idx).into_owned();
        let rhs = x.transpose() * t;
        let sol = chol.solve(&rhs);
        q.set_row(row, &sol.transpose());
    }
    Ok(q)
}

/// Ψ regularizer weights and gradient factor. Returns the per-sample weight
/// vector λ and F = (Xᵀλ)(Xᵀλ)ᵀ, whose product with 2Q is the gradient
/// contribution of Ψ.
pub fn psi_regularizer(
    variant: PsiVariant,
    x: &DMatrix<f64>,
    alpha: &DVector<f64>,
    c: f64,
    tol: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = x.nrows();
    if alpha.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: alpha.len(),
            context: "alpha length vs sample count".into(),
        });
    }
    let lambda = match variant {
        PsiVariant::Psi0 => DVector::zeros(n),
        PsiVariant::Psi1 => DVector::from_element(n, 1.0),
        PsiVariant::Psi2 => {
            let (_, support, _) = svdd::partition_alphas(alpha, c, tol);
            let mut l = DVector::zeros(n);
            for i in support {
                l[i] = alpha[i];
            }
            l
        }
        PsiVariant::Psi3 => {
            let mut l = DVector::zeros(n);
            for i in 0..n {
                if alpha[i] > tol {
                    l[i] = alpha[i];
                }
            }
            l
        }
    };
    let v = x.transpose() * &lambda;
    let factor = &v * v.transpose();
    Ok((lambda, factor))
}

fn project(
    family: Family,
    q: &DMatrix<f64>,
    s_x: &DMatrix<f64>,
    xm: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let s_q = linalg::symmetrize(&(q * s_x * q.transpose()));
    match family {
        Family::Ssvdd => {
            let p = xm * q.transpose();
            Ok((p, DMatrix::identity(q.nrows(), q.nrows()), s_q))
        }
        Family::Gessvdd => {
            let w = whitener(&s_q, EPS_SCATTER)?;
            let p = xm * q.transpose() * &w; // w is symmetric
            Ok((p, w, s_q))
        }
    }
}

/// Train on a targets-only table, fitting normalization stats from the
/// table itself.
pub fn train(config: &TrainConfig, table: &TransactionTable) -> Result<TrainedModel> {
    let norm = dataio::fit_norm_stats(table)?;
    train_with_norm(config, table, norm)
}

/// Train on a targets-only table with externally supplied normalization
/// stats (the benchmark protocol computes them from the pre-resampling
/// target pool).
pub fn train_with_norm(
    config: &TrainConfig,
    table: &TransactionTable,
    norm: NormStats,
) -> Result<TrainedModel> {
    config.validate()?;
    if table.labels().iter().any(|&l| l != TARGET) {
        return Err(Error::InvalidParam(
            "subspace training table must contain target rows only".into(),
        ));
    }
    let (xm, npt) = crate::model::normalize_and_map(table, &norm, config.kernel_sigma)?;
    let (n, dim) = (xm.nrows(), xm.ncols());
    if config.d > n.min(dim) {
        return Err(Error::InvalidParam(format!(
            "d={} too large for a {n}×{dim} training representation",
            config.d
        )));
    }
    let lap = graphs::build_laplacian(config.graph, &xm, config.knn_k)?;
    let s_x = scatter_from_graph(&xm, &lap)?;
    let mut q = init_projection(&xm, config.d)?;
    let opts = SolverOpts::default();

    for iter in 0..config.iterations {
        let (p, _, _) = project(config.family, &q, &s_x, &xm)?;
        let dual = svdd::solve_dual_opts(&svdd::linear_gram(&p), config.c, opts)?;
        let l_a = alpha_graph(&dual.alpha);
        q = match (config.family, config.solver) {
            (Family::Ssvdd, Solver::Gradient) => {
                let factor = match config.psi {
                    PsiVariant::Psi0 => None,
                    v => Some(
                        psi_regularizer(v, &xm, &dual.alpha, config.c, DEFAULT_PARTITION_TOL)?.1,
                    ),
                };
                let grad = ssvdd_gradient(
                    &q,
                    &xm,
                    &l_a,
                    factor.as_ref().map(|f| (f, config.beta)),
                )?;
                checked_gradient(&grad, iter)?;
                gradient_update(&q, &grad, config.eta, config.direction, true)?
            }
            (Family::Gessvdd, Solver::Gradient) => {
                let grad = q_gradient(&q, &xm, &l_a, &s_x, EPS_SCATTER)?;
                checked_gradient(&grad, iter)?;
                gradient_update(&q, &grad, config.eta, config.direction, false)?
            }
            (Family::Gessvdd, Solver::Spectral) => {
                let m = alpha_scatter(&xm, &l_a)?;
                spectral_update(&m, &s_x, config.d, config.direction, EPS_SCATTER)?
            }
            (Family::Gessvdd, Solver::SpectralRegression) => spectral_regression_update(
                &l_a,
                &lap.values,
                &xm,
                config.d,
                config.direction,
                DEFAULT_RIDGE,
                EPS_SCATTER,
            )?,
            (Family::Ssvdd, _) => unreachable!("rejected by validate"),
        };
    }

    let (p, w, s_q) = project(config.family, &q, &s_x, &xm)?;
    let sphere = svdd::fit_sphere(&p, config.c, opts)?;
    Ok(TrainedModel {
        spec: config.clone(),
        norm,
        npt,
        projection: ProjectionState {
            q,
            s_x,
            s_q,
            whitener: w,
        },
        sphere,
    })
}

fn checked_gradient(grad: &DMatrix<f64>, iter: usize) -> Result<()> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "projection gradient at iteration {iter}"
        )));
    }
    Ok(())
}

/// Score every row of a (raw) table through the fitted pipeline.
/// Label 1 (fraud) iff score > 0.
pub fn predict(model: &TrainedModel, table: &TransactionTable) -> Result<(Vec<f64>, Vec<u8>)> {
    model.to_stored().predict_table(table)
}

impl TrainedModel {
    /// Reduce to the persisted container.
    pub fn to_stored(&self) -> StoredModel {
        let whitener = match self.spec.family {
            Family::Ssvdd => None,
            Family::Gessvdd => Some(self.projection.whitener.clone()),
        };
        StoredModel {
            version: MODEL_VERSION,
            spec: self.spec.model_spec(),
            hyper: Hyper {
                c: self.spec.c,
                d: Some(self.spec.d),
                beta: (self.spec.family == Family::Ssvdd && self.spec.psi != PsiVariant::Psi0)
                    .then_some(self.spec.beta),
                eta: (self.spec.solver == Solver::Gradient).then_some(self.spec.eta),
                sigma: self.spec.kernel_sigma,
                iterations: self.spec.iterations,
                knn_k: self.spec.knn_k,
            },
            norm: self.norm.clone(),
            npt: self.npt.clone(),
            boundary: crate::model::sphere_boundary(
                &self.sphere,
                Some(self.projection.q.clone()),
                whitener,
            ),
        }
    }
}
