//! Model variant naming, hyperparameters, and the persisted model
//! container shared by every family.
//!
//! Variant names follow the `[model]-[graph]-[solution method]-[min/max]`
//! rule for graph-based models and `[model]-[regularization term]-[min/max]`
//! for SSVDD; the baselines are bare names. Parsing is case-insensitive and
//! `parse ∘ format` is the identity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dataio::{self, NormStats, TransactionTable};
use crate::error::{Error, Result};
use crate::graphs::GraphKind;
use crate::kernelization::{npt_fit, npt_map, rbf_kernel, NptState, EPS_NPT};

/// Serialization format version of [`StoredModel`].
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Solver {
    Gradient,
    Spectral,
    SpectralRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PsiVariant {
    Psi0,
    Psi1,
    Psi2,
    Psi3,
}

impl PsiVariant {
    pub fn index(self) -> usize {
        match self {
            PsiVariant::Psi0 => 0,
            PsiVariant::Psi1 => 1,
            PsiVariant::Psi2 => 2,
            PsiVariant::Psi3 => 3,
        }
    }
}

/// One row of the model zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelSpec {
    Ocsvm,
    Svdd,
    Esvdd,
    Ssvdd {
        psi: PsiVariant,
        direction: Direction,
    },
    Gessvdd {
        graph: GraphKind,
        solver: Solver,
        direction: Direction,
    },
}

impl ModelSpec {
    /// Every in-scope variant, in report row order: the graph-embedded
    /// family first (graph, then solver, then direction), the SSVDD
    /// regularizer ladder, then the baselines.
    pub fn all_variants() -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for graph in [GraphKind::Knn, GraphKind::Pca, GraphKind::Identity] {
            for solver in [Solver::Gradient, Solver::Spectral, Solver::SpectralRegression] {
                for direction in [Direction::Min, Direction::Max] {
                    out.push(ModelSpec::Gessvdd {
                        graph,
                        solver,
                        direction,
                    });
                }
            }
        }
        for psi in [
            PsiVariant::Psi0,
            PsiVariant::Psi1,
            PsiVariant::Psi2,
            PsiVariant::Psi3,
        ] {
            for direction in [Direction::Min, Direction::Max] {
                out.push(ModelSpec::Ssvdd { psi, direction });
            }
        }
        out.push(ModelSpec::Ocsvm);
        out.push(ModelSpec::Svdd);
        out.push(ModelSpec::Esvdd);
        out
    }

    /// Whether this variant learns a projection (and therefore uses `d`).
    pub fn uses_subspace(&self) -> bool {
        matches!(self, ModelSpec::Ssvdd { .. } | ModelSpec::Gessvdd { .. })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Ocsvm => write!(f, "OCSVM"),
            ModelSpec::Svdd => write!(f, "SVDD"),
            ModelSpec::Esvdd => write!(f, "ESVDD"),
            ModelSpec::Ssvdd { psi, direction } => {
                write!(f, "SSVDD-Psi{}-{}", psi.index(), direction_token(*direction))
            }
            ModelSpec::Gessvdd {
                graph,
                solver,
                direction,
            } => write!(
                f,
                "GESSVDD-{}-{}-{}",
                match graph {
                    GraphKind::Knn => "kNN",
                    GraphKind::Pca => "PCA",
                    GraphKind::Identity => "I",
                },
                match solver {
                    Solver::Gradient => "G",
                    Solver::Spectral => "E",
                    Solver::SpectralRegression => "S",
                },
                direction_token(*direction)
            ),
        }
    }
}

fn direction_token(d: Direction) -> &'static str {
    match d {
        Direction::Min => "min",
        Direction::Max => "max",
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = lower.split('-').collect();
        let parse_direction = |tok: &str| match tok {
            "min" => Ok(Direction::Min),
            "max" => Ok(Direction::Max),
            other => Err(Error::SpecParse(format!("unknown direction '{other}'"))),
        };
        match parts.as_slice() {
            ["ocsvm"] => Ok(ModelSpec::Ocsvm),
            ["svdd"] => Ok(ModelSpec::Svdd),
            ["esvdd"] => Ok(ModelSpec::Esvdd),
            ["ssvdd", psi, dir] => {
                let psi = match *psi {
                    "psi0" => PsiVariant::Psi0,
                    "psi1" => PsiVariant::Psi1,
                    "psi2" => PsiVariant::Psi2,
                    "psi3" => PsiVariant::Psi3,
                    other => {
                        return Err(Error::SpecParse(format!("unknown regularizer '{other}'")))
                    }
                };
                Ok(ModelSpec::Ssvdd {
                    psi,
                    direction: parse_direction(dir)?,
                })
            }
            ["gessvdd", graph, solver, dir] => {
                let graph = match *graph {
                    "knn" => GraphKind::Knn,
                    "pca" => GraphKind::Pca,
                    "i" | "identity" => GraphKind::Identity,
                    other => return Err(Error::SpecParse(format!("unknown graph '{other}'"))),
                };
                let solver = match *solver {
                    "g" | "gradient" => Solver::Gradient,
                    "e" | "spectral" => Solver::Spectral,
                    "s" | "sr" | "spectral_regression" => Solver::SpectralRegression,
                    other => return Err(Error::SpecParse(format!("unknown solver '{other}'"))),
                };
                Ok(ModelSpec::Gessvdd {
                    graph,
                    solver,
                    direction: parse_direction(dir)?,
                })
            }
            ["ssvdd", ..] => Err(Error::SpecParse(format!(
                "'{s}': expected ssvdd-[psi0..psi3]-[min|max]"
            ))),
            ["gessvdd", ..] => Err(Error::SpecParse(format!(
                "'{s}': expected gessvdd-[knn|pca|i]-[g|e|s]-[min|max]"
            ))),
            [family, ..] => Err(Error::SpecParse(format!("unknown model family '{family}'"))),
            [] => Err(Error::SpecParse("empty model spec".into())),
        }
    }
}

/// Concrete hyperparameters for one fit. `c` doubles as ν for OCSVM.
/// Fields irrelevant to a family stay `None` and are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub c: f64,
    pub d: Option<usize>,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub sigma: Option<f64>,
    pub iterations: usize,
    pub knn_k: usize,
}

impl Hyper {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            d: None,
            beta: None,
            eta: None,
            sigma: None,
            iterations: crate::subspace::DEFAULT_ITERATIONS,
            knn_k: crate::graphs::DEFAULT_KNN_K,
        }
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = Some(d);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}

/// Decision boundary in the mapped feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// Hypersphere after (optional) projection and whitening.
    /// `q`/`whitener` of `None` mean identity.
    Sphere {
        q: Option<DMatrix<f64>>,
        whitener: Option<DMatrix<f64>>,
        alpha: DVector<f64>,
        /// Projected training rows with α above the partition tolerance
        /// (support and outside points), for audit.
        support_repr: DMatrix<f64>,
        center: DVector<f64>,
        radius: f64,
    },
    /// One-class hyperplane: normal iff ⟨w, x⟩ − rho ≥ 0.
    Hyperplane {
        alpha: DVector<f64>,
        weights: DVector<f64>,
        rho: f64,
    },
}

/// The persisted model: everything the scoring pipeline
/// normalize → (NPT) → project → whiten → boundary needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub version: u32,
    pub spec: ModelSpec,
    pub hyper: Hyper,
    pub norm: NormStats,
    pub npt: Option<NptState>,
    pub boundary: Boundary,
}

impl StoredModel {
    /// Feature count of raw inputs this model scores.
    pub fn input_dim(&self) -> usize {
        self.norm.dim()
    }

    /// Score one raw feature vector. Positive scores are outliers (fraud).
    pub fn score_row(&self, x_raw: &DVector<f64>) -> Result<f64> {
        if x_raw.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x_raw.len(),
                context: "model input width".into(),
            });
        }
        let mut z = DVector::from_iterator(
            x_raw.len(),
            x_raw
                .iter()
                .enumerate()
                .map(|(j, v)| (v - self.norm.mean[j]) / self.norm.std[j]),
        );
        if let Some(npt) = &self.npt {
            z = npt_map(&z, npt)?;
        }
        match &self.boundary {
            Boundary::Sphere {
                q,
                whitener,
                center,
                radius,
                ..
            } => {
                let mut p = z;
                if let Some(q) = q {
                    p = q * p;
                }
                if let Some(w) = whitener {
                    p = w * p;
                }
                if p.len() != center.len() {
                    return Err(Error::DimensionMismatch {
                        expected: center.len(),
                        found: p.len(),
                        context: "projected point vs sphere center".into(),
                    });
                }
                Ok((p - center).norm_squared() - radius * radius)
            }
            Boundary::Hyperplane { weights, rho, .. } => {
                if z.len() != weights.len() {
                    return Err(Error::DimensionMismatch {
                        expected: weights.len(),
                        found: z.len(),
                        context: "mapped point vs hyperplane weights".into(),
                    });
                }
                Ok(rho - weights.dot(&z))
            }
        }
    }

    /// Score every row; label 1 (fraud) iff score > 0.
    pub fn predict_table(&self, table: &TransactionTable) -> Result<(Vec<f64>, Vec<u8>)> {
        let mut scores = Vec::with_capacity(table.n_rows());
        let mut labels = Vec::with_capacity(table.n_rows());
        for i in 0..table.n_rows() {
            let s = self.score_row(&table.row(i))?;
            scores.push(s);
            labels.push(u8::from(s > 0.0));
        }
        Ok((scores, labels))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::ModelFile(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: StoredModel =
            serde_json::from_str(s).map_err(|e| Error::ModelFile(e.to_string()))?;
        if model.version != MODEL_VERSION {
            return Err(Error::ModelFile(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()?).map_err(|e| Error::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }
}

/// Normalize a targets-only table and, when `sigma` is given, map it into
/// kernel space through a fresh NPT fit.
pub(crate) fn normalize_and_map(
    table: &TransactionTable,
    norm: &NormStats,
    sigma: Option<f64>,
) -> Result<(DMatrix<f64>, Option<NptState>)> {
    let normalized = dataio::normalize(table, norm)?;
    match sigma {
        Some(sigma) => {
            let k = rbf_kernel(normalized.features(), normalized.features(), sigma)?;
            let (phi, state) = npt_fit(&k, normalized.features(), sigma, EPS_NPT)?;
            Ok((phi.transpose(), Some(state)))
        }
        None => Ok((normalized.features().clone(), None)),
    }
}

/// Assemble a sphere boundary from a fitted [`crate::svdd::SphereModel`],
/// keeping the projected rows whose α is above the partition tolerance.
pub(crate) fn sphere_boundary(
    sphere: &crate::svdd::SphereModel,
    q: Option<DMatrix<f64>>,
    whitener: Option<DMatrix<f64>>,
) -> Boundary {
    let dual = &sphere.dual;
    let mut nz: Vec<usize> = dual
        .support_idx
        .iter()
        .chain(dual.outside_idx.iter())
        .copied()
        .collect();
    nz.sort_unstable();
    let support_repr = DMatrix::from_fn(nz.len(), sphere.train_repr.ncols(), |i, j| {
        sphere.train_repr[(nz[i], j)]
    });
    Boundary::Sphere {
        q,
        whitener,
        alpha: dual.alpha.clone(),
        support_repr,
        center: sphere.center.clone(),
        radius: sphere.radius,
    }
}

/// Fit any model variant on a raw targets-only table with the given
/// normalization stats. One entry point for the whole zoo; subspace models
/// are delegated to [`crate::subspace::train_with_norm`].
pub fn fit_model(
    spec: &ModelSpec,
    hyper: &Hyper,
    targets: &TransactionTable,
    norm: &NormStats,
) -> Result<StoredModel> {
    use crate::svdd::{fit_sphere, linear_gram, SolverOpts};

    if targets.labels().iter().any(|&l| l != dataio::TARGET) {
        return Err(Error::InvalidParam(
            "one-class training table must contain target rows only".into(),
        ));
    }
    match spec {
        ModelSpec::Ssvdd { .. } | ModelSpec::Gessvdd { .. } => {
            let config = crate::subspace::TrainConfig::from_spec(spec, hyper)?;
            let model = crate::subspace::train_with_norm(&config, targets, norm.clone())?;
            Ok(model.to_stored())
        }
        ModelSpec::Svdd => {
            let (xm, npt) = normalize_and_map(targets, norm, hyper.sigma)?;
            let sphere = fit_sphere(&xm, hyper.c, SolverOpts::default())?;
            Ok(StoredModel {
                version: MODEL_VERSION,
                spec: *spec,
                hyper: hyper.clone(),
                norm: norm.clone(),
                npt,
                boundary: sphere_boundary(&sphere, None, None),
            })
        }
        ModelSpec::Esvdd => {
            let (xm, npt) = normalize_and_map(targets, norm, hyper.sigma)?;
            let (sphere, whitener) =
                crate::baselines::train_esvdd(&xm, hyper.c, crate::subspace::EPS_SCATTER)?;
            Ok(StoredModel {
                version: MODEL_VERSION,
                spec: *spec,
                hyper: hyper.clone(),
                norm: norm.clone(),
                npt,
                boundary: sphere_boundary(&sphere, None, Some(whitener)),
            })
        }
        ModelSpec::Ocsvm => {
            let (xm, npt) = normalize_and_map(targets, norm, hyper.sigma)?;
            let gram = linear_gram(&xm);
            let ocsvm = crate::baselines::train_ocsvm(&gram, hyper.c)?;
            let weights = xm.transpose() * &ocsvm.alpha;
            Ok(StoredModel {
                version: MODEL_VERSION,
                spec: *spec,
                hyper: hyper.clone(),
                norm: norm.clone(),
                npt,
                boundary: Boundary::Hyperplane {
                    alpha: ocsvm.alpha,
                    weights,
                    rho: ocsvm.rho,
                },
            })
        }
    }
}
