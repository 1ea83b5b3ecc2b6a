//! Kernel ridge regression: α̂ = (C + λI)⁻¹Y and f̂(μ) = Σ_j α̂_j k(μ, μ_j).

mod grid;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub use grid::{grid_search, grid_search_multi, spaced, GridCell, GridResult, GridSpec, Spacing};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::kernels::{cross_gram, dissimilarity_matrix, gram_matrix, KernelSpec};

#[derive(Debug, Clone)]
pub struct RidgeModel {
    alpha: Vec<f64>,
    train: Vec<Distribution>,
    spec: KernelSpec,
    lambda: f64,
}

impl RidgeModel {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn train(&self) -> &[Distribution] {
        &self.train
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Assembles a model from known coefficients.
    pub fn from_parts(
        spec: KernelSpec,
        train: Vec<Distribution>,
        alpha: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        spec.validate()?;
        check_lambda(lambda)?;
        if alpha.len() != train.len() {
            return Err(Error::DimensionMismatch {
                context: "coefficients vs training set",
                left: alpha.len(),
                right: train.len(),
            });
        }
        Ok(Self {
            alpha,
            train,
            spec,
            lambda,
        })
    }
}

/// Cholesky factor of C + λI, with a single diagonal-jitter retry.
pub struct RegularizedSystem {
    system: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl RegularizedSystem {
    pub fn new(c: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !c.is_square() {
            return Err(Error::DimensionMismatch {
                context: "gram matrix rows vs columns",
                left: c.nrows(),
                right: c.ncols(),
            });
        }
        let n = c.nrows();
        let mut system = c.clone();
        for i in 0..n {
            system[(i, i)] += lambda;
        }
        let factor = match system.clone().cholesky() {
            Some(f) => f,
            None => {
                let jitter = 1e-10 * c.trace().abs() / n.max(1) as f64;
                let mut shifted = system.clone();
                for i in 0..n {
                    shifted[(i, i)] += jitter;
                }
                shifted.cholesky().ok_or_else(|| {
                    Error::Numerical(format!(
                        "C + λI (n = {n}, λ = {lambda}) is not positive definite even after jitter {jitter:e}"
                    ))
                })?
            }
        };
        Ok(Self { system, factor })
    }

    /// Solves (C + λI)α = y with one step of iterative refinement.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.system.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "labels vs gram matrix",
                left: y.len(),
                right: n,
            });
        }
        let rhs = DVector::from_column_slice(y);
        let mut alpha = self.factor.solve(&rhs);
        let residual = &rhs - &self.system * &alpha;
        alpha += self.factor.solve(&residual);
        Ok(alpha.iter().copied().collect())
    }

    pub fn system(&self) -> &DMatrix<f64> {
        &self.system
    }
}

pub fn solve_regularized(c: &DMatrix<f64>, lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
    RegularizedSystem::new(c, lambda)?.solve(y)
}

/// Row-by-row Σ_j k_ij α_j, accumulated in index order.
pub(crate) fn apply_coefficients(k: &DMatrix<f64>, alpha: &[f64]) -> Vec<f64> {
    (0..k.nrows())
        .map(|i| {
            let mut acc = 0.0;
            for (j, a) in alpha.iter().enumerate() {
                acc += k[(i, j)] * a;
            }
            acc
        })
        .collect()
}

pub fn fit(spec: &KernelSpec, train: &[Distribution], y: &[f64], lambda: f64) -> Result<RidgeModel> {
    spec.validate()?;
    check_lambda(lambda)?;
    if train.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "training distributions vs labels",
            left: train.len(),
            right: y.len(),
        });
    }
    if train.is_empty() {
        return Err(Error::domain("training set must be nonempty"));
    }
    let c = gram_matrix(spec, train)?;
    let alpha = solve_regularized(&c, lambda, y)?;
    Ok(RidgeModel {
        alpha,
        train: train.to_vec(),
        spec: *spec,
        lambda,
    })
}

pub fn predict(model: &RidgeModel, x: &Distribution) -> Result<f64> {
    Ok(predict_many(model, std::slice::from_ref(x))?[0])
}

pub fn predict_many(model: &RidgeModel, xs: &[Distribution]) -> Result<Vec<f64>> {
    let k = cross_gram(&model.spec, xs, &model.train)?;
    Ok(apply_coefficients(&k, &model.alpha))
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            context: "predictions vs targets",
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::domain("rmse needs at least one value"));
    }
    let sse: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

/// Leave-one-out predictions by refitting on the other n − 1 points.
pub fn loo_predict(spec: &KernelSpec, xs: &[Distribution], y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    if xs.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "distributions vs labels",
            left: xs.len(),
            right: y.len(),
        });
    }
    let d = dissimilarity_matrix(spec, xs)?;
    loo_predict_from_dissimilarity(spec, &d, y, lambda)
}

/// [`loo_predict`] on a precomputed dissimilarity matrix, so several λ or
/// scale values can share one pass over the data.
pub fn loo_predict_from_dissimilarity(
    spec: &KernelSpec,
    d: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    check_lambda(lambda)?;
    let n = y.len();
    if d.nrows() != n || d.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "dissimilarity matrix vs labels",
            left: d.nrows(),
            right: n,
        });
    }
    if n < 2 {
        return Err(Error::domain("leave-one-out needs at least two points"));
    }
    let kernel = d.map(|v| spec.profile(v));
    (0..n)
        .map(|held| {
            let keep: Vec<usize> = (0..n).filter(|&i| i != held).collect();
            let c = kernel.select_rows(&keep).select_columns(&keep);
            let y_rest: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
            let alpha = solve_regularized(&c, lambda, &y_rest)?;
            let row = kernel.select_rows(&[held]).select_columns(&keep);
            Ok(apply_coefficients(&row, &alpha)[0])
        })
        .collect()
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}
