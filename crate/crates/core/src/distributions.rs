//! Input distributions and squared 2-Wasserstein distances between them.
//!
//! Every distance here returns W₂² (the transport cost), never its square
//! root; kernels consume the squared value directly.

use std::f64::consts::PI;

use itertools::Itertools;

use crate::error::{Error, Result};

/// 2×2 matrix stored row-major.
pub type Mat2 = [[f64; 2]; 2];

/// Number of intervals in the slicing-direction grid; c ranges over `0..=SLICE_STEPS`.
pub const SLICE_STEPS: usize = 50;

/// Largest atom count accepted by [`w2sq_assignment_oracle`].
pub const ORACLE_MAX_ATOMS: usize = 8;

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_FLOOR: f64 = 1e-12;
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1D {
    m: f64,
    sigma: f64,
}

impl Gaussian1D {
    pub fn new(m: f64, sigma: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::domain(format!("gaussian mean must be finite, got {m}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!(
                "gaussian standard deviation must be positive, got {sigma}"
            )));
        }
        Ok(Self { m, sigma })
    }

    pub fn mean(&self) -> f64 {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Bivariate Gaussian. The covariance square root is computed once at
/// construction, so distance evaluations never fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2D {
    mean: [f64; 2],
    cov: Mat2,
    cov_root: Mat2,
}

impl Gaussian2D {
    pub fn new(mean: [f64; 2], cov: Mat2) -> Result<Self> {
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("gaussian mean must be finite"));
        }
        check_symmetric(&cov)?;
        let cov = symmetrize(&cov);
        let (_, low) = sym_eigenvalues(&cov);
        if !(low > EIGEN_FLOOR) {
            return Err(Error::domain(format!(
                "covariance is not positive definite (smallest eigenvalue {low:e})"
            )));
        }
        let cov_root = sqrtm_2x2(&cov)?;
        Ok(Self {
            mean,
            cov,
            cov_root,
        })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn cov(&self) -> Mat2 {
        self.cov
    }

    pub fn cov_root(&self) -> Mat2 {
        self.cov_root
    }

    /// Radon slice along θ = (cos(cπ/50), sin(cπ/50)): the 1-D Gaussian
    /// N(θ·m, θᵀΣθ).
    pub fn project(&self, c: usize) -> Result<Gaussian1D> {
        let theta = slice_direction(c)?;
        let m = theta[0] * self.mean[0] + theta[1] * self.mean[1];
        let var = quad_form(&self.cov, &theta);
        Gaussian1D::new(m, var.sqrt())
    }
}

/// Normalized nonnegative weight curve read as a quantile vector: after an
/// ascending sort, the m-th weight is F⁻¹(m/M).
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical1D {
    weights: Vec<f64>,
    sorted: Vec<f64>,
}

impl Empirical1D {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("empirical distribution needs at least one weight"));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::domain(format!(
                "weight {i} must be finite and nonnegative, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!("weights must sum to 1, got {total}")));
        }
        let mut sorted = weights.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { weights, sorted })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Ascending weights, i.e. F⁻¹(m/M) for m = 1..M.
    pub fn quantiles(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Gaussian1D(Gaussian1D),
    Gaussian2D(Gaussian2D),
    Empirical1D(Empirical1D),
}

impl Distribution {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Distribution::Gaussian1D(_) => "gaussian-1d",
            Distribution::Gaussian2D(_) => "gaussian-2d",
            Distribution::Empirical1D(_) => "empirical-1d",
        }
    }
}

impl From<Gaussian1D> for Distribution {
    fn from(g: Gaussian1D) -> Self {
        Distribution::Gaussian1D(g)
    }
}

impl From<Gaussian2D> for Distribution {
    fn from(g: Gaussian2D) -> Self {
        Distribution::Gaussian2D(g)
    }
}

impl From<Empirical1D> for Distribution {
    fn from(e: Empirical1D) -> Self {
        Distribution::Empirical1D(e)
    }
}

/// How the discretized quantile integral is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantileScale {
    /// Plain sum over the M quantile levels (the TEOAE pipeline default).
    #[default]
    Sum,
    /// Riemann sum with the 1/M factor.
    Mean,
}

pub fn w2sq_gaussian1d(a: &Gaussian1D, b: &Gaussian1D) -> f64 {
    let dm = a.m - b.m;
    let ds = a.sigma - b.sigma;
    dm * dm + ds * ds
}

pub fn w2sq_empirical(a: &Empirical1D, b: &Empirical1D) -> Result<f64> {
    w2sq_empirical_scaled(a, b, QuantileScale::Sum)
}

pub fn w2sq_empirical_scaled(a: &Empirical1D, b: &Empirical1D, scale: QuantileScale) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "empirical distributions",
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(sorted_sq_diff(&a.sorted, &b.sorted, scale))
}

/// Quantile-coupling cost between two equal-size sets of raw atoms: sort both
/// and match order statistics.
pub fn sorted_quantile_w2sq(a: &[f64], b: &[f64], scale: QuantileScale) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "atom sets",
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::domain("atom sets must be nonempty"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    Ok(sorted_sq_diff(&sa, &sb, scale))
}

fn sorted_sq_diff(a: &[f64], b: &[f64], scale: QuantileScale) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    match scale {
        QuantileScale::Sum => sum,
        QuantileScale::Mean => sum / a.len() as f64,
    }
}

/// Minimum over every one-to-one pairing of the mean squared displacement.
/// Factorial cost; only used to validate the sorted-quantile formula.
pub fn w2sq_assignment_oracle(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "assignment oracle",
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::domain("atom sets must be nonempty"));
    }
    if n > ORACLE_MAX_ATOMS {
        return Err(Error::param(format!(
            "assignment oracle enumerates n! pairings; refusing n = {n} > {ORACLE_MAX_ATOMS}"
        )));
    }
    let best = (0..n)
        .permutations(n)
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(i, &j)| (a[i] - b[j]) * (a[i] - b[j]))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best / n as f64)
}

/// Principal square root of a symmetric positive definite 2×2 matrix via its
/// analytic eigendecomposition.
pub fn sqrtm_2x2(a: &Mat2) -> Result<Mat2> {
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::domain("matrix entries must be finite"));
    }
    check_symmetric(a)?;
    let a = symmetrize(a);
    let (mut hi, mut lo) = sym_eigenvalues(&a);
    if lo < -EIGEN_FLOOR {
        return Err(Error::domain(format!(
            "matrix is not positive definite (smallest eigenvalue {lo:e})"
        )));
    }
    if lo <= EIGEN_FLOOR {
        // diagonal jitter shifts both eigenvalues
        hi += EIGEN_FLOOR;
        lo = (lo + EIGEN_FLOOR).max(0.0);
    }
    let (p, q) = (a[0][0], a[1][1]);
    let b = a[0][1];
    let r = 0.5 * (hi - lo);
    if r == 0.0 || (b == 0.0 && p == q) {
        let s = (0.5 * (hi + lo)).sqrt();
        return Ok([[s, 0.0], [0.0, s]]);
    }
    // eigenvector of the larger eigenvalue, picking the better-conditioned form
    let (vx, vy) = if p >= q { (hi - q, b) } else { (b, hi - p) };
    let norm = vx.hypot(vy);
    let (ux, uy) = (vx / norm, vy / norm);
    let (sh, sl) = (hi.sqrt(), lo.sqrt());
    // S = sh·uuᵀ + sl·wwᵀ with w ⟂ u
    let s00 = sh * ux * ux + sl * uy * uy;
    let s11 = sh * uy * uy + sl * ux * ux;
    let s01 = (sh - sl) * ux * uy;
    Ok([[s00, s01], [s01, s11]])
}

/// Closed form ‖m_a − m_b‖² + ‖Σ_a^{1/2} − Σ_b^{1/2}‖²_F. Exact W₂² only for
/// commuting covariances.
pub fn w2sq_gaussian2d(a: &Gaussian2D, b: &Gaussian2D) -> f64 {
    let dm0 = a.mean[0] - b.mean[0];
    let dm1 = a.mean[1] - b.mean[1];
    let root_term: f64 = a
        .cov_root
        .iter()
        .flatten()
        .zip(b.cov_root.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    dm0 * dm0 + dm1 * dm1 + root_term
}

pub fn slice_direction(c: usize) -> Result<[f64; 2]> {
    if c > SLICE_STEPS {
        return Err(Error::param(format!(
            "slice index c must lie in 0..={SLICE_STEPS}, got {c}"
        )));
    }
    let angle = c as f64 * PI / SLICE_STEPS as f64;
    Ok([angle.cos(), angle.sin()])
}

/// 1-D Gaussian W₂² between the projections of `a` and `b` on slice `c`.
pub fn sliced_w2sq(a: &Gaussian2D, b: &Gaussian2D, c: usize) -> Result<f64> {
    Ok(w2sq_gaussian1d(&a.project(c)?, &b.project(c)?))
}

/// Uniform average of [`sliced_w2sq`] over all 51 slice indices.
pub fn sliced_w2sq_integrated(a: &Gaussian2D, b: &Gaussian2D) -> f64 {
    let total: f64 = (0..=SLICE_STEPS)
        .map(|c| sliced_w2sq(a, b, c).expect("slice index in range"))
        .sum();
    total / (SLICE_STEPS + 1) as f64
}

fn check_symmetric(a: &Mat2) -> Result<()> {
    let skew = (a[0][1] - a[1][0]).abs();
    if skew > SYMMETRY_TOL {
        return Err(Error::domain(format!(
            "matrix is not symmetric (off-diagonal mismatch {skew:e})"
        )));
    }
    Ok(())
}

fn symmetrize(a: &Mat2) -> Mat2 {
    let off = 0.5 * (a[0][1] + a[1][0]);
    [[a[0][0], off], [off, a[1][1]]]
}

/// (largest, smallest) eigenvalue of a symmetric 2×2 matrix.
fn sym_eigenvalues(a: &Mat2) -> (f64, f64) {
    let mid = 0.5 * (a[0][0] + a[1][1]);
    let r = (0.5 * (a[0][0] - a[1][1])).hypot(a[0][1]);
    let hi = mid + r;
    let det = a[0][0] * a[1][1] - a[0][1] * a[0][1];
    // det/hi avoids cancellation in mid − r for ill-conditioned SPD input
    let lo = if hi > 0.0 && det > 0.0 { det / hi } else { mid - r };
    (hi, lo)
}

fn quad_form(a: &Mat2, v: &[f64; 2]) -> f64 {
    a[0][0] * v[0] * v[0] + 2.0 * a[0][1] * v[0] * v[1] + a[1][1] * v[1] * v[1]
}
