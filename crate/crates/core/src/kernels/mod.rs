//! Kernels on distributions and Gram-matrix assembly.
//!
//! Every kernel factors as `profile(dissimilarity(a, b))`: a dissimilarity
//! that depends only on the "shape" parameters (distribution variant,
//! Legendre order, bin count, slice index) and a scalar profile carrying the
//! scale parameters (γ, H, l, ζ, ξ). [`dissimilarity_matrix`] exposes the
//! first stage so grid searches can reuse it across scale parameters; the
//! result is bitwise identical to calling [`kernel_eval`] entry by entry.

mod histogram;
mod legendre;

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use histogram::{chi2_distance, histogram_of, DEFAULT_BINS, HISTOGRAM_SUPPORT};
pub use legendre::{legendre_basis, legendre_coeffs, quadrature_on, QUADRATURE_POINTS};

use crate::distributions::{
    w2sq_gaussian1d, w2sq_gaussian2d, Distribution, Gaussian1D, Gaussian2D, QuantileScale,
    SLICE_STEPS,
};
use crate::error::{Error, Result};

/// Θ = (γ, H, l) of the Wasserstein RBF kernel γ²·exp(−(W₂²)^H / l).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaParams {
    pub gamma: f64,
    pub h: f64,
    pub l: f64,
    /// Accumulation of the discretized quantile integral for empirical inputs.
    pub scale: QuantileScale,
}

impl ThetaParams {
    pub fn new(gamma: f64, l: f64) -> Result<Self> {
        let p = Self {
            gamma,
            h: 1.0,
            l,
            scale: QuantileScale::Sum,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_exponent(self, h: f64) -> Result<Self> {
        let p = Self { h, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_scale(self, scale: QuantileScale) -> Self {
        Self { scale, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::param(format!("exponent H must lie in (0, 1], got {}", self.h)));
        }
        check_positive("length scale l", self.l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreParams {
    pub order: usize,
    pub gamma: f64,
    pub l: f64,
}

impl LegendreParams {
    pub fn new(order: usize, gamma: f64, l: f64) -> Result<Self> {
        let p = Self { order, gamma, l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::param("legendre order must be at least 1"));
        }
        check_gamma(self.gamma)?;
        check_positive("length scale l", self.l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramParams {
    pub zeta: f64,
    pub bins: usize,
}

impl HistogramParams {
    pub fn new(zeta: f64, bins: usize) -> Result<Self> {
        let p = Self { zeta, bins };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::param(format!("zeta must lie in (0, 1], got {}", self.zeta)));
        }
        if self.bins == 0 {
            return Err(Error::param("histogram needs at least one bin"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicedParams {
    pub xi: f64,
    pub c: usize,
}

impl SlicedParams {
    pub fn new(xi: f64, c: usize) -> Result<Self> {
        let p = Self { xi, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("xi", self.xi)?;
        if self.c > SLICE_STEPS {
            return Err(Error::param(format!(
                "slice index c must lie in 0..={SLICE_STEPS}, got {}",
                self.c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Wasserstein,
    Legendre,
    Histogram,
    Sliced,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Wasserstein => "wasserstein",
            KernelFamily::Legendre => "legendre",
            KernelFamily::Histogram => "histogram",
            KernelFamily::Sliced => "sliced",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Wasserstein(ThetaParams),
    Legendre(LegendreParams),
    Histogram(HistogramParams),
    Sliced(SlicedParams),
}

impl KernelSpec {
    pub fn family(&self) -> KernelFamily {
        match self {
            KernelSpec::Wasserstein(_) => KernelFamily::Wasserstein,
            KernelSpec::Legendre(_) => KernelFamily::Legendre,
            KernelSpec::Histogram(_) => KernelFamily::Histogram,
            KernelSpec::Sliced(_) => KernelFamily::Sliced,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Wasserstein(p) => p.validate(),
            KernelSpec::Legendre(p) => p.validate(),
            KernelSpec::Histogram(p) => p.validate(),
            KernelSpec::Sliced(p) => p.validate(),
        }
    }

    /// k(a, a): γ² for the γ-scaled families, 1 otherwise.
    pub fn diagonal(&self) -> f64 {
        match self {
            KernelSpec::Wasserstein(p) => p.gamma * p.gamma,
            KernelSpec::Legendre(p) => p.gamma * p.gamma,
            KernelSpec::Histogram(_) | KernelSpec::Sliced(_) => 1.0,
        }
    }

    /// Maps a dissimilarity produced by this spec's family to a kernel value.
    pub fn profile(&self, d: f64) -> f64 {
        match self {
            KernelSpec::Wasserstein(p) => {
                let e = if p.h == 1.0 { d } else { d.powf(p.h) };
                p.gamma * p.gamma * (-e / p.l).exp()
            }
            KernelSpec::Legendre(p) => p.gamma * p.gamma * (-d / p.l).exp(),
            KernelSpec::Histogram(p) => (-p.zeta * d).exp(),
            KernelSpec::Sliced(p) => (-p.xi * d).exp(),
        }
    }

    /// `key=value` pairs separated by `;`, used in reports.
    pub fn describe(&self) -> String {
        match self {
            KernelSpec::Wasserstein(p) => format!("gamma={};H={};l={}", p.gamma, p.h, p.l),
            KernelSpec::Legendre(p) => format!("order={};gamma={};l={}", p.order, p.gamma, p.l),
            KernelSpec::Histogram(p) => format!("zeta={};bins={}", p.zeta, p.bins),
            KernelSpec::Sliced(p) => format!("c={};xi={}", p.c, p.xi),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::param(format!("gamma must be finite and nonzero, got {gamma}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::param(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Per-distribution representation the dissimilarity acts on.
#[derive(Debug, Clone)]
enum Feature<'a> {
    Gauss1(Gaussian1D),
    Gauss2(&'a Gaussian2D),
    Quantiles(&'a [f64]),
    Vector(Vec<f64>),
}

fn featurize<'a>(spec: &KernelSpec, x: &'a Distribution) -> Result<Feature<'a>> {
    let mismatch = || Error::TypeMismatch {
        family: spec.family().name(),
        variant: x.variant_name(),
    };
    match (spec, x) {
        (KernelSpec::Wasserstein(_), Distribution::Gaussian1D(g)) => Ok(Feature::Gauss1(*g)),
        (KernelSpec::Wasserstein(_), Distribution::Gaussian2D(g)) => Ok(Feature::Gauss2(g)),
        (KernelSpec::Wasserstein(_), Distribution::Empirical1D(e)) => {
            Ok(Feature::Quantiles(e.quantiles()))
        }
        (KernelSpec::Legendre(p), Distribution::Gaussian1D(g)) => {
            Ok(Feature::Vector(legendre_coeffs(g, p.order)?))
        }
        (KernelSpec::Histogram(p), Distribution::Gaussian1D(g)) => {
            Ok(Feature::Vector(histogram_of(g, p.bins, HISTOGRAM_SUPPORT)?))
        }
        (KernelSpec::Sliced(p), Distribution::Gaussian2D(g)) => Ok(Feature::Gauss1(g.project(p.c)?)),
        _ => Err(mismatch()),
    }
}

fn dissimilarity(spec: &KernelSpec, a: &Feature<'_>, b: &Feature<'_>) -> Result<f64> {
    match (spec, a, b) {
        (KernelSpec::Wasserstein(_) | KernelSpec::Sliced(_), Feature::Gauss1(x), Feature::Gauss1(y)) => {
            Ok(w2sq_gaussian1d(x, y))
        }
        (KernelSpec::Wasserstein(_), Feature::Gauss2(x), Feature::Gauss2(y)) => {
            Ok(w2sq_gaussian2d(x, y))
        }
        (KernelSpec::Wasserstein(p), Feature::Quantiles(x), Feature::Quantiles(y)) => {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    context: "empirical distributions",
                    left: x.len(),
                    right: y.len(),
                });
            }
            let sum: f64 = x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
            Ok(match p.scale {
                QuantileScale::Sum => sum,
                QuantileScale::Mean => sum / x.len() as f64,
            })
        }
        (KernelSpec::Legendre(_), Feature::Vector(x), Feature::Vector(y)) => {
            Ok(x.iter().zip(y).map(|(u, v)| (u - v).abs()).sum())
        }
        (KernelSpec::Histogram(_), Feature::Vector(x), Feature::Vector(y)) => chi2_distance(x, y),
        _ => Err(Error::TypeMismatch {
            family: spec.family().name(),
            variant: "mixed",
        }),
    }
}

pub fn kernel_eval(spec: &KernelSpec, a: &Distribution, b: &Distribution) -> Result<f64> {
    spec.validate()?;
    let fa = featurize(spec, a)?;
    let fb = featurize(spec, b)?;
    Ok(spec.profile(dissimilarity(spec, &fa, &fb)?))
}

fn featurize_all<'a>(spec: &KernelSpec, xs: &'a [Distribution]) -> Result<Vec<Feature<'a>>> {
    xs.par_iter().map(|x| featurize(spec, x)).collect()
}

/// Symmetric matrix of pairwise dissimilarities under `spec`'s family and
/// shape parameters. Upper triangle computed, lower mirrored.
pub fn dissimilarity_matrix(spec: &KernelSpec, xs: &[Distribution]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if xs.is_empty() {
        return Err(Error::domain("gram matrix needs at least one distribution"));
    }
    let feats = featurize_all(spec, xs)?;
    let n = feats.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| dissimilarity(spec, &feats[i], &feats[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, d) in row.into_iter().enumerate() {
            out[(i, i + off)] = d;
            out[(i + off, i)] = d;
        }
    }
    Ok(out)
}

/// Rectangular dissimilarities, rows indexed by `test`, columns by `train`.
pub fn cross_dissimilarity(
    spec: &KernelSpec,
    test: &[Distribution],
    train: &[Distribution],
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if test.is_empty() || train.is_empty() {
        return Err(Error::domain("cross gram needs nonempty test and train sets"));
    }
    let ft = featurize_all(spec, test)?;
    let fr = featurize_all(spec, train)?;
    let rows: Vec<Vec<f64>> = ft
        .par_iter()
        .map(|a| fr.iter().map(|b| dissimilarity(spec, a, b)).collect())
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(test.len(), train.len(), |i, j| rows[i][j]))
}

/// Applies `spec`'s profile entrywise to a dissimilarity matrix produced
/// under the same family and shape parameters.
pub fn apply_profile(spec: &KernelSpec, d: &DMatrix<f64>) -> DMatrix<f64> {
    d.map(|v| spec.profile(v))
}

pub fn gram_matrix(spec: &KernelSpec, xs: &[Distribution]) -> Result<DMatrix<f64>> {
    Ok(apply_profile(spec, &dissimilarity_matrix(spec, xs)?))
}

pub fn cross_gram(
    spec: &KernelSpec,
    test: &[Distribution],
    train: &[Distribution],
) -> Result<DMatrix<f64>> {
    Ok(apply_profile(spec, &cross_dissimilarity(spec, test, train)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Empirical1D;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn g(m: f64, s: f64) -> Distribution {
        Gaussian1D::new(m, s).unwrap().into()
    }

    fn wass(gamma: f64, l: f64) -> KernelSpec {
        KernelSpec::Wasserstein(ThetaParams::new(gamma, l).unwrap())
    }

    fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
        m.clone().symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn wasserstein_examples() {
        let a = g(0.0, 1.0);
        for l in [0.1, 1.0, 10.0] {
            assert_eq!(kernel_eval(&wass(1.0, l), &a, &a).unwrap(), 1.0);
        }
        let v = kernel_eval(&wass(1.0, 10.0), &a, &g(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(v, (-0.1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.904837, epsilon = 1e-6);
    }

    #[test]
    fn exponent_applies_to_squared_distance() {
        let spec = KernelSpec::Wasserstein(ThetaParams::new(2.0, 1.0).unwrap().with_exponent(0.5).unwrap());
        // W₂² = 4 ⇒ (W₂²)^0.5 = 2
        let v = kernel_eval(&spec, &g(0.0, 1.0), &g(2.0, 1.0)).unwrap();
        assert_abs_diff_eq!(v, 4.0 * (-2.0f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn histogram_kernel_on_disjoint_masses() {
        // two point masses in different halves of [0, 1] with two bins
        let spec = KernelSpec::Histogram(HistogramParams::new(1.0, 2).unwrap());
        let v = kernel_eval(&spec, &g(0.25, 1e-6), &g(0.75, 1e-6)).unwrap();
        assert_abs_diff_eq!(v, (-2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.135335, epsilon = 1e-6);
    }

    #[test]
    fn legendre_kernel_uses_l1_coefficient_gap() {
        let spec = KernelSpec::Legendre(LegendreParams::new(5, 1.5, 2.0).unwrap());
        let (a, b) = (Gaussian1D::new(0.3, 0.1).unwrap(), Gaussian1D::new(0.6, 0.2).unwrap());
        let ca = legendre_coeffs(&a, 5).unwrap();
        let cb = legendre_coeffs(&b, 5).unwrap();
        let l1: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y).abs()).sum();
        let v = kernel_eval(&spec, &a.into(), &b.into()).unwrap();
        assert_abs_diff_eq!(v, 2.25 * (-l1 / 2.0).exp(), epsilon = 1e-14);
    }

    #[test]
    fn sliced_kernel_uses_projection() {
        let i2 = [[1.0, 0.0], [0.0, 1.0]];
        let a: Distribution = Gaussian2D::new([0.0, 0.0], i2).unwrap().into();
        let b: Distribution = Gaussian2D::new([1.0, 0.0], i2).unwrap().into();
        let at = |c| KernelSpec::Sliced(SlicedParams::new(0.5, c).unwrap());
        assert_abs_diff_eq!(kernel_eval(&at(0), &a, &b).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_eval(&at(25), &a, &b).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn family_variant_mismatch() {
        let e: Distribution = Empirical1D::new(vec![0.5, 0.5]).unwrap().into();
        let legendre = KernelSpec::Legendre(LegendreParams::new(5, 1.0, 1.0).unwrap());
        assert!(matches!(
            kernel_eval(&legendre, &e, &e),
            Err(Error::TypeMismatch { .. })
        ));
        let sliced = KernelSpec::Sliced(SlicedParams::new(1.0, 0).unwrap());
        assert!(matches!(kernel_eval(&sliced, &g(0.0, 1.0), &g(0.0, 1.0)), Err(Error::TypeMismatch { .. })));
        assert!(matches!(kernel_eval(&wass(1.0, 1.0), &e, &g(0.0, 1.0)), Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ThetaParams::new(0.0, 1.0).is_err());
        assert!(ThetaParams::new(1.0, 0.0).is_err());
        assert!(ThetaParams::new(1.0, 1.0).unwrap().with_exponent(1.5).is_err());
        assert!(ThetaParams::new(1.0, 1.0).unwrap().with_exponent(0.0).is_err());
        assert!(LegendreParams::new(0, 1.0, 1.0).is_err());
        assert!(HistogramParams::new(1.5, 20).is_err());
        assert!(HistogramParams::new(0.5, 0).is_err());
        assert!(SlicedParams::new(0.0, 3).is_err());
        assert!(SlicedParams::new(1.0, 51).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let spec = wass(1.0, 3.0);
        let one = gram_matrix(&spec, &[g(0.2, 0.1)]).unwrap();
        assert_eq!(one, DMatrix::from_element(1, 1, 1.0));
        let two = gram_matrix(&spec, &[g(0.2, 0.1), g(0.2, 0.1)]).unwrap();
        assert_eq!(two, DMatrix::from_element(2, 2, 1.0));
        assert!(gram_matrix(&spec, &[]).is_err());
    }

    #[test]
    fn gram_diagonal_matches_family() {
        let xs = [g(0.2, 0.1), g(0.5, 0.3), g(0.8, 0.05)];
        let w = gram_matrix(&wass(3.0, 1.0), &xs).unwrap();
        let h = gram_matrix(&KernelSpec::Histogram(HistogramParams::new(0.5, 20).unwrap()), &xs).unwrap();
        for i in 0..3 {
            assert_eq!(w[(i, i)], 9.0);
            assert_eq!(h[(i, i)], 1.0);
        }
    }

    #[test]
    fn five_random_gaussians_are_psd() {
        let xs = [g(0.1, 0.2), g(0.9, 0.05), g(0.4, 0.3), g(0.45, 0.25), g(0.7, 0.1)];
        let c = gram_matrix(&wass(1.0, 0.5), &xs).unwrap();
        assert!(min_eigenvalue(&c) >= -1e-8 * c.trace());
    }

    #[test]
    fn cross_gram_matches_gram_on_same_set() {
        let xs = [g(0.1, 0.2), g(0.9, 0.05), g(0.4, 0.3)];
        let spec = wass(1.0, 2.0);
        assert_eq!(cross_gram(&spec, &xs, &xs).unwrap(), gram_matrix(&spec, &xs).unwrap());
        let k = cross_gram(&spec, &[g(0.9, 0.05)], &xs).unwrap();
        assert_eq!(k[(0, 1)], 1.0);
    }

    fn gaussians(max: usize) -> impl Strategy<Value = Vec<Distribution>> {
        proptest::collection::vec((0.0..1.0f64, 0.01..0.5f64), 1..=max)
            .prop_map(|v| v.into_iter().map(|(m, s)| g(m, s)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn wasserstein_gram_is_psd(
            xs in gaussians(50),
            gamma in 0.1..3.0f64,
            l in 0.01..20.0f64,
            h in prop::sample::select(vec![0.25, 0.5, 1.0]),
        ) {
            let spec = KernelSpec::Wasserstein(ThetaParams::new(gamma, l).unwrap().with_exponent(h).unwrap());
            let c = gram_matrix(&spec, &xs).unwrap();
            prop_assert!(min_eigenvalue(&c) >= -1e-8 * c.trace());
            prop_assert_eq!(&c, &c.transpose());
        }

        #[test]
        fn wasserstein_bounded_and_symmetric(
            a in (0.0..1.0f64, 0.01..0.5f64),
            b in (0.0..1.0f64, 0.01..0.5f64),
            gamma in 0.1..3.0f64,
            l in 0.01..20.0f64,
        ) {
            let spec = wass(gamma, l);
            let (a, b) = (g(a.0, a.1), g(b.0, b.1));
            let kab = kernel_eval(&spec, &a, &b).unwrap();
            prop_assert_eq!(kab, kernel_eval(&spec, &b, &a).unwrap());
            prop_assert!(kab > 0.0 && kab <= gamma * gamma);
            if a != b {
                prop_assert!(kab < gamma * gamma);
            }
        }

        #[test]
        fn wasserstein_monotone_in_distance(m in 0.0..1.0f64, s in 0.05..0.5f64, d1 in 0.01..1.0f64, d2 in 0.01..1.0f64) {
            prop_assume!((d1 - d2).abs() > 1e-6);
            let spec = wass(1.0, 1.0);
            let base = g(m, s);
            let (near, far) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let k_near = kernel_eval(&spec, &base, &g(m + near, s)).unwrap();
            let k_far = kernel_eval(&spec, &base, &g(m + far, s)).unwrap();
            prop_assert!(k_near > k_far);
        }

        #[test]
        fn cross_gram_entries_bounded(train in gaussians(8), test in gaussians(8), gamma in 0.2..2.0f64) {
            let spec = wass(gamma, 1.0);
            let k = cross_gram(&spec, &test, &train).unwrap();
            for v in k.iter() {
                prop_assert!(*v > 0.0 && *v <= gamma * gamma);
            }
        }

        #[test]
        fn chi2_nonnegative_zero_iff_equal(h1 in proptest::collection::vec(0.0..1.0f64, 6), h2 in proptest::collection::vec(0.0..1.0f64, 6)) {
            let d = chi2_distance(&h1, &h2).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(chi2_distance(&h1, &h1).unwrap(), 0.0);
            if h1 != h2 {
                prop_assert!(d > 0.0);
            }
        }
    }
}
