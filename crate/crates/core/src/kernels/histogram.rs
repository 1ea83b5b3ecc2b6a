//! Binned Gaussian masses and the χ² histogram distance.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::distributions::Gaussian1D;
use crate::error::{Error, Result};

/// Support the histograms are built on.
pub const HISTOGRAM_SUPPORT: (f64, f64) = (0.0, 1.0);

pub const DEFAULT_BINS: usize = 20;

/// Mass of `g` in each of `bins` equal-width bins of `support`.
pub fn histogram_of(g: &Gaussian1D, bins: usize, support: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = support;
    if bins == 0 {
        return Err(Error::param("histogram needs at least one bin"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::param(format!("empty histogram support [{lo}, {hi}]")));
    }
    let normal = Normal::new(g.mean(), g.sigma())
        .map_err(|e| Error::domain(format!("gaussian parameters rejected: {e}")))?;
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + k as f64 * width })
        .map(|x| normal.cdf(x))
        .collect();
    Ok(edges.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect())
}

/// Σ_r (h₁(r) − h₂(r))² / (h₁(r) + h₂(r)); bins empty in both histograms are skipped.
pub fn chi2_distance(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::DimensionMismatch {
            context: "histograms",
            left: h1.len(),
            right: h2.len(),
        });
    }
    Ok(h1
        .iter()
        .zip(h2)
        .filter(|(a, b)| *a + *b != 0.0)
        .map(|(a, b)| (a - b) * (a - b) / (a + b))
        .sum())
}
