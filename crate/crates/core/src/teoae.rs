//! Age prediction from otoacoustic-emission frequency-response curves.
//!
//! Each curve is normalized into an [`Empirical1D`] whose ascending weights
//! act as its quantile vector, compared with the plain-sum quantile W₂², and
//! regressed on age with leave-one-out kernel ridge regression.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::distributions::{Distribution, Empirical1D};
use crate::error::{Error, Result};
use crate::kernels::{dissimilarity_matrix, KernelSpec, ThetaParams};
use crate::ridge::{loo_predict_from_dissimilarity, rmse};

/// Upper edge of the recorded band.
pub const BAND_HZ: f64 = 10_000.0;

/// Predictions outside this range are flagged, not rejected.
pub const SANE_AGE_RANGE: (f64, f64) = (0.0, 120.0);

pub const SYNTH_AGE_RANGE: (f64, f64) = (15.0, 50.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub name: String,
    pub age: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeoaeDataset {
    records: Vec<CurveRecord>,
    m: usize,
}

impl TeoaeDataset {
    pub fn new(records: Vec<CurveRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::domain("dataset has no records"))?;
        let m = first.values.len();
        if m == 0 {
            return Err(Error::domain("curves need at least one frequency bin"));
        }
        let mut names = HashSet::new();
        for r in &records {
            if r.values.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "curve lengths",
                    left: m,
                    right: r.values.len(),
                });
            }
            if !names.insert(r.name.as_str()) {
                return Err(Error::domain(format!("duplicate record name {:?}", r.name)));
            }
            if !(r.age > 0.0 && r.age.is_finite()) {
                return Err(Error::domain(format!("age of {:?} must be positive, got {}", r.name, r.age)));
            }
            if r.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::domain(format!("curve {:?} has negative or non-finite values", r.name)));
            }
            if r.values.iter().all(|v| *v == 0.0) {
                return Err(Error::Degenerate(format!("curve {:?} is identically zero", r.name)));
            }
        }
        Ok(Self { records, m })
    }

    pub fn records(&self) -> &[CurveRecord] {
        &self.records
    }

    /// Shared number of frequency bins.
    pub fn bins(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ages(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.age).collect()
    }

    /// Hz between consecutive bins, assuming they span [0, BAND_HZ).
    pub fn bin_spacing(&self) -> f64 {
        BAND_HZ / self.m as f64
    }
}

pub fn normalize_curve(r: &CurveRecord) -> Result<Empirical1D> {
    let total: f64 = r.values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate(format!(
            "curve {:?} has no positive mass and cannot be normalized",
            r.name
        )));
    }
    Empirical1D::new(r.values.iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgePrediction {
    pub name: String,
    pub age: f64,
    pub predicted: f64,
}

impl AgePrediction {
    pub fn abs_error(&self) -> f64 {
        (self.age - self.predicted).abs()
    }

    pub fn in_sane_range(&self) -> bool {
        self.predicted.is_finite()
            && (SANE_AGE_RANGE.0..=SANE_AGE_RANGE.1).contains(&self.predicted)
    }
}

fn distributions(ds: &TeoaeDataset) -> Result<Vec<Distribution>> {
    ds.records
        .iter()
        .map(|r| normalize_curve(r).map(Distribution::from))
        .collect()
}

fn zip_predictions(ds: &TeoaeDataset, preds: Vec<f64>) -> Vec<AgePrediction> {
    ds.records
        .iter()
        .zip(preds)
        .map(|(r, predicted)| AgePrediction {
            name: r.name.clone(),
            age: r.age,
            predicted,
        })
        .collect()
}

/// Leave-one-out age predictions with the Wasserstein kernel γ²·exp(−W₂²/l).
pub fn loo_age(ds: &TeoaeDataset, gamma: f64, l: f64, lambda: f64) -> Result<Vec<AgePrediction>> {
    loo_age_with(ds, ThetaParams::new(gamma, l)?, lambda)
}

pub fn loo_age_with(ds: &TeoaeDataset, theta: ThetaParams, lambda: f64) -> Result<Vec<AgePrediction>> {
    Ok(select_lambda(ds, theta, &[lambda])?.predictions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooSelection {
    pub lambda: f64,
    /// Leave-one-out RMSE at the chosen λ.
    pub rmse: f64,
    pub predictions: Vec<AgePrediction>,
    /// (λ, leave-one-out RMSE) for every candidate, in input order.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the λ with the smallest leave-one-out RMSE (first on ties).
pub fn select_lambda(ds: &TeoaeDataset, theta: ThetaParams, lambdas: &[f64]) -> Result<LooSelection> {
    if ds.len() < 2 {
        return Err(Error::domain(format!(
            "leave-one-out needs at least two records, got {}",
            ds.len()
        )));
    }
    if lambdas.is_empty() {
        return Err(Error::param("lambda grid is empty"));
    }
    let spec = KernelSpec::Wasserstein(theta);
    let xs = distributions(ds)?;
    let d = dissimilarity_matrix(&spec, &xs)?;
    let ages = ds.ages();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut scores = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let preds = loo_predict_from_dissimilarity(&spec, &d, &ages, lambda)?;
        let err = rmse(&preds, &ages)?;
        scores.push((lambda, err));
        if best.as_ref().is_none_or(|(_, e, _)| err < *e) {
            best = Some((lambda, err, preds));
        }
    }
    let (lambda, err, preds) = best.expect("nonempty lambda grid");
    Ok(LooSelection {
        lambda,
        rmse: err,
        predictions: zip_predictions(ds, preds),
        scores,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "rank correlation inputs",
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::domain("rank correlation needs at least two pairs"));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean) * (x - mean);
        vb += (y - mean) * (y - mean);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Degenerate("rank correlation of a constant sequence".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

/// Synthetic cohort: ages uniform in [15, 50]; each curve is a spectral bump
/// whose centre rises and whose bandwidth widens with age, on a low noise
/// floor, with per-bin multiplicative jitter and an arbitrary overall gain.
pub fn synth_cohort(n: usize, m: usize, seed: u64) -> Result<TeoaeDataset> {
    if n < 2 || m < 2 {
        return Err(Error::param(format!(
            "synthetic cohort needs n ≥ 2 and M ≥ 2, got n = {n}, M = {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = BAND_HZ / m as f64;
    let (lo, hi) = SYNTH_AGE_RANGE;
    let records = (0..n)
        .map(|i| {
            let age = rng.gen_range(lo..=hi);
            let u = (age - lo) / (hi - lo);
            let centre = 1_200.0 + 1_600.0 * u;
            let width = 150.0 + 850.0 * u;
            let gain = rng.gen_range(0.5..2.0);
            let values = (0..m)
                .map(|k| {
                    let f = k as f64 * spacing;
                    let z = (f - centre) / width;
                    let bump = (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * width);
                    let floor = 2e-6;
                    let jitter: f64 = rng.sample(StandardNormal);
                    (gain * (bump + floor) * (1.0 + 0.03 * jitter)).max(0.0)
                })
                .collect();
            CurveRecord {
                name: format!("S{:03}", i + 1),
                age: (age * 100.0).round() / 100.0,
                values,
            }
        })
        .collect();
    TeoaeDataset::new(records)
}

/// `# key=value` lines, header `name,age,v0..v{M−1}`, one row per record.
pub fn render_curves(ds: &TeoaeDataset, metadata: &[String]) -> String {
    let mut out = String::new();
    for line in metadata {
        writeln!(out, "# {line}").unwrap();
    }
    out.push_str("name,age");
    for k in 0..ds.m {
        write!(out, ",v{k}").unwrap();
    }
    out.push('\n');
    for r in &ds.records {
        write!(out, "{},{}", r.name, r.age).unwrap();
        for v in &r.values {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses the delimited curve format; `#` lines and blank lines are skipped.
pub fn parse_curves(text: &str) -> Result<TeoaeDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "missing header row".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "name" || cols[1] != "age" {
        return Err(Error::Parse {
            line: header_line,
            column: 1,
            message: format!("header must be `name,age,v0,...`, got {header:?}"),
        });
    }
    let m = cols.len() - 2;
    let mut records: Vec<CurveRecord> = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line,
                column: fields.len().min(cols.len()) + 1,
                message: format!(
                    "curve has {} values but the header declares {m}",
                    fields.len().saturating_sub(2)
                ),
            });
        }
        let number = |col: usize, what: &str| -> Result<f64> {
            fields[col].parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: col + 1,
                message: format!("{what} {:?} is not a number", fields[col]),
            })
        };
        let name = fields[0].to_string();
        if name.is_empty() {
            return Err(Error::Parse {
                line,
                column: 1,
                message: "empty record name".into(),
            });
        }
        if records.iter().any(|r| r.name == name) {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("duplicate record name {name:?}"),
            });
        }
        let age = number(1, "age")?;
        let values = (2..fields.len())
            .map(|c| number(c, "value"))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(c) = values.iter().position(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Parse {
                line,
                column: c + 3,
                message: "curve values must be finite and nonnegative".into(),
            });
        }
        records.push(CurveRecord { name, age, values });
    }
    TeoaeDataset::new(records)
}

pub fn render_predictions(preds: &[AgePrediction], metadata: &[String]) -> String {
    let mut out = String::new();
    for line in metadata {
        writeln!(out, "# {line}").unwrap();
    }
    let flagged: Vec<&str> = preds
        .iter()
        .filter(|p| !p.in_sane_range())
        .map(|p| p.name.as_str())
        .collect();
    writeln!(
        out,
        "# out_of_range[{},{}]={}",
        SANE_AGE_RANGE.0,
        SANE_AGE_RANGE.1,
        if flagged.is_empty() { "none".to_string() } else { flagged.join(";") }
    )
    .unwrap();
    out.push_str("name,age,predicted_age,abs_error\n");
    for p in preds {
        writeln!(out, "{},{},{:.4},{:.4}", p.name, p.age, p.predicted, p.abs_error()).unwrap();
    }
    out
}

/// Counts of |age − predicted| in bins [k·width, (k+1)·width), covering the
/// largest error.
pub fn error_histogram(preds: &[AgePrediction], width: f64) -> Result<Vec<(f64, f64, usize)>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::param(format!("histogram bin width must be positive, got {width}")));
    }
    let errors: Vec<f64> = preds.iter().map(AgePrediction::abs_error).collect();
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical("non-finite prediction error".into()));
    }
    let max = errors.iter().copied().fold(0.0, f64::max);
    let bins = ((max / width).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; bins];
    for e in errors {
        counts[((e / width).floor() as usize).min(bins - 1)] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (k as f64 * width, (k + 1) as f64 * width, c))
        .collect())
}

pub fn render_histogram(hist: &[(f64, f64, usize)], metadata: &[String]) -> String {
    let mut out = String::new();
    for line in metadata {
        writeln!(out, "# {line}").unwrap();
    }
    out.push_str("bin_start,bin_end,count\n");
    for (lo, hi, c) in hist {
        writeln!(out, "{lo},{hi},{c}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(name: &str, age: f64, values: &[f64]) -> CurveRecord {
        CurveRecord {
            name: name.into(),
            age,
            values: values.to_vec(),
        }
    }

    #[test]
    fn normalize_examples() {
        let u = normalize_curve(&rec("a", 20.0, &[3.0; 4])).unwrap();
        assert_eq!(u.weights(), &[0.25; 4]);
        let one_hot = normalize_curve(&rec("a", 20.0, &[0.0, 7.0, 0.0])).unwrap();
        assert_eq!(one_hot.weights(), &[0.0, 1.0, 0.0]);
        let w = normalize_curve(&rec("a", 20.0, &[1.0, 3.0])).unwrap();
        assert_eq!(w.weights(), &[0.25, 0.75]);
        assert!(matches!(
            normalize_curve(&rec("z", 20.0, &[0.0, 0.0])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn normalize_is_scale_invariant() {
        let values = [0.1, 0.37, 2.5, 0.0, 1e-3];
        let base = normalize_curve(&rec("a", 20.0, &values)).unwrap();
        for k in [0.25, 2.0, 1024.0] {
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            assert_eq!(normalize_curve(&rec("a", 20.0, &scaled)).unwrap(), base);
        }
        for k in [0.3, 7.0, 1e5] {
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            let w = normalize_curve(&rec("a", 20.0, &scaled)).unwrap();
            for (x, y) in w.weights().iter().zip(base.weights()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn dataset_invariants() {
        assert!(matches!(
            TeoaeDataset::new(vec![rec("a", 20.0, &[1.0, 2.0]), rec("b", 30.0, &[1.0])]),
            Err(Error::DimensionMismatch { left: 2, right: 1, .. })
        ));
        assert!(TeoaeDataset::new(vec![rec("a", 20.0, &[1.0]), rec("a", 30.0, &[1.0])]).is_err());
        assert!(matches!(
            TeoaeDataset::new(vec![rec("a", 20.0, &[0.0, 0.0])]),
            Err(Error::Degenerate(_))
        ));
        assert!(TeoaeDataset::new(vec![rec("a", -1.0, &[1.0])]).is_err());
    }

    #[test]
    fn identical_curves_closed_form() {
        let (a, gamma, lambda) = (27.0, 1.0, 0.5);
        let ds = TeoaeDataset::new(vec![rec("a", a, &[1.0, 2.0, 3.0]), rec("b", a, &[2.0, 4.0, 6.0])]).unwrap();
        let preds = loo_age(&ds, gamma, 10.0, lambda).unwrap();
        for p in preds {
            assert_abs_diff_eq!(p.predicted, a * gamma * gamma / (gamma * gamma + lambda), epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_ages_shrink_toward_zero() {
        let ds = synth_cohort(10, 64, 3).unwrap();
        let records = ds
            .records()
            .iter()
            .map(|r| CurveRecord { age: 30.0, ..r.clone() })
            .collect();
        let ds = TeoaeDataset::new(records).unwrap();
        let mut last_gap = f64::INFINITY;
        for lambda in [10.0, 1.0, 0.1, 0.01] {
            let preds = loo_age(&ds, 1.0, 10.0, lambda).unwrap();
            let gap = preds.iter().map(|p| (30.0 - p.predicted).abs()).fold(0.0, f64::max);
            assert!(preds.iter().all(|p| p.predicted > 0.0 && p.predicted < 30.0));
            assert!(gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 0.5);
    }

    #[test]
    fn loo_needs_two_records() {
        let ds = TeoaeDataset::new(vec![rec("a", 20.0, &[1.0, 1.0])]).unwrap();
        assert!(loo_age(&ds, 1.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn synthetic_cohort_shape() {
        let ds = synth_cohort(48, 256, 9).unwrap();
        assert_eq!(ds.len(), 48);
        assert_eq!(ds.bins(), 256);
        assert_abs_diff_eq!(ds.bin_spacing(), 39.0625, epsilon = 1e-12);
        assert!(ds.ages().iter().all(|a| (15.0..=50.0).contains(a)));
        assert_eq!(ds, synth_cohort(48, 256, 9).unwrap());
        assert_ne!(ds, synth_cohort(48, 256, 10).unwrap());
        assert!(synth_cohort(1, 256, 0).is_err());
        assert!(synth_cohort(4, 1, 0).is_err());
    }

    #[test]
    fn rank_correlation_basics() {
        assert_abs_diff_eq!(rank_correlation(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(rank_correlation(&[1.0, 2.0, 3.0], &[3.0, 1.0, 0.0]).unwrap(), -1.0);
        // ties share the average rank
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert!(rank_correlation(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn curves_round_trip_through_text() {
        let ds = synth_cohort(5, 16, 4).unwrap();
        let text = render_curves(&ds, &["seed=4".into()]);
        assert_eq!(parse_curves(&text).unwrap(), ds);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_curves("name,age,v0,v1\na,20,1,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 4, .. }), "{err}");
        let err = parse_curves("# meta\nname,age,v0,v1\na,20,1,2\nb,21,1\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains('1') && message.contains('2'), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(parse_curves("age,name\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_curves(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn histogram_bins_cover_all_errors() {
        let preds: Vec<AgePrediction> = [0.5, 1.9, 2.0, 7.3]
            .iter()
            .enumerate()
            .map(|(i, e)| AgePrediction {
                name: format!("p{i}"),
                age: 30.0,
                predicted: 30.0 + e,
            })
            .collect();
        let hist = error_histogram(&preds, 2.0).unwrap();
        assert_eq!(hist.len(), 4);
        assert_eq!(hist.iter().map(|h| h.2).collect::<Vec<_>>(), vec![2, 1, 0, 1]);
        assert!(error_histogram(&preds, 0.0).is_err());
    }
}
