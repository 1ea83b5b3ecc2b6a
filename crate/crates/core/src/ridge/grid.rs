use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{apply_coefficients, check_lambda, rmse, RegularizedSystem};
use crate::distributions::{Distribution, SLICE_STEPS};
use crate::error::{Error, Result};
use crate::kernels::{
    apply_profile, cross_dissimilarity, dissimilarity_matrix, HistogramParams, KernelFamily,
    KernelSpec, LegendreParams, SlicedParams, ThetaParams, DEFAULT_BINS,
};

/// How grid values are placed between their endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Geometric,
    Linear,
}

impl Spacing {
    pub fn name(&self) -> &'static str {
        match self {
            Spacing::Geometric => "geometric",
            Spacing::Linear => "linear",
        }
    }
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Spacing::Geometric),
            "linear" => Ok(Spacing::Linear),
            other => Err(Error::param(format!("unknown spacing {other:?}"))),
        }
    }
}

/// `count` values from `min` to `max` inclusive; endpoints are exact.
pub fn spaced(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::param("grid needs at least one value"));
    }
    if !(min.is_finite() && max.is_finite() && min <= max) {
        return Err(Error::param(format!("invalid grid range [{min}, {max}]")));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    if spacing == Spacing::Geometric && min <= 0.0 {
        return Err(Error::param(format!(
            "geometric grid needs a positive lower end, got {min}"
        )));
    }
    let steps = (count - 1) as f64;
    let mut out: Vec<f64> = (0..count)
        .map(|k| {
            let t = k as f64 / steps;
            match spacing {
                Spacing::Geometric => min * (max / min).powf(t),
                Spacing::Linear => min + (max - min) * t,
            }
        })
        .collect();
    out[0] = min;
    out[count - 1] = max;
    Ok(out)
}

/// Hyperparameter grids. Each family reads only the lists that apply to it:
///
/// | family      | cells                         |
/// |-------------|-------------------------------|
/// | wasserstein | λ × l × γ                     |
/// | legendre    | λ × l × γ × order             |
/// | histogram   | λ × ζ (fixed `bins`)          |
/// | sliced      | λ × ξ × c                     |
///
/// Cells are visited with λ outermost, then the scale parameter (l, ζ, ξ),
/// then γ, then the shape parameter (order, c); ties keep the first cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lambdas: Vec<f64>,
    pub ls: Vec<f64>,
    pub gammas: Vec<f64>,
    pub orders: Vec<usize>,
    pub zetas: Vec<f64>,
    pub bins: usize,
    pub xis: Vec<f64>,
    pub cs: Vec<usize>,
    pub spacing: Spacing,
}

impl GridSpec {
    /// 30 λ values in [0.005, 30], 25 l values in [0.005, 20], γ = 1;
    /// 20 ζ values in [0.01, 1]; 10 ξ values in [0.05, 200]; every slice index.
    pub fn standard() -> Self {
        Self::standard_with_spacing(Spacing::Geometric)
    }

    pub fn standard_with_spacing(spacing: Spacing) -> Self {
        Self {
            lambdas: spaced(0.005, 30.0, 30, spacing).expect("static grid"),
            ls: spaced(0.005, 20.0, 25, spacing).expect("static grid"),
            gammas: vec![1.0],
            orders: vec![5],
            zetas: spaced(0.01, 1.0, 20, spacing).expect("static grid"),
            bins: DEFAULT_BINS,
            xis: spaced(0.05, 200.0, 10, spacing).expect("static grid"),
            cs: (0..=SLICE_STEPS).collect(),
            spacing,
        }
    }

    /// One cell per family at the given λ, l and γ; other lists hold their
    /// single default value.
    pub fn single(lambda: f64, l: f64, gamma: f64) -> Self {
        Self {
            lambdas: vec![lambda],
            ls: vec![l],
            gammas: vec![gamma],
            orders: vec![5],
            zetas: vec![1.0],
            bins: DEFAULT_BINS,
            xis: vec![1.0 / l],
            cs: vec![0],
            spacing: Spacing::Geometric,
        }
    }

    pub fn validate(&self, family: KernelFamily) -> Result<()> {
        fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(Error::param(format!("{name} grid is empty")));
            }
            Ok(())
        }
        nonempty("lambda", &self.lambdas)?;
        for &l in &self.lambdas {
            check_lambda(l)?;
        }
        for spec in self.kernel_specs(family)? {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn cell_count(&self, family: KernelFamily) -> usize {
        let kernels = match family {
            KernelFamily::Wasserstein => self.ls.len() * self.gammas.len(),
            KernelFamily::Legendre => self.ls.len() * self.gammas.len() * self.orders.len(),
            KernelFamily::Histogram => self.zetas.len(),
            KernelFamily::Sliced => self.xis.len() * self.cs.len(),
        };
        self.lambdas.len() * kernels
    }

    /// Grid summary for report metadata.
    pub fn describe(&self, family: KernelFamily) -> String {
        fn range(v: &[f64]) -> String {
            match v {
                [] => "[]".into(),
                [x] => format!("[{x}]"),
                _ => format!("{}[{}..{}]", v.len(), v[0], v[v.len() - 1]),
            }
        }
        let extra = match family {
            KernelFamily::Wasserstein => format!("l={} gamma={}", range(&self.ls), range(&self.gammas)),
            KernelFamily::Legendre => format!(
                "l={} gamma={} orders={:?}",
                range(&self.ls),
                range(&self.gammas),
                self.orders
            ),
            KernelFamily::Histogram => format!("zeta={} bins={}", range(&self.zetas), self.bins),
            KernelFamily::Sliced => {
                let cs = match self.cs.as_slice() {
                    [] => "[]".to_string(),
                    [c] => format!("[{c}]"),
                    v => format!("{}[{}..{}]", v.len(), v[0], v[v.len() - 1]),
                };
                format!("xi={} c={}", range(&self.xis), cs)
            }
        };
        format!(
            "spacing={} lambda={} {}",
            self.spacing,
            range(&self.lambdas),
            extra
        )
    }

    /// Kernel settings in visiting order (scale, γ, shape), paired with the
    /// index of their shape.
    fn kernel_grid(&self, family: KernelFamily) -> Result<(Vec<KernelSpec>, Vec<(usize, KernelSpec)>)> {
        let mut shapes = Vec::new();
        let mut kernels = Vec::new();
        match family {
            KernelFamily::Wasserstein => {
                let first = ThetaParams::new(*first(&self.gammas, "gamma")?, *first(&self.ls, "l")?)?;
                shapes.push(KernelSpec::Wasserstein(first));
                for &l in &self.ls {
                    for &gamma in &self.gammas {
                        kernels.push((0, KernelSpec::Wasserstein(ThetaParams::new(gamma, l)?)));
                    }
                }
            }
            KernelFamily::Legendre => {
                let (g0, l0) = (*first(&self.gammas, "gamma")?, *first(&self.ls, "l")?);
                first(&self.orders, "order")?;
                for &order in &self.orders {
                    shapes.push(KernelSpec::Legendre(LegendreParams::new(order, g0, l0)?));
                }
                for &l in &self.ls {
                    for &gamma in &self.gammas {
                        for (s, &order) in self.orders.iter().enumerate() {
                            kernels.push((s, KernelSpec::Legendre(LegendreParams::new(order, gamma, l)?)));
                        }
                    }
                }
            }
            KernelFamily::Histogram => {
                let z0 = *first(&self.zetas, "zeta")?;
                shapes.push(KernelSpec::Histogram(HistogramParams::new(z0, self.bins)?));
                for &zeta in &self.zetas {
                    kernels.push((0, KernelSpec::Histogram(HistogramParams::new(zeta, self.bins)?)));
                }
            }
            KernelFamily::Sliced => {
                let x0 = *first(&self.xis, "xi")?;
                first(&self.cs, "c")?;
                for &c in &self.cs {
                    shapes.push(KernelSpec::Sliced(SlicedParams::new(x0, c)?));
                }
                for &xi in &self.xis {
                    for (s, &c) in self.cs.iter().enumerate() {
                        kernels.push((s, KernelSpec::Sliced(SlicedParams::new(xi, c)?)));
                    }
                }
            }
        }
        Ok((shapes, kernels))
    }

    fn kernel_specs(&self, family: KernelFamily) -> Result<Vec<KernelSpec>> {
        Ok(self.kernel_grid(family)?.1.into_iter().map(|(_, s)| s).collect())
    }
}

fn first<'a, T>(v: &'a [T], name: &str) -> Result<&'a T> {
    v.first()
        .ok_or_else(|| Error::param(format!("{name} grid is empty")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub spec: KernelSpec,
    pub lambda: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: GridCell,
    /// Every cell in visiting order.
    pub cells: Vec<GridCell>,
}

/// Exhaustive search: fits every cell on `train` and scores RMSE on `valid`.
pub fn grid_search(
    grid: &GridSpec,
    family: KernelFamily,
    train: &[Distribution],
    y_train: &[f64],
    valid: &[Distribution],
    y_valid: &[f64],
) -> Result<GridResult> {
    let mut out = grid_search_multi(
        grid,
        family,
        train,
        &[y_train.to_vec()],
        valid,
        &[y_valid.to_vec()],
    )?;
    Ok(out.remove(0))
}

/// [`grid_search`] for several label sets over the same inputs, sharing
/// each cell's factorization. Entry `t` of the result is exactly what
/// `grid_search` returns for `y_trains[t]`, `y_valids[t]`.
pub fn grid_search_multi(
    grid: &GridSpec,
    family: KernelFamily,
    train: &[Distribution],
    y_trains: &[Vec<f64>],
    valid: &[Distribution],
    y_valids: &[Vec<f64>],
) -> Result<Vec<GridResult>> {
    grid.validate(family)?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::domain("grid search needs nonempty training and validation sets"));
    }
    if y_trains.is_empty() || y_trains.len() != y_valids.len() {
        return Err(Error::DimensionMismatch {
            context: "training vs validation label sets",
            left: y_trains.len(),
            right: y_valids.len(),
        });
    }
    for y in y_trains {
        if y.len() != train.len() {
            return Err(Error::DimensionMismatch {
                context: "training distributions vs labels",
                left: train.len(),
                right: y.len(),
            });
        }
    }
    for y in y_valids {
        if y.len() != valid.len() {
            return Err(Error::DimensionMismatch {
                context: "validation distributions vs labels",
                left: valid.len(),
                right: y.len(),
            });
        }
    }

    let (shapes, kernels) = grid.kernel_grid(family)?;
    let dissims: Vec<(DMatrix<f64>, DMatrix<f64>)> = shapes
        .iter()
        .map(|s| Ok((dissimilarity_matrix(s, train)?, cross_dissimilarity(s, valid, train)?)))
        .collect::<Result<_>>()?;

    // scores[k][λ][t]
    let scores: Vec<Vec<Vec<f64>>> = kernels
        .par_iter()
        .map(|(shape, spec)| {
            let (d_train, d_valid) = &dissims[*shape];
            let c = apply_profile(spec, d_train);
            let k_valid = apply_profile(spec, d_valid);
            grid.lambdas
                .iter()
                .map(|&lambda| {
                    let system = RegularizedSystem::new(&c, lambda)?;
                    y_trains
                        .iter()
                        .zip(y_valids)
                        .map(|(yt, yv)| {
                            let alpha = system.solve(yt)?;
                            rmse(&apply_coefficients(&k_valid, &alpha), yv)
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    Ok((0..y_trains.len())
        .map(|t| {
            let mut cells = Vec::with_capacity(grid.cell_count(family));
            for (li, &lambda) in grid.lambdas.iter().enumerate() {
                for (ki, (_, spec)) in kernels.iter().enumerate() {
                    cells.push(GridCell {
                        spec: *spec,
                        lambda,
                        rmse: scores[ki][li][t],
                    });
                }
            }
            let best = cells
                .iter()
                .copied()
                .reduce(|best, c| if c.rmse < best.rmse { c } else { best })
                .expect("grid has at least one cell");
            GridResult { best, cells }
        })
        .collect())
}
