//! Projection of Gaussian densities on the orthonormal shifted Legendre basis.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::distributions::Gaussian1D;
use crate::error::{Error, Result};

/// Gauss–Legendre rule size used for every coefficient integral.
pub const QUADRATURE_POINTS: usize = 128;

/// Half-width, in standard deviations, of the window the rule is applied on.
/// Mass beyond it is below 1e-32.
const WINDOW_SIGMAS: f64 = 12.0;

/// Nodes and weights of the 128-point rule on [-1, 1].
fn reference_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(QUADRATURE_POINTS))
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            deriv = dp;
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        if dp != 0.0 {
            deriv = dp;
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    let nf = n as f64;
    (cur, nf * (x * cur - prev) / (x * x - 1.0))
}

/// Gauss–Legendre nodes and weights mapped to [lo, hi].
pub fn quadrature_on(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let (nodes, weights) = reference_rule();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Values p_0(t), …, p_{order−1}(t) of the shifted Legendre polynomials on
/// [0, 1], scaled so that ∫₀¹ p_i² = 1.
pub fn legendre_basis(order: usize, t: f64) -> Vec<f64> {
    let x = 2.0 * t - 1.0;
    let mut out = Vec::with_capacity(order);
    let (mut prev, mut cur) = (1.0, x);
    for i in 0..order {
        let raw = match i {
            0 => 1.0,
            1 => x,
            _ => {
                let k = (i - 1) as f64;
                let next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
                prev = cur;
                cur = next;
                next
            }
        };
        out.push(raw * (2.0 * i as f64 + 1.0).sqrt());
    }
    out
}

/// Coefficients a_i = ∫₀¹ φ(t) p_i(t) dt for i < order, where φ is the
/// density of `g` (mass outside [0, 1] is dropped).
pub fn legendre_coeffs(g: &Gaussian1D, order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::param("legendre order must be at least 1"));
    }
    let (m, s) = (g.mean(), g.sigma());
    let lo = (m - WINDOW_SIGMAS * s).max(0.0);
    let hi = (m + WINDOW_SIGMAS * s).min(1.0);
    let mut coeffs = vec![0.0; order];
    if lo >= hi {
        return Ok(coeffs);
    }
    let norm = 1.0 / ((2.0 * PI).sqrt() * s);
    for (t, w) in quadrature_on(lo, hi) {
        let z = (t - m) / s;
        let weight = w * norm * (-0.5 * z * z).exp();
        for (a, p) in coeffs.iter_mut().zip(legendre_basis(order, t)) {
            *a += weight * p;
        }
    }
    Ok(coeffs)
}
