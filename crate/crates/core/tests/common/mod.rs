//! Closed-form oracles for the linear (Ornstein–Uhlenbeck) case with
//! `x0 = 0`, unit rates and unit noise on both F coordinates.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Per-coordinate variance after `k` exponential Euler steps:
/// `v ← e^{-2 dt} v + dt`.
pub fn ou_variance(k: usize, dt: f64) -> f64 {
    let e = (-2.0 * dt).exp();
    (0..k).fold(0.0, |v, _| e * v + dt)
}

/// `‖N(0, aI₂) - N(0, bI₂)‖_{L¹}`.
pub fn gaussian_l1(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let r2 = 2.0 * a * b * (b / a).ln() / (b - a);
    2.0 * ((-r2 / (2.0 * b)).exp() - (-r2 / (2.0 * a)).exp()).abs()
}

fn pdf(v: f64, x: f64, y: f64) -> f64 {
    (-(x * x + y * y) / (2.0 * v)).exp() / (2.0 * PI * v)
}

/// `‖g‖₁ + sup_{|h| ≤ 1} ‖Δ_h² g‖₁ / |h|^α` for `g = N(0, bI₂) - N(0, aI₂)`
/// by midpoint quadrature. `g` is radial, so one direction suffices.
pub fn gaussian_besov(a: f64, b: f64, alpha: f64) -> f64 {
    let reach = 7.0 * a.max(b).sqrt() + 2.0;
    let step = 0.025;
    let m = (2.0 * reach / step) as usize;
    let g = |x: f64, y: f64| pdf(b, x, y) - pdf(a, x, y);
    let node = |i: usize| -reach + (i as f64 + 0.5) * step;
    let mut sup: f64 = 0.0;
    for j in 0..40 {
        let h = 10f64.powf(-2.0 + 2.0 * j as f64 / 39.0);
        let mut acc = 0.0;
        for ix in 0..m {
            let x = node(ix);
            for iy in 0..m {
                let y = node(iy);
                acc += (g(x + 2.0 * h, y) - 2.0 * g(x + h, y) + g(x, y)).abs();
            }
        }
        sup = sup.max(acc * step * step / h.powf(alpha));
    }
    gaussian_l1(a, b) + sup
}

/// Ordinary least-squares slope of `log y` on `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Grid steps of the configured `(s, t)` pairs.
pub fn pair_steps(pairs: &[(f64, f64)], dt: f64) -> Vec<(usize, usize)> {
    pairs
        .iter()
        .map(|&(s, t)| ((s / dt).round() as usize, (t / dt).round() as usize))
        .collect()
}
