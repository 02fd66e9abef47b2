//! Gaussian heat semigroup on F and Monte-Carlo checks of the identities
//! that rest on `π_F v` being a Brownian motion.

use gauss_quad::GaussHermite;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::density::{GridFunction, Samples};
use crate::error::{Error, Result};
use crate::stats::{linear_fit, mean_stderr};

/// Heat kernel with spatial covariance `Σ` at time `t`, i.e. the law of
/// `QB_t` with `QQ* = Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelSpec {
    pub dim: usize,
    /// Row-major `d × d`.
    pub covariance: Vec<f64>,
    pub t: f64,
}

impl HeatKernelSpec {
    pub fn new(dim: usize, covariance: Vec<f64>, t: f64) -> Result<Self> {
        if covariance.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: covariance.len(),
            });
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
        }
        let spec = HeatKernelSpec { dim, covariance, t };
        spec.cholesky()?;
        Ok(spec)
    }

    /// Lower-triangular `L` with `LL* = Σ`, row-major.
    pub fn cholesky(&self) -> Result<Vec<f64>> {
        cholesky(self.dim, &self.covariance)
    }
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(d: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            if (a[i * d + j] - a[j * d + i]).abs() > 1e-12 * a[i * d + j].abs().max(1.0) {
                return Err(Error::InvalidParameter("covariance is not symmetric".into()));
            }
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidParameter("covariance is not positive definite".into()));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

fn inverse_quadratic_form(d: usize, a: &[f64]) -> impl Fn(&[f64]) -> f64 {
    let inv = match d {
        1 => vec![1.0 / a[0]],
        _ => {
            let det = a[0] * a[3] - a[1] * a[2];
            vec![a[3] / det, -a[1] / det, -a[2] / det, a[0] / det]
        }
    };
    move |x: &[f64]| {
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += x[i] * inv[i * d + j] * x[j];
            }
        }
        q
    }
}

/// `U_φ(t, ·) = E[φ(· + QB_t)]` on the grid of `phi`, by a discrete
/// Gaussian kernel normalized over the lattice. `φ` is zero outside its box.
pub fn heat_solution(phi: &GridFunction, spec: &HeatKernelSpec) -> Result<GridFunction> {
    let grid = &phi.grid;
    if grid.dim != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: spec.dim,
        });
    }
    if spec.t == 0.0 {
        return Ok(phi.clone());
    }
    let d = spec.dim;
    let w = grid.cell_width();
    let scaled: Vec<f64> = spec.covariance.iter().map(|c| c * spec.t).collect();
    let quad = inverse_quadratic_form(d, &scaled);
    let max_sd = (0..d).map(|i| scaled[i * d + i].sqrt()).fold(0.0, f64::max);
    let reach = ((10.0 * max_sd / w).ceil() as i64).min(2 * grid.bins as i64);
    let mut kernel = Vec::new();
    let axis: Vec<i64> = (-reach..=reach).collect();
    let offsets: Vec<Vec<i64>> = match d {
        1 => axis.iter().map(|&i| vec![i]).collect(),
        _ => axis
            .iter()
            .flat_map(|&i| axis.iter().map(move |&j| vec![i, j]))
            .collect(),
    };
    for off in offsets {
        let x: Vec<f64> = off.iter().map(|&o| o as f64 * w).collect();
        let k = (-0.5 * quad(&x)).exp();
        if k > 1e-300 {
            kernel.push((off, k));
        }
    }
    let total: f64 = kernel.iter().map(|(_, k)| k).sum();
    let b = grid.bins as i64;
    let value = |idx: &[i64]| -> f64 {
        let mut flat = 0i64;
        for &i in idx {
            if i < 0 || i >= b {
                return 0.0;
            }
            flat = flat * b + i;
        }
        phi.values[flat as usize]
    };
    let values = (0..grid.cell_count())
        .map(|c| {
            let idx: Vec<i64> = match d {
                1 => vec![c as i64],
                _ => vec![(c / grid.bins) as i64, (c % grid.bins) as i64],
            };
            let mut probe = idx.clone();
            let mut acc = 0.0;
            for (off, k) in &kernel {
                for a in 0..d {
                    probe[a] = idx[a] + off[a];
                }
                acc += k * value(&probe);
            }
            acc / total
        })
        .collect();
    Ok(GridFunction {
        grid: grid.clone(),
        values,
    })
}

/// Bounded test functions on F.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// `⟨c, x⟩`; unbounded, for martingale checks only.
    Linear(Vec<f64>),
    /// `cos(⟨k, x⟩ + phase)`.
    Cosine { k: Vec<f64>, phase: f64 },
    /// `exp(-|x - center|² / (2 width²))`.
    Bump { center: Vec<f64>, width: f64 },
    /// `tanh(⟨k, x⟩ + shift)`.
    Tanh { k: Vec<f64>, shift: f64 },
    /// `min(1, |x - center|)^γ`, γ-Hölder with unit seminorm.
    Hoelder { center: Vec<f64>, gamma: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let dist = |c: &[f64]| c.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        match self {
            TestFunction::Constant(c) => *c,
            TestFunction::Linear(c) => dot(c),
            TestFunction::Cosine { k, phase } => (dot(k) + phase).cos(),
            TestFunction::Bump { center, width } => (-dist(center) / (2.0 * width * width)).exp(),
            TestFunction::Tanh { k, shift } => (dot(k) + shift).tanh(),
            TestFunction::Hoelder { center, gamma } => dist(center).sqrt().min(1.0).powf(*gamma),
        }
    }

    /// `‖φ‖_∞`, infinite for the linear function.
    pub fn sup_norm(&self) -> f64 {
        match self {
            TestFunction::Constant(c) => c.abs(),
            TestFunction::Linear(c) if c.iter().all(|&v| v == 0.0) => 0.0,
            TestFunction::Linear(_) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Five bounded functions on `R^d` used for distributional identities.
    pub fn bounded_family(d: usize) -> Vec<TestFunction> {
        let e = |i: usize| (0..d).map(|j| if i % d == j { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        let ones = vec![1.0; d];
        vec![
            TestFunction::Cosine { k: e(0), phase: 0.3 },
            TestFunction::Cosine { k: e(1), phase: -0.7 },
            TestFunction::Bump { center: vec![0.2; d], width: 0.5 },
            TestFunction::Tanh { k: ones.iter().map(|v| 2.0 * v).collect(), shift: 0.1 },
            TestFunction::Hoelder { center: vec![-0.1; d], gamma: 0.5 },
        ]
    }
}

/// Gauss–Hermite rule for `E[g(Z)]`, `Z ~ N(0, 1)`: nodes `√2 x_i`,
/// weights `w_i / √π`.
pub fn gaussian_rule(nodes: usize) -> Vec<(f64, f64)> {
    let q = GaussHermite::new(nodes.try_into().unwrap_or(2.try_into().expect("nonzero")));
    let c = std::f64::consts::PI.sqrt();
    q.iter()
        .map(|(x, w)| (std::f64::consts::SQRT_2 * x, w / c))
        .collect()
}

/// `U_φ(t, x) = E[φ(x + √t L Z)]` by tensor Gauss–Hermite.
pub fn heat_at(phi: &TestFunction, x: &[f64], chol: &[f64], t: f64, rule: &[(f64, f64)]) -> f64 {
    let d = x.len();
    if t == 0.0 {
        return phi.eval(x);
    }
    let st = t.sqrt();
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    match d {
        1 => {
            for &(z, w) in rule {
                y[0] = x[0] + st * chol[0] * z;
                acc += w * phi.eval(&y);
            }
        }
        _ => {
            for &(z0, w0) in rule {
                for &(z1, w1) in rule {
                    y[0] = x[0] + st * chol[0] * z0;
                    y[1] = x[1] + st * (chol[2] * z0 + chol[3] * z1);
                    acc += w0 * w1 * phi.eval(&y);
                }
            }
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovRep {
    /// `E[G_s φ(π_F v(t))]`.
    pub lhs: f64,
    /// `E[G_s U_φ(t - s, π_F v(s))]`.
    pub rhs: f64,
    pub gap: f64,
    /// Standard error of the per-path difference.
    pub stderr: f64,
}

/// Both sides on the same paths, so the gap has a paired standard error.
pub fn markov_rep_check(
    log_g_s: &[f64],
    v_s: &Samples,
    v_t: &Samples,
    phi: &TestFunction,
    covariance: &[f64],
    gap: f64,
) -> Result<MarkovRep> {
    if v_s.len() != log_g_s.len() || v_t.len() != log_g_s.len() {
        return Err(Error::DimensionMismatch {
            expected: log_g_s.len(),
            got: v_s.len().min(v_t.len()),
        });
    }
    let d = v_s.dim();
    let chol = cholesky(d, covariance)?;
    let rule = gaussian_rule(24);
    let mut lhs = Vec::with_capacity(v_s.len());
    let mut rhs = Vec::with_capacity(v_s.len());
    for (i, &l) in log_g_s.iter().enumerate() {
        let g = l.exp();
        lhs.push(g * phi.eval(v_t.row(i)));
        rhs.push(g * heat_at(phi, v_s.row(i), &chol, gap, &rule));
    }
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let l = mean_stderr(&lhs).mean;
    let r = mean_stderr(&rhs).mean;
    let dm = mean_stderr(&diff);
    Ok(MarkovRep {
        lhs: l,
        rhs: r,
        gap: dm.mean.abs(),
        stderr: dm.stderr,
    })
}

/// Pointwise `Δ_h^n φ(x)`.
pub fn difference_at(phi: &TestFunction, x: &[f64], h: &[f64], n: u32) -> f64 {
    let mut c = 1.0f64;
    let mut acc = 0.0;
    let mut y = x.to_vec();
    for j in 0..=n {
        let sign = if (n - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        for a in 0..x.len() {
            y[a] = x[a] + j as f64 * h[a];
        }
        acc += sign * c * phi.eval(&y);
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianDiff {
    /// `|E[Δ_h^n φ(a + β_r) - Δ_h^n φ(a + β_s)]|`.
    pub lhs: f64,
    pub stderr: f64,
    /// `‖φ‖_∞ (|h| / √(r∧s))^n |r - s| / (r∨s)`.
    pub bound_shape: f64,
}

/// Common random numbers: `β_r = √r L Z`, `β_s = √s L Z`.
#[allow(clippy::too_many_arguments)]
pub fn brownian_diff_check<R: Rng>(
    a: &[f64],
    r: f64,
    s: f64,
    h: &[f64],
    n: u32,
    phi: &TestFunction,
    covariance: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<BrownianDiff> {
    if !(r > 0.0 && s > 0.0) {
        return Err(Error::InvalidParameter(format!("need r, s > 0, got r={r}, s={s}")));
    }
    let d = a.len();
    let hn = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    if hn > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("|h| must be at most 1, got {hn}")));
    }
    let l = cholesky(d, covariance)?;
    let (sr, ss) = (r.sqrt(), s.sqrt());
    let mut z = vec![0.0; d];
    let mut xr = vec![0.0; d];
    let mut xs = vec![0.0; d];
    let mut diffs = Vec::with_capacity(samples);
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let lz: f64 = (0..=i).map(|k| l[i * d + k] * z[k]).sum();
            xr[i] = a[i] + sr * lz;
            xs[i] = a[i] + ss * lz;
        }
        diffs.push(difference_at(phi, &xr, h, n) - difference_at(phi, &xs, h, n));
    }
    let m = mean_stderr(&diffs);
    Ok(BrownianDiff {
        lhs: m.mean.abs(),
        stderr: m.stderr,
        bound_shape: phi.sup_norm() * (hn / r.min(s).sqrt()).powi(n as i32) * (r - s).abs() / r.max(s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRow {
    pub n_threshold: f64,
    /// `|E[G_s(φ(π_F v^n(t)) - φ(π_F v(t)))]|`.
    pub value: f64,
    pub stderr: f64,
    pub stopping_probability: f64,
    /// `min_ε ε(C√T(1+‖x0‖²)² + e^{2/ε} P[τ_n < t])`.
    pub bound: f64,
}

/// One row of the truncation table from paired per-path values.
#[allow(clippy::too_many_arguments)]
pub fn truncation_row(
    n_threshold: f64,
    log_g_s: &[f64],
    phi_vn_t: &[f64],
    phi_v_t: &[f64],
    stopping_probability: f64,
    log_constant: f64,
    horizon: f64,
    x0_norm: f64,
    eps_grid: &[f64],
) -> Result<TruncationRow> {
    if phi_vn_t.len() != log_g_s.len() || phi_v_t.len() != log_g_s.len() {
        return Err(Error::DimensionMismatch {
            expected: log_g_s.len(),
            got: phi_vn_t.len().min(phi_v_t.len()),
        });
    }
    let v: Vec<f64> = log_g_s
        .iter()
        .zip(phi_vn_t.iter().zip(phi_v_t))
        .map(|(l, (a, b))| l.exp() * (a - b))
        .collect();
    let m = mean_stderr(&v);
    let shape = log_constant * horizon.sqrt() * (1.0 + x0_norm * x0_norm).powi(2);
    let bound = eps_grid
        .iter()
        .map(|&e| e * (shape + (2.0 / e).exp() * stopping_probability))
        .fold(f64::INFINITY, f64::min);
    Ok(TruncationRow {
        n_threshold,
        value: m.mean.abs(),
        stderr: m.stderr,
        stopping_probability,
        bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GirsanovNumberFit {
    pub gaps: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub used: Vec<bool>,
    pub slope: f64,
}

/// Per-path `[ψ(u_t) - ψ(u_s)] - [ψ(v_t) - ψ(v_s)]` for one gap.
pub fn girsanov_number(
    psi: &TestFunction,
    u_s: &Samples,
    u_t: &Samples,
    v_s: &Samples,
    v_t: &Samples,
) -> Result<(f64, f64)> {
    let n = u_s.len();
    if [u_t.len(), v_s.len(), v_t.len()].iter().any(|&m| m != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u_t.len().min(v_s.len()).min(v_t.len()),
        });
    }
    let x: Vec<f64> = (0..n)
        .map(|i| {
            (psi.eval(u_t.row(i)) - psi.eval(u_s.row(i))) - (psi.eval(v_t.row(i)) - psi.eval(v_s.row(i)))
        })
        .collect();
    let m = mean_stderr(&x);
    Ok((m.mean.abs(), m.stderr))
}

/// Log-log slope of the Girsanov number against the gap, using only
/// values above twice their standard error.
pub fn fit_girsanov_number(gaps: &[f64], values: &[f64], stderrs: &[f64]) -> Result<GirsanovNumberFit> {
    let used: Vec<bool> = values
        .iter()
        .zip(stderrs)
        .map(|(v, s)| *v > 0.0 && *v > 2.0 * s)
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = gaps
        .iter()
        .zip(values)
        .zip(&used)
        .filter(|(_, &u)| u)
        .map(|((g, v), _)| (g.ln(), v.ln()))
        .unzip();
    if x.len() < 4 {
        return Err(Error::FitRefused(x.len()));
    }
    Ok(GirsanovNumberFit {
        gaps: gaps.to_vec(),
        values: values.to_vec(),
        stderrs: stderrs.to_vec(),
        used,
        slope: linear_fit(&x, &y).slope,
    })
}
