//! Stopping integral, stochastic exponential, and ensemble diagnostics of
//! the change of measure between the full and drift-reduced systems.
//!
//! With `h = S⁺π_F(drift)` and whitened increments `ΔW`, one step adds
//!
//! ```text
//! log G += -⟨h, ΔW⟩ - ½|h|² dt
//! ```
//!
//! which makes `W + ∫h dt` a Brownian motion under `G·P`. Under that
//! measure the reduced system has exactly the law of the full one.

use crate::basis::VelocityState;
use crate::error::{Error, Result};
use crate::integrator::Model;
use crate::stats::{compensated_sum, mean_stderr, MeanStderr};

#[derive(Debug, Clone, PartialEq)]
pub struct GirsanovWeight {
    pub log_g: f64,
    pub stopping_integral: f64,
    pub n_threshold: f64,
    pub stopped: bool,
    /// Grid time at which `stopped` was first set.
    pub tau_hit: Option<f64>,
}

impl GirsanovWeight {
    /// Fresh weight at time 0. A zero threshold is stopped from the start.
    pub fn new(n_threshold: f64) -> Self {
        let stopped = n_threshold <= 0.0;
        GirsanovWeight {
            log_g: 0.0,
            stopping_integral: 0.0,
            n_threshold,
            stopped,
            tau_hit: stopped.then_some(0.0),
        }
    }

    /// Weight that only records the stopping integral (never stops).
    pub fn observer() -> Self {
        Self::new(f64::INFINITY)
    }

    pub fn value(&self) -> f64 {
        self.log_g.exp()
    }

    /// One step with whitened drift `h` and whitened increment `dw`,
    /// ending at time `t_end`.
    pub fn accumulate(&mut self, h: &[f64], dw: &[f64], dt: f64, t_end: f64) {
        if self.stopped {
            return;
        }
        let pairing = compensated_sum(h.iter().zip(dw).map(|(a, b)| a * b));
        let h2 = compensated_sum(h.iter().map(|a| a * a));
        self.log_g += -pairing - 0.5 * h2 * dt;
        self.stopping_integral += h2 * dt;
        if self.stopping_integral >= self.n_threshold {
            self.stopped = true;
            self.tau_hit = Some(t_end);
        }
    }
}

/// `S⁺π_F(νAw + B(w,w))` as a full-length vector (zero off F).
pub fn drift_functional(model: &Model, state: &VelocityState) -> Result<VelocityState> {
    let basis = &model.basis;
    if state.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: state.len(),
        });
    }
    let b = if model.nonlinear {
        basis.bilinear(state, state)?
    } else {
        basis.zeros()
    };
    let sigmas = model.cov.sigmas();
    let lambdas = basis.eigenvalues();
    let mut out = basis.zeros();
    for &i in model.subspace.indices() {
        let drift = model.nu * lambdas[i] * state.coeffs()[i] + b.coeffs()[i];
        out.coeffs_mut()[i] = drift / sigmas[i];
    }
    Ok(out)
}

/// The drift the exponential scheme applies to F over one step,
/// whitened, in F coordinates. Tends to [`drift_functional`] as `dt → 0`.
pub fn discrete_drift(model: &Model, state: &VelocityState, dt: f64) -> Result<Vec<f64>> {
    let basis = &model.basis;
    let b = if model.nonlinear {
        basis.bilinear(state, state)?
    } else {
        basis.zeros()
    };
    let sigmas = model.cov.sigmas();
    let lambdas = basis.eigenvalues();
    Ok(model
        .subspace
        .indices()
        .iter()
        .map(|&i| {
            let e = (-model.nu * lambdas[i] * dt).exp();
            let rate = -(e - 1.0) / dt;
            (rate * state.coeffs()[i] + e * b.coeffs()[i]) / sigmas[i]
        })
        .collect())
}

/// Advance `weight` over one step from `state`, fed the same colored
/// increment the integrator uses.
pub fn update_weight(
    weight: &GirsanovWeight,
    model: &Model,
    state: &VelocityState,
    increment: &VelocityState,
    dt: f64,
    t_end: f64,
) -> Result<GirsanovWeight> {
    let h = discrete_drift(model, state, dt)?;
    let sigmas = model.cov.sigmas();
    let dw: Vec<f64> = model
        .subspace
        .indices()
        .iter()
        .map(|&i| increment.coeffs()[i] / sigmas[i])
        .collect();
    let mut w = weight.clone();
    w.accumulate(&h, &dw, dt, t_end);
    Ok(w)
}

/// Mean and standard error of `G_t` from per-path `log G_t`.
pub fn martingale_diagnostic(log_g_t: &[f64]) -> MeanStderr {
    let g: Vec<f64> = log_g_t.iter().map(|l| l.exp()).collect();
    mean_stderr(&g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMoment {
    /// `E[G_t |log(G_t/G_s)|]`.
    pub lhs: f64,
    pub stderr: f64,
    /// `√(t-s)(1 + ‖x0‖²)²`.
    pub rhs_shape: f64,
}

pub fn log_moment_diagnostic(
    log_g_s: &[f64],
    log_g_t: &[f64],
    s: f64,
    t: f64,
    x0_norm: f64,
) -> Result<LogMoment> {
    check_pair(log_g_s, log_g_t, s, t)?;
    let v: Vec<f64> = log_g_s
        .iter()
        .zip(log_g_t)
        .map(|(ls, lt)| lt.exp() * (lt - ls).abs())
        .collect();
    let m = mean_stderr(&v);
    Ok(LogMoment {
        lhs: m.mean,
        stderr: m.stderr,
        rhs_shape: (t - s).sqrt() * (1.0 + x0_norm * x0_norm).powi(2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementEstimate {
    /// `|E[(G_t - G_s) X]|`.
    pub value: f64,
    pub stderr: f64,
}

/// `|E[(G_t - G_s) X]|` for a bounded per-path variable `X`.
pub fn increment_diagnostic(
    log_g_s: &[f64],
    log_g_t: &[f64],
    x: &[f64],
) -> Result<IncrementEstimate> {
    if log_g_s.len() != log_g_t.len() || x.len() != log_g_t.len() {
        return Err(Error::DimensionMismatch {
            expected: log_g_t.len(),
            got: x.len().min(log_g_s.len()),
        });
    }
    if let Some(bad) = x.iter().find(|v| v.abs() > 1.0) {
        return Err(Error::InvalidParameter(format!("test variable must satisfy |X| <= 1, got {bad}")));
    }
    let v: Vec<f64> = log_g_s
        .iter()
        .zip(log_g_t)
        .zip(x)
        .map(|((ls, lt), x)| (lt.exp() - ls.exp()) * x)
        .collect();
    let m = mean_stderr(&v);
    Ok(IncrementEstimate {
        value: m.mean.abs(),
        stderr: m.stderr,
    })
}

/// `P[τ_n < t]` for each `n`, from stopping integrals recorded at `t` on
/// untruncated paths. The integral is nondecreasing, so `τ_n < t` iff
/// the integral has reached `n` by the last grid time before `t`.
pub fn stopping_probability(integrals_before_t: &[f64], n_values: &[f64]) -> Vec<(f64, f64)> {
    let total = integrals_before_t.len().max(1) as f64;
    n_values
        .iter()
        .map(|&n| {
            let hits = integrals_before_t.iter().filter(|&&i| i >= n).count();
            (n, hits as f64 / total)
        })
        .collect()
}

/// The pointwise inequality `xy ≤ ε e^{y/ε} + ε x log x`, returning the
/// smallest slack `rhs - lhs` over the grid and the number of violations.
pub fn elementary_inequality_scan(xs: &[f64], ys: &[f64], epsilons: &[f64]) -> (f64, usize) {
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    for &x in xs {
        let xlogx = if x > 0.0 { x * x.ln() } else { 0.0 };
        for &y in ys {
            for &e in epsilons {
                let slack = e * (y / e).exp() + e * xlogx - x * y;
                // relative round-off at large magnitudes
                let scale = (x * y).abs().max(1.0);
                if slack < -1e-12 * scale {
                    violations += 1;
                }
                min_slack = min_slack.min(slack);
            }
        }
    }
    (min_slack, violations)
}

fn check_pair(a: &[f64], b: &[f64], s: f64, t: f64) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if !(0.0 <= s && s <= t) {
        return Err(Error::InvalidParameter(format!("need 0 <= s <= t, got s={s}, t={t}")));
    }
    Ok(())
}
