//! Exponential Euler–Maruyama for the Galerkin system and its three
//! companions (drift-reduced, truncated, killed).
//!
//! One step of length `dt` from state `u`:
//!
//! ```text
//! u_i ← e^{-νλ_i dt} (u_i - dt·B(u)_i) + σ_i ΔW_i     (drift active on i)
//! u_i ← u_i + σ_i ΔW_i                                (F-drift removed)
//! ```
//!
//! The linear flow is exact, the nonlinearity explicit, and the noise is
//! added after the linear factor so that the F-marginal of the reduced
//! system is an exact discrete Brownian motion and the Girsanov weight of
//! [`crate::girsanov`] is an exact discrete likelihood ratio.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::{Basis, ConvolutionScratch, VelocityState};
use crate::error::{Error, Result};
use crate::girsanov::GirsanovWeight;
use crate::noise::{CovarianceSpec, SubspaceF};
use crate::seed::StreamRng;
use crate::stats::mean_stderr;

/// Trajectories whose H-norm exceeds this are aborted.
pub const BLOW_UP_NORM: f64 = 1e6;

/// Everything that defines the drift and the noise.
#[derive(Debug, Clone)]
pub struct Model {
    pub basis: Basis,
    pub cov: CovarianceSpec,
    pub subspace: SubspaceF,
    pub nu: f64,
    /// `false` switches `B` off (linear Ornstein–Uhlenbeck system).
    pub nonlinear: bool,
}

impl Model {
    pub fn new(
        basis: Basis,
        cov: CovarianceSpec,
        subspace: SubspaceF,
        nu: f64,
        nonlinear: bool,
    ) -> Result<Self> {
        if cov.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: cov.len(),
            });
        }
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("viscosity must be nonnegative, got {nu}")));
        }
        Ok(Model {
            basis,
            cov,
            subspace,
            nu,
            nonlinear,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemVariant {
    /// Galerkin system `u^N`.
    FullU,
    /// F-drift removed for all times: `π_F v` is Brownian.
    ReducedV,
    /// Reduced until the stopping integral reaches `threshold`, full after.
    TruncatedVn { threshold: f64 },
    /// Full up to `t - eps`, F-drift removed on `[t - eps, t]`.
    KilledUEps { t: f64, eps: f64 },
}

impl SystemVariant {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SystemVariant::TruncatedVn { threshold } if !(threshold > 0.0) => Err(
                Error::InvalidParameter(format!("truncation threshold must be positive, got {threshold}")),
            ),
            SystemVariant::KilledUEps { t, eps } if !(eps > 0.0 && eps < t) => Err(
                Error::InvalidParameter(format!("killed system needs 0 < eps < t, got eps={eps}, t={t}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemVariant::FullU => "full_u",
            SystemVariant::ReducedV => "reduced_v",
            SystemVariant::TruncatedVn { .. } => "truncated_vn",
            SystemVariant::KilledUEps { .. } => "killed_u_eps",
        }
    }
}

/// Source of the colored increments `π_N S ΔW`, one vector per step.
pub trait NoiseFeed {
    fn next_increment(&mut self, out: &mut [f64]) -> Result<()>;
}

/// Increments drawn on the fly from a random stream.
pub struct StreamNoise<'a, R: Rng> {
    rng: R,
    scale: Vec<f64>,
    _cov: std::marker::PhantomData<&'a CovarianceSpec>,
}

impl<'a, R: Rng> StreamNoise<'a, R> {
    pub fn new(cov: &'a CovarianceSpec, dt: f64, rng: R) -> Self {
        let sq = dt.sqrt();
        StreamNoise {
            rng,
            scale: cov.sigmas().iter().map(|s| s * sq).collect(),
            _cov: std::marker::PhantomData,
        }
    }
}

impl<R: Rng> NoiseFeed for StreamNoise<'_, R> {
    fn next_increment(&mut self, out: &mut [f64]) -> Result<()> {
        for (o, s) in out.iter_mut().zip(&self.scale) {
            let z: f64 = self.rng.sample(StandardNormal);
            *o = s * z;
        }
        Ok(())
    }
}

/// A prerecorded path of increments.
pub struct PathNoise<'a> {
    path: &'a [VelocityState],
    next: usize,
}

impl<'a> PathNoise<'a> {
    pub fn new(path: &'a [VelocityState]) -> Self {
        PathNoise { path, next: 0 }
    }
}

impl NoiseFeed for PathNoise<'_> {
    fn next_increment(&mut self, out: &mut [f64]) -> Result<()> {
        let inc = self.path.get(self.next).ok_or_else(|| {
            Error::InvalidParameter(format!("noise path exhausted after {} steps", self.next))
        })?;
        if inc.len() != out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                got: inc.len(),
            });
        }
        out.copy_from_slice(inc.coeffs());
        self.next += 1;
        Ok(())
    }
}

/// Draw an explicit noise path of `steps` increments.
pub fn sample_noise_path<R: Rng>(
    cov: &CovarianceSpec,
    dt: f64,
    steps: usize,
    rng: R,
) -> Vec<VelocityState> {
    let mut feed = StreamNoise::new(cov, dt, rng);
    (0..steps)
        .map(|_| {
            let mut v = VelocityState::zeros(cov.len());
            feed.next_increment(v.coeffs_mut())
                .expect("stream noise never fails");
            v
        })
        .collect()
}

/// Per-worker stepping state: precomputed linear factors and buffers.
pub struct Stepper<'m> {
    model: &'m Model,
    dt: f64,
    decay: Vec<f64>,
    /// `(1 - e^{-νλ dt}) / dt`, the effective linear drift rate per step.
    linear_rate: Vec<f64>,
    in_f: Vec<bool>,
    nonlinear_term: Vec<f64>,
    scratch: ConvolutionScratch,
    increment: Vec<f64>,
    drift_f: Vec<f64>,
    dw_f: Vec<f64>,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m Model, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let m = model.dim();
        let decay: Vec<f64> = model
            .basis
            .eigenvalues()
            .iter()
            .map(|l| (-model.nu * l * dt).exp())
            .collect();
        let linear_rate = decay.iter().map(|e| -(e - 1.0) / dt).collect();
        let mut in_f = vec![false; m];
        for &i in model.subspace.indices() {
            in_f[i] = true;
        }
        let d = model.subspace.dim();
        Ok(Stepper {
            model,
            dt,
            decay,
            linear_rate,
            in_f,
            nonlinear_term: vec![0.0; m],
            scratch: model.basis.scratch(),
            increment: vec![0.0; m],
            drift_f: vec![0.0; d],
            dw_f: vec![0.0; d],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    /// Advance `state` from time `time` to `time + dt` with the given
    /// colored increment. The weight, when present, is updated with the
    /// same increment; it is required for [`SystemVariant::TruncatedVn`].
    pub fn step(
        &mut self,
        state: &mut VelocityState,
        variant: &SystemVariant,
        time: f64,
        increment: &[f64],
        weight: Option<&mut GirsanovWeight>,
    ) -> Result<()> {
        let dt = self.dt;
        let u = state.coeffs_mut();
        if self.model.nonlinear {
            self.model
                .basis
                .bilinear_into(u, u, &mut self.nonlinear_term, &mut self.scratch);
        } else {
            self.nonlinear_term.iter_mut().for_each(|x| *x = 0.0);
        }

        let f_drift_active = match *variant {
            SystemVariant::FullU => true,
            SystemVariant::ReducedV => false,
            SystemVariant::TruncatedVn { .. } => match &weight {
                // left-point indicator: the F-drift returns once stopped
                Some(w) => w.stopped,
                None => {
                    return Err(Error::InvalidParameter(
                        "truncated_vn needs a Girsanov weight".into(),
                    ))
                }
            },
            SystemVariant::KilledUEps { t, eps } => time < t - eps - 0.5 * dt,
        };

        if let Some(w) = weight {
            // S⁺π_F of the drift this scheme actually applies to F, so that
            // the weight is the exact likelihood ratio of one step
            let sigmas = self.model.cov.sigmas();
            for (a, &i) in self.model.subspace.indices().iter().enumerate() {
                let drift = self.linear_rate[i] * u[i] + self.decay[i] * self.nonlinear_term[i];
                self.drift_f[a] = drift / sigmas[i];
                self.dw_f[a] = increment[i] / sigmas[i];
            }
            w.accumulate(&self.drift_f, &self.dw_f, dt, time + dt);
        }

        for i in 0..u.len() {
            if f_drift_active || !self.in_f[i] {
                u[i] = self.decay[i] * (u[i] - dt * self.nonlinear_term[i]) + increment[i];
            } else {
                u[i] += increment[i];
            }
        }

        let norm = state.norm();
        if !norm.is_finite() || norm > BLOW_UP_NORM {
            return Err(Error::BlowUp {
                time: time + dt,
                norm,
            });
        }
        Ok(())
    }

    /// Run `steps` steps, calling `observe(k, state, weight)` at every grid
    /// time `k·dt` including `k = 0`. Returns the final weight.
    pub fn drive<N, O>(
        &mut self,
        x0: &VelocityState,
        variant: &SystemVariant,
        steps: usize,
        noise: &mut N,
        mut weight: Option<GirsanovWeight>,
        mut observe: O,
    ) -> Result<(VelocityState, Option<GirsanovWeight>)>
    where
        N: NoiseFeed,
        O: FnMut(usize, &VelocityState, Option<&GirsanovWeight>),
    {
        variant.validate()?;
        if x0.len() != self.model.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim(),
                got: x0.len(),
            });
        }
        let mut state = x0.clone();
        observe(0, &state, weight.as_ref());
        let mut inc = std::mem::take(&mut self.increment);
        for k in 0..steps {
            if let Err(e) = noise.next_increment(&mut inc) {
                self.increment = inc;
                return Err(e);
            }
            let r = self.step(&mut state, variant, grid_time(k, self.dt), &inc, weight.as_mut());
            if let Err(e) = r {
                self.increment = inc;
                return Err(e);
            }
            observe(k + 1, &state, weight.as_ref());
        }
        self.increment = inc;
        Ok((state, weight))
    }
}

/// Number of steps of length `dt` covering `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("need T > 0 and dt > 0, got T={t_end}, dt={dt}")));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidParameter(format!("dt={dt} does not divide T={t_end}")));
    }
    Ok(n as usize)
}

/// Time of grid step `k`, exact in decimal when `1/dt` is an integer.
pub fn grid_time(k: usize, dt: f64) -> f64 {
    let m = (1.0 / dt).round();
    if m >= 1.0 && (m * dt - 1.0).abs() < 1e-12 {
        k as f64 / m
    } else {
        k as f64 * dt
    }
}

/// Grid index of `t`, rejecting off-grid times.
pub fn grid_index(t: f64, dt: f64) -> Result<usize> {
    let k = (t / dt).round();
    if k < 0.0 || (k * dt - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::OffGrid(t));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub variant: SystemVariant,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<VelocityState>,
    /// `log G` along the path; present iff the variant is truncated.
    pub weight_log: Option<Vec<f64>>,
    /// Running stopping integral, alongside `weight_log`.
    pub stopping_integral: Option<Vec<f64>>,
    /// First grid time at which the stopping integral reached the threshold.
    pub tau_hit: Option<f64>,
}

impl Trajectory {
    pub fn state_at(&self, t: f64) -> Result<&VelocityState> {
        let k = grid_index(t, self.dt)?;
        self.states.get(k).ok_or(Error::OffGrid(t))
    }

    pub fn sup_norm(&self) -> f64 {
        self.states.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }
}

pub enum NoiseSpec<'a> {
    Seed(u64),
    Path(&'a [VelocityState]),
}

/// Full trajectory on `[0, T]`, every grid state retained.
pub fn simulate(
    model: &Model,
    x0: &VelocityState,
    variant: SystemVariant,
    t_end: f64,
    dt: f64,
    noise: NoiseSpec<'_>,
) -> Result<Trajectory> {
    use rand::SeedableRng;
    let steps = step_count(t_end, dt)?;
    let mut stepper = Stepper::new(model, dt)?;
    let weight = match variant {
        SystemVariant::TruncatedVn { threshold } => Some(GirsanovWeight::new(threshold)),
        _ => None,
    };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut logs = weight.as_ref().map(|_| Vec::with_capacity(steps + 1));
    let mut integrals = weight.as_ref().map(|_| Vec::with_capacity(steps + 1));
    let observe = |k: usize, s: &VelocityState, w: Option<&GirsanovWeight>| {
        times.push(grid_time(k, dt));
        states.push(s.clone());
        if let (Some(l), Some(i), Some(w)) = (logs.as_mut(), integrals.as_mut(), w) {
            l.push(w.log_g);
            i.push(w.stopping_integral);
        }
    };
    let (_, weight) = match noise {
        NoiseSpec::Seed(seed) => {
            let mut feed = StreamNoise::new(&model.cov, dt, StreamRng::seed_from_u64(seed));
            stepper.drive(x0, &variant, steps, &mut feed, weight, observe)?
        }
        NoiseSpec::Path(path) => {
            let mut feed = PathNoise::new(path);
            stepper.drive(x0, &variant, steps, &mut feed, weight, observe)?
        }
    };
    Ok(Trajectory {
        variant,
        dt,
        times,
        states,
        weight_log: logs,
        stopping_integral: integrals,
        tau_hit: weight.and_then(|w| w.tau_hit),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    /// Monte-Carlo estimate of `E[sup_[0,T] ‖u‖_H^p]`.
    pub lhs: f64,
    /// Estimate from the first half of the ensemble.
    pub lhs_half: f64,
    /// `lhs / (1 + ‖x0‖^p)`, the calibrated constant.
    pub c_p: f64,
    pub bound_ok: bool,
}

/// Moment bound check from per-trajectory sup norms.
pub fn energy_moment_check(sup_norms: &[f64], x0_norm: f64, p: f64) -> Result<MomentCheck> {
    if sup_norms.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    let powered: Vec<f64> = sup_norms.iter().map(|s| s.powf(p)).collect();
    let lhs = mean_stderr(&powered).mean;
    let half = powered.len().div_ceil(2);
    let lhs_half = mean_stderr(&powered[..half]).mean;
    let stable = if lhs == 0.0 {
        lhs_half == 0.0
    } else {
        ((lhs_half - lhs) / lhs).abs() <= 0.10
    };
    Ok(MomentCheck {
        lhs,
        lhs_half,
        c_p: lhs / (1.0 + x0_norm.powf(p)),
        bound_ok: lhs.is_finite() && stable,
    })
}

/// Convenience for trajectory ensembles.
pub fn energy_moment_check_trajectories(
    ensemble: &[Trajectory],
    p: f64,
) -> Result<MomentCheck> {
    let x0 = ensemble
        .first()
        .ok_or(Error::TooFewSamples { needed: 1, got: 0 })?
        .states[0]
        .norm();
    let sups: Vec<f64> = ensemble.iter().map(|t| t.sup_norm()).collect();
    energy_moment_check(&sups, x0, p)
}
