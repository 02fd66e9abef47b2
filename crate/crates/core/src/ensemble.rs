//! Trajectory-parallel ensembles that keep only what the analyses need:
//! F-coordinates, weight and stopping integral at chosen grid steps, and
//! the running sup of the H-norm.
//!
//! Trajectory `i` draws its noise from `seed_split(master, i)` alone, so
//! results do not depend on the worker count, and two ensembles with the
//! same master seed are driven by the same noise paths.

use rayon::prelude::*;

use crate::basis::VelocityState;
use crate::density::Samples;
use crate::error::{Error, Result};
use crate::girsanov::GirsanovWeight;
use crate::integrator::{grid_index, Model, Stepper, StreamNoise, SystemVariant};
use crate::seed::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub variant: SystemVariant,
    /// Attach a weight with this threshold. Ignored for the truncated
    /// variant, which always carries its own.
    pub weight_threshold: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub size: usize,
    pub master_seed: u64,
    /// Grid steps to record, strictly increasing, each ≤ `steps`.
    pub record_steps: Vec<usize>,
}

impl EnsembleSpec {
    fn threshold(&self) -> Option<f64> {
        match self.variant {
            SystemVariant::TruncatedVn { threshold } => Some(threshold),
            _ => self.weight_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    /// F-coordinates, `record_steps.len() × d`, row-major.
    pub f_coords: Vec<f64>,
    /// `log G` per record step; empty without a weight.
    pub log_g: Vec<f64>,
    /// Stopping integral per record step; empty without a weight.
    pub integral: Vec<f64>,
    pub sup_norm: f64,
    /// Time of blow-up, if the trajectory was aborted.
    pub blow_up: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub dim_f: usize,
    pub paths: Vec<PathRecord>,
}

/// Thread pool with the requested worker count (0 = available parallelism).
pub fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

pub fn run_ensemble(
    model: &Model,
    x0: &VelocityState,
    spec: &EnsembleSpec,
    workers: usize,
) -> Result<Ensemble> {
    spec.variant.validate()?;
    if spec.size == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if spec.record_steps.windows(2).any(|w| w[0] >= w[1])
        || spec.record_steps.last().is_some_and(|&s| s > spec.steps)
    {
        return Err(Error::InvalidParameter(
            "record steps must be strictly increasing and within the horizon".into(),
        ));
    }
    // validates dt and dimensions once, before fanning out
    Stepper::new(model, spec.dt)?;
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x0.len(),
        });
    }
    let d = model.subspace.dim();
    let paths = pool(workers)?.install(|| {
        (0..spec.size)
            .into_par_iter()
            .map_init(
                || Stepper::new(model, spec.dt).expect("validated above"),
                |stepper, i| run_path(stepper, x0, spec, i as u64),
            )
            .collect::<Vec<_>>()
    });
    Ok(Ensemble {
        spec: spec.clone(),
        dim_f: d,
        paths,
    })
}

fn run_path(stepper: &mut Stepper<'_>, x0: &VelocityState, spec: &EnsembleSpec, index: u64) -> PathRecord {
    let model = stepper.model();
    let indices = model.subspace.indices().to_vec();
    let r = spec.record_steps.len();
    let with_weight = spec.threshold().is_some();
    let mut rec = PathRecord {
        f_coords: Vec::with_capacity(r * indices.len()),
        log_g: Vec::with_capacity(if with_weight { r } else { 0 }),
        integral: Vec::with_capacity(if with_weight { r } else { 0 }),
        sup_norm: 0.0,
        blow_up: None,
    };
    let mut next = 0;
    let mut noise = StreamNoise::new(&model.cov, spec.dt, stream(spec.master_seed, index));
    let weight = spec.threshold().map(GirsanovWeight::new);
    let outcome = stepper.drive(x0, &spec.variant, spec.steps, &mut noise, weight, |k, s, w| {
        rec.sup_norm = rec.sup_norm.max(s.norm());
        if next < r && spec.record_steps[next] == k {
            rec.f_coords.extend(indices.iter().map(|&i| s.coeffs()[i]));
            if let Some(w) = w {
                rec.log_g.push(w.log_g);
                rec.integral.push(w.stopping_integral);
            }
            next += 1;
        }
    });
    if let Err(Error::BlowUp { time, .. }) = outcome {
        rec.blow_up = Some(time);
        rec.sup_norm = f64::INFINITY;
    }
    rec
}

impl Ensemble {
    pub fn blow_ups(&self) -> usize {
        self.paths.iter().filter(|p| p.blow_up.is_some()).count()
    }

    /// Fails when more than `max_fraction` of the paths blew up.
    pub fn check_blow_ups(&self, max_fraction: f64) -> Result<()> {
        let failed = self.blow_ups();
        if failed as f64 > max_fraction * self.paths.len() as f64 {
            return Err(Error::TooManyBlowUps {
                failed,
                total: self.paths.len(),
            });
        }
        Ok(())
    }

    fn slot(&self, t: f64) -> Result<usize> {
        let k = grid_index(t, self.spec.dt)?;
        self.spec
            .record_steps
            .binary_search(&k)
            .map_err(|_| Error::OffGrid(t))
    }

    fn healthy(&self) -> impl Iterator<Item = &PathRecord> {
        self.paths.iter().filter(|p| p.blow_up.is_none())
    }

    /// F-coordinates of every surviving path at recorded time `t`.
    pub fn project(&self, t: f64) -> Result<Samples> {
        let j = self.slot(t)?;
        let d = self.dim_f;
        let mut data = Vec::with_capacity(self.paths.len() * d);
        for p in self.healthy() {
            data.extend_from_slice(&p.f_coords[j * d..(j + 1) * d]);
        }
        Samples::new(d, data)
    }

    /// Like [`Ensemble::project`] restricted to paths `range`, counted
    /// among surviving paths.
    pub fn project_range(&self, t: f64, range: std::ops::Range<usize>) -> Result<Samples> {
        let full = self.project(t)?;
        let d = self.dim_f;
        let hi = range.end.min(full.len());
        Samples::new(d, full.data()[range.start * d..hi * d].to_vec())
    }

    pub fn log_g(&self, t: f64) -> Result<Vec<f64>> {
        let j = self.slot(t)?;
        self.healthy()
            .map(|p| p.log_g.get(j).copied().ok_or_else(|| Error::InvalidParameter("ensemble has no weight".into())))
            .collect()
    }

    pub fn stopping_integral(&self, t: f64) -> Result<Vec<f64>> {
        let j = self.slot(t)?;
        self.healthy()
            .map(|p| p.integral.get(j).copied().ok_or_else(|| Error::InvalidParameter("ensemble has no weight".into())))
            .collect()
    }

    pub fn sup_norms(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.sup_norm).collect()
    }
}
