//! Time-regularity experiments on `π_F u(t)`: L¹ and Besov distances
//! between density estimates at pairs of times, their log-log exponent
//! fits, and the small-time growth of the Besov norm.
//!
//! One ensemble serves every experiment that is run on it. Densities are
//! histograms on a box shared by all recorded times, optionally smoothed
//! by [`mollify`]. Standard errors come from contiguous batches of the
//! ensemble; the noise floor is the distance between the two halves of
//! the ensemble at the base time, divided by `√2`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::basis::VelocityState;
use crate::config::ExperimentConfig;
use crate::density::{
    besov_distance, besov_seminorm, default_shifts, estimate_density, hoelder_fit, l1_distance,
    mollify, Grid, GridFunction, HoelderFit, Samples, Shift,
};
use crate::ensemble::{run_ensemble, Ensemble, EnsembleSpec};
use crate::error::{Error, Result};
use crate::integrator::{grid_index, grid_time, step_count, Model, SystemVariant};
use crate::stats::{linear_fit, LinearFit};

/// Largest tolerated fraction of blown-up trajectories.
pub const MAX_BLOW_UP_FRACTION: f64 = 0.01;

/// A simulated full-system ensemble with everything needed to analyse it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub model: Model,
    pub x0: VelocityState,
    pub ensemble: Ensemble,
}

/// Simulates the full system, recording every pair time and every
/// small-time probe.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let model = config.model()?;
    let x0 = config.x0.build(&model.basis)?;
    let steps = step_count(config.t_end, config.dt)?;
    let mut record: Vec<usize> = Vec::new();
    for (s, t) in config.pairs()? {
        record.push(grid_index(s, config.dt)?);
        record.push(grid_index(t, config.dt)?);
    }
    for t in config.timedep_times() {
        if t <= config.t_end + 1e-12 {
            record.push(grid_index(t, config.dt)?);
        }
    }
    record.sort_unstable();
    record.dedup();
    let spec = EnsembleSpec {
        variant: SystemVariant::FullU,
        weight_threshold: None,
        dt: config.dt,
        steps,
        size: config.ensemble_size,
        master_seed: config.master_seed,
        record_steps: record,
    };
    let ensemble = run_ensemble(&model, &x0, &spec, config.worker_count()?)?;
    ensemble.check_blow_ups(MAX_BLOW_UP_FRACTION)?;
    Ok(Prepared {
        config: config.clone(),
        model,
        x0,
        ensemble,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    L1,
    /// `‖·‖_{L¹} + [·]_{B^α_{1,∞}}` with differences of order `n`.
    Besov { alpha: f64, n: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub s: f64,
    pub t: f64,
    pub gap: f64,
    pub distance: f64,
    pub stderr: f64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    pub metric: Metric,
    pub rows: Vec<DistanceRow>,
    pub noise_floor: f64,
    pub fit: Option<HoelderFit>,
}

impl DistanceTable {
    pub fn fit(&self) -> Result<&HoelderFit> {
        self.fit
            .as_ref()
            .ok_or(Error::FitRefused(self.rows.iter().filter(|r| r.used).count()))
    }

    pub fn distances_csv(&self) -> String {
        let mut out = String::from("s,t,gap,distance,stderr,used\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.s, r.t, r.gap, r.distance, r.stderr, r.used);
        }
        out
    }

    pub fn fit_csv(&self) -> String {
        let mut out = String::from("slope,intercept,r2,noise_floor\n");
        match &self.fit {
            Some(f) => {
                let _ = writeln!(out, "{},{},{},{}", f.slope, f.intercept, f.r_squared, self.noise_floor);
            }
            None => {
                let _ = writeln!(out, "NaN,NaN,NaN,{}", self.noise_floor);
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("distances.csv"), self.distances_csv())?;
        std::fs::write(dir.join("fit.csv"), self.fit_csv())?;
        Ok(())
    }
}

/// Histogram on `grid`, smoothed by `cells` cell widths when positive.
pub fn smoothed_density(samples: &Samples, grid: &Grid, cells: f64) -> Result<GridFunction> {
    let raw = estimate_density(samples, grid)?.density;
    if cells > 0.0 {
        mollify(&raw, cells * grid.cell_width())
    } else {
        Ok(raw)
    }
}

struct Estimator<'a> {
    metric: Metric,
    shifts: &'a [Shift],
}

impl Estimator<'_> {
    fn distance(&self, f: &GridFunction, g: &GridFunction) -> Result<f64> {
        match self.metric {
            Metric::L1 => l1_distance(f, g),
            Metric::Besov { alpha, n } => besov_distance(f, g, alpha, n, self.shifts),
        }
    }
}

/// Distances for every configured pair, with batch standard errors, the
/// noise floor at each base time, and the exponent fit.
pub fn distance_table(prepared: &Prepared, metric: Metric) -> Result<DistanceTable> {
    let cfg = &prepared.config;
    let pairs = cfg.pairs()?;
    let mut times: Vec<usize> = pairs
        .iter()
        .flat_map(|&(s, t)| [grid_index(s, cfg.dt), grid_index(t, cfg.dt)])
        .collect::<Result<_>>()?;
    times.sort_unstable();
    times.dedup();
    let at = |k: usize| grid_time(k, cfg.dt);

    let samples: BTreeMap<usize, Samples> = times
        .iter()
        .map(|&k| Ok((k, prepared.ensemble.project(at(k))?)))
        .collect::<Result<_>>()?;
    let refs: Vec<&Samples> = samples.values().collect();
    let grid = Grid::covering(&refs, cfg.box_sds, cfg.bins_per_axis())?;
    let shifts = default_shifts(&grid);
    let est = Estimator {
        metric,
        shifts: &shifts,
    };
    let cells = cfg.mollify_cells;

    let full: BTreeMap<usize, GridFunction> = samples
        .iter()
        .map(|(&k, s)| Ok((k, smoothed_density(s, &grid, cells)?)))
        .collect::<Result<_>>()?;

    let n = refs[0].len();
    let nb = cfg.batches;
    let batch = |b: usize, parts: usize, k: usize| -> Result<GridFunction> {
        let range = (b * n / parts)..((b + 1) * n / parts);
        let s = prepared.ensemble.project_range(at(k), range)?;
        smoothed_density(&s, &grid, cells)
    };
    let batched: Vec<BTreeMap<usize, GridFunction>> = if nb > 1 {
        (0..nb)
            .map(|b| times.iter().map(|&k| Ok((k, batch(b, nb, k)?))).collect())
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    // one floor per distinct base time; the largest one is used
    let mut floors: BTreeMap<usize, f64> = BTreeMap::new();
    for &(s, _) in &pairs {
        let k = grid_index(s, cfg.dt)?;
        if let std::collections::btree_map::Entry::Vacant(e) = floors.entry(k) {
            let d = est.distance(&batch(0, 2, k)?, &batch(1, 2, k)?)?;
            e.insert(d / std::f64::consts::SQRT_2);
        }
    }
    let noise_floor = floors.values().copied().fold(0.0, f64::max);

    let mut rows = Vec::with_capacity(pairs.len());
    for &(s, t) in &pairs {
        let (ks, kt) = (grid_index(s, cfg.dt)?, grid_index(t, cfg.dt)?);
        let distance = est.distance(&full[&ks], &full[&kt])?;
        let stderr = if batched.is_empty() {
            f64::NAN
        } else {
            let per: Vec<f64> = batched
                .iter()
                .map(|m| est.distance(&m[&ks], &m[&kt]))
                .collect::<Result<_>>()?;
            crate::stats::variance(&per).sqrt() / (nb as f64).sqrt()
        };
        rows.push(DistanceRow {
            s: at(ks),
            t: at(kt),
            gap: at(kt - ks),
            distance,
            stderr,
            used: distance > noise_floor,
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.gap, r.distance)).collect();
    let fit = hoelder_fit(&points, noise_floor).ok();
    Ok(DistanceTable {
        metric,
        rows,
        noise_floor,
        fit,
    })
}

pub fn run_l1_holder(config: &ExperimentConfig, out: Option<&Path>) -> Result<DistanceTable> {
    let prepared = prepare(config)?;
    let table = distance_table(&prepared, Metric::L1)?;
    if let Some(dir) = out {
        table.write(dir)?;
    }
    Ok(table)
}

pub fn run_besov_holder(config: &ExperimentConfig, out: Option<&Path>) -> Result<DistanceTable> {
    config.validate_besov()?;
    let prepared = prepare(config)?;
    let table = besov_table(&prepared)?;
    if let Some(dir) = out {
        table.write(dir)?;
    }
    Ok(table)
}

pub fn besov_table(prepared: &Prepared) -> Result<DistanceTable> {
    let cfg = &prepared.config;
    cfg.validate_besov()?;
    distance_table(
        prepared,
        Metric::Besov {
            alpha: cfg.alpha,
            n: cfg.n_diff,
        },
    )
}

/// Both experiments on one ensemble, written to `out/l1` and `out/besov`.
pub fn run_holder_pair(config: &ExperimentConfig, out: Option<&Path>) -> Result<(DistanceTable, DistanceTable)> {
    config.validate_besov()?;
    let prepared = prepare(config)?;
    let l1 = distance_table(&prepared, Metric::L1)?;
    let besov = besov_table(&prepared)?;
    if let Some(dir) = out {
        l1.write(&dir.join("l1"))?;
        besov.write(&dir.join("besov"))?;
    }
    Ok((l1, besov))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrowth {
    pub times: Vec<f64>,
    /// `‖f(t)‖_{B^α_{1,∞}}` per time.
    pub norms: Vec<f64>,
    pub fit: LinearFit,
}

impl TimeGrowth {
    pub fn csv(&self) -> String {
        let mut out = String::from("t,norm\n");
        for (t, n) in self.times.iter().zip(&self.norms) {
            let _ = writeln!(out, "{t},{n}");
        }
        out
    }
}

/// Besov norm of the density at each small-time probe, on a box scaled
/// to that time's spread, and the log-log slope against `t`.
pub fn time_growth(prepared: &Prepared) -> Result<TimeGrowth> {
    let cfg = &prepared.config;
    let alpha = cfg.timedep_alpha;
    let n = cfg.n_diff.max(1);
    let mut times = Vec::new();
    let mut norms = Vec::new();
    for t in cfg.timedep_times() {
        if t > cfg.t_end + 1e-12 {
            continue;
        }
        let s = prepared.ensemble.project(t)?;
        let grid = Grid::covering(&[&s], cfg.box_sds, cfg.bins_per_axis())?;
        let f = smoothed_density(&s, &grid, cfg.mollify_cells)?;
        let norm = f.l1_norm() + besov_seminorm(&f, alpha, n, &default_shifts(&grid))?;
        times.push(t);
        norms.push(norm);
    }
    if times.len() < 4 {
        return Err(Error::FitRefused(times.len()));
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    Ok(TimeGrowth {
        fit: linear_fit(&x, &y),
        times,
        norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        for kv in [
            "cutoff=1",
            "nonlinear=false",
            "ensemble_size=4000",
            "dt=0.01",
            "gap_min=0.04",
            "gap_count=6",
            "bins=32",
            "mollify_cells=2",
            "batches=2",
            "workers=1",
        ] {
            c.set_pair(kv).unwrap();
        }
        c
    }

    #[test]
    fn l1_table_shape_and_csv() {
        let p = prepare(&small_config()).unwrap();
        let t = distance_table(&p, Metric::L1).unwrap();
        assert_eq!(t.rows.len(), 6);
        assert!(t.rows.iter().all(|r| r.distance >= 0.0 && r.distance <= 2.0));
        let csv = t.distances_csv();
        assert!(csv.starts_with("s,t,gap,distance,stderr,used\n0.5,0.54,"));
        assert_eq!(csv.lines().count(), 7);
        assert!(t.fit_csv().starts_with("slope,intercept,r2,noise_floor\n"));
    }

    #[test]
    fn besov_dominates_l1() {
        let p = prepare(&small_config()).unwrap();
        let l1 = distance_table(&p, Metric::L1).unwrap();
        let b = besov_table(&p).unwrap();
        for (a, c) in l1.rows.iter().zip(&b.rows) {
            assert!(a.distance <= c.distance);
        }
    }

    #[test]
    fn besov_hypothesis_enforced() {
        let mut c = small_config();
        c.set("alpha", "0.5").unwrap();
        c.set("beta", "0.6").unwrap();
        assert!(matches!(run_besov_holder(&c, None), Err(Error::Config(_))));
    }
}
