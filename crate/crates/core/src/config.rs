//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! cutoff = 2
//! f_indices = 0,1
//! x0 = random:0.5:7
//! time_pairs = 0.5:0.504, 0.5:0.6
//! ```
//!
//! Every key can also be set with [`ExperimentConfig::set`], which is what
//! the command line's `--set key=value` uses.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::basis::{Basis, VelocityState};
use crate::error::{Error, Result};
use crate::integrator::{grid_index, grid_time, step_count, Model};
use crate::noise::{CovarianceSpec, SubspaceF};
use crate::seed::stream;

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "NSREG_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    /// One basis coefficient set to `amplitude`.
    Mode { index: usize, amplitude: f64 },
    /// Uniform direction with H-norm `norm`, drawn from `seed`.
    Random { norm: f64, seed: u64 },
}

impl InitialCondition {
    fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || Error::Config(format!("bad x0 `{s}`; expected zero | mode:<i>:<amp> | random:<norm>:<seed>"));
        match parts.as_slice() {
            ["zero"] => Ok(InitialCondition::Zero),
            ["mode", i, a] => Ok(InitialCondition::Mode {
                index: i.parse().map_err(|_| bad())?,
                amplitude: a.parse().map_err(|_| bad())?,
            }),
            ["random", n, seed] => Ok(InitialCondition::Random {
                norm: n.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }

    fn render(&self) -> String {
        match self {
            InitialCondition::Zero => "zero".into(),
            InitialCondition::Mode { index, amplitude } => format!("mode:{index}:{amplitude}"),
            InitialCondition::Random { norm, seed } => format!("random:{norm}:{seed}"),
        }
    }

    pub fn build(&self, basis: &Basis) -> Result<VelocityState> {
        let m = basis.len();
        match *self {
            InitialCondition::Zero => Ok(basis.zeros()),
            InitialCondition::Mode { index, amplitude } => {
                if index >= m {
                    return Err(Error::Config(format!("x0 mode {index} out of range for M = {m}")));
                }
                Ok(VelocityState::unit(m, index).scaled(amplitude))
            }
            InitialCondition::Random { norm, seed } => {
                let mut rng = stream(seed, 0);
                let v = VelocityState::from_vec((0..m).map(|_| rng.random_range(-1.0..1.0)).collect());
                let n = v.norm();
                Ok(v.scaled(norm / n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cutoff: i32,
    pub nu: f64,
    pub gamma: f64,
    pub sigma0: f64,
    pub nonlinear: bool,
    pub f_indices: Vec<usize>,
    /// Dimension of F; must equal `f_indices.len()`.
    pub d: usize,
    pub x0: InitialCondition,
    pub t_end: f64,
    pub dt: f64,
    pub ensemble_size: usize,
    /// Explicit `(s, t)` pairs; generated from the gap keys when empty.
    pub time_pairs: Vec<(f64, f64)>,
    pub base_time: f64,
    pub gap_min: f64,
    pub gap_max: f64,
    pub gap_count: usize,
    pub alpha: f64,
    pub beta: f64,
    pub n_diff: u32,
    /// Box half-width in units of the largest marginal standard deviation.
    pub box_sds: f64,
    /// Bins per axis; 0 picks 1024 for d = 1 and 128 for d = 2.
    pub bins: usize,
    /// Mollifier radius in cells; 0 disables smoothing.
    pub mollify_cells: f64,
    /// Batches used for distance standard errors.
    pub batches: usize,
    pub timedep_alpha: f64,
    pub timedep_t_min: f64,
    pub timedep_t_max: f64,
    pub timedep_count: usize,
    pub diag_ensemble_size: usize,
    pub diag_time: f64,
    pub master_seed: u64,
    /// 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cutoff: 2,
            nu: 1.0,
            gamma: 1.0,
            sigma0: 1.0,
            nonlinear: true,
            f_indices: vec![0, 1],
            d: 2,
            x0: InitialCondition::Zero,
            t_end: 1.0,
            dt: 1e-3,
            ensemble_size: 100_000,
            time_pairs: Vec::new(),
            base_time: 0.5,
            gap_min: 4e-3,
            gap_max: 0.5,
            gap_count: 12,
            alpha: 0.2,
            beta: 0.5,
            n_diff: 2,
            box_sds: 6.0,
            bins: 0,
            mollify_cells: 12.0,
            batches: 8,
            timedep_alpha: 0.5,
            timedep_t_min: 0.01,
            timedep_t_max: 1.0,
            timedep_count: 12,
            diag_ensemble_size: 10_000,
            diag_time: 0.5,
            master_seed: 42,
            workers: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse `{v}` for key `{key}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse `{v}` for key `{key}` as a boolean"))),
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "cutoff" => self.cutoff = parse(key, v)?,
            "nu" => self.nu = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "sigma0" => self.sigma0 = parse(key, v)?,
            "nonlinear" => self.nonlinear = parse_bool(key, v)?,
            "f_indices" => {
                self.f_indices = parse_list(key, v)?;
                self.d = self.f_indices.len();
            }
            "d" => self.d = parse(key, v)?,
            "x0" => self.x0 = InitialCondition::parse(v)?,
            "t_end" | "T" => self.t_end = parse(key, v)?,
            "dt" => self.dt = parse(key, v)?,
            "ensemble_size" => self.ensemble_size = parse(key, v)?,
            "time_pairs" => {
                self.time_pairs = v
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| {
                        let (s, t) = p
                            .split_once(':')
                            .ok_or_else(|| Error::Config(format!("time pair `{p}` is not s:t")))?;
                        Ok((parse(key, s.trim())?, parse(key, t.trim())?))
                    })
                    .collect::<Result<_>>()?;
            }
            "base_time" => self.base_time = parse(key, v)?,
            "gap_min" => self.gap_min = parse(key, v)?,
            "gap_max" => self.gap_max = parse(key, v)?,
            "gap_count" => self.gap_count = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "n_diff" => self.n_diff = parse(key, v)?,
            "box_sds" => self.box_sds = parse(key, v)?,
            "bins" => self.bins = parse(key, v)?,
            "mollify_cells" => self.mollify_cells = parse(key, v)?,
            "batches" => self.batches = parse(key, v)?,
            "timedep_alpha" => self.timedep_alpha = parse(key, v)?,
            "timedep_t_min" => self.timedep_t_min = parse(key, v)?,
            "timedep_t_max" => self.timedep_t_max = parse(key, v)?,
            "timedep_count" => self.timedep_count = parse(key, v)?,
            "diag_ensemble_size" => self.diag_ensemble_size = parse(key, v)?,
            "diag_time" => self.diag_time = parse(key, v)?,
            "master_seed" => self.master_seed = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k, v)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    /// Round-trippable text form.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        let pairs = self
            .time_pairs
            .iter()
            .map(|(s, t)| format!("{s}:{t}"))
            .collect::<Vec<_>>()
            .join(",");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("cutoff", self.cutoff.to_string());
        kv("nu", self.nu.to_string());
        kv("gamma", self.gamma.to_string());
        kv("sigma0", self.sigma0.to_string());
        kv("nonlinear", self.nonlinear.to_string());
        kv("f_indices", join(&self.f_indices));
        kv("d", self.d.to_string());
        kv("x0", self.x0.render());
        kv("t_end", self.t_end.to_string());
        kv("dt", self.dt.to_string());
        kv("ensemble_size", self.ensemble_size.to_string());
        kv("time_pairs", pairs);
        kv("base_time", self.base_time.to_string());
        kv("gap_min", self.gap_min.to_string());
        kv("gap_max", self.gap_max.to_string());
        kv("gap_count", self.gap_count.to_string());
        kv("alpha", self.alpha.to_string());
        kv("beta", self.beta.to_string());
        kv("n_diff", self.n_diff.to_string());
        kv("box_sds", self.box_sds.to_string());
        kv("bins", self.bins.to_string());
        kv("mollify_cells", self.mollify_cells.to_string());
        kv("batches", self.batches.to_string());
        kv("timedep_alpha", self.timedep_alpha.to_string());
        kv("timedep_t_min", self.timedep_t_min.to_string());
        kv("timedep_t_max", self.timedep_t_max.to_string());
        kv("timedep_count", self.timedep_count.to_string());
        kv("diag_ensemble_size", self.diag_ensemble_size.to_string());
        kv("diag_time", self.diag_time.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("workers", self.workers.to_string());
        out
    }

    pub fn bins_per_axis(&self) -> usize {
        match (self.bins, self.d) {
            (0, 1) => 1024,
            (0, _) => 128,
            (b, _) => b,
        }
    }

    /// Configured workers, overridden by the environment when set.
    pub fn worker_count(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) if !v.trim().is_empty() => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV}=`{v}` is not a worker count"))),
            _ => Ok(self.workers),
        }
    }

    /// Explicit pairs, or `(base, base + δ)` for `gap_count` log-spaced
    /// `δ ∈ [gap_min, gap_max]` rounded to the time grid.
    pub fn pairs(&self) -> Result<Vec<(f64, f64)>> {
        if !self.time_pairs.is_empty() {
            return Ok(self.time_pairs.clone());
        }
        let k0 = grid_index(self.base_time, self.dt)?;
        let lo = (self.gap_min / self.dt).round().max(1.0);
        let hi = (self.gap_max / self.dt).round().max(lo);
        let n = self.gap_count.max(2);
        let mut steps: Vec<usize> = (0..n)
            .map(|i| (lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).round() as usize)
            .collect();
        steps.dedup();
        Ok(steps
            .into_iter()
            .map(|g| (grid_time(k0, self.dt), grid_time(k0 + g, self.dt)))
            .collect())
    }

    /// Log-spaced grid times in `[timedep_t_min, timedep_t_max]`.
    pub fn timedep_times(&self) -> Vec<f64> {
        let n = self.timedep_count.max(2);
        let (a, b) = (self.timedep_t_min, self.timedep_t_max);
        let mut ks: Vec<usize> = (0..n)
            .map(|i| {
                let t = a * (b / a).powf(i as f64 / (n - 1) as f64);
                ((t / self.dt).round() as usize).max(1)
            })
            .collect();
        ks.dedup();
        ks.into_iter().map(|k| grid_time(k, self.dt)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 1 {
            return Err(Error::InvalidCutoff(self.cutoff));
        }
        if self.d != self.f_indices.len() || !(1..=2).contains(&self.d) {
            return Err(Error::Config(format!(
                "d = {} must equal the number of F indices ({}) and be 1 or 2",
                self.d,
                self.f_indices.len()
            )));
        }
        step_count(self.t_end, self.dt)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if self.n_diff == 0 || (self.n_diff as f64) <= self.alpha {
            return Err(Error::Config(format!("n_diff must exceed alpha, got {}", self.n_diff)));
        }
        if self.ensemble_size == 0 || self.batches == 0 {
            return Err(Error::Config("ensemble_size and batches must be positive".into()));
        }
        for (s, t) in self.pairs()? {
            grid_index(s, self.dt)?;
            grid_index(t, self.dt)?;
            if !(0.0 < s && s < t && t <= self.t_end + 1e-12) {
                return Err(Error::Config(format!("time pair ({s}, {t}) must satisfy 0 < s < t <= T")));
            }
        }
        Ok(())
    }

    /// Additionally requires `alpha + beta < 1`.
    pub fn validate_besov(&self) -> Result<()> {
        self.validate()?;
        if self.alpha + self.beta >= 1.0 {
            return Err(Error::Config(format!(
                "alpha + beta must be below 1, got {} + {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model> {
        let basis = Basis::new(self.cutoff)?;
        let cov = CovarianceSpec::from_basis(&basis, self.sigma0, self.gamma)?;
        let f = SubspaceF::new(self.f_indices.clone(), &cov)?;
        Model::new(basis, cov, f, self.nu, self.nonlinear)
    }
}
