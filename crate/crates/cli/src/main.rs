use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nsreg_core::experiments::{prepare, time_growth};
use nsreg_core::{run_besov_holder, run_diagnostics, run_holder_pair, run_l1_holder, DistanceTable, ExperimentConfig};

/// Time regularity experiments for projected stochastic Navier–Stokes
/// densities.
#[derive(Parser)]
#[command(name = "nsreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// L1 distances between projected densities and their Hölder fit.
    L1Holder(Common),
    /// Besov distances and their Hölder fit.
    BesovHolder(Common),
    /// Both distance experiments on one ensemble, in `l1/` and `besov/`.
    Holder(Common),
    /// Small-time growth of the Besov norm of the density.
    TimeGrowth(Common),
    /// Structural, non-degeneracy and Monte-Carlo diagnostics.
    Diagnostics(Common),
    /// Print the resolved configuration.
    ShowConfig(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory for CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.overrides {
            cfg.set_pair(kv).with_context(|| format!("--set {kv}"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn summarize(label: &str, table: &DistanceTable, dir: &Path) {
    match &table.fit {
        Some(f) => eprintln!(
            "{label}: slope {:.4} ± {:.4}, r2 {:.4}, {} of {} pairs above noise floor {:.3e}",
            f.slope,
            f.slope_stderr,
            f.r_squared,
            f.used.iter().filter(|u| **u).count(),
            table.rows.len(),
            table.noise_floor
        ),
        None => eprintln!("{label}: too few pairs above noise floor {:.3e}, no fit", table.noise_floor),
    }
    eprintln!("{label}: wrote {}", dir.display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::L1Holder(c) => {
            let cfg = c.config()?;
            let table = run_l1_holder(&cfg, Some(&c.out))?;
            summarize("l1", &table, &c.out);
        }
        Command::BesovHolder(c) => {
            let cfg = c.config()?;
            let table = run_besov_holder(&cfg, Some(&c.out))?;
            summarize("besov", &table, &c.out);
        }
        Command::Holder(c) => {
            let cfg = c.config()?;
            let (l1, besov) = run_holder_pair(&cfg, Some(&c.out))?;
            summarize("l1", &l1, &c.out.join("l1"));
            summarize("besov", &besov, &c.out.join("besov"));
        }
        Command::TimeGrowth(c) => {
            let cfg = c.config()?;
            let growth = time_growth(&prepare(&cfg)?)?;
            std::fs::create_dir_all(&c.out)?;
            std::fs::write(c.out.join("time_growth.csv"), growth.csv())?;
            eprintln!(
                "time growth: exponent {:.4} ± {:.4}, r2 {:.4}",
                growth.fit.slope, growth.fit.slope_stderr, growth.fit.r_squared
            );
        }
        Command::Diagnostics(c) => {
            let cfg = c.config()?;
            let report = run_diagnostics(&cfg, Some(&c.out))?;
            let failed: Vec<&str> = report.rows.iter().filter(|r| !r.pass).map(|r| r.property.as_str()).collect();
            eprintln!("diagnostics: {} rows, {} failed", report.rows.len(), failed.len());
            for p in &failed {
                eprintln!("  failed: {p}");
            }
            return Ok(failed.is_empty());
        }
        Command::ShowConfig(c) => print!("{}", c.config()?.to_text()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
