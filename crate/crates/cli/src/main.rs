//! `symchi`: batch front end for the symmetrized chi-square test.
//!
//! Exit status is 0 when `test` accepts (and for every other successful
//! command), 1 when `test` rejects, and 2 on any error.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symchi::ar_sim::ObservedSeries;
use symchi::montecarlo::{
    edf_expansion_check, power_summary, robustness_scan, run_grid, write_edf_check_report, write_power_report,
    write_robustness_report, write_timing,
};
use symchi::pearson::run_test;
use thiserror::Error;

use crate::config::{Config, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] symchi::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("data: {0}")]
    Data(String),
}

#[derive(Debug, Parser)]
#[command(name = "symchi", version, about = "Symmetrized chi-square goodness-of-fit test for AR(p) innovations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test one series, read from `[data]` or simulated from the first grid cell.
    Test(Common),
    /// Empirical and asymptotic power over the (n, gamma, rho) grid.
    Power(Common),
    /// Asymptotic power gaps |W(rho, gamma) - W(rho, 0)| and their bound.
    Robustness(Common),
    /// Monte Carlo check of the symmetrized residual EDF expansion.
    EdfCheck(Common),
    /// Write one simulated series with its latent components.
    Simulate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config file (format version 1).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Caps the worker threads of Monte Carlo runs.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<Config, CliError> {
        if !self.config.is_file() {
            return Err(CliError::Io(format!("config file {} does not exist", self.config.display())));
        }
        let mut cfg = Config::load(&self.config)?;
        cfg.apply(Overrides { seed: self.seed, replications: self.replications, threads: self.threads });
        if let Some(data) = &cfg.data {
            if !data.path.is_file() {
                return Err(CliError::Io(format!("data file {} does not exist", data.path.display())));
            }
        }
        fs::create_dir_all(&self.out).map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))?;
        // the settings actually used, overrides included
        write_text(&self.out.join("resolved.toml"), &cfg.to_toml()?)?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Test(c) => cmd_test(&c),
        Command::Power(c) => cmd_power(&c).map(|_| ExitCode::SUCCESS),
        Command::Robustness(c) => cmd_robustness(&c).map(|_| ExitCode::SUCCESS),
        Command::EdfCheck(c) => cmd_edf_check(&c).map(|_| ExitCode::SUCCESS),
        Command::Simulate(c) => cmd_simulate(&c).map(|_| ExitCode::SUCCESS),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::Io(format!("stdout: {e}"))
}

/// Single-column CSV, optionally headed `y`.
fn read_series(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        if record.len() != 1 {
            return Err(CliError::Data(format!("line {}: expected one column, found {}", line + 1, record.len())));
        }
        let field = &record[0];
        if line == 0 && field == "y" {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::Data(format!("line {}: `{field}` is not a number", line + 1)))?;
        values.push(v);
    }
    Ok(values)
}

/// The series of replication 0 in grid cell 0.
fn simulated_series(cfg: &Config) -> Result<ObservedSeries, CliError> {
    let exp = cfg.experiment()?;
    let (cell, n, gamma, rho) = exp.grid()[0];
    Ok(exp.simulate(cell, 0, n, gamma, rho)?)
}

fn cmd_test(c: &Common) -> Result<ExitCode, CliError> {
    let cfg = c.load()?;
    let series = match &cfg.data {
        Some(data) => ObservedSeries::from_values(read_series(&data.path)?, cfg.order()?)?,
        None => simulated_series(&cfg)?,
    };
    let h = &cfg.hypothesis;
    let cells = match &h.breakpoints {
        Some(b) => symchi::pearson::CellPartition::new(&h.g0, b)?,
        None => symchi::pearson::CellPartition::equiprobable(&h.g0, h.m)?,
    };
    if cells.m() != h.m {
        return Err(CliError::Config(format!("{} breakpoints do not give m = {} cells", cells.m() - 1, h.m)));
    }
    let outcome = run_test(&series, &h.g0, &cells, h.alpha, cfg.estimator)?;
    let json = serde_json::to_string_pretty(&outcome).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{json}");
    write_text(&c.out.join("test.json"), &(json + "\n"))?;
    Ok(if outcome.reject { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_power(c: &Common) -> Result<(), CliError> {
    let cfg = c.load()?;
    let (report, timing) = run_grid(&cfg.experiment()?)?;
    write_power_report(&c.out, &report)?;
    write_timing(&c.out, &timing)?;
    let mut out = io::stdout().lock();
    power_summary(&report, &mut out).map_err(stdout_err)?;
    writeln!(out, "wall time {:.2}s", timing.total_seconds).map_err(stdout_err)
}

fn cmd_robustness(c: &Common) -> Result<(), CliError> {
    let cfg = c.load()?;
    let table = robustness_scan(&cfg.experiment()?, &cfg.robustness_gamma())?;
    write_robustness_report(&c.out, &table)?;
    let mut out = io::stdout().lock();
    let w = |e| stdout_err(e);
    writeln!(out, "{:>8} {:>8} {:>12} {:>12}", "rho", "gamma", "gap", "bound").map_err(w)?;
    for r in &table.rows {
        writeln!(out, "{:>8.3} {:>8.3} {:>12.3e} {:>12.3e}", r.rho, r.gamma, r.gap, r.bound).map_err(w)?;
    }
    writeln!(out, "bound holds: {}", table.bound_holds).map_err(w)?;
    writeln!(
        out,
        "decay as gamma -> 0: {}",
        if table.decays_monotonically { "monotone" } else { "NOT monotone" }
    )
    .map_err(w)
}

fn cmd_edf_check(c: &Common) -> Result<(), CliError> {
    let cfg = c.load()?;
    let table = edf_expansion_check(&cfg.experiment()?, &cfg.x_grid())?;
    write_edf_check_report(&c.out, &table)?;
    let mut out = io::stdout().lock();
    let w = |e| stdout_err(e);
    writeln!(out, "{:>7} {:>8} {:>8} {:>14} {:>10}", "n", "gamma", "rho", "max |disc|", "se").map_err(w)?;
    for cell in &table.cells {
        writeln!(
            out,
            "{:>7} {:>8.3} {:>8.3} {:>14.4} {:>10.4}",
            cell.n, cell.gamma, cell.rho, cell.max_abs_discrepancy, cell.se_at_max
        )
        .map_err(w)?;
    }
    Ok(())
}

fn cmd_simulate(c: &Common) -> Result<(), CliError> {
    let cfg = c.load()?;
    let series = simulated_series(&cfg)?;
    let full = c.out.join("series.csv");
    let file = fs::File::create(&full).map_err(|e| CliError::Io(format!("{}: {e}", full.display())))?;
    series
        .write_csv(io::BufWriter::new(file))
        .map_err(|e| CliError::Io(format!("{}: {e}", full.display())))?;
    let ys = c.out.join("y.csv");
    let mut text = String::from("y\n");
    for v in &series.y {
        text.push_str(&format!("{v}\n"));
    }
    write_text(&ys, &text)?;
    println!("wrote {} and {} ({} values, p = {})", full.display(), ys.display(), series.y.len(), series.p);
    Ok(())
}
