//! Replicated experiments over `(n, γ, ρ)` grids.
//!
//! Replication `r` of grid cell `c` always draws from `substream(seed, c, r)`,
//! and every aggregate is an integer count or a sum taken in replication
//! order, so reports do not depend on the thread count.
//!
//! Grid cells are numbered with `n` outermost, then `γ`, then `ρ`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ar_sim::{contaminate, default_burn_in, simulate_clean, ArSpec, ContaminationSpec, ObservedSeries};
use crate::chisq_dist::lipschitz_gap_bound;
use crate::distributions::{MixtureAn, ScalarDistribution};
use crate::edf_shift::{shift_delta_sym, Edf, ShiftContext};
use crate::error::{Error, Result};
use crate::estimation::{fit, residuals, EstimationMethod};
use crate::pearson::{asymptotic_power, critical_value, run_test_detailed, CellPartition, NoncentralityParts};
use crate::rng::{substream, StreamRng, MAX_REPLICATIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ar: ArSpec,
    pub g0: ScalarDistribution,
    pub h: ScalarDistribution,
    pub pi: ScalarDistribution,
    pub gamma_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub m: usize,
    /// Interior breakpoints `x₁ < … < x_{m-1}`; equiprobable under `g0` when absent.
    #[serde(default)]
    pub breakpoints: Option<Vec<f64>>,
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub method: EstimationMethod,
    /// Defaults to [`default_burn_in`] of the AR order.
    #[serde(default)]
    pub burn_in: Option<usize>,
    /// Worker threads; `None` uses rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        ArSpec::new(self.ar.betas().to_vec(), self.ar.nu())?;
        for (name, d) in [("g0", &self.g0), ("h", &self.h), ("pi", &self.pi)] {
            d.validate().map_err(|e| Error::InvalidConfig(format!("{name}: {e}")))?;
        }
        if !(self.g0.is_continuous() && self.g0.is_symmetric()) {
            return bad("g0 must be continuous and symmetric".into());
        }
        if self.gamma_grid.is_empty() || self.rho_grid.is_empty() || self.n_grid.is_empty() {
            return bad("grids must be nonempty".into());
        }
        for (name, grid) in [("gamma", &self.gamma_grid), ("rho", &self.rho_grid)] {
            if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return bad(format!("{name} grid values must be finite and nonnegative, got {v}"));
            }
        }
        let p = self.ar.order();
        if let Some(n) = self.n_grid.iter().find(|n| **n <= 5 * p) {
            return bad(format!("every n must exceed 5p = {}, got {n}", 5 * p));
        }
        if self.m < 2 {
            return Err(Error::InvalidPartition("m must exceed 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.replications == 0 || self.replications as u64 >= MAX_REPLICATIONS {
            return bad(format!("replications must lie in [1, 2^40), got {}", self.replications));
        }
        if self.n_grid.len() * self.gamma_grid.len() * self.rho_grid.len() >= 1 << 24 {
            return bad("grid has too many cells".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        self.cells()?;
        Ok(())
    }

    pub fn cells(&self) -> Result<CellPartition> {
        match &self.breakpoints {
            None => CellPartition::equiprobable(&self.g0, self.m),
            Some(b) if b.len() + 1 == self.m => CellPartition::new(&self.g0, b),
            Some(b) => Err(Error::InvalidPartition(format!(
                "{} breakpoints give {} cells but m = {}",
                b.len(),
                b.len() + 1,
                self.m
            ))),
        }
    }

    pub fn shift_context(&self) -> ShiftContext {
        ShiftContext::new(self.g0.clone(), self.pi.clone(), self.ar.betas().to_vec())
    }

    fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| default_burn_in(self.ar.order()))
    }

    /// `(cell index, n, γ, ρ)` in grid order.
    pub fn grid(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::new();
        for &n in &self.n_grid {
            for &gamma in &self.gamma_grid {
                for &rho in &self.rho_grid {
                    out.push((out.len(), n, gamma, rho));
                }
            }
        }
        out
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
    }

    /// One contaminated series from the stream of replication `rep` in grid cell `cell`.
    pub fn simulate(&self, cell: usize, rep: usize, n: usize, gamma: f64, rho: f64) -> Result<ObservedSeries> {
        let mut rng = substream(self.master_seed, cell as u64, rep as u64);
        simulate_with(self, &mut rng, n, gamma, rho)
    }
}

fn simulate_with(
    cfg: &ExperimentConfig,
    rng: &mut StreamRng,
    n: usize,
    gamma: f64,
    rho: f64,
) -> Result<ObservedSeries> {
    let law = MixtureAn::new(cfg.g0.clone(), cfg.h.clone(), rho, n)?;
    let latent = simulate_clean(&cfg.ar, &law, n, rng, cfg.burn_in())?;
    let cont = ContaminationSpec::new(gamma, cfg.pi.clone())?;
    Ok(contaminate(&latent, &cont, n, rng))
}

/// One grid cell of a power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: usize,
    pub n: usize,
    pub gamma: f64,
    pub rho: f64,
    pub replications: usize,
    pub rejections: Option<u64>,
    /// `Ŵₙ`; absent when the cell failed.
    pub rate: Option<f64>,
    /// `√(Ŵₙ(1 - Ŵₙ)/N)`.
    pub se: Option<f64>,
    pub lambda2: f64,
    pub asymptotic_power: f64,
    pub failure: Option<String>,
}

impl CellReport {
    pub fn is_level_check(&self) -> bool {
        self.gamma == 0.0 && self.rho == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub m: usize,
    pub alpha: f64,
    pub critical: f64,
    pub method: EstimationMethod,
    pub cells: Vec<CellReport>,
}

/// Wall-clock seconds per grid cell. Kept apart from [`ExperimentReport`]
/// so repeated runs produce identical report files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub cell_seconds: Vec<f64>,
    pub total_seconds: f64,
}

pub fn monte_carlo_se(rate: f64, replications: usize) -> f64 {
    (rate * (1.0 - rate) / replications as f64).sqrt()
}

pub fn run_grid(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Timing)> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let parts = NoncentralityParts::new(&cfg.shift_context(), &cfg.h, &cells)?;
    let pool = cfg.pool()?;
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut cell_seconds = Vec::new();
    for (cell, n, gamma, rho) in cfg.grid() {
        let t0 = Instant::now();
        let outcomes: Vec<Result<bool>> = pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(|r| {
                    let series = cfg.simulate(cell, r, n, gamma, rho)?;
                    Ok(run_test_detailed(&series, &cells, cfg.alpha, cfg.method)?.outcome.reject)
                })
                .collect()
        });
        let lambda2 = parts.lambda2(rho, gamma);
        let mut report = CellReport {
            cell,
            n,
            gamma,
            rho,
            replications: cfg.replications,
            rejections: None,
            rate: None,
            se: None,
            lambda2,
            asymptotic_power: asymptotic_power(lambda2, cfg.m, cfg.alpha)?,
            failure: None,
        };
        match outcomes.into_iter().enumerate().try_fold(0u64, |acc, (r, o)| match o {
            Ok(rej) => Ok(acc + u64::from(rej)),
            Err(e) => Err(format!("replication {r}: {e}")),
        }) {
            Ok(k) => {
                let rate = k as f64 / cfg.replications as f64;
                report.rejections = Some(k);
                report.rate = Some(rate);
                report.se = Some(monte_carlo_se(rate, cfg.replications));
            }
            Err(reason) => report.failure = Some(reason),
        }
        reports.push(report);
        cell_seconds.push(t0.elapsed().as_secs_f64());
    }
    let report = ExperimentReport {
        master_seed: cfg.master_seed,
        m: cfg.m,
        alpha: cfg.alpha,
        critical: critical_value(cfg.m, cfg.alpha)?,
        method: cfg.method,
        cells: reports,
    };
    Ok((report, Timing { cell_seconds, total_seconds: start.elapsed().as_secs_f64() }))
}

/// Slack allowed by the monotone-decay check of [`robustness_scan`].
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub rho: f64,
    pub gamma: f64,
    pub lambda2: f64,
    pub power: f64,
    pub power_clean: f64,
    /// `|W(ρ, γ, Π) - W(ρ, 0, Π)|`.
    pub gap: f64,
    /// Lipschitz bound on the gap from `|λ(ρ, γ) - λ(ρ, 0)|`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessTable {
    pub rows: Vec<RobustnessRow>,
    pub bound_holds: bool,
    /// For each `ρ`, the gap is nondecreasing in `γ` and zero at `γ = 0`.
    pub decays_monotonically: bool,
}

/// Asymptotic robustness table over every `ρ` in the config and `gamma_grid`.
pub fn robustness_scan(cfg: &ExperimentConfig, gamma_grid: &[f64]) -> Result<RobustnessTable> {
    cfg.validate()?;
    if let Some(g) = gamma_grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::InvalidConfig(format!("gamma values must be finite and nonnegative, got {g}")));
    }
    let cells = cfg.cells()?;
    let parts = NoncentralityParts::new(&cfg.shift_context(), &cfg.h, &cells)?;
    let mut gammas = gamma_grid.to_vec();
    gammas.sort_by(f64::total_cmp);

    let mut rows = Vec::new();
    let mut decays = true;
    for &rho in &cfg.rho_grid {
        let l2_clean = parts.lambda2(rho, 0.0);
        let power_clean = asymptotic_power(l2_clean, cfg.m, cfg.alpha)?;
        let mut prev_gap = 0.0;
        for &gamma in &gammas {
            let lambda2 = parts.lambda2(rho, gamma);
            let power = asymptotic_power(lambda2, cfg.m, cfg.alpha)?;
            let gap = if gamma == 0.0 { 0.0 } else { (power - power_clean).abs() };
            // saturated powers may differ in the last ulp
            decays &= gap >= prev_gap - MONOTONE_SLACK;
            prev_gap = gap;
            rows.push(RobustnessRow {
                rho,
                gamma,
                lambda2,
                power,
                power_clean,
                gap,
                bound: lipschitz_gap_bound(lambda2.sqrt(), l2_clean.sqrt()),
            });
        }
    }
    let bound_holds = rows.iter().all(|r| r.gap <= r.bound + 1e-12);
    Ok(RobustnessTable { rows, bound_holds, decays_monotonically: decays })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdfCheckPoint {
    pub x: f64,
    /// Monte Carlo mean of `√n[Ŝₙ(x) - Sₙ(x)]`.
    pub mean: f64,
    pub se: f64,
    pub gamma_delta_s: f64,
    /// `mean - γΔ_S(x)`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdfCheckCell {
    pub n: usize,
    pub gamma: f64,
    pub rho: f64,
    pub replications: usize,
    pub points: Vec<EdfCheckPoint>,
    pub max_abs_discrepancy: f64,
    /// Standard error at the grid point attaining the maximum.
    pub se_at_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdfCheckTable {
    pub cells: Vec<EdfCheckCell>,
}

/// `√n[Ŝₙ(x) - Sₙ(x)]` on `xs`, where `Sₙ` is the symmetrized EDF of the true innovations.
pub fn scaled_sym_edf_gap(series: &ObservedSeries, method: EstimationMethod, xs: &[f64]) -> Result<Vec<f64>> {
    let truth = series
        .truth
        .as_ref()
        .ok_or_else(|| Error::Domain("EDF check needs the truth record".into()))?;
    let fitted = fit(series, method)?;
    let res = residuals(series, &fitted);
    let est = Edf::new(&res.eps_hat)?;
    let latent = Edf::new(&truth.eps[series.p..])?;
    let root_n = (series.n as f64).sqrt();
    Ok(xs.iter().map(|&x| root_n * (est.sym_eval(x) - latent.sym_eval(x))).collect())
}

pub fn edf_expansion_check(cfg: &ExperimentConfig, x_grid: &[f64]) -> Result<EdfCheckTable> {
    cfg.validate()?;
    if x_grid.is_empty() || x_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("x grid must be nonempty and finite".into()));
    }
    let ctx = cfg.shift_context();
    let shift: Vec<f64> = x_grid.iter().map(|&x| shift_delta_sym(&ctx, x)).collect::<Result<_>>()?;
    let pool = cfg.pool()?;
    let reps = cfg.replications as f64;

    let mut out = Vec::new();
    for (cell, n, gamma, rho) in cfg.grid() {
        let draws: Vec<Vec<f64>> = pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(|r| scaled_sym_edf_gap(&cfg.simulate(cell, r, n, gamma, rho)?, cfg.method, x_grid))
                .collect::<Result<_>>()
        })?;
        let mut points = Vec::with_capacity(x_grid.len());
        for (i, &x) in x_grid.iter().enumerate() {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / reps;
            let var = if cfg.replications > 1 {
                draws.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (reps - 1.0)
            } else {
                0.0
            };
            let gamma_delta_s = gamma * shift[i];
            points.push(EdfCheckPoint {
                x,
                mean,
                se: (var / reps).sqrt(),
                gamma_delta_s,
                discrepancy: mean - gamma_delta_s,
            });
        }
        let worst = points
            .iter()
            .max_by(|a, b| a.discrepancy.abs().total_cmp(&b.discrepancy.abs()))
            .expect("nonempty grid");
        out.push(EdfCheckCell {
            n,
            gamma,
            rho,
            replications: cfg.replications,
            max_abs_discrepancy: worst.discrepancy.abs(),
            se_at_max: worst.se,
            points,
        });
    }
    Ok(EdfCheckTable { cells: out })
}

/// `count` equally spaced points covering `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `power.csv`, `power.json` and `plot_power_*.csv`; returns the paths written.
pub fn write_power_report(dir: &Path, report: &ExperimentReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();

    let csv_path = dir.join("power.csv");
    write_csv(
        &csv_path,
        &[
            "cell", "n", "gamma", "rho", "replications", "rejections", "rate", "se", "lambda2",
            "asymptotic_power", "failure",
        ],
        report.cells.iter().map(|c| {
            vec![
                c.cell.to_string(),
                c.n.to_string(),
                c.gamma.to_string(),
                c.rho.to_string(),
                c.replications.to_string(),
                c.rejections.map(|k| k.to_string()).unwrap_or_default(),
                opt(c.rate),
                opt(c.se),
                c.lambda2.to_string(),
                c.asymptotic_power.to_string(),
                c.failure.clone().unwrap_or_default(),
            ]
        }),
    )?;
    written.push(csv_path);

    let json_path = dir.join("power.json");
    write_json(&json_path, report)?;
    written.push(json_path);

    // one power curve in rho per (n, gamma), plus the asymptotic curve per gamma
    let mut keys: Vec<(usize, f64)> = Vec::new();
    for c in &report.cells {
        if !keys.contains(&(c.n, c.gamma)) {
            keys.push((c.n, c.gamma));
        }
    }
    for (n, gamma) in &keys {
        let rows: Vec<&CellReport> = report.cells.iter().filter(|c| c.n == *n && c.gamma == *gamma).collect();
        let path = dir.join(format!("plot_power_n{n}_gamma{gamma}.csv"));
        write_csv(&path, &["x", "y"], rows.iter().map(|c| vec![c.rho.to_string(), opt(c.rate)]))?;
        written.push(path);
        let path = dir.join(format!("plot_power_asymptotic_gamma{gamma}.csv"));
        if !written.contains(&path) {
            write_csv(&path, &["x", "y"], rows.iter().map(|c| vec![c.rho.to_string(), c.asymptotic_power.to_string()]))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn write_timing(dir: &Path, timing: &Timing) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("timing.json");
    write_json(&path, timing)?;
    Ok(path)
}

/// Writes `robustness.csv`, `robustness.json` and `plot_robustness_rho*.csv`.
pub fn write_robustness_report(dir: &Path, table: &RobustnessTable) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join("robustness.csv");
    write_csv(
        &csv_path,
        &["rho", "gamma", "lambda2", "power", "power_clean", "gap", "bound"],
        table.rows.iter().map(|r| {
            [r.rho, r.gamma, r.lambda2, r.power, r.power_clean, r.gap, r.bound]
                .iter()
                .map(f64::to_string)
                .collect()
        }),
    )?;
    let json_path = dir.join("robustness.json");
    write_json(&json_path, table)?;
    let mut written = vec![csv_path, json_path];
    let mut rhos: Vec<f64> = Vec::new();
    for r in &table.rows {
        if !rhos.contains(&r.rho) {
            rhos.push(r.rho);
        }
    }
    for rho in rhos {
        let path = dir.join(format!("plot_robustness_rho{rho}.csv"));
        write_csv(
            &path,
            &["x", "y"],
            table.rows.iter().filter(|r| r.rho == rho).map(|r| vec![r.gamma.to_string(), r.gap.to_string()]),
        )?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `edf_check.csv` (one row per cell and x) and `edf_check.json`.
pub fn write_edf_check_report(dir: &Path, table: &EdfCheckTable) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join("edf_check.csv");
    write_csv(
        &csv_path,
        &["n", "gamma", "rho", "x", "mean", "se", "gamma_delta_s", "discrepancy"],
        table.cells.iter().flat_map(|c| {
            c.points.iter().map(move |p| {
                vec![
                    c.n.to_string(),
                    c.gamma.to_string(),
                    c.rho.to_string(),
                    p.x.to_string(),
                    p.mean.to_string(),
                    p.se.to_string(),
                    p.gamma_delta_s.to_string(),
                    p.discrepancy.to_string(),
                ]
            })
        }),
    )?;
    let json_path = dir.join("edf_check.json");
    write_json(&json_path, table)?;
    Ok(vec![csv_path, json_path])
}

/// Fixed-width summary of a power report.
pub fn power_summary(report: &ExperimentReport, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{:>7} {:>8} {:>8} {:>9} {:>9} {:>9} {:>10}  note", "n", "gamma", "rho", "rate", "se", "W", "lambda2")?;
    for c in &report.cells {
        let note = match (&c.failure, c.is_level_check()) {
            (Some(f), _) => format!("FAILED: {f}"),
            (None, true) => "level check".to_string(),
            (None, false) => String::new(),
        };
        writeln!(
            out,
            "{:>7} {:>8.3} {:>8.3} {:>9} {:>9} {:>9.4} {:>10.4}  {}",
            c.n,
            c.gamma,
            c.rho,
            c.rate.map_or("-".into(), |r| format!("{r:.4}")),
            c.se.map_or("-".into(), |s| format!("{s:.4}")),
            c.asymptotic_power,
            c.lambda2,
            note
        )?;
    }
    Ok(())
}
