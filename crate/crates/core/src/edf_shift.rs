//! Residual EDF, its symmetrization, and the contamination shift functions.
//!
//! The shift `Δ(x, Π) = Σ_{j=0}^p [E G0(x + β_j ξ) - G0(x)]` with `β₀ = -1`
//! is the asymptotic bias of `√n(Ĝₙ - Gₙ)` per unit `γ`. The symmetrized
//! shift used with symmetric `G0` is `Δ_S(x) = (Δ(x) - Δ(-x)) / 2`; the
//! `Δ₀` appearing in the symmetrized expansion is taken to be this same `Δ`.

use serde::Serialize;

use crate::distributions::{expect_g0_shifted_with_tol, ScalarDistribution, DEFAULT_EXPECTATION_BUDGET, EXPECTATION_TOL};
use crate::error::{Error, Result};
use crate::pearson::CellPartition;

/// Empirical distribution function over a sorted copy of the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Edf {
    sorted: Vec<f64>,
}

impl Edf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `#{values ≤ x}`.
    pub fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|v| *v <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.len() as f64
    }

    /// `2n·Ŝₙ(x) = #{≤ x} + n - #{≤ -x}`, an integer.
    pub fn sym_count(&self, x: f64) -> usize {
        self.count_le(x) + self.len() - self.count_le(-x)
    }

    pub fn sym_eval(&self, x: f64) -> f64 {
        0.5 * (self.eval(x) + 1.0 - self.eval(-x))
    }
}

pub fn edf_eval(sample: &[f64], x: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let below = sample.iter().filter(|v| **v <= x).count();
    Ok(below as f64 / sample.len() as f64)
}

/// `Ŝₙ(x) = (Ĝₙ(x) + 1 - Ĝₙ(-x)) / 2`.
pub fn sym_edf_eval(sample: &[f64], x: f64) -> Result<f64> {
    Ok(0.5 * (edf_eval(sample, x)? + 1.0 - edf_eval(sample, -x)?))
}

/// Inputs of the shift functions. `β₀ = -1` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftContext {
    pub g0: ScalarDistribution,
    pub pi: ScalarDistribution,
    pub betas: Vec<f64>,
    pub budget: usize,
    /// Absolute error target of each expectation. Monte Carlo evaluation
    /// (sampler-only `Π`) needs this relaxed well above the default.
    pub tolerance: f64,
}

impl ShiftContext {
    pub fn new(g0: ScalarDistribution, pi: ScalarDistribution, betas: Vec<f64>) -> Self {
        Self { g0, pi, betas, budget: DEFAULT_EXPECTATION_BUDGET, tolerance: EXPECTATION_TOL }
    }

    /// `(β₀, β₁, …, β_p)` with `β₀ = -1`.
    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(-1.0).chain(self.betas.iter().copied())
    }
}

/// `Δ(x, Π)`; zero at `±∞`.
pub fn shift_delta(ctx: &ShiftContext, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Ok(0.0);
    }
    let base = ctx.g0.cdf(x);
    let mut total = 0.0;
    for b in ctx.coefficients() {
        total += expect_g0_shifted_with_tol(&ctx.g0, &ctx.pi, x, b, ctx.budget, ctx.tolerance)? - base;
    }
    Ok(total)
}

/// `Δ_S(x, Π) = (Δ(x) - Δ(-x)) / 2`.
pub fn shift_delta_sym(ctx: &ShiftContext, x: f64) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return Ok(0.0);
    }
    Ok(0.5 * (shift_delta(ctx, x)? - shift_delta(ctx, -x)?))
}

/// `δ_j(Π) = 2[Δ_S(x_j) - Δ_S(x_{j-1})]`, `j = 1, …, m`.
pub fn delta_vector(ctx: &ShiftContext, cells: &CellPartition) -> Result<Vec<f64>> {
    let bps = cells.breakpoints();
    let sym: Vec<f64> = bps
        .iter()
        .map(|&x| shift_delta_sym(ctx, x))
        .collect::<Result<_>>()?;
    Ok(sym.windows(2).map(|w| 2.0 * (w[1] - w[0])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdfGridRow {
    pub x: f64,
    pub edf: f64,
    pub sym_edf: f64,
    pub gamma_delta_s: f64,
}

/// Residual EDF, symmetrized EDF and `γ·Δ_S` on a grid, for CSV export.
pub fn edf_grid(residuals: &[f64], ctx: &ShiftContext, gamma: f64, xs: &[f64]) -> Result<Vec<EdfGridRow>> {
    let edf = Edf::new(residuals)?;
    xs.iter()
        .map(|&x| {
            Ok(EdfGridRow {
                x,
                edf: edf.eval(x),
                sym_edf: edf.sym_eval(x),
                gamma_delta_s: gamma * shift_delta_sym(ctx, x)?,
            })
        })
        .collect()
}
