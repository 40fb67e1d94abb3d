//! Estimators of `μ` and `β` and the residuals built from them.
//!
//! Both estimators are √n-consistent under `O(n^{-1/2})` contamination.
//! Least squares is the default. The Huber variant protects the slope
//! estimate against outliers that enter through the lagged regressors,
//! which matters at finite `n` when outliers are large.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::ar_sim::ObservedSeries;
use crate::error::{Error, Result};

/// Largest admissible condition number of the lag Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Huber tuning constant giving 95% efficiency at the normal.
pub const HUBER_K: f64 = 1.345;

/// Design rows whose lagged centered values exceed this many robust
/// standard deviations are dropped from the Huber fit.
pub const LEVERAGE_CUTOFF: f64 = 3.5;

const MAD_TO_SD: f64 = 1.482_602_218_505_602;
const IRLS_MAX_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimationMethod {
    /// Sample mean and ordinary least squares on the centered lags.
    #[default]
    LeastSquares,
    /// Huber M-estimates of location and slopes with tuning `k`, fitted on
    /// design rows that pass a hard leverage screen.
    HuberM { k: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedAr {
    pub mu_hat: f64,
    pub betas_hat: Vec<f64>,
    /// `1 - Σ β̂_j`.
    pub delta_hat: f64,
    pub method: EstimationMethod,
}

impl FittedAr {
    pub fn new(mu_hat: f64, betas_hat: Vec<f64>, method: EstimationMethod) -> Self {
        let delta_hat = 1.0 - betas_hat.iter().sum::<f64>();
        Self { mu_hat, betas_hat, delta_hat, method }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    /// `ε̂_1, …, ε̂_n`.
    pub eps_hat: Vec<f64>,
}

pub fn fit(series: &ObservedSeries, method: EstimationMethod) -> Result<FittedAr> {
    let (n, p) = (series.n, series.p);
    if n <= 5 * p {
        return Err(Error::Domain(format!("fit needs n > 5p = {}, got n = {n}", 5 * p)));
    }
    match method {
        EstimationMethod::LeastSquares => {
            let mu_hat = series.y[p..].iter().sum::<f64>() / n as f64;
            let rows: Vec<usize> = (0..n).collect();
            let betas = lag_regression(series, mu_hat, &rows, None)?;
            Ok(FittedAr::new(mu_hat, betas, method))
        }
        EstimationMethod::HuberM { k } => {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Domain(format!("Huber tuning must be positive, got {k}")));
            }
            huber_fit(series, k)
        }
    }
}

/// `ε̂_t = û_t - Σ_j β̂_j û_{t-j}` with `û_t = y_t - μ̂` for `t = 1, …, n`.
pub fn residuals(series: &ObservedSeries, fit: &FittedAr) -> ResidualSet {
    let p = series.p;
    let u: Vec<f64> = series.y.iter().map(|y| y - fit.mu_hat).collect();
    let eps_hat = (p..p + series.n)
        .map(|i| {
            let lagged: f64 = fit
                .betas_hat
                .iter()
                .enumerate()
                .map(|(j, b)| b * u[i - 1 - j])
                .sum();
            u[i] - lagged
        })
        .collect();
    ResidualSet { eps_hat }
}

/// Weighted least squares of `û_t` on its `p` lags over `rows`
/// (row `r` is time `t = r + 1`).
fn lag_regression(
    series: &ObservedSeries,
    mu_hat: f64,
    rows: &[usize],
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let p = series.p;
    let y = &series.y;
    let w = |i: usize| weights.map_or(1.0, |w| w[i].sqrt());
    let design = DMatrix::from_fn(rows.len(), p, |i, j| {
        let r = rows[i] + p;
        w(i) * (y[r - 1 - j] - mu_hat)
    });
    let target = DVector::from_fn(rows.len(), |i, _| w(i) * (y[rows[i] + p] - mu_hat));

    let gram = design.transpose() * &design;
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { condition });
    }
    let beta = design
        .svd(true, true)
        .solve(&target, f64::EPSILON)
        .map_err(|_| Error::SingularDesign { condition })?;
    Ok(beta.iter().copied().collect())
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if n % 2 == 1 {
        m
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + m)
    }
}

fn mad_scale(values: &[f64], center: f64) -> f64 {
    let mut dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    MAD_TO_SD * median(&mut dev)
}

fn huber_weight(r: f64, k: f64) -> f64 {
    let a = r.abs();
    if a <= k {
        1.0
    } else {
        k / a
    }
}

/// Huber location estimate with MAD scale held fixed.
fn huber_location(values: &[f64], k: f64) -> f64 {
    let mut work = values.to_vec();
    let mut mu = median(&mut work);
    let scale = mad_scale(values, mu);
    if scale == 0.0 {
        return mu;
    }
    for _ in 0..IRLS_MAX_ITER {
        let (mut num, mut den) = (0.0, 0.0);
        for &v in values {
            let w = huber_weight((v - mu) / scale, k);
            num += w * v;
            den += w;
        }
        let next = num / den;
        if (next - mu).abs() <= IRLS_TOL * scale {
            return next;
        }
        mu = next;
    }
    mu
}

fn huber_fit(series: &ObservedSeries, k: f64) -> Result<FittedAr> {
    let (n, p) = (series.n, series.p);
    let mu_hat = huber_location(&series.y[p..], k);
    let centered: Vec<f64> = series.y.iter().map(|y| y - mu_hat).collect();
    let spread = mad_scale(&centered, 0.0);
    if spread == 0.0 {
        return Err(Error::SingularDesign { condition: f64::INFINITY });
    }
    let limit = LEVERAGE_CUTOFF * spread;
    let rows: Vec<usize> = (0..n)
        .filter(|&r| (0..p).all(|j| centered[r + p - 1 - j].abs() <= limit))
        .collect();
    if rows.len() <= 5 * p {
        return Err(Error::SingularDesign { condition: f64::INFINITY });
    }

    let mut betas = lag_regression(series, mu_hat, &rows, None)?;
    let resid = |betas: &[f64]| -> Vec<f64> {
        rows.iter()
            .map(|&r| {
                let i = r + p;
                centered[i] - betas.iter().enumerate().map(|(j, b)| b * centered[i - 1 - j]).sum::<f64>()
            })
            .collect()
    };
    for _ in 0..IRLS_MAX_ITER {
        let r = resid(&betas);
        let mut tmp = r.clone();
        let center = median(&mut tmp);
        let scale = mad_scale(&r, center);
        if scale == 0.0 {
            break;
        }
        let weights: Vec<f64> = r.iter().map(|e| huber_weight(e / scale, k)).collect();
        let next = lag_regression(series, mu_hat, &rows, Some(&weights))?;
        let change = next
            .iter()
            .zip(&betas)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        betas = next;
        if change < IRLS_TOL {
            break;
        }
    }
    Ok(FittedAr::new(mu_hat, betas, EstimationMethod::HuberM { k }))
}
