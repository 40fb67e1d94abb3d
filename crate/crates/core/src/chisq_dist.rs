//! Central and noncentral chi-square distribution functions.
//!
//! The noncentral CDF is the Poisson mixture
//! `Σ_k e^{-λ²/2} (λ²/2)^k / k! · P(dof/2 + k, x/2)`, summed outward from
//! the Poisson mode until both tails carry less than [`SERIES_TAIL`].

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::special::{reg_gamma_pair, std_normal_quantile, GAUSS_DENSITY_MAX};

/// Poisson weight left outside the summed window.
pub const SERIES_TAIL: f64 = 1e-12;

/// Noncentral chi-square law with `dof` degrees of freedom and noncentrality `lambda2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralChiSq {
    pub dof: u32,
    pub lambda2: f64,
}

impl NoncentralChiSq {
    pub fn new(dof: u32, lambda2: f64) -> Result<Self> {
        check_params(dof, lambda2)?;
        Ok(Self { dof, lambda2 })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        noncentral_cdf(x, self.dof, self.lambda2)
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        noncentral_sf(x, self.dof, self.lambda2)
    }
}

fn check_params(dof: u32, lambda2: f64) -> Result<()> {
    if dof == 0 {
        return Err(Error::Domain("chi-square needs dof >= 1".into()));
    }
    if !(lambda2.is_finite() && lambda2 >= 0.0) {
        return Err(Error::Domain(format!(
            "noncentrality must be finite and nonnegative, got {lambda2}"
        )));
    }
    Ok(())
}

pub fn central_cdf(x: f64, dof: u32) -> Result<f64> {
    noncentral_cdf(x, dof, 0.0)
}

/// `(P, Q)` of the noncentral law at `x`, summing `extra` Poisson terms
/// beyond the truncation point on each side.
fn mixture_pair(x: f64, dof: u32, lambda2: f64, extra: usize) -> (f64, f64) {
    let a0 = 0.5 * f64::from(dof);
    let half_x = 0.5 * x;
    if lambda2 == 0.0 {
        return reg_gamma_pair(a0, half_x);
    }
    let h = 0.5 * lambda2;
    let log_w = |k: usize| -h + k as f64 * h.ln() - ln_gamma(k as f64 + 1.0);
    let mode = h.floor() as usize;

    let mut p = 0.0;
    let mut q = 0.0;
    let mut add = |k: usize| -> f64 {
        let w = log_w(k).exp();
        let (pk, qk) = reg_gamma_pair(a0 + k as f64, half_x);
        p += w * pk;
        q += w * qk;
        w
    };

    // forward: weights decay with ratio h/(k+1) < 1 past the mode
    let mut k = mode;
    let mut beyond = 0;
    loop {
        let w = add(k);
        let ratio = h / (k as f64 + 1.0);
        let tail_bound = if ratio < 1.0 { w * ratio / (1.0 - ratio) } else { f64::INFINITY };
        k += 1;
        if tail_bound < SERIES_TAIL {
            beyond += 1;
            if beyond > extra {
                break;
            }
        }
    }
    // backward: ratio k/h < 1 below the mode
    if mode > 0 {
        let mut k = mode - 1;
        let mut beyond = 0;
        loop {
            let w = add(k);
            let ratio = k as f64 / h;
            let tail_bound = if ratio < 1.0 { w * ratio / (1.0 - ratio) } else { f64::INFINITY };
            if k == 0 {
                break;
            }
            k -= 1;
            if tail_bound < SERIES_TAIL {
                beyond += 1;
                if beyond > extra {
                    break;
                }
            }
        }
    }
    (p.min(1.0), q.min(1.0))
}

/// `F_dof(x, λ²)`. Absolute error below 1e-10.
pub fn noncentral_cdf(x: f64, dof: u32, lambda2: f64) -> Result<f64> {
    check_params(dof, lambda2)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    Ok(mixture_pair(x, dof, lambda2, 0).0)
}

/// `1 - F_dof(x, λ²)`, summed directly so the upper tail keeps relative accuracy.
pub fn noncentral_sf(x: f64, dof: u32, lambda2: f64) -> Result<f64> {
    check_params(dof, lambda2)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    Ok(mixture_pair(x, dof, lambda2, 0).1)
}

/// Same series with `extra` additional terms on each side; used to certify truncation.
#[doc(hidden)]
pub fn noncentral_cdf_extended(x: f64, dof: u32, lambda2: f64, extra: usize) -> f64 {
    mixture_pair(x, dof, lambda2, extra).0
}

fn central_density(x: f64, dof: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = 0.5 * f64::from(dof);
    ((a - 1.0) * x.ln() - 0.5 * x - a * std::f64::consts::LN_2 - ln_gamma(a)).exp()
}

/// Central chi-square quantile: Wilson–Hilferty start, then safeguarded Newton.
pub fn central_quantile(dof: u32, q: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Domain("chi-square needs dof >= 1".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let k = f64::from(dof);
    let a = 0.5 * k;
    let cdf = |x: f64| reg_gamma_pair(a, 0.5 * x).0;

    let z = std_normal_quantile(q);
    let c = 2.0 / (9.0 * k);
    let mut x = k * (1.0 - c + z * c.sqrt()).powi(3);
    if !(x.is_finite() && x > 0.0) {
        x = k.max(1.0) * q;
    }

    let mut lo = 0.0_f64;
    let mut hi = x.max(1.0);
    while cdf(hi) < q {
        lo = hi;
        hi *= 2.0;
    }
    x = x.clamp(lo, hi);
    for _ in 0..200 {
        let f = cdf(x) - q;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = central_density(x, dof);
        let mut next = if d > 0.0 { x - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// `2·sup φ·|λ₁ - λ₂|`, a bound on `sup_x |F_k(x, λ₁²) - F_k(x, λ₂²)|`.
pub fn lipschitz_gap_bound(lambda1: f64, lambda2: f64) -> f64 {
    2.0 * GAUSS_DENSITY_MAX * (lambda1 - lambda2).abs()
}
