//! Special functions shared by the distribution and chi-square modules.
//!
//! Log-gamma and the inverse error function come from `statrs`. The normal
//! CDF is built on the local incomplete gamma pair, which is accurate to a
//! few ulps where `statrs::erf` is not.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

/// sup of the standard Gaussian density, (2π)^{-1/2}.
pub const GAUSS_DENSITY_MAX: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    // Φ(-|x|) = Q(1/2, x²/2) / 2
    let tail = 0.5 * reg_gamma_pair(0.5, 0.5 * x * x).1;
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    GAUSS_DENSITY_MAX * (-0.5 * x * x).exp()
}

/// Standard normal quantile, polished with two Newton steps.
pub fn std_normal_quantile(q: f64) -> f64 {
    let mut x = -SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..2 {
        let d = std_normal_pdf(x);
        if !(d > 0.0 && x.is_finite()) {
            break;
        }
        x -= (std_normal_cdf(x) - q) / d;
    }
    x
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))` for `a > 0`, `x ≥ 0`.
///
/// Series for `x < a + 1`, Lentz continued fraction for the upper tail
/// otherwise, so each value is computed where it does not cancel.
pub fn reg_gamma_pair(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x == f64::INFINITY {
        return (1.0, 0.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
