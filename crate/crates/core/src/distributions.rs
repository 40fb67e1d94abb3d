//! Scalar laws used as the hypothesized innovation distribution `G0`, the
//! alternative component `H`, and the outlier law `Π`.
//!
//! Which kinds satisfy the smoothness condition required of `G0` and `H`
//! (twice differentiable with bounded second derivative):
//!
//! | kind                  | smooth | symmetric about 0 | finite variance |
//! |-----------------------|--------|-------------------|-----------------|
//! | `Gaussian`            | yes    | yes               | yes             |
//! | `StudentT`            | yes    | yes               | iff `dof > 2`   |
//! | `Laplace`             | no (kink at 0) | yes       | yes             |
//! | `PointMass`           | no     | iff `c = 0`       | yes             |
//! | `TwoPointSymmetric`   | no     | yes               | yes             |
//! | `FiniteDiscrete`      | no     | checked numerically | yes           |
//! | `EmpiricalSampler`    | no     | unknown           | unknown         |
//!
//! `Π` may be any kind; no moment conditions are placed on it.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::special::{gauss_legendre, std_normal_cdf, std_normal_pdf, std_normal_quantile};

/// Absolute error target for [`expect_g0_shifted`].
pub const EXPECTATION_TOL: f64 = 1e-6;

/// Default node budget for shifted expectations under a continuous `Π`.
pub const DEFAULT_EXPECTATION_BUDGET: usize = 200_000;

type SamplerFn = dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync;

/// A law known only through a sampler. The CDF and expectations are
/// evaluated on a fixed cache of `budget` draws taken at construction.
#[derive(Clone)]
pub struct EmpiricalSampler {
    sampler: Arc<SamplerFn>,
    cache: Arc<[f64]>,
}

impl EmpiricalSampler {
    pub fn new<F>(sampler: F, budget: usize, seed: u64) -> Self
    where
        F: Fn(&mut dyn RngCore) -> f64 + Send + Sync + 'static,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cache: Vec<f64> = (0..budget).map(|_| sampler(&mut rng)).collect();
        cache.sort_by(f64::total_cmp);
        Self {
            sampler: Arc::new(sampler),
            cache: cache.into(),
        }
    }

    pub fn budget(&self) -> usize {
        self.cache.len()
    }

    fn cached(&self) -> &[f64] {
        &self.cache
    }
}

/// Two samplers are equal only when they share the same sampler and cache.
impl PartialEq for EmpiricalSampler {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.sampler, &other.sampler) && Arc::ptr_eq(&self.cache, &other.cache)
    }
}

impl fmt::Debug for EmpiricalSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmpiricalSampler")
            .field("budget", &self.cache.len())
            .finish_non_exhaustive()
    }
}

/// Tagged scalar distribution, e.g. `{kind = "gaussian", sigma = 1.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarDistribution {
    Gaussian {
        sigma: f64,
    },
    Laplace {
        scale: f64,
    },
    StudentT {
        dof: f64,
        scale: f64,
    },
    PointMass {
        c: f64,
    },
    /// `±c` with probability 1/2 each.
    TwoPointSymmetric {
        c: f64,
    },
    FiniteDiscrete {
        atoms: Vec<f64>,
        weights: Vec<f64>,
    },
    #[serde(skip)]
    EmpiricalSampler(EmpiricalSampler),
}

impl ScalarDistribution {
    pub fn gaussian(sigma: f64) -> Self {
        Self::Gaussian { sigma }
    }

    pub fn laplace(scale: f64) -> Self {
        Self::Laplace { scale }
    }

    pub fn student_t(dof: f64, scale: f64) -> Self {
        Self::StudentT { dof, scale }
    }

    pub fn point_mass(c: f64) -> Self {
        Self::PointMass { c }
    }

    pub fn two_point_symmetric(c: f64) -> Self {
        Self::TwoPointSymmetric { c }
    }

    /// Atoms are sorted and weights normalized to sum to one.
    pub fn finite_discrete(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let d = Self::FiniteDiscrete { atoms, weights };
        d.validate()?;
        let Self::FiniteDiscrete { atoms, weights } = d else {
            unreachable!()
        };
        let total: f64 = weights.iter().sum();
        let mut pairs: Vec<(f64, f64)> = atoms
            .into_iter()
            .zip(weights.into_iter().map(|w| w / total))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (atoms, weights) = pairs.into_iter().unzip();
        Ok(Self::FiniteDiscrete { atoms, weights })
    }

    pub fn empirical_sampler(sampler: EmpiricalSampler) -> Self {
        Self::EmpiricalSampler(sampler)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Laplace { .. } => "laplace",
            Self::StudentT { .. } => "student_t",
            Self::PointMass { .. } => "point_mass",
            Self::TwoPointSymmetric { .. } => "two_point_symmetric",
            Self::FiniteDiscrete { .. } => "finite_discrete",
            Self::EmpiricalSampler(_) => "empirical_sampler",
        }
    }

    /// Checks parameter ranges. Deserialized values must pass this before use.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        match self {
            Self::Gaussian { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                bad(format!("gaussian sigma must be positive, got {sigma}"))
            }
            Self::Laplace { scale } if !(scale.is_finite() && *scale > 0.0) => {
                bad(format!("laplace scale must be positive, got {scale}"))
            }
            Self::StudentT { dof, scale } => {
                if !(dof.is_finite() && *dof > 0.0) {
                    bad(format!("student_t dof must be positive, got {dof}"))
                } else if !(scale.is_finite() && *scale > 0.0) {
                    bad(format!("student_t scale must be positive, got {scale}"))
                } else {
                    Ok(())
                }
            }
            Self::PointMass { c } | Self::TwoPointSymmetric { c } if !c.is_finite() => {
                bad(format!("atom must be finite, got {c}"))
            }
            Self::FiniteDiscrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return bad("finite_discrete needs equally many atoms and weights".into());
                }
                if atoms.iter().any(|a| !a.is_finite()) {
                    return bad("finite_discrete atoms must be finite".into());
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return bad("finite_discrete weights must be nonnegative".into());
                }
                if weights.iter().sum::<f64>() <= 0.0 {
                    return bad("finite_discrete weights sum to zero".into());
                }
                Ok(())
            }
            Self::EmpiricalSampler(s) if s.budget() == 0 => {
                bad("empirical sampler needs a positive budget".into())
            }
            _ => Ok(()),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            Self::Gaussian { .. } | Self::Laplace { .. } | Self::StudentT { .. }
        )
    }

    /// Whether the law is symmetric about zero: `P(X ≤ -x) = P(X ≥ x)`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Self::Gaussian { .. }
            | Self::Laplace { .. }
            | Self::StudentT { .. }
            | Self::TwoPointSymmetric { .. } => true,
            Self::PointMass { c } => *c == 0.0,
            Self::FiniteDiscrete { atoms, .. } => atoms.iter().all(|&a| {
                let w = |t: f64| self.mass_at(t);
                (w(a) - w(-a)).abs() <= 1e-12
            }),
            Self::EmpiricalSampler(_) => false,
        }
    }

    /// Twice differentiable with bounded second derivative.
    pub fn is_smooth(&self) -> bool {
        matches!(self, Self::Gaussian { .. } | Self::StudentT { .. })
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Self::Gaussian { .. } | Self::Laplace { .. } | Self::TwoPointSymmetric { .. } => {
                Some(0.0)
            }
            Self::StudentT { dof, .. } => (*dof > 1.0).then_some(0.0),
            Self::PointMass { c } => Some(*c),
            Self::FiniteDiscrete { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                Some(atoms.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() / total)
            }
            Self::EmpiricalSampler(s) => {
                let c = s.cached();
                Some(c.iter().sum::<f64>() / c.len() as f64)
            }
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            Self::Gaussian { sigma } => Some(sigma * sigma),
            Self::Laplace { scale } => Some(2.0 * scale * scale),
            Self::StudentT { dof, scale } => {
                (*dof > 2.0).then(|| scale * scale * dof / (dof - 2.0))
            }
            Self::PointMass { .. } => Some(0.0),
            Self::TwoPointSymmetric { c } => Some(c * c),
            Self::FiniteDiscrete { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let m = self.mean()?;
                Some(
                    atoms
                        .iter()
                        .zip(weights)
                        .map(|(a, w)| w * (a - m) * (a - m))
                        .sum::<f64>()
                        / total,
                )
            }
            Self::EmpiricalSampler(s) => {
                let c = s.cached();
                let m = self.mean()?;
                Some(c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / c.len() as f64)
            }
        }
    }

    fn mass_at(&self, x: f64) -> f64 {
        self.cdf(x) - self.cdf_left(x)
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match self {
            Self::Gaussian { sigma } => std_normal_cdf(x / sigma),
            Self::Laplace { scale } => {
                if x < 0.0 {
                    0.5 * (x / scale).exp()
                } else {
                    1.0 - 0.5 * (-x / scale).exp()
                }
            }
            Self::StudentT { dof, scale } => student_t_cdf(x / scale, *dof),
            Self::PointMass { c } => f64::from(u8::from(x >= *c)),
            Self::TwoPointSymmetric { c } => {
                let c = c.abs();
                if x >= c {
                    1.0
                } else if x >= -c {
                    0.5
                } else {
                    0.0
                }
            }
            Self::FiniteDiscrete { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let below: f64 = atoms
                    .iter()
                    .zip(weights)
                    .filter(|(a, _)| **a <= x)
                    .map(|(_, w)| w)
                    .sum();
                (below / total).min(1.0)
            }
            Self::EmpiricalSampler(s) => {
                let c = s.cached();
                c.partition_point(|v| *v <= x) as f64 / c.len() as f64
            }
        }
    }

    /// `P(X < x)`, the left limit of the CDF.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match self {
            Self::PointMass { c } => f64::from(u8::from(x > *c)),
            Self::TwoPointSymmetric { c } => {
                let c = c.abs();
                if x > c {
                    1.0
                } else if x > -c {
                    0.5
                } else {
                    0.0
                }
            }
            Self::FiniteDiscrete { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let below: f64 = atoms
                    .iter()
                    .zip(weights)
                    .filter(|(a, _)| **a < x)
                    .map(|(_, w)| w)
                    .sum();
                (below / total).min(1.0)
            }
            Self::EmpiricalSampler(s) => {
                let c = s.cached();
                c.partition_point(|v| *v < x) as f64 / c.len() as f64
            }
            _ => self.cdf(x),
        }
    }

    /// Density for the continuous kinds.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Self::Gaussian { sigma } => Some(std_normal_pdf(x / sigma) / sigma),
            Self::Laplace { scale } => Some(0.5 * (-x.abs() / scale).exp() / scale),
            Self::StudentT { dof, scale } => Some(student_t_pdf(x / scale, *dof) / scale),
            _ => None,
        }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        match self {
            Self::Gaussian { sigma } => Ok(sigma * std_normal_quantile(q)),
            Self::Laplace { scale } => Ok(if q < 0.5 {
                scale * (2.0 * q).ln()
            } else {
                -scale * (2.0 * (1.0 - q)).ln()
            }),
            Self::StudentT { dof, scale } => Ok(scale * student_t_quantile(q, *dof)),
            other => Err(Error::NonInvertible(other.name())),
        }
    }

    pub fn sample_one<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            Self::Laplace { scale } => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Self::StudentT { dof, scale } => {
                let t = rand_distr::StudentT::new(*dof).expect("validated dof");
                scale * t.sample(rng)
            }
            Self::PointMass { c } => *c,
            Self::TwoPointSymmetric { c } => {
                if rng.random::<bool>() {
                    *c
                } else {
                    -*c
                }
            }
            Self::FiniteDiscrete { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (a, w) in atoms.iter().zip(weights) {
                    if u < *w {
                        return *a;
                    }
                    u -= w;
                }
                *atoms.last().expect("validated nonempty")
            }
            Self::EmpiricalSampler(s) => (s.sampler)(rng),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    /// Largest `|F(-x) - (1 - F(x⁻))|` over a probe grid; 0 for symmetric laws.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.variance().filter(|v| v.is_finite() && *v > 0.0).map_or(1.0, f64::sqrt);
        let mut probes: Vec<f64> = (0..=400).map(|i| scale * i as f64 * 0.025).collect();
        if let Self::FiniteDiscrete { atoms, .. } = self {
            probes.extend(atoms.iter().map(|a| a.abs()));
        }
        if let Self::TwoPointSymmetric { c } = self {
            probes.push(c.abs());
        }
        if let Self::PointMass { c } = self {
            probes.push(c.abs());
        }
        probes
            .iter()
            .map(|&x| (self.cdf(-x) - (1.0 - self.cdf_left(x))).abs())
            .fold(0.0, f64::max)
    }
}

fn student_t_cdf(t: f64, dof: f64) -> f64 {
    let h = dof / (dof + t * t);
    let tail = 0.5 * beta_reg(0.5 * dof, 0.5, h);
    if t <= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

fn student_t_pdf(t: f64, dof: f64) -> f64 {
    let ln_norm = ln_gamma(0.5 * (dof + 1.0))
        - ln_gamma(0.5 * dof)
        - 0.5 * (dof * std::f64::consts::PI).ln();
    (ln_norm - 0.5 * (dof + 1.0) * (1.0 + t * t / dof).ln()).exp()
}

/// Bracketed Newton inversion of the standard t CDF.
fn student_t_quantile(q: f64, dof: f64) -> f64 {
    if q == 0.5 {
        return 0.0;
    }
    // solve on the lower half and reflect, so both tails agree exactly
    let (target, sign) = if q < 0.5 { (q, -1.0) } else { (1.0 - q, 1.0) };
    let mut hi = 0.0;
    let mut lo = -1.0;
    while student_t_cdf(lo, dof) > target {
        hi = lo;
        lo *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = student_t_cdf(x, dof) - target;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = student_t_pdf(x, dof);
        let mut next = x - f / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            x = next;
            break;
        }
        x = next;
    }
    -sign * x
}

/// The local-alternative mixture `(1 - ρₙ)·G0 + ρₙ·H`, `ρₙ = min(1, ρ/√n)`.
#[derive(Clone, Debug)]
pub struct MixtureAn {
    pub g0: ScalarDistribution,
    pub h: ScalarDistribution,
    pub rho: f64,
    pub n: usize,
}

impl MixtureAn {
    pub fn new(g0: ScalarDistribution, h: ScalarDistribution, rho: f64, n: usize) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::Domain(format!("rho must be finite and nonnegative, got {rho}")));
        }
        if n == 0 {
            return Err(Error::Domain("mixture needs n >= 1".into()));
        }
        Ok(Self { g0, h, rho, n })
    }

    pub fn weight(&self) -> f64 {
        local_rate(self.rho, self.n)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let w = self.weight();
        (1.0 - w) * self.g0.cdf(x) + w * self.h.cdf(x)
    }
}

/// `min(1, c/√n)`, the rate shared by contamination and local alternatives.
pub fn local_rate(c: f64, n: usize) -> f64 {
    (c / (n as f64).sqrt()).min(1.0)
}

/// Anything that can drive the AR recursion.
pub trait InnovationLaw: Sync {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64;
}

impl InnovationLaw for ScalarDistribution {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        self.sample_one(rng)
    }
}

impl InnovationLaw for MixtureAn {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let w = self.weight();
        // draw the component flag unconditionally so the stream layout does not depend on rho
        let from_h = rng.random::<f64>() < w;
        if from_h {
            self.h.sample_one(rng)
        } else {
            self.g0.sample_one(rng)
        }
    }
}

/// `E G0(x + b·ξ)` for `ξ ~ Π`, to absolute error [`EXPECTATION_TOL`].
pub fn expect_g0_shifted(
    g0: &ScalarDistribution,
    pi: &ScalarDistribution,
    x: f64,
    b: f64,
    budget: usize,
) -> Result<f64> {
    expect_g0_shifted_with_tol(g0, pi, x, b, budget, EXPECTATION_TOL)
}

pub fn expect_g0_shifted_with_tol(
    g0: &ScalarDistribution,
    pi: &ScalarDistribution,
    x: f64,
    b: f64,
    budget: usize,
    tol: f64,
) -> Result<f64> {
    if b == 0.0 || !x.is_finite() {
        return Ok(g0.cdf(x));
    }
    match pi {
        ScalarDistribution::PointMass { c } => Ok(g0.cdf(x + b * c)),
        ScalarDistribution::TwoPointSymmetric { c } => {
            Ok(0.5 * (g0.cdf(x + b * c) + g0.cdf(x - b * c)))
        }
        ScalarDistribution::FiniteDiscrete { atoms, weights } => {
            let total: f64 = weights.iter().sum();
            Ok(atoms
                .iter()
                .zip(weights)
                .map(|(a, w)| w * g0.cdf(x + b * a))
                .sum::<f64>()
                / total)
        }
        ScalarDistribution::EmpiricalSampler(s) => monte_carlo_mean(s.cached(), |xi| g0.cdf(x + b * xi), budget, tol),
        _ => {
            let f = |u: f64| -> f64 {
                // quantile on a continuous law cannot fail for u in (0,1)
                let xi = pi.quantile(u).unwrap_or(0.0);
                g0.cdf(x + b * xi)
            };
            match adaptive_legendre(f, budget, tol) {
                Some(v) => Ok(v),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e7a1);
                    let draws = pi.sample(&mut rng, budget);
                    monte_carlo_mean(&draws, |xi| g0.cdf(x + b * xi), budget, tol)
                }
            }
        }
    }
}

fn monte_carlo_mean(draws: &[f64], f: impl Fn(f64) -> f64, budget: usize, tol: f64) -> Result<f64> {
    let n = draws.len().min(budget);
    if n < 2 {
        return Err(Error::BudgetTooSmall {
            budget,
            tolerance: tol,
            achieved: f64::INFINITY,
        });
    }
    let vals: Vec<f64> = draws[..n].iter().map(|&v| f(v)).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    if se > tol {
        return Err(Error::BudgetTooSmall {
            budget,
            tolerance: tol,
            achieved: se,
        });
    }
    Ok(mean)
}

const GL_ORDER: usize = 10;

/// Adaptive bisection with a 10-point Gauss–Legendre rule on (0, 1).
/// `None` when `budget` integrand evaluations do not reach `tol`.
fn adaptive_legendre(f: impl Fn(f64) -> f64, budget: usize, tol: f64) -> Option<f64> {
    let (nodes, weights) = gauss_legendre(GL_ORDER);
    let rule = |a: f64, b: f64| -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * nodes
            .iter()
            .zip(&weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
    };
    let mut used = GL_ORDER;
    let mut stack = vec![(0.0_f64, 1.0_f64, rule(0.0, 1.0))];
    let mut total = 0.0;
    while let Some((a, b, whole)) = stack.pop() {
        if used + 2 * GL_ORDER > budget {
            return None;
        }
        let m = 0.5 * (a + b);
        let left = rule(a, m);
        let right = rule(m, b);
        used += 2 * GL_ORDER;
        let refined = left + right;
        // local tolerance proportional to width; integrand is bounded in [0,1]
        if (refined - whole).abs() <= tol * (b - a) * 0.5 || (b - a) < 1e-12 {
            total += refined;
        } else {
            stack.push((a, m, left));
            stack.push((m, b, right));
        }
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn cdf_examples() {
        let g = ScalarDistribution::gaussian(1.0);
        assert_eq!(g.cdf(0.0), 0.5);
        assert!((g.cdf(1.2) - 0.884_930).abs() < 5e-7);
        let pm = ScalarDistribution::point_mass(2.0);
        assert_eq!(pm.cdf(1.9), 0.0);
        assert_eq!(pm.cdf(2.0), 1.0);
        for d in [g, pm, ScalarDistribution::laplace(1.0)] {
            assert_eq!(d.cdf(f64::INFINITY), 1.0);
            assert_eq!(d.cdf(f64::NEG_INFINITY), 0.0);
        }
    }

    #[test]
    fn quantile_examples() {
        let g = ScalarDistribution::gaussian(1.0);
        assert!(g.quantile(0.5).unwrap().abs() < 1e-15);
        assert!((g.quantile(0.75).unwrap() - 0.674_490).abs() < 5e-7);
        assert_eq!(
            ScalarDistribution::point_mass(2.0).quantile(0.5),
            Err(Error::NonInvertible("point_mass"))
        );
        assert!(matches!(g.quantile(1.0), Err(Error::Domain(_))));
        assert!(matches!(g.quantile(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn quantile_round_trip_and_symmetry() {
        let kinds = [
            ScalarDistribution::gaussian(1.3),
            ScalarDistribution::laplace(0.7),
            ScalarDistribution::student_t(5.0, 1.0),
            ScalarDistribution::student_t(1.5, 2.0),
        ];
        for d in &kinds {
            for i in 1..200 {
                let q = i as f64 / 200.0;
                let x = d.quantile(q).unwrap();
                assert!((d.cdf(x) - q).abs() < 1e-10, "{d:?} q={q}");
                assert!((x + d.quantile(1.0 - q).unwrap()).abs() < 1e-10, "{d:?} q={q}");
            }
            for i in 0..100 {
                let x = i as f64 * 0.1;
                assert!((d.cdf(-x) + d.cdf(x) - 1.0).abs() < 1e-12, "{d:?} x={x}");
            }
        }
    }

    #[test]
    fn student_t_matches_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let reference = StudentsT::new(0.0, 1.5, 4.0).unwrap();
        let d = ScalarDistribution::student_t(4.0, 1.5);
        for i in -40..=40 {
            let x = i as f64 * 0.2;
            assert!((d.cdf(x) - reference.cdf(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn discrete_symmetry() {
        let d = ScalarDistribution::two_point_symmetric(3.0);
        for x in [0.0, 1.0, 3.0, 4.0] {
            assert!((d.cdf(-x) - (1.0 - d.cdf_left(x))).abs() < 1e-15);
        }
        assert!(d.is_symmetric());
        let fd = ScalarDistribution::finite_discrete(vec![1.0, -1.0, 0.0], vec![1.0, 1.0, 2.0]).unwrap();
        assert!(fd.is_symmetric());
        assert!(fd.symmetry_defect() < 1e-15);
        let skew = ScalarDistribution::finite_discrete(vec![1.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert!(!skew.is_symmetric());
        assert!(skew.symmetry_defect() > 0.1);
        assert!(!ScalarDistribution::point_mass(10.0).is_symmetric());
    }

    #[test]
    fn sampling_examples() {
        let mut r = rng(1);
        assert_eq!(ScalarDistribution::point_mass(3.0).sample(&mut r, 4), vec![3.0; 4]);
        assert!(ScalarDistribution::gaussian(1.0).sample(&mut r, 0).is_empty());
        let n = 1_000_000;
        let xs = ScalarDistribution::gaussian(1.0).sample(&mut r, n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn sampled_moments_of_innovation_kinds() {
        let mut r = rng(2);
        let n = 400_000;
        for d in [
            ScalarDistribution::gaussian(2.0),
            ScalarDistribution::laplace(1.0),
            ScalarDistribution::student_t(6.0, 1.0),
        ] {
            let xs = d.sample(&mut r, n);
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let v = d.variance().unwrap();
            assert!(mean.abs() < 5.0 * (v / n as f64).sqrt(), "{d:?}");
            assert!((var / v - 1.0).abs() < 0.03, "{d:?} var={var}");
        }
    }

    #[test]
    fn mixture_matches_dkw_band() {
        let mix = MixtureAn::new(
            ScalarDistribution::gaussian(1.0),
            ScalarDistribution::laplace(3.0),
            20.0,
            400,
        )
        .unwrap();
        assert_eq!(mix.weight(), 1.0);
        let mix = MixtureAn { n: 1600, ..mix };
        assert!((mix.weight() - 0.5).abs() < 1e-15);
        let n = 100_000;
        let mut r = rng(3);
        let mut xs: Vec<f64> = (0..n).map(|_| mix.draw(&mut r)).collect();
        xs.sort_by(f64::total_cmp);
        let band = ((2.0_f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
        let mut worst = 0.0_f64;
        for (i, &x) in xs.iter().enumerate() {
            let f = mix.cdf(x);
            worst = worst.max((f - (i + 1) as f64 / n as f64).abs());
            worst = worst.max((f - i as f64 / n as f64).abs());
        }
        assert!(worst < band, "sup gap {worst} exceeds DKW band {band}");
    }

    #[test]
    fn shifted_expectation_examples() {
        let g0 = ScalarDistribution::gaussian(1.0);
        let zero = ScalarDistribution::point_mass(0.0);
        for &(x, b) in &[(0.3, 2.0), (-1.0, -0.5), (2.0, 7.0)] {
            assert_eq!(expect_g0_shifted(&g0, &zero, x, b, 10).unwrap(), g0.cdf(x));
            let pi = ScalarDistribution::student_t(1.0, 5.0);
            assert_eq!(expect_g0_shifted(&g0, &pi, x, 0.0, 10).unwrap(), g0.cdf(x));
        }
        let pm2 = ScalarDistribution::point_mass(2.0);
        let v = expect_g0_shifted(&g0, &pm2, 0.0, -1.0, 10).unwrap();
        assert!((v - 0.022_750).abs() < 5e-7);
    }

    #[test]
    fn discrete_expectation_is_weighted_sum() {
        let g0 = ScalarDistribution::laplace(1.0);
        let pi = ScalarDistribution::finite_discrete(vec![-2.0, 0.5, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
        let (x, b) = (0.4, 0.6);
        let hand = 0.2 * g0.cdf(x - 1.2) + 0.5 * g0.cdf(x + 0.3) + 0.3 * g0.cdf(x + 2.4);
        let got = expect_g0_shifted(&g0, &pi, x, b, 1).unwrap();
        assert!((got - hand).abs() < 1e-15);
        let two = ScalarDistribution::two_point_symmetric(3.0);
        let got = expect_g0_shifted(&g0, &two, x, b, 1).unwrap();
        assert!((got - 0.5 * (g0.cdf(x + 1.8) + g0.cdf(x - 1.8))).abs() < 1e-15);
    }

    #[test]
    fn continuous_expectation_against_closed_form() {
        // G0 = N(0,1), ξ ~ N(0, s²): E Φ(x + bξ) = Φ(x / sqrt(1 + b²s²))
        let g0 = ScalarDistribution::gaussian(1.0);
        let pi = ScalarDistribution::gaussian(1.5);
        for &(x, b) in &[(0.0, 1.0), (0.7, -0.5), (-1.3, 2.0), (2.5, 0.3)] {
            let got = expect_g0_shifted(&g0, &pi, x, b, DEFAULT_EXPECTATION_BUDGET).unwrap();
            let exact = std_normal_cdf(x / (1.0_f64 + b * b * 2.25).sqrt());
            assert!((got - exact).abs() < 1e-6, "x={x} b={b} got={got} exact={exact}");
        }
    }

    #[test]
    fn heavy_tailed_pi_still_integrates() {
        let g0 = ScalarDistribution::gaussian(1.0);
        let cauchy = ScalarDistribution::student_t(1.0, 1.0);
        let v = expect_g0_shifted(&g0, &cauchy, 0.5, 1.0, DEFAULT_EXPECTATION_BUDGET).unwrap();
        assert!(v > 0.5 && v < g0.cdf(0.5));
    }

    #[test]
    fn tiny_budget_is_reported() {
        let g0 = ScalarDistribution::gaussian(1.0);
        let pi = ScalarDistribution::gaussian(3.0);
        let err = expect_g0_shifted(&g0, &pi, 0.3, 1.0, 15).unwrap_err();
        assert!(matches!(err, Error::BudgetTooSmall { .. }));
        let sampler = EmpiricalSampler::new(|r| r.next_u32() as f64 / u32::MAX as f64, 1000, 9);
        let pi = ScalarDistribution::empirical_sampler(sampler);
        assert!(matches!(
            expect_g0_shifted(&g0, &pi, 0.3, 1.0, 1000),
            Err(Error::BudgetTooSmall { .. })
        ));
        let loose = expect_g0_shifted_with_tol(&g0, &pi, 0.3, 1.0, 1000, 1e-2).unwrap();
        assert!(loose > g0.cdf(0.3) && loose < g0.cdf(1.3));
    }

    #[test]
    fn config_records_parse() {
        let d: ScalarDistribution = serde_json::from_str(r#"{"kind":"gaussian","sigma":1.0}"#).unwrap();
        assert!(matches!(d, ScalarDistribution::Gaussian { sigma } if sigma == 1.0));
        let d: ScalarDistribution = serde_json::from_str(r#"{"kind":"point_mass","c":10.0}"#).unwrap();
        assert!(matches!(d, ScalarDistribution::PointMass { c } if c == 10.0));
        assert!(serde_json::from_str::<ScalarDistribution>(r#"{"kind":"gaussian","sd":1}"#).is_err());
        let bad: ScalarDistribution = serde_json::from_str(r#"{"kind":"gaussian","sigma":-1.0}"#).unwrap();
        assert!(bad.validate().is_err());
    }
}
