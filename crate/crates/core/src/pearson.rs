//! Symmetric cells, the symmetrized Pearson statistic and its decision rule,
//! and the noncentrality and asymptotic power under local alternatives.
//!
//! Cell `j` is `B⁺_j ∪ B⁻_j` with `B⁺_j = (x_{j-1}, x_j]` and
//! `B⁻_j = (-x_j, -x_{j-1}]`, over breakpoints `0 = x₀ < … < x_m = ∞`.
//! A residual equal to 0 therefore belongs to cell 1.

use serde::{Deserialize, Serialize};

use crate::ar_sim::ObservedSeries;
use crate::chisq_dist::{central_quantile, noncentral_sf};
use crate::distributions::ScalarDistribution;
use crate::edf_shift::{delta_vector, Edf, ShiftContext};
use crate::error::{Error, Result};
use crate::estimation::{fit, residuals, EstimationMethod, FittedAr, ResidualSet};

/// Tolerance of the symmetry self-test applied to `H`.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    /// `x₀ = 0, x₁, …, x_{m-1}, x_m = ∞`.
    breakpoints: Vec<f64>,
    p_plus: Vec<f64>,
    p0: Vec<f64>,
}

impl CellPartition {
    /// Cells from interior breakpoints `x₁ < … < x_{m-1}`, all finite and positive.
    pub fn new(g0: &ScalarDistribution, interior: &[f64]) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::InvalidPartition("m must exceed 1".into()));
        }
        if interior.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidPartition("breakpoints must be finite and positive".into()));
        }
        if interior.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition("breakpoints must be strictly increasing".into()));
        }
        let mut breakpoints = Vec::with_capacity(interior.len() + 2);
        breakpoints.push(0.0);
        breakpoints.extend_from_slice(interior);
        breakpoints.push(f64::INFINITY);
        let p_plus: Vec<f64> = breakpoints
            .windows(2)
            .map(|w| g0.cdf(w[1]) - g0.cdf(w[0]))
            .collect();
        let p0: Vec<f64> = p_plus.iter().map(|p| 2.0 * p).collect();
        if let Some(j) = p0.iter().position(|p| !(*p > 0.0)) {
            return Err(Error::InvalidPartition(format!("cell {} has zero null probability", j + 1)));
        }
        let total: f64 = p0.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPartition(format!(
                "null cell probabilities sum to {total}; G0 must be continuous and symmetric"
            )));
        }
        Ok(Self { breakpoints, p_plus, p0 })
    }

    /// `x_j = G0⁻¹(1/2 + j/(2m))`, so every cell has null probability `1/m`.
    pub fn equiprobable(g0: &ScalarDistribution, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidPartition("m must exceed 1".into()));
        }
        let interior: Vec<f64> = (1..m)
            .map(|j| g0.quantile(0.5 + j as f64 / (2 * m) as f64))
            .collect::<Result<_>>()?;
        Self::new(g0, &interior)
    }

    pub fn m(&self) -> usize {
        self.p0.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn interior(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    pub fn p_plus(&self) -> &[f64] {
        &self.p_plus
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    /// Zero-based cell index of a residual.
    pub fn cell_of(&self, e: f64) -> usize {
        let inner = self.interior();
        if e > 0.0 {
            inner.partition_point(|x| *x < e)
        } else {
            let a = -e;
            inner.partition_point(|x| *x <= a)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellCounts {
    /// `ν̂_j = ν̂⁺_j + ν̂⁻_j`.
    pub nu_hat: Vec<u64>,
    pub n: u64,
}

pub fn count_cells(res: &ResidualSet, cells: &CellPartition) -> CellCounts {
    let mut nu_hat = vec![0u64; cells.m()];
    for &e in &res.eps_hat {
        nu_hat[cells.cell_of(e)] += 1;
    }
    CellCounts { nu_hat, n: res.eps_hat.len() as u64 }
}

/// `Σ_j (ν̂_j - n p⁰_j)² / (n p⁰_j)`.
pub fn pearson_statistic(counts: &CellCounts, cells: &CellPartition) -> f64 {
    let n = counts.n as f64;
    counts
        .nu_hat
        .iter()
        .zip(cells.p0())
        .map(|(&nu, &p)| {
            let expected = n * p;
            let d = nu as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Counts recovered from the symmetrized EDF: `ν̂_j = 2n[Ŝₙ(x_j) - Ŝₙ(x_{j-1})]`.
pub fn counts_from_sym_edf(edf: &Edf, cells: &CellPartition) -> CellCounts {
    let scaled: Vec<usize> = cells.breakpoints().iter().map(|&x| edf.sym_count(x)).collect();
    let nu_hat = scaled.windows(2).map(|w| (w[1] - w[0]) as u64).collect();
    CellCounts { nu_hat, n: edf.len() as u64 }
}

/// The statistic as a functional of `Ŝₙ`; equal to [`pearson_statistic`] bit for bit.
pub fn pearson_statistic_from_sym_edf(edf: &Edf, cells: &CellPartition) -> f64 {
    pearson_statistic(&counts_from_sym_edf(edf, cells), cells)
}

/// Ingredients of `λ̂²(ρ, γ, Π) = |P₀^{-1/2}[ρ(pᴴ - p⁰) + γδ(Π)]|²`, so that
/// grids over `(ρ, γ)` reuse one evaluation of `δ(Π)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoncentralityParts {
    pub p0: Vec<f64>,
    pub p_h: Vec<f64>,
    pub delta: Vec<f64>,
}

impl NoncentralityParts {
    pub fn new(ctx: &ShiftContext, h: &ScalarDistribution, cells: &CellPartition) -> Result<Self> {
        let defect = h.symmetry_defect();
        if !(defect <= SYMMETRY_TOL) {
            return Err(Error::AsymmetricH { defect });
        }
        let p_h = cells
            .breakpoints()
            .windows(2)
            .map(|w| 2.0 * (h.cdf(w[1]) - h.cdf(w[0])))
            .collect();
        Ok(Self {
            p0: cells.p0().to_vec(),
            p_h,
            delta: delta_vector(ctx, cells)?,
        })
    }

    /// `ρ(pᴴ - p⁰) + γδ(Π)`.
    pub fn shift_vector(&self, rho: f64, gamma: f64) -> Vec<f64> {
        self.p_h
            .iter()
            .zip(&self.p0)
            .zip(&self.delta)
            .map(|((ph, p0), d)| rho * (ph - p0) + gamma * d)
            .collect()
    }

    pub fn lambda2(&self, rho: f64, gamma: f64) -> f64 {
        self.shift_vector(rho, gamma)
            .iter()
            .zip(&self.p0)
            .map(|(v, p)| v * v / p)
            .sum()
    }
}

pub fn noncentrality(
    rho: f64,
    gamma: f64,
    ctx: &ShiftContext,
    h: &ScalarDistribution,
    cells: &CellPartition,
) -> Result<f64> {
    for (name, v) in [("rho", rho), ("gamma", gamma)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Domain(format!("{name} must be finite and nonnegative, got {v}")));
        }
    }
    Ok(NoncentralityParts::new(ctx, h, cells)?.lambda2(rho, gamma))
}

/// Chi-square critical value `χ_{m-1}(1 - α)`.
pub fn critical_value(m: usize, alpha: f64) -> Result<f64> {
    check_level(m, alpha)?;
    central_quantile((m - 1) as u32, 1.0 - alpha)
}

fn check_level(m: usize, alpha: f64) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidPartition("m must exceed 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `W = 1 - F_{m-1}(χ_{m-1}(1 - α), λ²)`.
pub fn asymptotic_power(lambda2: f64, m: usize, alpha: f64) -> Result<f64> {
    let crit = critical_value(m, alpha)?;
    noncentral_sf(crit, (m - 1) as u32, lambda2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub chi2: f64,
    pub dof: usize,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
}

/// Apply the rule "reject when χ̂² > χ_{m-1}(1 - α)".
pub fn decide(chi2: f64, m: usize, alpha: f64) -> Result<TestOutcome> {
    let critical = critical_value(m, alpha)?;
    let dof = m - 1;
    Ok(TestOutcome {
        chi2,
        dof,
        critical,
        p_value: noncentral_sf(chi2.max(0.0), dof as u32, 0.0)?,
        reject: chi2 > critical,
        alpha,
    })
}

/// Everything the pipeline produced for one series.
#[derive(Debug, Clone)]
pub struct TestRun {
    pub fit: FittedAr,
    pub residuals: ResidualSet,
    pub counts: CellCounts,
    pub outcome: TestOutcome,
}

/// fit → residuals → counts → statistic → decision.
pub fn run_test_detailed(
    series: &ObservedSeries,
    cells: &CellPartition,
    alpha: f64,
    method: EstimationMethod,
) -> Result<TestRun> {
    let fitted = fit(series, method)?;
    let res = residuals(series, &fitted);
    let counts = count_cells(&res, cells);
    let stat = pearson_statistic(&counts, cells);
    let outcome = decide(stat, cells.m(), alpha)?;
    Ok(TestRun { fit: fitted, residuals: res, counts, outcome })
}

pub fn run_test(
    series: &ObservedSeries,
    g0: &ScalarDistribution,
    cells: &CellPartition,
    alpha: f64,
    method: EstimationMethod,
) -> Result<TestOutcome> {
    if !g0.is_symmetric() {
        return Err(Error::Domain("G0 must be symmetric about zero".into()));
    }
    Ok(run_test_detailed(series, cells, alpha, method)?.outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::std_normal_cdf as phi;

    fn gauss() -> ScalarDistribution {
        ScalarDistribution::gaussian(1.0)
    }

    fn res(v: &[f64]) -> ResidualSet {
        ResidualSet { eps_hat: v.to_vec() }
    }

    #[test]
    fn equiprobable_partitions() {
        let c = CellPartition::equiprobable(&gauss(), 2).unwrap();
        assert!((c.interior()[0] - 0.674_490).abs() < 5e-7);
        assert!((c.p0()[0] - 0.5).abs() < 1e-15 && (c.p0()[1] - 0.5).abs() < 1e-15);
        for g0 in [ScalarDistribution::laplace(2.0), ScalarDistribution::student_t(3.0, 1.0)] {
            let c = CellPartition::equiprobable(&g0, 2).unwrap();
            assert!((c.p0()[0] - 0.5).abs() < 1e-10);
            let c = CellPartition::equiprobable(&g0, 7).unwrap();
            assert!(c.p0().iter().all(|p| (p - 1.0 / 7.0).abs() < 1e-10));
        }
        assert!(matches!(CellPartition::equiprobable(&gauss(), 1), Err(Error::InvalidPartition(_))));
        assert!(matches!(
            CellPartition::equiprobable(&ScalarDistribution::point_mass(0.0), 3),
            Err(Error::NonInvertible(_))
        ));
    }

    #[test]
    fn partition_validation() {
        assert!(CellPartition::new(&gauss(), &[]).is_err());
        assert!(CellPartition::new(&gauss(), &[1.0, 0.5]).is_err());
        assert!(CellPartition::new(&gauss(), &[-1.0]).is_err());
        assert!(CellPartition::new(&gauss(), &[1.0, f64::INFINITY]).is_err());
        let c = CellPartition::new(&gauss(), &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(c.m(), 4);
        assert!((c.p0().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn count_examples() {
        let c = CellPartition::equiprobable(&gauss(), 2).unwrap();
        assert_eq!(count_cells(&res(&[0.5, -0.5, 2.0]), &c).nu_hat, vec![2, 1]);
        assert_eq!(count_cells(&res(&[0.0]), &c).nu_hat, vec![1, 0]);
        let x1 = c.interior()[0];
        assert_eq!(count_cells(&res(&[x1; 5]), &c).nu_hat, vec![5, 0]);
        // the negative side is closed on the outer end
        assert_eq!(count_cells(&res(&[-x1]), &c).nu_hat, vec![0, 1]);
    }

    #[test]
    fn statistic_examples() {
        let c = CellPartition::equiprobable(&gauss(), 2).unwrap();
        let perfect = CellCounts { nu_hat: vec![5, 5], n: 10 };
        assert!(pearson_statistic(&perfect, &c) < 1e-25);
        let counts = CellCounts { nu_hat: vec![7, 3], n: 10 };
        assert!((pearson_statistic(&counts, &c) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn statistic_via_sym_edf_is_identical() {
        let c = CellPartition::new(&gauss(), &[0.3, 0.9, 1.6]).unwrap();
        let sample = [0.0, -0.3, 0.3, 0.9, -0.9, 1.6, -1.6, 2.5, -7.0, 0.1, -0.5, 1.2];
        let a = count_cells(&res(&sample), &c);
        let edf = Edf::new(&sample).unwrap();
        assert_eq!(counts_from_sym_edf(&edf, &c), a);
        assert_eq!(pearson_statistic(&a, &c), pearson_statistic_from_sym_edf(&edf, &c));
    }

    #[test]
    fn noncentrality_examples() {
        let g0 = gauss();
        let cells = CellPartition::equiprobable(&g0, 2).unwrap();
        let ctx = ShiftContext::new(g0.clone(), ScalarDistribution::point_mass(10.0), vec![0.5]);
        assert_eq!(noncentrality(0.0, 0.0, &ctx, &ScalarDistribution::gaussian(2.0), &cells).unwrap(), 0.0);
        assert!(noncentrality(3.0, 0.0, &ctx, &g0, &cells).unwrap().abs() < 1e-28);

        let x1 = cells.interior()[0];
        let p1h = 2.0 * (phi(x1 / 2.0) - 0.5);
        let hand = 4.0 * (p1h - 0.5).powi(2) * 4.0;
        let got = noncentrality(2.0, 0.0, &ctx, &ScalarDistribution::gaussian(2.0), &cells).unwrap();
        assert!((got - hand).abs() < 1e-14);
        // frozen from an independent normal-CDF evaluation
        assert!((got - 0.890_624_887_566_218_2).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_h_is_rejected() {
        let g0 = gauss();
        let cells = CellPartition::equiprobable(&g0, 3).unwrap();
        let ctx = ShiftContext::new(g0, ScalarDistribution::point_mass(1.0), vec![0.5]);
        let skew = ScalarDistribution::finite_discrete(vec![-1.0, 2.0], vec![2.0, 1.0]).unwrap();
        assert!(matches!(noncentrality(1.0, 1.0, &ctx, &skew, &cells), Err(Error::AsymmetricH { .. })));
        assert!(matches!(
            noncentrality(1.0, 1.0, &ctx, &ScalarDistribution::point_mass(0.5), &cells),
            Err(Error::AsymmetricH { .. })
        ));
    }

    #[test]
    fn power_examples() {
        for m in [2, 3, 5] {
            for alpha in [0.01, 0.05, 0.1] {
                assert!((asymptotic_power(0.0, m, alpha).unwrap() - alpha).abs() < 1e-10);
            }
            assert!(asymptotic_power(1e4, m, 0.05).unwrap() > 0.9999);
        }
        // frozen from an independent noncentral chi-square implementation
        let w = asymptotic_power(0.8907, 2, 0.05).unwrap();
        assert!((w - 0.156_611_993_812_024_5).abs() < 1e-9, "{w}");
        assert!(asymptotic_power(1.0, 1, 0.05).is_err());
        assert!(asymptotic_power(1.0, 3, 1.0).is_err());
    }

    #[test]
    fn strict_rejection_rule() {
        let crit = critical_value(4, 0.05).unwrap();
        let at = decide(crit, 4, 0.05).unwrap();
        assert!(!at.reject);
        assert!((at.p_value - 0.05).abs() < 1e-10);
        assert!(decide(crit * (1.0 + 1e-12), 4, 0.05).unwrap().reject);
        let zero = decide(0.0, 4, 0.05).unwrap();
        assert!(!zero.reject);
        assert_eq!(zero.p_value, 1.0);
        assert_eq!(zero.dof, 3);
    }

    #[test]
    fn outcome_json_fields() {
        let o = decide(1.6, 2, 0.05).unwrap();
        let v: serde_json::Value = serde_json::to_value(&o).unwrap();
        for key in ["chi2", "dof", "critical", "p_value", "reject", "alpha"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn parts_for(sigma_h: f64, c: f64, m: usize) -> NoncentralityParts {
            let g0 = gauss();
            let cells = CellPartition::equiprobable(&g0, m).unwrap();
            let ctx = ShiftContext::new(g0, ScalarDistribution::point_mass(c), vec![0.4, -0.2]);
            NoncentralityParts::new(&ctx, &ScalarDistribution::gaussian(sigma_h), &cells).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn shift_vector_telescopes(sigma in 0.3f64..4.0, c in -8.0f64..8.0, m in 2usize..8,
                                       rho in 0.0f64..10.0, gamma in 0.0f64..10.0) {
                let parts = parts_for(sigma, c, m);
                let total: f64 = parts.shift_vector(rho, gamma).iter().sum();
                prop_assert!(total.abs() < 1e-11);
            }

            #[test]
            fn noncentrality_is_a_quadratic_form(sigma in 0.3f64..4.0, c in -8.0f64..8.0, m in 2usize..8,
                                                 rho in 0.0f64..10.0, gamma in 0.0f64..10.0) {
                let parts = parts_for(sigma, c, m);
                let cross: f64 = parts.shift_vector(1.0, 0.0).iter()
                    .zip(parts.shift_vector(0.0, 1.0))
                    .zip(&parts.p0)
                    .map(|((a, b), p)| a * b / p)
                    .sum();
                let expected = rho * rho * parts.lambda2(1.0, 0.0)
                    + gamma * gamma * parts.lambda2(0.0, 1.0)
                    + 2.0 * rho * gamma * cross;
                let got = parts.lambda2(rho, gamma);
                prop_assert!((got - expected).abs() <= 1e-10 * (1.0 + got));
            }

            #[test]
            fn counts_partition_the_sample(sample in proptest::collection::vec(-6.0f64..6.0, 1..200), m in 2usize..9) {
                let cells = CellPartition::equiprobable(&gauss(), m).unwrap();
                let counts = count_cells(&res(&sample), &cells);
                prop_assert_eq!(counts.nu_hat.iter().sum::<u64>(), sample.len() as u64);
                let edf = Edf::new(&sample).unwrap();
                prop_assert_eq!(&counts_from_sym_edf(&edf, &cells), &counts);
                prop_assert_eq!(
                    pearson_statistic(&counts, &cells).to_bits(),
                    pearson_statistic_from_sym_edf(&edf, &cells).to_bits()
                );
            }

            #[test]
            fn scale_consistency(sample in proptest::collection::vec(-6.0f64..6.0, 1..200),
                                 m in 2usize..7, scale in 0.1f64..10.0) {
                let a = CellPartition::equiprobable(&gauss(), m).unwrap();
                let g0s = ScalarDistribution::gaussian(scale);
                let b = CellPartition::new(&g0s, &a.interior().iter().map(|x| x * scale).collect::<Vec<_>>()).unwrap();
                let ca = count_cells(&res(&sample), &a);
                let scaled: Vec<f64> = sample.iter().map(|e| e * scale).collect();
                let cb = count_cells(&res(&scaled), &b);
                prop_assert_eq!(&ca, &cb);
                let (sa, sb) = (pearson_statistic(&ca, &a), pearson_statistic(&cb, &b));
                prop_assert!((sa - sb).abs() <= 1e-9 * (1.0 + sa));
                let (oa, ob) = (decide(sa, m, 0.05).unwrap(), decide(sb, m, 0.05).unwrap());
                prop_assert_eq!(oa.reject, ob.reject);
            }

            #[test]
            fn power_grows_with_noncentrality(l in 0.0f64..60.0, dl in 0.0f64..5.0, m in 2usize..8) {
                let lo = asymptotic_power(l, m, 0.05).unwrap();
                let hi = asymptotic_power(l + dl, m, 0.05).unwrap();
                prop_assert!(hi >= lo - 1e-12);
                prop_assert!((0.05 - 1e-10..=1.0).contains(&lo));
            }
        }
    }
}
