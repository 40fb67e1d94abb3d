//! Stationary AR(p) simulation with additive gross errors.
//!
//! Series are indexed `t = 1-p, …, n`; element `i` of every vector holds
//! time `t = i + 1 - p`, so the first `p` entries are the pre-sample values.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{local_rate, InnovationLaw, ScalarDistribution};
use crate::error::{Error, Result};

/// Companion-matrix roots must have modulus below `1 - STATIONARITY_MARGIN`.
pub const STATIONARITY_MARGIN: f64 = 1e-9;

/// `v_t = β₁v_{t-1} + … + β_p v_{t-p} + ν + ε_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArSpec {
    betas: Vec<f64>,
    nu: f64,
}

impl ArSpec {
    pub fn new(betas: Vec<f64>, nu: f64) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Domain("AR order must be at least 1".into()));
        }
        if betas.iter().any(|b| !b.is_finite()) || !nu.is_finite() {
            return Err(Error::Domain("AR parameters must be finite".into()));
        }
        let max_modulus = max_root_modulus(&betas);
        if !(max_modulus < 1.0 - STATIONARITY_MARGIN) {
            return Err(Error::NotStationary { max_modulus });
        }
        Ok(Self { betas, nu })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn order(&self) -> usize {
        self.betas.len()
    }

    /// Process mean `μ = ν / (1 - β₁ - … - β_p)`.
    pub fn mu(&self) -> f64 {
        self.nu / (1.0 - self.betas.iter().sum::<f64>())
    }
}

/// Largest eigenvalue modulus of the AR companion matrix.
pub fn max_root_modulus(betas: &[f64]) -> f64 {
    let p = betas.len();
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            betas[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn default_burn_in(p: usize) -> usize {
    1000.max(50 * p)
}

/// Clean latent path over `t = 1-p, …, n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSeries {
    pub v: Vec<f64>,
    /// Centered path `u_t = v_t - μ`.
    pub u: Vec<f64>,
    pub eps: Vec<f64>,
    pub mu: f64,
    pub n: usize,
    pub p: usize,
}

/// Simulate from a zero state, discard `burn_in` steps, keep `n + p` values.
pub fn simulate_clean<L, R>(
    spec: &ArSpec,
    innovations: &L,
    n: usize,
    rng: &mut R,
    burn_in: usize,
) -> Result<LatentSeries>
where
    L: InnovationLaw,
    R: Rng,
{
    let p = spec.order();
    if n < p + 1 {
        return Err(Error::Domain(format!("need n >= p + 1 = {}, got n = {n}", p + 1)));
    }
    let betas = spec.betas();
    let len = n + p;
    let mut u = vec![0.0; burn_in + len];
    let mut eps = Vec::with_capacity(len);
    for t in 0..u.len() {
        let e = innovations.draw(rng);
        let mut val = e;
        for (j, b) in betas.iter().enumerate() {
            if t > j {
                val += b * u[t - 1 - j];
            }
        }
        u[t] = val;
        if t >= burn_in {
            eps.push(e);
        }
    }
    let u = u.split_off(burn_in);
    let mu = spec.mu();
    let v = u.iter().map(|x| mu + x).collect();
    Ok(LatentSeries { v, u, eps, mu, n, p })
}

/// Outliers `z_t·ξ_t` with `z_t ~ Bernoulli(min(1, γ/√n))`, `ξ_t ~ Π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub gamma: f64,
    pub pi: ScalarDistribution,
}

impl ContaminationSpec {
    pub fn new(gamma: f64, pi: ScalarDistribution) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Domain(format!("gamma must be finite and nonnegative, got {gamma}")));
        }
        pi.validate()?;
        Ok(Self { gamma, pi })
    }

    pub fn none() -> Self {
        Self { gamma: 0.0, pi: ScalarDistribution::point_mass(0.0) }
    }

    pub fn rate(&self, n: usize) -> f64 {
        local_rate(self.gamma, n)
    }
}

/// Latent quantities behind an observed series, kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub eps: Vec<f64>,
    pub z: Vec<bool>,
    pub xi: Vec<f64>,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    /// `y_{1-p}, …, y_n`.
    pub y: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub truth: Option<Truth>,
}

impl ObservedSeries {
    /// Wrap raw observations whose first `p` values are the pre-sample.
    pub fn from_values(y: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Domain("AR order must be at least 1".into()));
        }
        if y.len() <= p {
            return Err(Error::Domain(format!(
                "series of length {} has no observations after {p} pre-sample values",
                y.len()
            )));
        }
        if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite observation at position {bad}")));
        }
        let n = y.len() - p;
        Ok(Self { y, n, p, truth: None })
    }

    /// Observation at time `t`, for `1 - p <= t <= n`.
    pub fn at(&self, t: isize) -> f64 {
        self.y[(t + self.p as isize - 1) as usize]
    }

    /// CSV with columns `t,y,v,z,xi,eps`; latent columns stay empty without a truth record.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "y", "v", "z", "xi", "eps"])?;
        for (i, y) in self.y.iter().enumerate() {
            let t = i as isize + 1 - self.p as isize;
            let mut row = vec![t.to_string(), y.to_string()];
            match &self.truth {
                Some(tr) => {
                    row.push(tr.v[i].to_string());
                    row.push(u8::from(tr.z[i]).to_string());
                    row.push(tr.xi[i].to_string());
                    row.push(tr.eps[i].to_string());
                }
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            w.write_record(&row)?;
        }
        w.flush()
    }
}

/// Add gross errors to every index `t = 1-p, …, n`.
pub fn contaminate<R: Rng>(
    latent: &LatentSeries,
    cont: &ContaminationSpec,
    n: usize,
    rng: &mut R,
) -> ObservedSeries {
    let rate = cont.rate(n);
    let len = latent.v.len();
    let mut z = Vec::with_capacity(len);
    let mut xi = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    for &v in &latent.v {
        let flag = rng.random::<f64>() < rate;
        let x = cont.pi.sample_one(rng);
        y.push(if flag { v + x } else { v });
        z.push(flag);
        xi.push(x);
    }
    ObservedSeries {
        y,
        n: latent.n,
        p: latent.p,
        truth: Some(Truth {
            v: latent.v.clone(),
            u: latent.u.clone(),
            eps: latent.eps.clone(),
            z,
            xi,
            mu: latent.mu,
        }),
    }
}
