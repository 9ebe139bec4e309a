//! Closed-form Jaynes-Cummings reference model.
//!
//! A two-level system whose Rabi frequency scales as the square root of a
//! randomly distributed integer (photon number, or atom number in a blockaded
//! ensemble) shows collapses and revivals once the oscillations are averaged
//! over that integer. The functions here evaluate those averages directly and
//! serve as analytic oracles for the numerical pipeline.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default Poisson truncation bound.
pub const DEFAULT_POISSON_NMAX: usize = 20;

/// `ln(n!)`.
///
/// Exact summation of `ln k` for small `n`; Stirling series beyond that, where
/// its truncation error is far below double precision.
pub fn ln_factorial(n: usize) -> f64 {
    const EXACT_LIMIT: usize = 256;
    if n < EXACT_LIMIT {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64 + 1.0;
        // ln Gamma(x), Stirling with three correction terms
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
    }
}

/// Binomial coefficient `C(n, k)` by multiplicative recurrence.
///
/// Every partial product is itself a binomial coefficient, so the result is
/// exact while it fits in the mantissa (all `n <= 50`).
pub fn binomial_coefficient(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for j in 0..k {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c.round()
}

/// Poisson law with mean `mean`, truncated at `n_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonDist {
    mean: f64,
    n_max: usize,
}

impl PoissonDist {
    pub fn new(mean: f64, n_max: usize) -> Result<Self> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(invalid(format!("Poisson mean must be positive, got {mean}")));
        }
        if n_max < 1 {
            return Err(invalid("Poisson truncation n_max must be at least 1"));
        }
        Ok(Self { mean, n_max })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Untruncated probability of `n`, evaluated in log space.
    pub fn pmf(&self, n: usize) -> f64 {
        (n as f64 * self.mean.ln() - self.mean - ln_factorial(n)).exp()
    }

    /// Probability mass beyond `n_max`, summed term by term from `n_max + 1`.
    pub fn tail_mass(&self) -> f64 {
        let mut total = 0.0;
        let mut n = self.n_max + 1;
        let mut term = self.pmf(n);
        // Terms decrease monotonically once n exceeds the mean.
        while term > total * 1e-18 || (n as f64) < self.mean {
            total += term;
            n += 1;
            term = self.pmf(n);
            if term == 0.0 && n as f64 > self.mean {
                break;
            }
        }
        total
    }

    /// `(n, p(n))` for `n = 0..=n_max`, not renormalised.
    pub fn weights(&self) -> Vec<(usize, f64)> {
        (0..=self.n_max).map(|n| (n, self.pmf(n))).collect()
    }
}

/// Binomial law: `trials` independent sites each occupied with probability
/// `success_prob`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialDist {
    trials: usize,
    success_prob: f64,
}

impl BinomialDist {
    pub fn new(trials: usize, success_prob: f64) -> Result<Self> {
        if trials < 1 {
            return Err(invalid("binomial trials must be at least 1"));
        }
        if !(0.0..=1.0).contains(&success_prob) {
            return Err(invalid(format!(
                "binomial success probability must lie in [0, 1], got {success_prob}"
            )));
        }
        Ok(Self {
            trials,
            success_prob,
        })
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }

    pub fn pmf(&self, k: usize) -> f64 {
        if k > self.trials {
            return 0.0;
        }
        let q = self.success_prob;
        binomial_coefficient(self.trials, k) * q.powi(k as i32) * (1.0 - q).powi((self.trials - k) as i32)
    }

    pub fn weights(&self) -> Vec<(usize, f64)> {
        (0..=self.trials).map(|k| (k, self.pmf(k))).collect()
    }

    pub fn mean(&self) -> f64 {
        self.trials as f64 * self.success_prob
    }
}

/// Distribution of the number of atoms in an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtomNumberDist {
    Poisson(PoissonDist),
    Binomial(BinomialDist),
    Fixed { n: usize },
}

impl AtomNumberDist {
    /// Support points with their (unnormalised, truncated) weights.
    pub fn weights(&self) -> Vec<(usize, f64)> {
        match self {
            Self::Poisson(d) => d.weights(),
            Self::Binomial(d) => d.weights(),
            Self::Fixed { n } => vec![(*n, 1.0)],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Poisson(d) => d.mean(),
            Self::Binomial(d) => d.mean(),
            Self::Fixed { n } => *n as f64,
        }
    }

    /// Largest atom number with non-zero weight.
    pub fn max_atoms(&self) -> usize {
        match self {
            Self::Poisson(d) => d.n_max(),
            Self::Binomial(d) => d.trials(),
            Self::Fixed { n } => *n,
        }
    }

    /// Probability mass discarded by truncation.
    pub fn tail_mass(&self) -> f64 {
        match self {
            Self::Poisson(d) => d.tail_mass(),
            _ => 0.0,
        }
    }
}

impl From<PoissonDist> for AtomNumberDist {
    fn from(d: PoissonDist) -> Self {
        Self::Poisson(d)
    }
}

impl From<BinomialDist> for AtomNumberDist {
    fn from(d: BinomialDist) -> Self {
        Self::Binomial(d)
    }
}

/// Resonant drive strengths, both angular frequencies in rad/us.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Single-atom Rabi frequency of the classical drive.
    pub rabi: f64,
    /// Atom-field coupling of the quantised-field variant.
    pub coupling: f64,
}

impl DriveParams {
    pub fn new(rabi: f64, coupling: f64) -> Result<Self> {
        if !(rabi >= 0.0) || !(coupling >= 0.0) {
            return Err(invalid("drive strengths must be non-negative"));
        }
        Ok(Self { rabi, coupling })
    }

    /// Classical drive only; the coupling is set to `rabi / 2`, which makes the
    /// photon-number and atom-number formulas coincide.
    pub fn from_rabi(rabi: f64) -> Result<Self> {
        Self::new(rabi, rabi / 2.0)
    }
}

/// Probability of `n` photons (or atoms); negative `n` is rejected.
pub fn poisson_pmf(dist: &PoissonDist, n: i64) -> Result<f64> {
    if n < 0 {
        return Err(invalid(format!("count must be non-negative, got {n}")));
    }
    Ok(dist.pmf(n as usize))
}

pub fn binomial_pmf(dist: &BinomialDist, k: i64) -> Result<f64> {
    if k < 0 || k as usize > dist.trials() {
        return Err(invalid(format!(
            "k = {k} outside 0..={}",
            dist.trials()
        )));
    }
    Ok(dist.pmf(k as usize))
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// Excited-state probability of one atom in a Poisson-distributed field:
/// `sum_{n=1}^{n_max} p(n) sin^2(g t sqrt(n))`.
pub fn jc_excited_probability(drive: &DriveParams, dist: &PoissonDist, t: f64) -> Result<f64> {
    check_time(t)?;
    let g = drive.coupling;
    Ok((1..=dist.n_max())
        .map(|n| {
            let s = (g * t * (n as f64).sqrt()).sin();
            dist.pmf(n) * s * s
        })
        .sum())
}

/// Probability of a single collective excitation in a perfectly blockaded
/// ensemble with a random atom number:
/// `sum_N p(N) sin^2(sqrt(N) Omega t / 2)`.
pub fn collective_p1(drive: &DriveParams, atom_dist: &AtomNumberDist, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(atom_dist
        .weights()
        .into_iter()
        .filter(|&(n, _)| n > 0)
        .map(|(n, w)| {
            let s = ((n as f64).sqrt() * drive.rabi * t / 2.0).sin();
            w * s * s
        })
        .sum())
}

/// Rephasing time of adjacent atom-number components, `4 pi sqrt(mean) / Omega`.
pub fn revival_time_estimate(drive: &DriveParams, mean_n: f64) -> Result<f64> {
    if !(mean_n >= 1.0) {
        return Err(invalid(format!("mean atom number must be >= 1, got {mean_n}")));
    }
    if !(drive.rabi > 0.0) {
        return Err(invalid("revival time needs a non-zero Rabi frequency"));
    }
    Ok(4.0 * PI * mean_n.sqrt() / drive.rabi)
}
