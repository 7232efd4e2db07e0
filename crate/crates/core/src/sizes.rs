//! Gibrat multiplicative growth of business-unit sales and its lognormal law.
//!
//! Each unit evolves `y <- y (1 + r)` with i.i.d. increments `r` of mean `u`
//! and standard deviation `omega`. Unit `i` draws from its own ChaCha stream
//! keyed by `(seed, i)`, so results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check, PlcError, Result};

/// Draws before a unit gives up on finding `1 + r > 0`.
const MAX_RESAMPLES: u32 = 1000;

/// Smallest sample accepted by [`normality_test`].
pub const MIN_NORMALITY_SAMPLE: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementDistribution {
    #[default]
    Normal,
    /// Uniform on `u +- sqrt(3) omega`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibratConfig {
    pub n_units: usize,
    /// Number of steps `T`.
    pub horizon: usize,
    /// Mean increment `u` per step.
    pub drift: f64,
    /// Increment standard deviation `omega` per step.
    pub volatility: f64,
    pub seed: u64,
    pub initial_size: f64,
    #[serde(default)]
    pub increments: IncrementDistribution,
}

impl GibratConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 {
            return Err(PlcError::param("n_units", "must be at least 1"));
        }
        check("drift", self.drift, true, "")?;
        check(
            "volatility",
            self.volatility,
            self.volatility >= 0.0,
            "must be non-negative",
        )?;
        check(
            "initial_size",
            self.initial_size,
            self.initial_size > 0.0,
            "must be positive",
        )?;
        let upper = match self.increments {
            IncrementDistribution::Normal if self.volatility > 0.0 => f64::INFINITY,
            IncrementDistribution::Normal => self.drift,
            IncrementDistribution::Uniform => self.drift + 3f64.sqrt() * self.volatility,
        };
        if upper <= -1.0 {
            return Err(PlcError::param(
                "drift",
                "every increment would make sizes non-positive",
            ));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.increments {
            IncrementDistribution::Normal => {
                let z: f64 = StandardNormal.sample(rng);
                self.drift + self.volatility * z
            }
            IncrementDistribution::Uniform => {
                let half = 3f64.sqrt() * self.volatility;
                if half == 0.0 {
                    self.drift
                } else {
                    rng.random_range(self.drift - half..self.drift + half)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibratSample {
    /// Final size of each unit, in unit order.
    pub sizes: Vec<f64>,
    /// Increments redrawn because `1 + r <= 0`.
    pub resampled: u64,
}

/// Simulates `cfg.n_units` independent units for `cfg.horizon` steps.
pub fn gibrat_simulate(cfg: &GibratConfig) -> Result<GibratSample> {
    cfg.validate()?;
    let per_unit: Vec<(f64, u64)> = (0..cfg.n_units)
        .into_par_iter()
        .map(|i| simulate_unit(cfg, i as u64))
        .collect::<Result<_>>()?;
    let resampled = per_unit.iter().map(|p| p.1).sum();
    Ok(GibratSample {
        sizes: per_unit.into_iter().map(|p| p.0).collect(),
        resampled,
    })
}

fn simulate_unit(cfg: &GibratConfig, unit: u64) -> Result<(f64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(unit);
    let mut y = cfg.initial_size;
    let mut redrawn = 0u64;
    for _ in 0..cfg.horizon {
        let mut attempts = 0;
        let factor = loop {
            let f = 1.0 + cfg.draw(&mut rng);
            if f > 0.0 {
                break f;
            }
            attempts += 1;
            if attempts >= MAX_RESAMPLES {
                return Err(PlcError::Domain(format!(
                    "unit {unit}: no admissible increment in {MAX_RESAMPLES} draws"
                )));
            }
        };
        redrawn += attempts as u64;
        y *= factor;
    }
    Ok((y, redrawn))
}

/// Lognormal size density after `t` steps,
/// `exp(-(ln(y/y0) - u t)^2 / (2 omega^2 t)) / (sqrt(2 pi) omega sqrt(t) y)`.
pub fn lognormal_pdf(y: f64, t: f64, cfg: &GibratConfig) -> Result<f64> {
    check("t", t, t > 0.0, "must be positive")?;
    check(
        "volatility",
        cfg.volatility,
        cfg.volatility > 0.0,
        "must be positive",
    )?;
    check(
        "initial_size",
        cfg.initial_size,
        cfg.initial_size > 0.0,
        "must be positive",
    )?;
    if !(y > 0.0) {
        return Err(PlcError::Domain(format!("size must be positive, got {y}")));
    }
    let s2 = cfg.volatility * cfg.volatility * t;
    let z = (y / cfg.initial_size).ln() - cfg.drift * t;
    Ok((-z * z / (2.0 * s2)).exp() / ((2.0 * std::f64::consts::PI * s2).sqrt() * y))
}

/// Mean and variance of `ln(1 + r)` for one step, by quadrature over the
/// increment law restricted to `1 + r > 0`.
pub fn log_increment_moments(cfg: &GibratConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let (u, w) = (cfg.drift, cfg.volatility);
    if w == 0.0 {
        return Ok(((1.0 + u).ln(), 0.0));
    }
    let (lo, hi, density): (f64, f64, Box<dyn Fn(f64) -> f64>) = match cfg.increments {
        IncrementDistribution::Normal => {
            let n = Normal::new(u, w).expect("positive volatility");
            (
                u - 12.0 * w,
                u + 12.0 * w,
                Box::new(move |r| statrs::distribution::Continuous::pdf(&n, r)),
            )
        }
        IncrementDistribution::Uniform => {
            let half = 3f64.sqrt() * w;
            (u - half, u + half, Box::new(move |_| 1.0 / (2.0 * half)))
        }
    };
    let lo = lo.max(-1.0 + 1e-12 * (1.0 + u.abs()));
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut m = [0.0f64; 3];
    for i in 0..=n {
        let r = lo + i as f64 * h;
        let wgt = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let l = (1.0 + r).ln();
        let p = density(r) * wgt;
        m[0] += p;
        m[1] += p * l;
        m[2] += p * l * l;
    }
    let mean = m[1] / m[0];
    Ok((mean, m[2] / m[0] - mean * mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n: usize,
    /// Mean of `ln y`.
    pub mean: f64,
    /// Variance of `ln y` (population form).
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov-Smirnov distance of `ln y` to the fitted normal.
    pub ks_distance: f64,
    /// Asymptotic 95% critical value `1.36 / sqrt(n)`.
    pub ks_critical_95: f64,
    /// Share of the sample above the fitted 99th percentile, minus 0.01.
    pub upper_tail_residual: f64,
    /// Zero variance; the shape statistics are reported as zero.
    pub degenerate: bool,
}

impl NormalityReport {
    pub fn ks_passes(&self) -> bool {
        !self.degenerate && self.ks_distance < self.ks_critical_95
    }
}

/// Moment and KS diagnostics of `ln y` against a fitted normal.
pub fn normality_test(sample: &[f64]) -> Result<NormalityReport> {
    if sample.len() < MIN_NORMALITY_SAMPLE {
        return Err(PlcError::InvalidInput(format!(
            "normality test needs at least {MIN_NORMALITY_SAMPLE} sizes, got {}",
            sample.len()
        )));
    }
    if let Some(bad) = sample.iter().find(|y| !(**y > 0.0) || !y.is_finite()) {
        return Err(PlcError::InvalidInput(format!(
            "sizes must be positive and finite, got {bad}"
        )));
    }
    let mut logs: Vec<f64> = sample.iter().map(|y| y.ln()).collect();
    let n = logs.len();
    let nf = n as f64;
    let mean = logs.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for l in &logs {
        let d = l - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let crit = 1.36 / nf.sqrt();
    // Relative threshold so rounding noise in a constant sample counts as zero.
    if m2 <= (mean.abs() * 1e-12).powi(2) {
        return Ok(NormalityReport {
            n,
            mean,
            variance: 0.0,
            skewness: 0.0,
            excess_kurtosis: 0.0,
            ks_distance: 0.0,
            ks_critical_95: crit,
            upper_tail_residual: 0.0,
            degenerate: true,
        });
    }
    let sd = m2.sqrt();
    let normal = Normal::new(mean, sd).expect("positive spread");
    logs.sort_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (i, l) in logs.iter().enumerate() {
        let f = normal.cdf(*l);
        ks = ks.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let q99 = normal.inverse_cdf(0.99);
    let above = logs.iter().filter(|l| **l > q99).count() as f64 / nf;
    Ok(NormalityReport {
        n,
        mean,
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        ks_distance: ks,
        ks_critical_95: crit,
        upper_tail_residual: above - 0.01,
        degenerate: false,
    })
}
