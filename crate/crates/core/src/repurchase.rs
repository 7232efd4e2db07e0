//! Repurchase on top of first purchase: replacement waves, multiple
//! purchase and the two-branch product life cycle.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{check, PlcError, Result};
use crate::series::SalesSeries;

/// Lifetime distribution of the units in use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FailureDistribution {
    /// Every unit fails exactly at `lifetime`.
    Dirac { lifetime: f64 },
    /// Normal lifetime truncated to `(0, inf)` and renormalized.
    Gaussian { lifetime: f64, spread: f64 },
}

impl FailureDistribution {
    pub fn lifetime(&self) -> f64 {
        match *self {
            FailureDistribution::Dirac { lifetime }
            | FailureDistribution::Gaussian { lifetime, .. } => lifetime,
        }
    }

    pub fn spread(&self) -> f64 {
        match *self {
            FailureDistribution::Dirac { .. } => 0.0,
            FailureDistribution::Gaussian { spread, .. } => spread,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tp = self.lifetime();
        check("lifetime", tp, tp > 0.0, "must be positive")?;
        let s = self.spread();
        check("spread", s, s >= 0.0, "must be non-negative")?;
        Ok(())
    }

    fn normal(&self) -> Option<Normal> {
        match *self {
            FailureDistribution::Gaussian { lifetime, spread } if spread > 0.0 => {
                Normal::new(lifetime, spread).ok()
            }
            _ => None,
        }
    }

    /// Failure density at age `t`; `None` for the Dirac case.
    pub fn density(&self, t: f64) -> Option<f64> {
        let n = self.normal()?;
        if t <= 0.0 {
            return Some(0.0);
        }
        Some(n.pdf(t) / n.sf(0.0))
    }

    /// Discrete lag weights `w[j]` (lag `j * dt`, `j >= 1`) summing to one.
    ///
    /// Lag cell `j` covers ages `[(j - 1/2) dt, (j + 1/2) dt)`; the first cell
    /// starts at zero. Index 0 of the result is always zero.
    pub fn lag_weights(&self, dt: f64) -> Vec<f64> {
        match self.normal() {
            None => {
                let (j, f) = split_lag(self.lifetime(), dt);
                let mut w = vec![0.0; j + 2];
                w[j] = 1.0 - f;
                w[j + 1] = f;
                if f == 0.0 {
                    w.pop();
                }
                w
            }
            Some(n) => {
                let tp = self.lifetime();
                let s = self.spread();
                let last = ((tp + 10.0 * s) / dt).ceil() as usize + 1;
                let mut w = vec![0.0; last + 1];
                for (j, wj) in w.iter_mut().enumerate().skip(1) {
                    let lo = if j == 1 { 0.0 } else { (j as f64 - 0.5) * dt };
                    let hi = (j as f64 + 0.5) * dt;
                    *wj = n.cdf(hi) - n.cdf(lo);
                }
                let total: f64 = w.iter().sum();
                for wj in &mut w {
                    *wj /= total;
                }
                w
            }
        }
    }
}

/// Whole-sample lag and interpolation fraction of `lifetime / dt`.
fn split_lag(lifetime: f64, dt: f64) -> (usize, f64) {
    let m = lifetime / dt;
    let r = m.round();
    if (m - r).abs() < 1e-9 * m.max(1.0) {
        return (r as usize, 0.0);
    }
    let j = m.floor();
    (j as usize, m - j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepurchaseParams {
    /// Replacement fraction `R`.
    pub replacement: f64,
    /// Multiple purchase rate `Q` (1/year).
    pub multiple: f64,
    pub failure: FailureDistribution,
    /// Replacements are themselves replaced after another lifetime.
    #[serde(default = "default_recurrent")]
    pub recurrent: bool,
}

fn default_recurrent() -> bool {
    true
}

impl RepurchaseParams {
    pub fn new(replacement: f64, multiple: f64, failure: FailureDistribution) -> Result<Self> {
        let p = Self {
            replacement,
            multiple,
            failure,
            recurrent: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// No replacement and no multiple purchase.
    pub fn none() -> Self {
        Self {
            replacement: 0.0,
            multiple: 0.0,
            failure: FailureDistribution::Dirac { lifetime: 1.0 },
            recurrent: true,
        }
    }

    pub fn with_recurrent(mut self, recurrent: bool) -> Self {
        self.recurrent = recurrent;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check(
            "replacement",
            self.replacement,
            self.replacement >= 0.0,
            "must be non-negative",
        )?;
        check(
            "multiple",
            self.multiple,
            self.multiple >= 0.0,
            "must be non-negative",
        )?;
        self.failure.validate()
    }
}

/// Replacement sales `y_R(t) = R * int_0^t y(t - s) Gamma(s) ds` on the grid of `first`.
///
/// In recurrent mode the source of replacement is first purchase plus
/// earlier replacement, so a pulse echoes at every multiple of the lifetime
/// with amplitude `R^k`.
pub fn replacement_convolve(first: &SalesSeries, rp: &RepurchaseParams) -> Result<SalesSeries> {
    rp.validate()?;
    let tp = rp.failure.lifetime();
    if first.dt > tp / 2.0 {
        return Err(PlcError::Resolution {
            dt: first.dt,
            lifetime: tp,
            max_dt: tp / 2.0,
        });
    }
    if let Some((i, v)) = first.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(PlcError::InvalidInput(format!(
            "first-purchase sales must be non-negative, sample {i} is {v}"
        )));
    }

    let mut out = SalesSeries::zeros_like(first);
    if rp.replacement == 0.0 {
        return Ok(out);
    }
    let taps: Vec<(usize, f64)> = rp
        .failure
        .lag_weights(first.dt)
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, w)| *w != 0.0)
        .collect();
    let r = rp.replacement;
    let y = &first.values;

    // Recurrent mode feeds back first + replacement; every tap lag is >= 1 sample.
    let mut source = y.clone();
    for i in 0..y.len() {
        let acc: f64 = taps
            .iter()
            .take_while(|(lag, _)| *lag <= i)
            .map(|(lag, w)| w * source[i - lag])
            .sum();
        out.values[i] = r * acc;
        if rp.recurrent {
            source[i] = y[i] + out.values[i];
        }
    }
    Ok(out)
}

/// Multiple purchase `Q * n(t)` from a cumulative adopter series.
pub fn multiple_purchase(adopters: &SalesSeries, rate: f64) -> Result<SalesSeries> {
    check("multiple", rate, rate >= 0.0, "must be non-negative")?;
    for (i, w) in adopters.values.windows(2).enumerate() {
        let tol = 1e-12 * w[0].abs().max(1.0);
        if w[1] < w[0] - tol {
            return Err(PlcError::InvalidInput(format!(
                "adopter density decreases at t={}: {} -> {}",
                adopters.time(i + 1),
                w[0],
                w[1]
            )));
        }
    }
    Ok(adopters.scaled(rate))
}

/// Total sales of one diffusion branch: first purchase plus replacement plus multiple purchase.
pub fn branch_plc(
    first: &SalesSeries,
    adopters: &SalesSeries,
    rp: &RepurchaseParams,
) -> Result<SalesSeries> {
    first.require_same_grid(adopters, "first purchase vs adopters")?;
    let replacement = replacement_convolve(first, rp)?;
    let multiple = multiple_purchase(adopters, rp.multiple)?;
    first.add(&replacement)?.add(&multiple)
}

/// `y_t(t) = y_B(t) + y_G(t - delay)`, with the Gompertz branch silent before its origin.
///
/// Both branches must be sampled from model time zero on the same grid.
pub fn total_plc(
    bass_branch: &SalesSeries,
    gompertz_branch: &SalesSeries,
    delay: f64,
) -> Result<SalesSeries> {
    check("delay", delay, delay >= 0.0, "must be non-negative")?;
    bass_branch.require_same_grid(gompertz_branch, "Bass vs Gompertz branch")?;
    let mut out = bass_branch.clone();
    let (j, f) = split_lag(delay, bass_branch.dt);
    let g = &gompertz_branch.values;
    for (i, v) in out.values.iter_mut().enumerate() {
        if f == 0.0 {
            if i >= j {
                *v += g[i - j];
            }
        } else if i > j {
            // Gompertz clock sits at (i - j - f) samples.
            *v += f * g[i - j - 1] + (1.0 - f) * g[i - j];
        }
    }
    Ok(out)
}
