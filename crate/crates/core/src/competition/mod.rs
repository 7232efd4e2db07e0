//! Brand-level competition on the short timescale `tau`.
//!
//! Brands sell out of a common consumer pool. Within a step prices are
//! fixed, so each brand has a constant fitness `f_i = eta_i gamma_i psi(mu_i)`
//! and sales follow replicator dynamics. Long-run time is `t = epsilon tau`.

mod emergence;
mod histogram;
mod replicator;
mod simulate;

pub use emergence::{
    decline_rate, fisher_pry, fisher_pry_ode, mean_price_ode, substitution_rate, MicroAggregate,
};
pub use histogram::{price_histogram_step, HistogramContext, PriceHistogram};
pub use replicator::{micro_step, replicator_step};
pub use simulate::{
    gaussian_brands, run_competition, CompetitionConfig, CompetitionRun, JumpSettings,
    MeanPricePoint, SpreadControl, TrajectoryRow,
};

use serde::{Deserialize, Serialize};

use crate::error::{check, PlcError, Result};
use crate::market::MarketVolumeParams;

/// Relative fitness spread times step size must stay below this.
pub const STABILITY_BOUND: f64 = 0.1;

/// Maximum number of step halvings before giving up.
const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrandState {
    /// Real price `mu_i`.
    pub price: f64,
    /// Consumer preference `eta_i`.
    pub preference: f64,
    /// Reproduction factor `gamma_i`.
    pub reproduction: f64,
    /// Stock `x_i`.
    pub stock: f64,
    /// Sales rate `y_i`.
    pub sales: f64,
}

impl BrandState {
    pub fn validate(&self) -> Result<()> {
        check("price", self.price, self.price > 0.0, "must be positive")?;
        check(
            "preference",
            self.preference,
            self.preference > 0.0,
            "must be positive",
        )?;
        check("reproduction", self.reproduction, true, "")?;
        check(
            "stock",
            self.stock,
            self.stock >= 0.0,
            "must be non-negative",
        )?;
        check(
            "sales",
            self.sales,
            self.sales >= 0.0,
            "must be non-negative",
        )?;
        Ok(())
    }
}

/// `f_i = eta_i gamma_i psi0 v(mu_i)`.
pub fn fitness(b: &BrandState, mv: &MarketVolumeParams, psi0: f64) -> f64 {
    b.preference * b.reproduction * psi0 * mv.density(b.price)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub brands: Vec<BrandState>,
    /// Consumer pool `psi`.
    pub consumer_pool: f64,
    /// Repurchase rate `q`.
    pub repurchase_rate: f64,
    pub volume: MarketVolumeParams,
    /// Short-timescale clock `tau`.
    pub clock: f64,
    /// Timescale ratio, `t = epsilon tau`.
    pub epsilon: f64,
}

impl MarketState {
    pub fn validate(&self) -> Result<()> {
        if self.brands.is_empty() {
            return Err(PlcError::EmptyInput("market has no brands".into()));
        }
        for b in &self.brands {
            b.validate()?;
        }
        check(
            "consumer_pool",
            self.consumer_pool,
            self.consumer_pool >= 0.0,
            "must be non-negative",
        )?;
        check(
            "repurchase_rate",
            self.repurchase_rate,
            self.repurchase_rate >= 0.0,
            "must be non-negative",
        )?;
        check(
            "epsilon",
            self.epsilon,
            self.epsilon > 0.0,
            "must be positive",
        )?;
        check("clock", self.clock, true, "")?;
        self.volume.validate()
    }

    /// `y_t = sum y_i`.
    pub fn total_sales(&self) -> f64 {
        self.brands.iter().map(|b| b.sales).sum()
    }

    /// Market shares `m_i = y_i / y_t`; all zero when nothing sells.
    pub fn shares(&self) -> Vec<f64> {
        let yt = self.total_sales();
        self.brands
            .iter()
            .map(|b| if yt > 0.0 { b.sales / yt } else { 0.0 })
            .collect()
    }

    /// Sales-weighted mean price; `None` when nothing sells.
    pub fn mean_price(&self) -> Option<f64> {
        let prices: Vec<f64> = self.brands.iter().map(|b| b.price).collect();
        let sales: Vec<f64> = self.brands.iter().map(|b| b.sales).collect();
        weighted_mean(&prices, &sales)
    }

    /// Sales-weighted price variance; `None` when nothing sells.
    pub fn price_variance(&self) -> Option<f64> {
        let m = self.mean_price()?;
        let yt = self.total_sales();
        Some(
            self.brands
                .iter()
                .map(|b| b.sales * (b.price - m).powi(2))
                .sum::<f64>()
                / yt,
        )
    }

    /// Pool scale `psi0` at which total sales meet demand `q v(<mu>)`.
    ///
    /// Equals `q / sum eta_i x_i` when all brands share one price.
    pub fn psi0(&self) -> Result<f64> {
        let reach: Vec<f64> = self
            .brands
            .iter()
            .map(|b| b.preference * b.stock * self.volume.density(b.price))
            .collect();
        let denom: f64 = reach.iter().sum();
        if !(denom > 0.0) {
            return Err(PlcError::Domain(
                "psi0 undefined: no brand holds stock".into(),
            ));
        }
        let prices: Vec<f64> = self.brands.iter().map(|b| b.price).collect();
        let sales: Vec<f64> = self.brands.iter().map(|b| b.sales).collect();
        let mean = weighted_mean(&prices, &sales)
            .or_else(|| weighted_mean(&prices, &reach))
            .unwrap_or(prices[0]);
        Ok(self.repurchase_rate * self.volume.density(mean) / denom)
    }

    pub fn fitnesses(&self, psi0: f64) -> Vec<f64> {
        self.brands
            .iter()
            .map(|b| fitness(b, &self.volume, psi0))
            .collect()
    }
}

pub(crate) fn weighted_mean(x: &[f64], w: &[f64]) -> Option<f64> {
    let wt: f64 = w.iter().sum();
    if wt > 0.0 {
        Some(x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wt)
    } else {
        None
    }
}

/// `max_i |f_i - <f>|` under weights `w`.
pub(crate) fn fitness_spread(f: &[f64], w: &[f64]) -> f64 {
    let mean = weighted_mean(f, w).unwrap_or(0.0);
    f.iter().map(|fi| (fi - mean).abs()).fold(0.0, f64::max)
}

pub(crate) fn check_stability(dtau: f64, spread: f64) -> Result<()> {
    check("dtau", dtau, dtau > 0.0, "must be positive")?;
    if dtau * spread >= STABILITY_BOUND {
        return Err(PlcError::StepSize(format!(
            "dtau * max|f - <f>| = {} exceeds {STABILITY_BOUND}",
            dtau * spread
        )));
    }
    Ok(())
}
