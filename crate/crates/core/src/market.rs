//! Lower-class income distribution and the price-dependent market volume.
//!
//! Prices are real prices: nominal price divided by the mean lower-class
//! income. Below the natural price `mu_m` every agent in the market
//! potential can afford the good; above it the lower class thins out as a
//! Gaussian in price while the upper class stays put.

use serde::{Deserialize, Serialize};

use crate::error::{check, PlcError, Result};

/// Exponential (Boltzmann-Gibbs) personal income distribution of the lower class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomeModel {
    pub mean_income: f64,
}

impl IncomeModel {
    pub fn new(mean_income: f64) -> Result<Self> {
        check(
            "mean_income",
            mean_income,
            mean_income > 0.0,
            "must be positive",
        )?;
        Ok(Self { mean_income })
    }

    pub fn pdf(&self, h: f64) -> Result<f64> {
        income_pdf(h, self)
    }
}

/// Density of agents at annual income `h`.
pub fn income_pdf(h: f64, model: &IncomeModel) -> Result<f64> {
    let i = model.mean_income;
    check("mean_income", i, i > 0.0, "must be positive")?;
    if !(h >= 0.0) {
        return Err(PlcError::Domain(format!(
            "income must be non-negative, got {h}"
        )));
    }
    Ok((-h / i).exp() / i)
}

/// Nominal price divided by mean income.
pub fn real_price(price: f64, mean_income: f64) -> Result<f64> {
    check(
        "mean_income",
        mean_income,
        mean_income > 0.0,
        "must be positive",
    )?;
    Ok(price / mean_income)
}

/// Parameters of the price-to-market-volume map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketVolumeParams {
    /// Market potential `M`.
    pub market_potential: f64,
    /// Price-independent upper class `M_U` (includes industrial buyers).
    pub upper_class: f64,
    /// Natural price `mu_m`.
    pub natural_price: f64,
    /// Width `Theta` of the lower-class affordability window.
    pub width: f64,
}

impl MarketVolumeParams {
    pub fn new(
        market_potential: f64,
        upper_class: f64,
        natural_price: f64,
        width: f64,
    ) -> Result<Self> {
        let p = Self {
            market_potential,
            upper_class,
            natural_price,
            width,
        };
        p.validate()?;
        Ok(p)
    }

    /// Density form with `M = 1`: `m_U = upper_share`, `m_L = 1 - upper_share`.
    pub fn normalized(upper_share: f64, natural_price: f64, width: f64) -> Result<Self> {
        Self::new(1.0, upper_share, natural_price, width)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            "market_potential",
            self.market_potential,
            self.market_potential > 0.0,
            "must be positive",
        )?;
        check(
            "upper_class",
            self.upper_class,
            (0.0..=self.market_potential).contains(&self.upper_class),
            "must lie in [0, market_potential]",
        )?;
        check(
            "natural_price",
            self.natural_price,
            self.natural_price >= 0.0,
            "must be non-negative",
        )?;
        check("width", self.width, self.width > 0.0, "must be positive")?;
        Ok(())
    }

    /// `M_L = M - M_U`.
    pub fn lower_class(&self) -> f64 {
        self.market_potential - self.upper_class
    }

    /// `m_L = M_L / M`.
    pub fn lower_share(&self) -> f64 {
        self.lower_class() / self.market_potential
    }

    /// `m_U = M_U / M`.
    pub fn upper_share(&self) -> f64 {
        self.upper_class / self.market_potential
    }

    pub fn volume(&self, mu: f64) -> f64 {
        if mu <= self.natural_price {
            return self.market_potential;
        }
        let z = (mu - self.natural_price) / self.width;
        self.lower_class() * (-0.5 * z * z).exp() + self.upper_class
    }

    pub fn density(&self, mu: f64) -> f64 {
        self.volume(mu) / self.market_potential
    }

    /// `dv/dmu`; zero on the clamped side and at `mu_m` itself.
    pub fn density_slope(&self, mu: f64) -> f64 {
        if mu <= self.natural_price {
            return 0.0;
        }
        let d = mu - self.natural_price;
        let w2 = self.width * self.width;
        -self.lower_share() * d / w2 * (-0.5 * d * d / w2).exp()
    }

    /// Second-order expansion of the volume density around `mu_m`.
    pub fn density_quadratic(&self, mu: f64) -> f64 {
        let d = mu - self.natural_price;
        self.lower_share() * (1.0 - d * d / (2.0 * self.width * self.width)) + self.upper_share()
    }
}

/// Number of agents who can afford the good at real price `mu`.
pub fn market_volume(mu: f64, params: &MarketVolumeParams) -> Result<f64> {
    params.validate()?;
    if !(mu >= 0.0) {
        return Err(PlcError::Domain(format!(
            "real price must be non-negative, got {mu}"
        )));
    }
    Ok(params.volume(mu))
}

/// Market volume as a fraction of the market potential.
pub fn volume_density(mu: f64, params: &MarketVolumeParams) -> Result<f64> {
    Ok(market_volume(mu, params)? / params.market_potential)
}
