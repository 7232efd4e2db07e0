//! Product life cycle parameter sets and curve assembly.
//!
//! The parameter names follow the characteristic-parameter table of the
//! studied products. Absent components are zero: `n_g0 = 0` drops the
//! Gompertz branch, `R = Q = 0` drops repurchase on a branch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffusion::{BassParams, GompertzParams};
use crate::error::{check, PlcError, Result};
use crate::repurchase::{branch_plc, total_plc, FailureDistribution, RepurchaseParams};
use crate::series::SalesSeries;

/// Keys used in fit results and config files.
pub mod names {
    pub const T0: &str = "t0";
    pub const DELAY: &str = "delta_t0";
    pub const FLOOR_RATIO: &str = "pm_over_p0";
    pub const DECLINE: &str = "a";
    pub const SHAPE: &str = "k";
    pub const N_G0: &str = "n_g0";
    pub const N_B0: &str = "n_b0";
    pub const INNOVATION: &str = "A";
    pub const IMITATION: &str = "B";
    pub const R: &str = "R";
    pub const Q: &str = "Q";
    pub const R_PRIME: &str = "R_prime";
    pub const Q_PRIME: &str = "Q_prime";
    pub const T_P: &str = "t_p";
    pub const T_P_PRIME: &str = "t_p_prime";
    pub const M: &str = "M";

    pub const ALL: [&str; 16] = [
        T0,
        DELAY,
        FLOOR_RATIO,
        DECLINE,
        SHAPE,
        N_G0,
        N_B0,
        INNOVATION,
        IMITATION,
        R,
        Q,
        R_PRIME,
        Q_PRIME,
        T_P,
        T_P_PRIME,
        M,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlcParams {
    /// Launch year.
    pub t0: f64,
    /// Delay of the Gompertz clock (years).
    #[serde(default)]
    pub delta_t0: f64,
    /// Price floor `p_m / p0`.
    #[serde(default)]
    pub pm_over_p0: f64,
    /// Price decline rate `a` (1/year).
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub n_g0: f64,
    #[serde(default)]
    pub n_b0: f64,
    #[serde(rename = "A", default)]
    pub innovation: f64,
    #[serde(rename = "B", default)]
    pub imitation: f64,
    #[serde(rename = "R", default)]
    pub replacement: f64,
    #[serde(rename = "Q", default)]
    pub multiple: f64,
    #[serde(rename = "R_prime", default)]
    pub replacement_g: f64,
    #[serde(rename = "Q_prime", default)]
    pub multiple_g: f64,
    #[serde(default = "default_lifetime")]
    pub t_p: f64,
    #[serde(default = "default_lifetime")]
    pub t_p_prime: f64,
    /// Market potential; curves are in units of `M` per year.
    #[serde(rename = "M", default = "one")]
    pub market_potential: f64,
    /// Standard deviation of the lifetime in years; zero means every unit
    /// fails exactly at `t_p`.
    #[serde(default)]
    pub lifetime_spread: f64,
    #[serde(default = "yes")]
    pub recurrent: bool,
}

fn default_lifetime() -> f64 {
    10.0
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// Sampled curves of one scenario, in fractions of the market potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PlcCurves {
    pub bass_first: SalesSeries,
    pub bass_branch: SalesSeries,
    /// Gompertz first purchase on the Gompertz clock.
    pub gompertz_first: SalesSeries,
    /// Gompertz branch on the Gompertz clock.
    pub gompertz_branch: SalesSeries,
    /// Total sales per year, `y_B(t) + y_G(t - delta_t0)`.
    pub total: SalesSeries,
    /// Market penetration `n_B(t) + n_G(t - delta_t0)`.
    pub penetration: SalesSeries,
    /// Price relative to the launch price, `p_m/p0 + (1 - p_m/p0) e^{-a t}`.
    pub relative_price: SalesSeries,
}

impl PlcParams {
    /// Characteristic parameters of Colour TV.
    pub fn colour_tv() -> Self {
        Self {
            t0: 1954.0,
            delta_t0: 0.5,
            pm_over_p0: 0.0,
            a: 0.103,
            k: 27.0,
            n_g0: 0.97,
            n_b0: 0.01,
            innovation: 0.001,
            imitation: 1.8,
            ..Self::empty(1954.0)
        }
    }

    /// Characteristic parameters of Black & White TV.
    pub fn bw_tv() -> Self {
        Self {
            t0: 1948.0,
            delta_t0: 0.0,
            pm_over_p0: 0.33,
            a: 0.2,
            k: 8.5,
            n_g0: 0.77,
            n_b0: 0.18,
            innovation: 0.02,
            imitation: 2.5,
            replacement: 0.3,
            multiple: 0.06,
            replacement_g: 0.65,
            multiple_g: 0.06,
            t_p: 9.2,
            t_p_prime: 10.2,
            market_potential: 53e6,
            ..Self::empty(1948.0)
        }
    }

    /// Characteristic parameters of the Mercedes C-Class. The lifetime of
    /// 8 years is the mean lifetime quoted for the model.
    pub fn c_class() -> Self {
        Self {
            n_b0: 1.0,
            innovation: 0.004,
            imitation: 0.58,
            replacement: 1.2,
            multiple: 0.05,
            t_p: 8.0,
            market_potential: 1.1e6,
            ..Self::empty(1979.0)
        }
    }

    /// Characteristic parameters of the Mercedes S-Class. The lifetime of
    /// 16 years is the replacement period quoted for the model.
    pub fn s_class() -> Self {
        Self {
            n_b0: 1.0,
            innovation: 0.02,
            imitation: 0.5,
            replacement: 1.0,
            multiple: 0.15,
            t_p: 16.0,
            market_potential: 0.27e6,
            ..Self::empty(1964.0)
        }
    }

    /// Preset by name: `colour_tv`, `bw_tv`, `c_class`, `s_class`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "colour_tv" => Some(Self::colour_tv()),
            "bw_tv" => Some(Self::bw_tv()),
            "c_class" => Some(Self::c_class()),
            "s_class" => Some(Self::s_class()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 4] = ["colour_tv", "bw_tv", "c_class", "s_class"];

    /// Default simulation horizon in years for a preset.
    pub fn preset_horizon(name: &str) -> Option<f64> {
        match name {
            "colour_tv" => Some(36.0),
            "bw_tv" => Some(32.0),
            "c_class" => Some(40.0),
            "s_class" => Some(45.0),
            _ => None,
        }
    }

    /// No diffusion, no repurchase, unit market potential.
    pub fn empty(t0: f64) -> Self {
        Self {
            t0,
            delta_t0: 0.0,
            pm_over_p0: 0.0,
            a: 0.0,
            k: 0.0,
            n_g0: 0.0,
            n_b0: 0.0,
            innovation: 0.0,
            imitation: 0.0,
            replacement: 0.0,
            multiple: 0.0,
            replacement_g: 0.0,
            multiple_g: 0.0,
            t_p: default_lifetime(),
            t_p_prime: default_lifetime(),
            market_potential: 1.0,
            lifetime_spread: 0.0,
            recurrent: true,
        }
    }

    pub fn has_bass(&self) -> bool {
        self.n_b0 > 0.0
    }

    pub fn has_gompertz(&self) -> bool {
        self.n_g0 > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        check("t0", self.t0, true, "")?;
        check(
            "market_potential",
            self.market_potential,
            self.market_potential > 0.0,
            "must be positive",
        )?;
        check(
            "pm_over_p0",
            self.pm_over_p0,
            (0.0..1.0).contains(&self.pm_over_p0),
            "must lie in [0, 1)",
        )?;
        check("a", self.a, self.a >= 0.0, "must be non-negative")?;
        check(
            "lifetime_spread",
            self.lifetime_spread,
            self.lifetime_spread >= 0.0,
            "must be non-negative",
        )?;
        if !self.has_bass() && !self.has_gompertz() {
            return Err(PlcError::param("n_b0", "need a Bass or a Gompertz branch"));
        }
        if self.has_bass() {
            self.bass()?;
            self.bass_repurchase()?;
        }
        if self.has_gompertz() {
            self.gompertz()?;
            self.gompertz_repurchase()?;
        }
        Ok(())
    }

    pub fn bass(&self) -> Result<BassParams> {
        BassParams::new(self.innovation, self.imitation, self.n_b0)
    }

    /// Gompertz parameters on the Gompertz clock; the delay is applied when
    /// the branches are combined.
    pub fn gompertz(&self) -> Result<GompertzParams> {
        GompertzParams::new(self.n_g0, self.k, self.a, self.delta_t0)
    }

    fn failure(&self, lifetime: f64) -> FailureDistribution {
        if self.lifetime_spread > 0.0 {
            FailureDistribution::Gaussian {
                lifetime,
                spread: self.lifetime_spread,
            }
        } else {
            FailureDistribution::Dirac { lifetime }
        }
    }

    pub fn bass_repurchase(&self) -> Result<RepurchaseParams> {
        Ok(
            RepurchaseParams::new(self.replacement, self.multiple, self.failure(self.t_p))?
                .with_recurrent(self.recurrent),
        )
    }

    pub fn gompertz_repurchase(&self) -> Result<RepurchaseParams> {
        Ok(RepurchaseParams::new(
            self.replacement_g,
            self.multiple_g,
            self.failure(self.t_p_prime),
        )?
        .with_recurrent(self.recurrent))
    }

    /// Samples every curve on `t0 + i dt`, `i = 0..=horizon/dt`.
    pub fn assemble(&self, dt: f64, horizon: f64) -> Result<PlcCurves> {
        check("dt", dt, dt > 0.0, "must be positive")?;
        check("horizon", horizon, horizon >= 0.0, "must be non-negative")?;
        let n = (horizon / dt + 1e-9).floor() as usize + 1;
        self.assemble_n(dt, n)
    }

    /// Samples every curve on `t0 + i dt`, `i = 0..n`.
    pub fn assemble_n(&self, dt: f64, n: usize) -> Result<PlcCurves> {
        self.validate()?;
        let zeros = SalesSeries::new(self.t0, dt, vec![0.0; n])?;
        let (bass_first, bass_branch, bass_cum) = if self.has_bass() {
            let b = self.bass()?;
            let first = SalesSeries::from_fn(self.t0, dt, n, |t| b.rate(t))?;
            let cum = SalesSeries::from_fn(self.t0, dt, n, |t| b.cumulative(t))?;
            let branch = with_repurchase(&first, &cum, &self.bass_repurchase()?)?;
            (first, branch, cum)
        } else {
            (zeros.clone(), zeros.clone(), zeros.clone())
        };
        let (gompertz_first, gompertz_branch, gompertz_cum) = if self.has_gompertz() {
            let g = self.gompertz()?;
            let first = SalesSeries::from_fn(self.t0, dt, n, |t| g.rate(t))?;
            let cum = SalesSeries::from_fn(self.t0, dt, n, |t| g.cumulative(t))?;
            let branch = with_repurchase(&first, &cum, &self.gompertz_repurchase()?)?;
            (first, branch, cum)
        } else {
            (zeros.clone(), zeros.clone(), zeros)
        };
        let total = total_plc(&bass_branch, &gompertz_branch, self.delta_t0)?;
        let penetration = total_plc(&bass_cum, &gompertz_cum, self.delta_t0)?;
        let r = self.pm_over_p0;
        let relative_price =
            SalesSeries::from_fn(self.t0, dt, n, |t| r + (1.0 - r) * (-self.a * t).exp())?;
        Ok(PlcCurves {
            bass_first,
            bass_branch,
            gompertz_first,
            gompertz_branch,
            total,
            penetration,
            relative_price,
        })
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        use names::*;
        [
            (T0, self.t0),
            (DELAY, self.delta_t0),
            (FLOOR_RATIO, self.pm_over_p0),
            (DECLINE, self.a),
            (SHAPE, self.k),
            (N_G0, self.n_g0),
            (N_B0, self.n_b0),
            (INNOVATION, self.innovation),
            (IMITATION, self.imitation),
            (R, self.replacement),
            (Q, self.multiple),
            (R_PRIME, self.replacement_g),
            (Q_PRIME, self.multiple_g),
            (T_P, self.t_p),
            (T_P_PRIME, self.t_p_prime),
            (M, self.market_potential),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.to_map().get(name).copied()
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        use names::*;
        let slot = match name {
            T0 => &mut self.t0,
            DELAY => &mut self.delta_t0,
            FLOOR_RATIO => &mut self.pm_over_p0,
            DECLINE => &mut self.a,
            SHAPE => &mut self.k,
            N_G0 => &mut self.n_g0,
            N_B0 => &mut self.n_b0,
            INNOVATION => &mut self.innovation,
            IMITATION => &mut self.imitation,
            R => &mut self.replacement,
            Q => &mut self.multiple,
            R_PRIME => &mut self.replacement_g,
            Q_PRIME => &mut self.multiple_g,
            T_P => &mut self.t_p,
            T_P_PRIME => &mut self.t_p_prime,
            M => &mut self.market_potential,
            other => return Err(PlcError::Config(format!("unknown parameter `{other}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// Overwrites every named value in `map`.
    pub fn with_values(mut self, map: &BTreeMap<String, f64>) -> Result<Self> {
        for (k, v) in map {
            self.set(k, *v)?;
        }
        Ok(self)
    }
}

fn with_repurchase(
    first: &SalesSeries,
    cum: &SalesSeries,
    rp: &RepurchaseParams,
) -> Result<SalesSeries> {
    if rp.replacement == 0.0 && rp.multiple == 0.0 {
        Ok(first.clone())
    } else {
        branch_plc(first, cum, rp)
    }
}
