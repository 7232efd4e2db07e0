//! TOML configuration: one `[scenario.<name>]` table per product, plus
//! optional `[competition]` and `[sizes]` tables.
//!
//! Scenario keys are the parameter-table names (`t0`, `delta_t0`,
//! `pm_over_p0`, `a`, `k`, `n_g0`, `n_b0`, `A`, `B`, `R`, `Q`, `R_prime`,
//! `Q_prime`, `t_p`, `t_p_prime`, `M`) together with `preset`, `dt`,
//! `horizon`, `fixed`, `lifetime_spread` and `recurrent`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::competition::{
    gaussian_brands, BrandState, CompetitionConfig, JumpSettings, SpreadControl,
};
use crate::error::{PlcError, Result};
use crate::fit::PlcPrior;
use crate::market::MarketVolumeParams;
use crate::scenario::{names, PlcParams};
use crate::sizes::GibratConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: BTreeMap<String, ScenarioSection>,
    pub competition: Option<CompetitionSection>,
    pub sizes: Option<GibratConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSection {
    /// Preset the explicit keys are applied on top of.
    pub preset: Option<String>,
    /// Sampling step in years.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Simulated span in years; defaults to the preset horizon.
    pub horizon: Option<f64>,
    /// Parameters held at their configured value when fitting.
    #[serde(default)]
    pub fixed: Vec<String>,
    #[serde(default)]
    pub lifetime_spread: Option<f64>,
    #[serde(default)]
    pub recurrent: Option<bool>,
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

fn default_dt() -> f64 {
    0.05
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: PlcParams,
    pub dt: f64,
    pub horizon: f64,
    pub fixed: Vec<String>,
}

impl Scenario {
    pub fn prior(&self) -> PlcPrior {
        let mut p = PlcPrior::new(self.params);
        for f in &self.fixed {
            p = p.fix(f);
        }
        p
    }
}

impl ScenarioSection {
    pub fn resolve(&self, name: &str) -> Result<Scenario> {
        let preset = self.preset.as_deref().unwrap_or(name);
        let base = match (PlcParams::preset(preset), self.preset.is_some()) {
            (Some(p), _) => p,
            (None, true) => {
                return Err(PlcError::Config(format!(
                    "scenario `{name}`: unknown preset `{preset}`"
                )))
            }
            (None, false) => {
                let t0 = self.values.get(names::T0).ok_or_else(|| {
                    PlcError::Config(format!(
                        "scenario `{name}`: `t0` is required without a preset"
                    ))
                })?;
                PlcParams::empty(*t0)
            }
        };
        let mut params = base;
        for (k, v) in &self.values {
            if !names::ALL.contains(&k.as_str()) {
                return Err(PlcError::Config(format!(
                    "scenario `{name}`: unknown key `{k}`"
                )));
            }
            params.set(k, *v)?;
        }
        if let Some(s) = self.lifetime_spread {
            params.lifetime_spread = s;
        }
        if let Some(r) = self.recurrent {
            params.recurrent = r;
        }
        params
            .validate()
            .map_err(|e| PlcError::Config(format!("scenario `{name}`: {e}")))?;
        for f in &self.fixed {
            if !names::ALL.contains(&f.as_str()) {
                return Err(PlcError::Config(format!(
                    "scenario `{name}`: cannot fix unknown `{f}`"
                )));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PlcError::Config(format!(
                "scenario `{name}`: dt must be positive"
            )));
        }
        let horizon = match self.horizon {
            Some(h) => h,
            None => PlcParams::preset_horizon(preset).ok_or_else(|| {
                PlcError::Config(format!(
                    "scenario `{name}`: `horizon` is required without a preset"
                ))
            })?,
        };
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(PlcError::Config(format!(
                "scenario `{name}`: horizon must be non-negative"
            )));
        }
        Ok(Scenario {
            name: name.to_string(),
            params,
            dt: self.dt,
            horizon,
            fixed: self.fixed.clone(),
        })
    }
}

/// Brands drawn at Gaussian price quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBrands {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    #[serde(default = "one")]
    pub preference: f64,
    pub reproduction: f64,
    #[serde(default = "one")]
    pub stock: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitionSection {
    pub volume: MarketVolumeParams,
    pub repurchase_rate: f64,
    #[serde(default = "one")]
    pub epsilon: f64,
    pub dtau: f64,
    pub steps: usize,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default)]
    pub jumps: Option<JumpSettings>,
    #[serde(default)]
    pub spread: SpreadControl,
    #[serde(default = "yes")]
    pub track_demand: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub brands: Vec<BrandState>,
    pub gaussian: Option<GaussianBrands>,
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl CompetitionSection {
    pub fn to_config(&self) -> Result<CompetitionConfig> {
        let brands = match (&self.gaussian, self.brands.is_empty()) {
            (Some(g), true) => gaussian_brands(
                g.n,
                g.mean,
                g.variance,
                g.preference,
                g.reproduction,
                g.stock,
            )?,
            (None, false) => self.brands.clone(),
            (Some(_), false) => {
                return Err(PlcError::Config(
                    "competition: give either `brands` or `gaussian`, not both".into(),
                ))
            }
            (None, true) => {
                return Err(PlcError::Config("competition: no brands configured".into()))
            }
        };
        self.volume.validate()?;
        Ok(CompetitionConfig {
            brands,
            volume: self.volume,
            repurchase_rate: self.repurchase_rate,
            epsilon: self.epsilon,
            dtau: self.dtau,
            steps: self.steps,
            record_every: self.record_every,
            jumps: self.jumps,
            spread: self.spread,
            track_demand: self.track_demand,
            seed: self.seed,
        })
    }
}

impl ConfigFile {
    pub fn scenario(&self, name: &str) -> Result<Scenario> {
        self.scenario
            .get(name)
            .ok_or_else(|| PlcError::Config(format!("no scenario `{name}` in config")))?
            .resolve(name)
    }

    /// Resolves every scenario, so that errors surface at load time.
    pub fn validate(&self) -> Result<()> {
        for (name, s) in &self.scenario {
            s.resolve(name)?;
        }
        if let Some(c) = &self.competition {
            c.to_config()?;
        }
        if let Some(s) = &self.sizes {
            s.validate()?;
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let cfg: ConfigFile = toml::from_str(text).map_err(|e| PlcError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PlcError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        PlcError::Config(m) => PlcError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
