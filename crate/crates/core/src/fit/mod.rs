//! Parameter estimation from price, penetration and sales series.
//!
//! Fits are deterministic: multi-start runs execute in parallel but are
//! reduced in start order, and no randomness is involved.

mod gompertz;
mod plc;
mod price;
pub mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use gompertz::{fit_gompertz, GompertzFitOptions};
pub use plc::{fit_plc, PlcData, PlcFitOptions, PlcPrior};
pub use price::{default_floor_grid, fit_price_decline};
pub use simplex::{Bound, SimplexOptions};

use crate::scenario::names;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub loss: f64,
    pub n_evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Estimated values keyed by the parameter table names.
    pub parameters: BTreeMap<String, f64>,
    /// Sum of squared residuals of the fitted series.
    pub loss: f64,
    pub n_evals: usize,
    pub converged: bool,
    #[serde(default)]
    pub stages: Vec<StageReport>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }

    /// Deterministic pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit results serialise")
    }
}

/// Search box of a named parameter.
pub fn bound_for(name: &str) -> Option<Bound> {
    use names::*;
    Some(match name {
        FLOOR_RATIO => Bound::linear(0.0, 0.999),
        DECLINE => Bound::log(1e-4, 5.0),
        SHAPE => Bound::log(1e-2, 1e3),
        N_G0 => Bound::linear(0.0, 1.0),
        N_B0 => Bound::linear(1e-6, 1.0),
        INNOVATION => Bound::log(1e-5, 1.0),
        IMITATION => Bound::log(1e-4, 10.0),
        R | R_PRIME => Bound::linear(0.0, 2.0),
        Q | Q_PRIME => Bound::linear(0.0, 1.0),
        T_P | T_P_PRIME => Bound::linear(1.0, 30.0),
        DELAY => Bound::linear(0.0, 10.0),
        _ => return None,
    })
}

/// Sum of squared differences.
pub(crate) fn ssr(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
