use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffusion::{BassParams, GompertzParams};
use crate::error::{check, PlcError, Result};
use crate::scenario::names;
use crate::series::SalesSeries;

use super::simplex::{lattice, multi_start, SimplexOptions};
use super::{bound_for, ssr, FitResult, StageReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GompertzFitOptions {
    /// Delay of the Gompertz clock, held fixed: the shape `k` and the delay
    /// enter only through `k e^{2 a delay}`.
    pub delay: f64,
    /// Known Bass adopters contained in the penetration series.
    pub background: Option<BassParams>,
    pub simplex: SimplexOptions,
}

impl Default for GompertzFitOptions {
    fn default() -> Self {
        Self {
            delay: 0.0,
            background: None,
            simplex: SimplexOptions::default(),
        }
    }
}

/// Least-squares Gompertz fit `(n_G0, k[, a])` to a penetration series.
///
/// The series is monotone-cleaned with a running maximum before fitting;
/// the residual against the raw series is reported in the notes.
pub fn fit_gompertz(
    penetration: &SalesSeries,
    a_fixed: Option<f64>,
    opts: &GompertzFitOptions,
) -> Result<FitResult> {
    if penetration.is_empty() {
        return Err(PlcError::EmptyInput(
            "penetration series has no samples".into(),
        ));
    }
    if penetration.len() < 4 {
        return Err(PlcError::InvalidInput(
            "Gompertz fit needs at least 4 samples".into(),
        ));
    }
    if let Some(v) = penetration
        .values
        .iter()
        .find(|v| !v.is_finite() || **v < 0.0)
    {
        return Err(PlcError::InvalidInput(format!(
            "penetration must be non-negative, got {v}"
        )));
    }
    check(
        "delay",
        opts.delay,
        opts.delay >= 0.0,
        "must be non-negative",
    )?;
    if let Some(a) = a_fixed {
        check("a", a, a >= 0.0, "must be non-negative")?;
    }
    if let Some(b) = &opts.background {
        b.validate()?;
    }

    let mut running = 0.0f64;
    let clean: Vec<f64> = penetration
        .values
        .iter()
        .map(|v| {
            running = running.max(*v);
            running
        })
        .collect();
    let times: Vec<f64> = (0..penetration.len())
        .map(|i| i as f64 * penetration.dt)
        .collect();
    let background: Vec<f64> = times
        .iter()
        .map(|t| opts.background.map_or(0.0, |b| b.cumulative(*t)))
        .collect();
    let delay = opts.delay;
    let model = |x: &[f64]| -> Vec<f64> {
        let g = GompertzParams {
            saturation: x[0],
            shape: x[1],
            decline_rate: a_fixed.unwrap_or_else(|| x[2]),
            delay,
        };
        times
            .iter()
            .zip(&background)
            .map(|(t, b)| {
                b + if *t >= delay {
                    g.cumulative(t - delay)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let loss = |x: &[f64]| ssr(&model(x), &clean);

    let mut bounds = vec![
        bound_for(names::N_G0).unwrap(),
        bound_for(names::SHAPE).unwrap(),
    ];
    let top = (clean.last().unwrap() - background.last().unwrap()).clamp(0.05, 1.0);
    let mut axes = vec![
        vec![0.7 * top, top.min(1.0), (1.3 * top).min(1.0)],
        vec![2.0, 10.0, 50.0],
    ];
    if a_fixed.is_none() {
        bounds.push(bound_for(names::DECLINE).unwrap());
        axes.push(vec![0.05, 0.15, 0.4]);
    }
    let starts = lattice(&axes);
    let (best, evals) = multi_start(&loss, &starts, &bounds, &opts.simplex);

    let a = a_fixed.unwrap_or(best.x.get(2).copied().unwrap_or(0.0));
    let mut parameters = BTreeMap::new();
    parameters.insert(names::T0.to_string(), penetration.t0);
    parameters.insert(names::N_G0.to_string(), best.x[0]);
    parameters.insert(names::SHAPE.to_string(), best.x[1]);
    parameters.insert(names::DECLINE.to_string(), a);
    parameters.insert(names::DELAY.to_string(), delay);
    let raw = ssr(&model(&best.x), &penetration.values);
    let mut notes = vec![format!("loss against the raw series: {raw}")];
    if a_fixed.is_some() {
        notes.push("decline rate held fixed".into());
    }
    Ok(FitResult {
        parameters,
        loss: best.f,
        n_evals: evals,
        converged: best.converged,
        stages: vec![StageReport {
            name: "gompertz".into(),
            loss: best.f,
            n_evals: evals,
            converged: best.converged,
        }],
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(g: &GompertzParams, noise: f64) -> SalesSeries {
        // Deterministic pseudo-noise keeps the test independent of RNG crates.
        SalesSeries::from_fn(1948.0, 0.25, 129, |t| {
            g.cumulative(t) * (1.0 + noise * (7.3 * t).sin() * (1.9 * t + 0.4).cos())
        })
        .unwrap()
    }

    #[test]
    fn noise_free_fit_is_exact() {
        let g = GompertzParams::new(0.77, 8.5, 0.2, 0.0).unwrap();
        let r = fit_gompertz(&synth(&g, 0.0), None, &GompertzFitOptions::default()).unwrap();
        assert!(r.loss < 1e-10, "{}", r.loss);
        assert!((r.get("k").unwrap() - 8.5).abs() < 1e-3);
        assert!((r.get("n_g0").unwrap() - 0.77).abs() < 1e-4);
        assert!((r.get("a").unwrap() - 0.2).abs() < 1e-4);
    }

    #[test]
    fn noisy_fit_within_five_percent() {
        let g = GompertzParams::new(0.77, 8.5, 0.2, 0.0).unwrap();
        let r = fit_gompertz(&synth(&g, 0.01), Some(0.2), &GompertzFitOptions::default()).unwrap();
        assert!(((r.get("k").unwrap() - 8.5) / 8.5).abs() < 0.05);
        assert!(((r.get("n_g0").unwrap() - 0.77) / 0.77).abs() < 0.05);
        assert_eq!(r.get("a"), Some(0.2));
    }

    #[test]
    fn deterministic_serialisation() {
        let g = GompertzParams::new(0.5, 4.0, 0.3, 0.0).unwrap();
        let s = synth(&g, 0.02);
        let a = fit_gompertz(&s, None, &GompertzFitOptions::default())
            .unwrap()
            .to_json();
        let b = fit_gompertz(&s, None, &GompertzFitOptions::default())
            .unwrap()
            .to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let e = SalesSeries::new(0.0, 1.0, vec![]).unwrap();
        assert!(matches!(
            fit_gompertz(&e, None, &GompertzFitOptions::default()),
            Err(PlcError::EmptyInput(_))
        ));
        let neg = SalesSeries::new(0.0, 1.0, vec![0.1, -0.2, 0.3, 0.4]).unwrap();
        assert!(fit_gompertz(&neg, None, &GompertzFitOptions::default()).is_err());
    }
}
