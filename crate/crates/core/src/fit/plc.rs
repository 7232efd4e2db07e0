use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{PlcError, Result};
use crate::scenario::{names, PlcParams};
use crate::series::SalesSeries;

use super::price::{default_floor_grid, fit_price_decline, refine_price_levels};
use super::simplex::{lattice, minimize, multi_start, Bound, SimplexOptions};
use super::{bound_for, ssr, FitResult, StageReport};

/// Observed series on a common calendar grid. Sales and penetration are in
/// fractions of the market potential unless `M` is estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct PlcData {
    pub sales: SalesSeries,
    pub penetration: Option<SalesSeries>,
    pub prices: Option<SalesSeries>,
}

/// Starting values and structure of a product life cycle fit.
///
/// Components that are zero in `params` stay absent. Names in `fixed` keep
/// their starting value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcPrior {
    pub params: PlcParams,
    #[serde(default)]
    pub fixed: BTreeSet<String>,
}

impl PlcPrior {
    pub fn new(params: PlcParams) -> Self {
        Self {
            params,
            fixed: BTreeSet::new(),
        }
    }

    pub fn fix(mut self, name: &str) -> Self {
        self.fixed.insert(name.to_string());
        self
    }

    /// Prior built from the parameters of an earlier fit, on top of `base`.
    pub fn from_fit_result(base: PlcParams, skeleton: &FitResult) -> Result<Self> {
        Ok(Self::new(base.with_values(&skeleton.parameters)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcFitOptions {
    /// Options of each multi-start run in the staged searches.
    pub stage: SimplexOptions,
    /// Options of the final joint refinement.
    pub polish: SimplexOptions,
    /// Lattice starts sit at `prior * (1 -+ spread)`.
    pub lattice_spread: f64,
    /// Largest number of parameters spanned by a start lattice.
    pub max_lattice_dims: usize,
    pub floor_grid: Vec<f64>,
}

impl Default for PlcFitOptions {
    fn default() -> Self {
        Self {
            stage: SimplexOptions {
                max_evals: 4000,
                restarts: 1,
                ..SimplexOptions::default()
            },
            polish: SimplexOptions {
                max_evals: 60_000,
                restarts: 6,
                ..SimplexOptions::default()
            },
            lattice_spread: 0.5,
            max_lattice_dims: 6,
            floor_grid: default_floor_grid(),
        }
    }
}

const DIFFUSION: [&str; 6] = [
    names::N_B0,
    names::INNOVATION,
    names::IMITATION,
    names::N_G0,
    names::SHAPE,
    names::DECLINE,
];
const REPURCHASE: [&str; 6] = [
    names::R,
    names::Q,
    names::T_P,
    names::R_PRIME,
    names::Q_PRIME,
    names::T_P_PRIME,
];

struct Problem<'a> {
    base: PlcParams,
    names: Vec<&'static str>,
    bounds: Vec<Bound>,
    dt: f64,
    n: usize,
    sales: &'a [f64],
    penetration: Option<&'a [f64]>,
    fit_scale: bool,
}

struct Eval {
    sales_ssr: f64,
    pen_ssr: f64,
    scale: f64,
}

impl Problem<'_> {
    fn params(&self, x: &[f64]) -> Result<PlcParams> {
        let mut p = self.base;
        for (name, v) in self.names.iter().zip(x) {
            p.set(name, *v)?;
        }
        Ok(p)
    }

    fn evaluate(&self, x: &[f64]) -> Option<Eval> {
        let p = self.params(x).ok()?;
        let curves = p.assemble_n(self.dt, self.n).ok()?;
        let m = &curves.total.values;
        let scale = if self.fit_scale {
            let num: f64 = m.iter().zip(self.sales).map(|(a, b)| a * b).sum();
            let den: f64 = m.iter().map(|a| a * a).sum();
            if den > 0.0 {
                (num / den).max(0.0)
            } else {
                0.0
            }
        } else {
            p.market_potential
        };
        let sales_ssr = m
            .iter()
            .zip(self.sales)
            .map(|(a, b)| (scale * a - b).powi(2))
            .sum();
        let pen_ssr = self
            .penetration
            .map_or(0.0, |d| ssr(&curves.penetration.values, d));
        Some(Eval {
            sales_ssr,
            pen_ssr,
            scale,
        })
    }

    fn starts(&self, spread: f64, max_dims: usize) -> Vec<Vec<f64>> {
        let x0: Vec<f64> = self
            .names
            .iter()
            .map(|n| self.base.get(n).unwrap())
            .collect();
        let axes: Vec<Vec<f64>> = x0
            .iter()
            .zip(&self.bounds)
            .enumerate()
            .map(|(i, (v, b))| {
                if i < max_dims {
                    vec![b.clamp(v * (1.0 - spread)), b.clamp(v * (1.0 + spread))]
                } else {
                    vec![b.clamp(*v)]
                }
            })
            .collect();
        let mut starts = vec![x0
            .iter()
            .zip(&self.bounds)
            .map(|(v, b)| b.clamp(*v))
            .collect()];
        starts.extend(lattice(&axes));
        starts
    }
}

/// Staged least-squares fit of the full product life cycle.
///
/// 1. price floor and decline rate from the price series, if given; the
///    floor is held from here on, the rate until the joint refinement;
/// 2. diffusion parameters from the penetration series, if given;
/// 3. repurchase parameters (and diffusion parameters not yet estimated)
///    from the sales series, multi-started on a lattice around the prior;
/// 4. joint refinement of every free parameter.
///
/// The market potential `M` is solved in closed form at every evaluation
/// unless fixed. Without penetration data the first pool is confounded with
/// `M` and is held at its prior.
pub fn fit_plc(data: &PlcData, prior: &PlcPrior, opts: &PlcFitOptions) -> Result<FitResult> {
    let sales = &data.sales;
    if sales.is_empty() {
        return Err(PlcError::EmptyInput("sales series has no samples".into()));
    }
    if let Some(v) = sales.values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(PlcError::InvalidInput(format!(
            "sales must be non-negative, got {v}"
        )));
    }
    if sales.values.iter().all(|v| *v == 0.0) {
        return Err(PlcError::DegenerateSeries(
            "sales series is identically zero".into(),
        ));
    }
    if let Some(p) = &data.penetration {
        sales.require_same_grid(p, "sales vs penetration")?;
    }
    for name in &prior.fixed {
        if !names::ALL.contains(&name.as_str()) {
            return Err(PlcError::Config(format!(
                "unknown fixed parameter `{name}`"
            )));
        }
    }
    let mut cur = prior.params;
    cur.validate()?;

    let bass_repurchase = cur.has_bass() && (cur.replacement > 0.0 || cur.multiple > 0.0);
    let gompertz_repurchase =
        cur.has_gompertz() && (cur.replacement_g > 0.0 || cur.multiple_g > 0.0);
    let longest = [
        (bass_repurchase && cur.replacement > 0.0, cur.t_p),
        (
            gompertz_repurchase && cur.replacement_g > 0.0,
            cur.t_p_prime,
        ),
    ]
    .iter()
    .filter(|(on, _)| *on)
    .map(|(_, tp)| *tp)
    .fold(0.0, f64::max);
    if sales.len() < 4 || sales.horizon() < longest {
        return Err(PlcError::Horizon(format!(
            "sales cover {} years but the lifetime is {longest} years",
            sales.horizon()
        )));
    }

    let mut notes = Vec::new();
    if cur.t0 != sales.t0 {
        notes.push(format!(
            "launch year taken from the sales series: {}",
            sales.t0
        ));
        cur.t0 = sales.t0;
    }
    let mut fixed: BTreeSet<String> = prior.fixed.clone();
    fixed.insert(names::T0.into());
    fixed.insert(names::DELAY.into());
    let mut fix = |names: &[&str]| {
        for n in names {
            fixed.insert(n.to_string());
        }
    };
    if !cur.has_bass() {
        fix(&[names::N_B0, names::INNOVATION, names::IMITATION]);
    }
    if !cur.has_gompertz() {
        fix(&[
            names::N_G0,
            names::SHAPE,
            names::DECLINE,
            names::FLOOR_RATIO,
        ]);
    }
    if !bass_repurchase {
        fix(&[names::R, names::Q, names::T_P]);
    } else if cur.replacement == 0.0 {
        fix(&[names::R, names::T_P]);
    }
    if !gompertz_repurchase {
        fix(&[names::R_PRIME, names::Q_PRIME, names::T_P_PRIME]);
    } else if cur.replacement_g == 0.0 {
        fix(&[names::R_PRIME, names::T_P_PRIME]);
    }
    let fit_scale = !fixed.contains(names::M);

    let mut stages = Vec::new();
    let mut total_evals = 0usize;
    let mut price_rate = false;

    if cur.has_gompertz() {
        if let Some(prices) = &data.prices {
            let pf = fit_price_decline(prices, &opts.floor_grid)?;
            cur.pm_over_p0 = pf.get(names::FLOOR_RATIO).unwrap_or(0.0);
            cur.a = pf.get(names::DECLINE).unwrap_or(0.0).max(0.0);
            let mut evals = pf.n_evals;
            let mut loss = pf.loss;
            if let Some((ratio, a, ssr, n)) = refine_price_levels(prices) {
                cur.pm_over_p0 = ratio;
                cur.a = a;
                evals += n;
                loss = ssr;
            }
            fixed.insert(names::FLOOR_RATIO.into());
            price_rate = true;
            total_evals += evals;
            stages.push(StageReport {
                name: "price".into(),
                loss,
                n_evals: evals,
                converged: pf.converged,
            });
            notes.extend(pf.notes);
        } else {
            fixed.insert(names::FLOOR_RATIO.into());
            notes.push("no price series: the price floor keeps its prior value".into());
        }
    }
    if data.penetration.is_none() && fit_scale {
        let pool = if cur.has_bass() {
            names::N_B0
        } else {
            names::N_G0
        };
        if fixed.insert(pool.into()) {
            notes.push(format!(
                "no penetration series: `{pool}` is confounded with M and held at its prior"
            ));
        }
    }

    let free = |list: &[&'static str], fixed: &BTreeSet<String>| -> Vec<&'static str> {
        list.iter()
            .copied()
            .filter(|n| !fixed.contains(*n))
            .collect()
    };
    let diffusion = free(&DIFFUSION, &fixed);
    let repurchase = free(&REPURCHASE, &fixed);
    // A rate taken from prices is held through the staged searches.
    let staged: Vec<&'static str> = diffusion
        .iter()
        .copied()
        .filter(|n| !(price_rate && *n == names::DECLINE))
        .collect();
    let make = |base: PlcParams, names: Vec<&'static str>, with_pen: bool| Problem {
        base,
        bounds: names
            .iter()
            .map(|n| bound_for(n).expect("bounded parameter"))
            .collect(),
        names,
        dt: sales.dt,
        n: sales.len(),
        sales: &sales.values,
        penetration: if with_pen {
            data.penetration.as_ref().map(|p| p.values.as_slice())
        } else {
            None
        },
        fit_scale,
    };

    if data.penetration.is_some() && !staged.is_empty() {
        let prob = make(cur, staged.clone(), true);
        let loss = |x: &[f64]| prob.evaluate(x).map_or(f64::INFINITY, |e| e.pen_ssr);
        let starts = prob.starts(opts.lattice_spread, opts.max_lattice_dims);
        let (best, evals) = multi_start(&loss, &starts, &prob.bounds, &opts.stage);
        cur = prob.params(&best.x)?;
        total_evals += evals;
        stages.push(StageReport {
            name: "penetration".into(),
            loss: best.f,
            n_evals: evals,
            converged: best.converged,
        });
    }

    let mut stage3 = repurchase.clone();
    if data.penetration.is_none() {
        stage3.extend(staged.iter().copied());
    }
    if !stage3.is_empty() {
        let prob = make(cur, stage3, false);
        let loss = |x: &[f64]| prob.evaluate(x).map_or(f64::INFINITY, |e| e.sales_ssr);
        let starts = prob.starts(opts.lattice_spread, opts.max_lattice_dims);
        let (best, evals) = multi_start(&loss, &starts, &prob.bounds, &opts.stage);
        cur = prob.params(&best.x)?;
        total_evals += evals;
        stages.push(StageReport {
            name: "repurchase".into(),
            loss: best.f,
            n_evals: evals,
            converged: best.converged,
        });
    }

    let mut all = diffusion.clone();
    all.extend(repurchase.iter().copied());
    let joint = make(cur, all, true);
    let sales_norm = sales
        .values
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let pen_norm = data.penetration.as_ref().map_or(1.0, |p| {
        p.values
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .max(f64::MIN_POSITIVE)
    });
    let objective = |x: &[f64]| {
        joint.evaluate(x).map_or(f64::INFINITY, |e| {
            e.sales_ssr / sales_norm + e.pen_ssr / pen_norm
        })
    };
    let x0: Vec<f64> = joint.names.iter().map(|n| cur.get(n).unwrap()).collect();
    let polished = minimize(&objective, &x0, &joint.bounds, &opts.polish);
    total_evals += polished.n_evals;
    cur = joint.params(&polished.x)?;
    let end = joint.evaluate(&polished.x).ok_or_else(|| {
        PlcError::DegenerateSeries("fitted parameters do not produce a valid curve".into())
    })?;
    if fit_scale {
        cur.market_potential = end.scale;
    }
    stages.push(StageReport {
        name: "joint".into(),
        loss: end.sales_ssr,
        n_evals: polished.n_evals,
        converged: polished.converged,
    });
    if data.penetration.is_some() {
        notes.push(format!("penetration loss: {}", end.pen_ssr));
    }

    Ok(FitResult {
        parameters: cur.to_map(),
        loss: end.sales_ssr,
        n_evals: total_evals,
        converged: polished.converged,
        stages,
        notes,
    })
}
