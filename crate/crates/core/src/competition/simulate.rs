use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check, PlcError, Result};
use crate::market::MarketVolumeParams;

use super::{replicator_step, BrandState, MarketState};

/// Rare multiplicative perturbations of a brand's price, preference or
/// reproduction factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSettings {
    /// Expected jumps per brand per unit `tau`.
    #[serde(default = "JumpSettings::default_rate")]
    pub rate: f64,
    /// Standard deviation of the log of the jump factor.
    #[serde(default = "JumpSettings::default_sigma")]
    pub sigma: f64,
}

impl JumpSettings {
    fn default_rate() -> f64 {
        0.1
    }

    fn default_sigma() -> f64 {
        0.01
    }
}

impl Default for JumpSettings {
    fn default() -> Self {
        Self {
            rate: Self::default_rate(),
            sigma: Self::default_sigma(),
        }
    }
}

/// How brand prices respond to selection between jumps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadControl {
    /// Prices stay put; selection only reweights sales.
    #[default]
    Free,
    /// Brands keep their price offsets and sales profile and follow the
    /// selection-induced shift of the mean, so the price spread is maintained.
    Translate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionConfig {
    pub brands: Vec<BrandState>,
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
    /// Rescale total sales to `q v(<mu>)` at every recorded step.
    #[serde(default = "yes")]
    pub track_demand: bool,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    /// Long-run time `epsilon tau`.
    pub t: f64,
    pub brand_id: usize,
    pub share: f64,
    pub price: f64,
    pub sales: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPricePoint {
    pub tau: f64,
    pub t: f64,
    pub mean_price: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionRun {
    pub rows: Vec<TrajectoryRow>,
    pub mean_price: Vec<MeanPricePoint>,
    /// `psi0` of the initial state.
    pub initial_psi0: f64,
    pub jumps_applied: usize,
    pub final_state: MarketState,
}

/// `n` brands with prices at Gaussian quantiles, rescaled so the equal-sales
/// mean and variance are exactly `mean` and `variance`.
pub fn gaussian_brands(
    n: usize,
    mean: f64,
    variance: f64,
    preference: f64,
    reproduction: f64,
    stock: f64,
) -> Result<Vec<BrandState>> {
    if n == 0 {
        return Err(PlcError::param("n", "need at least one brand"));
    }
    check(
        "variance",
        variance,
        variance >= 0.0,
        "must be non-negative",
    )?;
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
    let mut z: Vec<f64> = (0..n)
        .map(|i| {
            statrs::distribution::ContinuousCDF::inverse_cdf(&normal, (i as f64 + 0.5) / n as f64)
        })
        .collect();
    let zm = z.iter().sum::<f64>() / n as f64;
    let zv = z.iter().map(|x| (x - zm).powi(2)).sum::<f64>() / n as f64;
    let scale = if zv > 0.0 {
        (variance / zv).sqrt()
    } else {
        0.0
    };
    for x in z.iter_mut() {
        *x = mean + (*x - zm) * scale;
    }
    let brands: Vec<BrandState> = z
        .into_iter()
        .map(|price| BrandState {
            price,
            preference,
            reproduction,
            stock,
            sales: 1.0 / n as f64,
        })
        .collect();
    for b in &brands {
        b.validate()?;
    }
    Ok(brands)
}

/// Runs replicator dynamics with optional jumps and spread control.
///
/// Brands with zero total sales start from their stationary sales
/// `eta_i x_i psi0 v(mu_i)`.
pub fn run_competition(cfg: &CompetitionConfig) -> Result<CompetitionRun> {
    check("dtau", cfg.dtau, cfg.dtau > 0.0, "must be positive")?;
    if cfg.record_every == 0 {
        return Err(PlcError::param("record_every", "must be at least 1"));
    }
    if let Some(j) = &cfg.jumps {
        check("jumps.rate", j.rate, j.rate >= 0.0, "must be non-negative")?;
        check(
            "jumps.sigma",
            j.sigma,
            j.sigma >= 0.0,
            "must be non-negative",
        )?;
    }
    let mut state = MarketState {
        brands: cfg.brands.clone(),
        consumer_pool: 0.0,
        repurchase_rate: cfg.repurchase_rate,
        volume: cfg.volume,
        clock: 0.0,
        epsilon: cfg.epsilon,
    };
    state.validate()?;
    let psi0 = state.psi0()?;
    state.consumer_pool = psi0;
    if state.total_sales() == 0.0 {
        let mv = state.volume;
        for b in state.brands.iter_mut() {
            b.sales = b.preference * b.stock * psi0 * mv.density(b.price);
        }
    }
    if !(state.total_sales() > 0.0) {
        return Err(PlcError::InvalidInput(
            "no brand sells at the initial state".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut run = CompetitionRun {
        rows: Vec::new(),
        mean_price: Vec::new(),
        initial_psi0: psi0,
        jumps_applied: 0,
        final_state: state.clone(),
    };
    if cfg.track_demand {
        rescale_to_demand(&mut state);
    }
    record(&state, &mut run);

    for step in 1..=cfg.steps {
        state = match cfg.spread {
            SpreadControl::Free => replicator_step(&state, cfg.dtau)?,
            SpreadControl::Translate => translate_step(&state, cfg.dtau)?,
        };
        if let Some(j) = &cfg.jumps {
            run.jumps_applied += apply_jumps(&mut state, j, cfg.dtau, &mut rng)?;
        }
        if step % cfg.record_every == 0 || step == cfg.steps {
            if cfg.track_demand {
                rescale_to_demand(&mut state);
            }
            record(&state, &mut run);
        }
    }
    run.final_state = state;
    Ok(run)
}

fn translate_step(state: &MarketState, dtau: f64) -> Result<MarketState> {
    let before = state.mean_price().expect("positive sales");
    let moved = replicator_step(state, dtau)?;
    let shift = moved.mean_price().expect("positive sales") - before;
    let mut next = state.clone();
    for b in next.brands.iter_mut() {
        b.price += shift;
        if !(b.price > 0.0) {
            return Err(PlcError::Domain(format!(
                "brand price left the positive axis: {}",
                b.price
            )));
        }
    }
    next.clock = moved.clock;
    Ok(next)
}

fn rescale_to_demand(state: &mut MarketState) {
    let yt = state.total_sales();
    let Some(mean) = state.mean_price() else {
        return;
    };
    let target = state.repurchase_rate * state.volume.density(mean);
    if yt > 0.0 && target > 0.0 {
        let s = target / yt;
        for b in state.brands.iter_mut() {
            b.sales *= s;
        }
    }
}

fn apply_jumps(
    state: &mut MarketState,
    j: &JumpSettings,
    dtau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let lambda = j.rate * state.brands.len() as f64 * dtau;
    if lambda <= 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(lambda).map_err(|e| PlcError::param("jumps.rate", e.to_string()))?;
    let count = poisson.sample(rng) as usize;
    for _ in 0..count {
        let i = rng.random_range(0..state.brands.len());
        let z: f64 = StandardNormal.sample(rng);
        let factor = (j.sigma * z).exp();
        let b = &mut state.brands[i];
        match rng.random_range(0..3) {
            0 => b.price *= factor,
            1 => b.preference *= factor,
            _ => b.reproduction *= factor,
        }
    }
    Ok(count)
}

fn record(state: &MarketState, run: &mut CompetitionRun) {
    let t = state.epsilon * state.clock;
    let shares = state.shares();
    for (i, (b, m)) in state.brands.iter().zip(shares).enumerate() {
        run.rows.push(TrajectoryRow {
            t,
            brand_id: i,
            share: m,
            price: b.price,
            sales: b.sales,
        });
    }
    run.mean_price.push(MeanPricePoint {
        tau: state.clock,
        t,
        mean_price: state.mean_price().unwrap_or(f64::NAN),
        variance: state.price_variance().unwrap_or(f64::NAN),
    });
}
