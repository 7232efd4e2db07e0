//! Closed-form first-purchase curves.
//!
//! Bass diffusion spreads by innovation and imitation inside a fixed pool.
//! Gompertz diffusion is driven by the market volume expanding while the
//! mean price decays exponentially toward the natural price.

use serde::{Deserialize, Serialize};

use crate::error::{check, PlcError, Result};
use crate::market::MarketVolumeParams;
use crate::series::SalesSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BassParams {
    /// Innovation rate `A` (1/year).
    pub innovation: f64,
    /// Imitation rate `B` (1/year).
    pub imitation: f64,
    /// Adopter pool `n_B0` reached at saturation.
    pub pool: f64,
}

impl BassParams {
    pub fn new(innovation: f64, imitation: f64, pool: f64) -> Result<Self> {
        let p = Self {
            innovation,
            imitation,
            pool,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            "innovation",
            self.innovation,
            self.innovation > 0.0,
            "must be positive",
        )?;
        check(
            "imitation",
            self.imitation,
            self.imitation >= 0.0,
            "must be non-negative",
        )?;
        check(
            "pool",
            self.pool,
            self.pool > 0.0 && self.pool <= 1.0,
            "must lie in (0, 1]",
        )?;
        Ok(())
    }

    /// Time of the sales peak, `ln(B/A)/(A+B)`; zero when `B <= A`.
    pub fn peak_time(&self) -> f64 {
        let (a, b) = (self.innovation, self.imitation);
        if b <= a {
            0.0
        } else {
            (b / a).ln() / (a + b)
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        let (a, b) = (self.innovation, self.imitation);
        let e = (-(a + b) * t).exp();
        self.pool * (1.0 - e) / (1.0 + b / a * e)
    }

    pub fn rate(&self, t: f64) -> f64 {
        let (a, b) = (self.innovation, self.imitation);
        let s = a + b;
        let e = (-s * t).exp();
        let den = a + b * e;
        self.pool * a * s * s * e / (den * den)
    }
}

fn require_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(PlcError::Domain(format!(
            "time must be finite and non-negative, got {t}"
        )))
    }
}

/// Bass adopter density `n_B(t)`.
pub fn bass_cumulative(t: f64, p: &BassParams) -> Result<f64> {
    p.validate()?;
    require_time(t)?;
    Ok(p.cumulative(t))
}

/// Bass first-purchase sales `dn_B/dt`.
pub fn bass_rate(t: f64, p: &BassParams) -> Result<f64> {
    p.validate()?;
    require_time(t)?;
    Ok(p.rate(t))
}

/// Exponential decline of the sales-weighted mean price toward `mu_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTrajectory {
    /// Offset `mu_0` above the natural price at `t = 0`.
    pub initial_offset: f64,
    pub natural_price: f64,
    /// Price decline rate `a` (1/year).
    pub decline_rate: f64,
}

impl PriceTrajectory {
    pub fn new(initial_offset: f64, natural_price: f64, decline_rate: f64) -> Result<Self> {
        check(
            "initial_offset",
            initial_offset,
            initial_offset >= 0.0,
            "must be non-negative",
        )?;
        check(
            "natural_price",
            natural_price,
            natural_price >= 0.0,
            "must be non-negative",
        )?;
        check(
            "decline_rate",
            decline_rate,
            decline_rate >= 0.0,
            "must be non-negative",
        )?;
        Ok(Self {
            initial_offset,
            natural_price,
            decline_rate,
        })
    }

    pub fn at(&self, t: f64) -> f64 {
        self.initial_offset * (-self.decline_rate * t).exp() + self.natural_price
    }
}

pub fn mean_price(t: f64, traj: &PriceTrajectory) -> Result<f64> {
    require_time(t)?;
    Ok(traj.at(t))
}

/// Scaled price function `mu'(t) = (p(t) - p_m) / p0` with `p0` the first sample.
///
/// On data produced by the model, `ln mu'` is a straight line of slope `-a`.
pub fn price_function(prices: &SalesSeries, floor_ratio: f64) -> Result<SalesSeries> {
    check(
        "floor_ratio",
        floor_ratio,
        (0.0..1.0).contains(&floor_ratio),
        "must lie in [0, 1)",
    )?;
    let p0 = *prices
        .values
        .first()
        .ok_or_else(|| PlcError::EmptyInput("price series has no samples".into()))?;
    if let Some((i, p)) = prices.values.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
        return Err(PlcError::InvalidInput(format!(
            "price at sample {i} is not positive: {p}"
        )));
    }
    let floor = floor_ratio * p0;
    let mut values = Vec::with_capacity(prices.len());
    for (i, &p) in prices.values.iter().enumerate() {
        if p <= floor {
            return Err(PlcError::DegenerateSeries(format!(
                "price {p} at t={} does not exceed the floor {floor}",
                prices.time(i)
            )));
        }
        values.push((p - floor) / p0);
    }
    SalesSeries::new(prices.t0, prices.dt, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GompertzParams {
    /// Saturation level `n_G0`.
    pub saturation: f64,
    /// Shape `k`.
    pub shape: f64,
    /// Price decline rate `a` (1/year).
    pub decline_rate: f64,
    /// Delay `dt0` of the Gompertz clock relative to launch (years).
    pub delay: f64,
}

impl GompertzParams {
    pub fn new(saturation: f64, shape: f64, decline_rate: f64, delay: f64) -> Result<Self> {
        let g = Self {
            saturation,
            shape,
            decline_rate,
            delay,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            "saturation",
            self.saturation,
            (0.0..=1.0).contains(&self.saturation),
            "must lie in [0, 1]",
        )?;
        check(
            "shape",
            self.shape,
            self.shape >= 0.0,
            "must be non-negative",
        )?;
        check(
            "decline_rate",
            self.decline_rate,
            self.decline_rate >= 0.0,
            "must be non-negative",
        )?;
        check(
            "delay",
            self.delay,
            self.delay >= 0.0,
            "must be non-negative",
        )?;
        Ok(())
    }

    /// Parameters implied by a volume law and a price trajectory:
    /// `k = mu_0^2 / (2 Theta^2)`, `n_G0 = m_L`.
    pub fn linked(mv: &MarketVolumeParams, traj: &PriceTrajectory) -> Result<Self> {
        mv.validate()?;
        let w = mv.width;
        Self::new(
            mv.lower_share(),
            traj.initial_offset * traj.initial_offset / (2.0 * w * w),
            traj.decline_rate,
            0.0,
        )
    }

    /// Inflection point `ln(k) / (2a)` of the cumulative curve.
    pub fn inflection_time(&self) -> f64 {
        self.shape.ln() / (2.0 * self.decline_rate)
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        self.saturation * (-self.shape * (-2.0 * self.decline_rate * t).exp()).exp()
    }

    pub fn rate(&self, t: f64) -> f64 {
        let e = (-2.0 * self.decline_rate * t).exp();
        2.0 * self.decline_rate * self.shape * self.cumulative(t) * e
    }
}

/// Gompertz adopter density on the Gompertz clock.
pub fn gompertz_cumulative(t: f64, g: &GompertzParams) -> Result<f64> {
    g.validate()?;
    require_time(t)?;
    Ok(g.cumulative(t))
}

/// Gompertz first-purchase sales on the Gompertz clock.
pub fn gompertz_rate(t: f64, g: &GompertzParams) -> Result<f64> {
    g.validate()?;
    require_time(t)?;
    Ok(g.rate(t))
}

/// Sup-norm gap between the Gompertz closed form and the volume law
/// evaluated along the price trajectory, `v(<mu(t)>) - m_U`.
///
/// Vanishes to rounding when `g` is [`GompertzParams::linked`] to `mv` and
/// `traj`; a mis-linked parameter set shows up as a large residual.
pub fn gompertz_consistency(
    g: &GompertzParams,
    mv: &MarketVolumeParams,
    traj: &PriceTrajectory,
    times: &[f64],
) -> Result<f64> {
    g.validate()?;
    mv.validate()?;
    let mut worst = 0.0f64;
    for &t in times {
        require_time(t)?;
        let from_volume = mv.density(traj.at(t)) - mv.upper_share();
        worst = worst.max((g.cumulative(t) - from_volume).abs());
    }
    Ok(worst)
}

/// How the Bass and Gompertz pools are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Normalization {
    /// Densities relative to the market potential: pools must sum to one.
    MarketPotential,
    /// Densities relative to households: pools sum to `n_max = M / N_H`.
    Households { n_max: f64 },
}

pub fn check_pools(
    bass: &BassParams,
    gompertz: &GompertzParams,
    norm: Normalization,
) -> Result<()> {
    let total = bass.pool + gompertz.saturation;
    let target = match norm {
        Normalization::MarketPotential => 1.0,
        Normalization::Households { n_max } => n_max,
    };
    if (total - target).abs() > 1e-9 {
        return Err(PlcError::param(
            "pool",
            format!("n_B0 + n_G0 = {total} but the normalization requires {target}"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::grid_argmax;

    const BW: BassParams = BassParams {
        innovation: 0.02,
        imitation: 2.5,
        pool: 0.18,
    };

    fn table_bass() -> [BassParams; 4] {
        [
            BassParams::new(0.001, 1.8, 0.01).unwrap(),
            BW,
            BassParams::new(0.004, 0.58, 1.0).unwrap(),
            BassParams::new(0.02, 0.5, 1.0).unwrap(),
        ]
    }

    #[test]
    fn bass_cumulative_limits() {
        assert_eq!(bass_cumulative(0.0, &BW).unwrap(), 0.0);
        assert!((bass_cumulative(1e3, &BW).unwrap() - 0.18).abs() < 1e-15);
        assert!(matches!(
            bass_cumulative(-1.0, &BW),
            Err(PlcError::Domain(_))
        ));
    }

    #[test]
    fn bass_peak_matches_grid_argmax() {
        let s = BassParams::new(0.02, 0.5, 1.0).unwrap();
        let analytic = (0.5f64 / 0.02).ln() / 0.52;
        assert!((analytic - 6.19).abs() < 0.01);
        let oracle = grid_argmax(|t| s.rate(t), 0.0, 20.0, 2_000_000);
        assert!((oracle - analytic).abs() < 2e-5);
        assert!((s.peak_time() - analytic).abs() < 1e-12);

        let oracle = grid_argmax(|t| BW.rate(t), 0.0, 10.0, 1_000_000);
        assert!((oracle - 125f64.ln() / 2.52).abs() < 2e-5);
        assert!((oracle - 1.92).abs() < 0.01);
    }

    #[test]
    fn bass_rate_special_cases() {
        assert!((bass_rate(0.0, &BW).unwrap() - 0.02 * 0.18).abs() < 1e-15);
        let pure = BassParams::new(0.3, 0.0, 0.7).unwrap();
        for t in [0.0f64, 1.0, 5.0] {
            let want = 0.3 * 0.7 * (-0.3 * t).exp();
            assert!((pure.rate(t) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn bass_rate_is_derivative_of_cumulative() {
        let h = 1e-5;
        for p in table_bass() {
            for i in 1..4000 {
                let t = i as f64 * 0.01;
                let fd = (p.cumulative(t + h) - p.cumulative(t - h)) / (2.0 * h);
                assert!((fd - p.rate(t)).abs() <= 1e-7, "t={t} {p:?}");
            }
        }
    }

    #[test]
    fn bass_without_imitation_is_exponential_saturation() {
        let p = BassParams::new(0.1, 1e-10, 0.5).unwrap();
        for i in 0..100 {
            let t = i as f64 * 0.5;
            let want = 0.5 * (1.0 - (-0.1 * t).exp());
            assert!((p.cumulative(t) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn mean_price_examples() {
        let tr = PriceTrajectory::new(1.0, 0.0, 0.2).unwrap();
        assert!((mean_price(5.0, &tr).unwrap() - (-1f64).exp()).abs() < 1e-15);
        let mono = PriceTrajectory::new(0.4, 0.3, 0.0).unwrap();
        for t in [0.0, 3.0, 100.0] {
            assert_eq!(mean_price(t, &mono).unwrap(), 0.7);
        }
        let tr = PriceTrajectory::new(0.6, 0.25, 0.103).unwrap();
        assert_eq!(mean_price(0.0, &tr).unwrap(), 0.85);
    }

    #[test]
    fn log_offset_is_affine_with_slope_minus_a() {
        let tr = PriceTrajectory::new(0.8, 0.3, 0.103).unwrap();
        for i in 0..100 {
            let t = i as f64 * 0.3;
            let l = (tr.at(t) - 0.3).ln();
            assert!((l - (0.8f64.ln() - 0.103 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn price_function_examples() {
        let s = SalesSeries::new(1948.0, 1.0, vec![400.0, 380.0]).unwrap();
        assert_eq!(price_function(&s, 0.0).unwrap().values[0], 1.0);

        let p0 = 500.0;
        let s = SalesSeries::from_fn(1948.0, 0.5, 60, |t| p0 * (0.33 + 0.67 * (-0.2 * t).exp()))
            .unwrap();
        let mu = price_function(&s, 0.33).unwrap();
        for (i, v) in mu.values.iter().enumerate() {
            let t = i as f64 * 0.5;
            assert!((v - 0.67 * (-0.2 * t).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn price_function_rejects_floor_hits() {
        let s = SalesSeries::new(0.0, 1.0, vec![300.0, 99.0, 99.0]).unwrap();
        assert!(matches!(
            price_function(&s, 0.33),
            Err(PlcError::DegenerateSeries(_))
        ));
        let flat = SalesSeries::new(0.0, 1.0, vec![99.0; 4]).unwrap();
        assert!(price_function(&flat, 1.0).is_err());
        let bad = SalesSeries::new(0.0, 1.0, vec![10.0, -1.0]).unwrap();
        assert!(matches!(
            price_function(&bad, 0.0),
            Err(PlcError::InvalidInput(_))
        ));
    }

    #[test]
    fn gompertz_values() {
        let g = GompertzParams::new(0.77, 8.5, 0.2, 0.0).unwrap();
        let v0 = gompertz_cumulative(0.0, &g).unwrap();
        assert!((v0 - 1.566_706_441_381_96e-4).abs() < 1e-15, "{v0}");
        assert!((g.cumulative(500.0) - 0.77).abs() < 1e-15);
        assert!(gompertz_rate(500.0, &g).unwrap() < 1e-80);
        let oracle = grid_argmax(|t| g.rate(t), 0.0, 20.0, 2_000_000);
        assert!((oracle - 8.5f64.ln() / 0.4).abs() < 2e-5);
        assert!((oracle - 5.35).abs() < 0.01);
    }

    #[test]
    fn gompertz_without_price_decline_is_static() {
        let g = GompertzParams::new(0.5, 3.0, 0.0, 0.0).unwrap();
        for t in [0.0, 4.0, 40.0] {
            assert_eq!(g.rate(t), 0.0);
        }
    }

    #[test]
    fn gompertz_rate_matches_finite_difference() {
        let g = GompertzParams::new(0.97, 27.0, 0.103, 0.0).unwrap();
        let h = 1e-5;
        for i in 1..5000 {
            let t = i as f64 * 0.01;
            let fd = (g.cumulative(t + h) - g.cumulative(t - h)) / (2.0 * h);
            assert!((fd - g.rate(t)).abs() < 1e-7);
        }
    }

    #[test]
    fn gompertz_monotone_and_bounded() {
        let g = GompertzParams::new(0.77, 8.5, 0.2, 0.0).unwrap();
        let mut prev = -1.0;
        for i in 0..4000 {
            let v = g.cumulative(i as f64 * 0.01);
            assert!(v > prev && v <= 0.77);
            prev = v;
        }
    }

    #[test]
    fn gompertz_consistency_under_exact_linkage() {
        let mv = MarketVolumeParams::normalized(0.1, 0.0, 1.0).unwrap();
        let tr = PriceTrajectory::new(2.0, 0.0, 0.2).unwrap();
        let g = GompertzParams::linked(&mv, &tr).unwrap();
        assert!((g.shape - 2.0).abs() < 1e-15);
        let grid: Vec<f64> = (0..=5000).map(|i| i as f64 * 0.01).collect();
        assert!(gompertz_consistency(&g, &mv, &tr, &grid).unwrap() <= 1e-10);

        let launch_at_mu_m = PriceTrajectory::new(0.0, 0.0, 0.2).unwrap();
        let g0 = GompertzParams::linked(&mv, &launch_at_mu_m).unwrap();
        assert_eq!(
            gompertz_consistency(&g0, &mv, &launch_at_mu_m, &grid).unwrap(),
            0.0
        );
        assert!(grid.iter().all(|&t| g0.rate(t) == 0.0));

        let frozen = PriceTrajectory::new(2.0, 0.0, 0.0).unwrap();
        let gf = GompertzParams::linked(&mv, &frozen).unwrap();
        assert!(gompertz_consistency(&gf, &mv, &frozen, &grid).unwrap() < 1e-15);

        let mislinked = GompertzParams { shape: 2.5, ..g };
        assert!(gompertz_consistency(&mislinked, &mv, &tr, &grid).unwrap() > 1e-3);
    }

    #[test]
    fn pool_normalization() {
        let g = GompertzParams::new(0.77, 8.5, 0.2, 0.0).unwrap();
        assert!(check_pools(&BW, &g, Normalization::MarketPotential).is_err());
        assert!(check_pools(&BW, &g, Normalization::Households { n_max: 0.95 }).is_ok());
    }
}
