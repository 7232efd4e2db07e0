use crate::error::{PlcError, Result};

use super::{check_stability, fitness_spread, weighted_mean, MarketState, MAX_HALVINGS};

/// Advances sales by `dy_i/dtau = (f_i - <f>) y_i` with fitnesses frozen at the
/// start of the step. Total sales are restored exactly after the update.
pub fn replicator_step(state: &MarketState, dtau: f64) -> Result<MarketState> {
    let yt = state.total_sales();
    if !(yt > 0.0) {
        return Err(PlcError::InvalidInput(
            "replicator step needs positive total sales".into(),
        ));
    }
    let psi0 = state.psi0()?;
    let f = state.fitnesses(psi0);
    let mut y: Vec<f64> = state.brands.iter().map(|b| b.sales).collect();
    check_stability(dtau, fitness_spread(&f, &y))?;

    let mut scratch = Scratch::new(y.len());
    advance(&f, &mut y, dtau, 0, &mut scratch)?;
    let sum: f64 = y.iter().sum();
    let scale = yt / sum;

    let mut next = state.clone();
    for (b, yi) in next.brands.iter_mut().zip(&y) {
        b.sales = yi * scale;
    }
    next.clock += dtau;
    Ok(next)
}

struct Scratch {
    k: Vec<f64>,
    mid: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            k: vec![0.0; n],
            mid: vec![0.0; n],
        }
    }
}

fn relative_growth(f: &[f64], y: &[f64], out: &mut [f64]) {
    let mean = weighted_mean(f, y).unwrap_or(0.0);
    for ((o, fi), yi) in out.iter_mut().zip(f).zip(y) {
        *o = (fi - mean) * yi;
    }
}

fn advance(f: &[f64], y: &mut [f64], h: f64, depth: u32, s: &mut Scratch) -> Result<()> {
    relative_growth(f, y, &mut s.k);
    for ((m, yi), ki) in s.mid.iter_mut().zip(y.iter()).zip(&s.k) {
        *m = yi + 0.5 * h * ki;
    }
    relative_growth(f, &s.mid, &mut s.k);
    if y.iter().zip(&s.k).all(|(yi, ki)| yi + h * ki >= 0.0) {
        for (yi, ki) in y.iter_mut().zip(&s.k) {
            *yi += h * ki;
        }
        return Ok(());
    }
    if depth >= MAX_HALVINGS {
        return Err(PlcError::StepSize(
            "sales undershoot persists after step halving".into(),
        ));
    }
    advance(f, y, 0.5 * h, depth + 1, s)?;
    advance(f, y, 0.5 * h, depth + 1, s)
}

/// Advances stocks and the consumer pool of the supply/demand model.
///
/// `dx_i/dtau = gamma_i y_i`, `dpsi/dtau = q v(<mu>) - y_t` with
/// `y_i = eta_i x_i psi v(mu_i)` recomputed from the new state.
pub fn micro_step(state: &MarketState, dtau: f64) -> Result<MarketState> {
    if state.brands.iter().any(|b| b.stock < 0.0) || state.consumer_pool < 0.0 {
        return Err(PlcError::InvalidInput(
            "stocks and pool must be non-negative".into(),
        ));
    }
    if !(dtau > 0.0) {
        return Err(PlcError::param("dtau", "must be positive"));
    }
    let n = state.brands.len();
    let reach: Vec<f64> = state
        .brands
        .iter()
        .map(|b| b.preference * state.volume.density(b.price))
        .collect();
    let gamma: Vec<f64> = state.brands.iter().map(|b| b.reproduction).collect();
    let prices: Vec<f64> = state.brands.iter().map(|b| b.price).collect();
    let q = state.repurchase_rate;
    let mv = state.volume;

    let rhs = |z: &[f64], dz: &mut [f64]| {
        let psi = z[n];
        let mut yt = 0.0;
        let mut weighted = 0.0;
        let mut reach_x = 0.0;
        let mut reach_px = 0.0;
        for i in 0..n {
            let rx = reach[i] * z[i];
            let y = rx * psi;
            dz[i] = gamma[i] * y;
            yt += y;
            weighted += y * prices[i];
            reach_x += rx;
            reach_px += rx * prices[i];
        }
        // With psi = 0 the sales weights vanish; fall back to their limit.
        let mean = if yt > 0.0 {
            weighted / yt
        } else if reach_x > 0.0 {
            reach_px / reach_x
        } else {
            prices[0]
        };
        dz[n] = q * mv.density(mean) - yt;
    };

    let mut z: Vec<f64> = state.brands.iter().map(|b| b.stock).collect();
    z.push(state.consumer_pool);
    micro_advance(&rhs, &mut z, dtau, 0)?;

    let psi = z[n];
    let mut next = state.clone();
    for (i, b) in next.brands.iter_mut().enumerate() {
        b.stock = z[i];
        b.sales = reach[i] * z[i] * psi;
    }
    next.consumer_pool = psi;
    next.clock += dtau;
    Ok(next)
}

fn micro_advance<F>(rhs: &F, z: &mut [f64], h: f64, depth: u32) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut trial = z.to_vec();
    crate::ode::midpoint_step(
        &|_, y: &[f64], dy: &mut [f64]| rhs(y, dy),
        0.0,
        &mut trial,
        h,
    );
    if trial.iter().all(|v| *v >= 0.0) {
        z.copy_from_slice(&trial);
        return Ok(());
    }
    if depth >= MAX_HALVINGS {
        return Err(PlcError::StepSize(
            "negative stock or pool after step halving".into(),
        ));
    }
    micro_advance(rhs, z, 0.5 * h, depth + 1)?;
    micro_advance(rhs, z, 0.5 * h, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::super::{BrandState, MarketState};
    use super::*;
    use crate::market::MarketVolumeParams;

    fn state(brands: Vec<BrandState>, q: f64) -> MarketState {
        MarketState {
            brands,
            consumer_pool: 0.0,
            repurchase_rate: q,
            volume: MarketVolumeParams::normalized(0.0, 1.0, 1.0).unwrap(),
            clock: 0.0,
            epsilon: 1.0,
        }
    }

    fn b(price: f64, eta: f64, gamma: f64, x: f64, y: f64) -> BrandState {
        BrandState {
            price,
            preference: eta,
            reproduction: gamma,
            stock: x,
            sales: y,
        }
    }

    #[test]
    fn equal_fitness_leaves_sales_unchanged() {
        let s = state(
            vec![b(1.2, 1.0, 0.1, 1.0, 0.3), b(1.2, 1.0, 0.1, 1.0, 0.7)],
            1.0,
        );
        let next = replicator_step(&s, 0.1).unwrap();
        for (a, c) in s.brands.iter().zip(&next.brands) {
            assert!((a.sales - c.sales).abs() < 1e-15);
        }
        assert!((next.clock - 0.1).abs() < 1e-15);
    }

    #[test]
    fn monopoly_unchanged() {
        let s = state(vec![b(1.7, 2.0, 0.4, 1.0, 0.9)], 1.0);
        let next = replicator_step(&s, 0.2).unwrap();
        assert_eq!(next.brands[0].sales, 0.9);
    }

    #[test]
    fn two_brand_logistic_half_time() {
        // psi0 = q / sum eta x = 1, so f1 - f2 = 0.6 - 0.1.
        let mut s = state(
            vec![b(1.0, 1.0, 0.6, 0.5, 0.1), b(1.0, 1.0, 0.1, 0.5, 0.9)],
            1.0,
        );
        let tau = 9f64.ln() / 0.5;
        let n = 4000;
        for _ in 0..n {
            s = replicator_step(&s, tau / n as f64).unwrap();
        }
        let m1 = s.shares()[0];
        assert!((m1 - 0.5).abs() < 1e-6, "{m1}");
    }

    #[test]
    fn rejects_large_steps_and_zero_sales() {
        let s = state(
            vec![b(1.0, 1.0, 0.6, 0.5, 0.1), b(1.0, 1.0, 0.1, 0.5, 0.9)],
            1.0,
        );
        assert!(matches!(
            replicator_step(&s, 1.0),
            Err(PlcError::StepSize(_))
        ));
        let z = state(vec![b(1.0, 1.0, 0.6, 0.5, 0.0)], 1.0);
        assert!(replicator_step(&z, 0.01).is_err());
    }

    #[test]
    fn micro_fixed_point_without_reproduction() {
        // y_t = psi * sum eta x v = q v(<mu>) with all brands at mu_m.
        let mut s = state(
            vec![b(1.0, 1.0, 0.0, 2.0, 0.0), b(0.8, 2.0, 0.0, 1.0, 0.0)],
            2.0,
        );
        s.consumer_pool = 0.5;
        let next = micro_step(&s, 0.1).unwrap();
        assert!((next.consumer_pool - 0.5).abs() < 1e-15);
        assert_eq!(next.brands[0].stock, 2.0);
        assert!((next.total_sales() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn micro_empty_pool_sells_nothing() {
        let s = state(
            vec![b(1.0, 1.0, 0.3, 2.0, 0.0), b(1.5, 1.0, 0.3, 1.0, 0.0)],
            0.0,
        );
        let next = micro_step(&s, 0.1).unwrap();
        assert_eq!(next.total_sales(), 0.0);
        assert_eq!(next.brands[0].stock, 2.0);
        assert_eq!(next.brands[1].stock, 1.0);
    }

    #[test]
    fn micro_matches_replicator_shares() {
        // Fast pool relaxation keeps psi at its sales-constraint value.
        let brands = vec![
            b(1.0, 100.0, 0.001, 1.0, 0.0),
            b(2.0, 100.0, 0.001, 1.0, 0.0),
        ];
        let mut micro = state(brands, 100.0);
        micro.consumer_pool = micro.psi0().unwrap();
        for br in micro.brands.iter_mut() {
            br.sales =
                br.preference * br.stock * micro.consumer_pool * micro.volume.density(br.price);
        }
        let mut rep = micro.clone();
        let dtau = 0.001;
        let start = micro.shares()[0];
        let mut worst: f64 = 0.0;
        let mut prev = start;
        for _ in 0..1000 {
            micro = micro_step(&micro, dtau).unwrap();
            rep = replicator_step(&rep, dtau).unwrap();
            let m = micro.shares()[0];
            assert!(m > prev);
            prev = m;
            worst = worst.max((m - rep.shares()[0]).abs());
        }
        assert!(prev - start > 5e-3, "share moved {}", prev - start);
        assert!(worst < 1e-3, "max share gap {worst}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conserves_sales_and_favours_fittest(
                prices in proptest::collection::vec(0.5f64..3.0, 2..8),
                sales in proptest::collection::vec(0.01f64..1.0, 8),
                gammas in proptest::collection::vec(0.01f64..0.5, 8),
            ) {
                let brands: Vec<BrandState> = prices
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| b(p, 1.0, gammas[i], 1.0, sales[i]))
                    .collect();
                let mut s = state(brands, 1.0);
                let yt = s.total_sales();
                let f = s.fitnesses(s.psi0().unwrap());
                let best = (0..f.len()).max_by(|&i, &j| f[i].total_cmp(&f[j])).unwrap();
                let mut share = s.shares()[best];
                for _ in 0..50 {
                    s = replicator_step(&s, 0.05).unwrap();
                    prop_assert!(((s.total_sales() - yt) / yt).abs() < 1e-12);
                    prop_assert!(s.brands.iter().all(|b| b.sales >= 0.0));
                    let shares = s.shares();
                    prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    prop_assert!(shares[best] >= share - 1e-15);
                    share = shares[best];
                }
            }
        }
    }
}
