use serde::{Deserialize, Serialize};

use crate::error::{check, Result};
use crate::market::MarketVolumeParams;
use crate::ode::rk4_on_grid;

/// Brand-level aggregates that set the long-run price decline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroAggregate {
    /// Timescale ratio `epsilon`.
    pub epsilon: f64,
    /// Sales-weighted `<eta gamma psi0>`.
    pub fitness_scale: f64,
    /// Price variance `Var(P_mu)`.
    pub variance: f64,
}

/// `a = epsilon <eta gamma psi0> m_L Var / Theta^2`.
pub fn decline_rate(mv: &MarketVolumeParams, micro: &MicroAggregate) -> Result<f64> {
    mv.validate()?;
    check(
        "epsilon",
        micro.epsilon,
        micro.epsilon > 0.0,
        "must be positive",
    )?;
    check("fitness_scale", micro.fitness_scale, true, "")?;
    check(
        "variance",
        micro.variance,
        micro.variance >= 0.0,
        "must be non-negative",
    )?;
    Ok(
        micro.epsilon * micro.fitness_scale * mv.lower_share() * micro.variance
            / (mv.width * mv.width),
    )
}

/// Integrates `d<mu>/dt = -a (<mu> - mu_m)` with RK4 and reports `<mu>` on `t_grid`.
pub fn mean_price_ode(
    mu_init: f64,
    mv: &MarketVolumeParams,
    micro: &MicroAggregate,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    check("mu_init", mu_init, true, "")?;
    let a = decline_rate(mv, micro)?;
    let mu_m = mv.natural_price;
    let substeps = rk4_substeps(a, t_grid);
    let out = rk4_on_grid(
        |_, y, dy| dy[0] = -a * (y[0] - mu_m),
        &[mu_init],
        t_grid,
        substeps,
    );
    Ok(out.into_iter().map(|y| y[0]).collect())
}

/// `theta = (f1 - f2) epsilon`, positive when brand 1 is fitter.
pub fn substitution_rate(f1: f64, f2: f64, epsilon: f64) -> f64 {
    (f1 - f2) * epsilon
}

/// Logistic share of the substituting product, `ln(m1/m2) = theta t + C_m`.
pub fn fisher_pry(t_grid: &[f64], theta: f64, c_m: f64) -> Vec<f64> {
    t_grid
        .iter()
        .map(|&t| 1.0 / (1.0 + (-(theta * t) - c_m).exp()))
        .collect()
}

/// RK4 integration of `dm1/dt = theta m1 (1 - m1)` started from the closed
/// form at `t_grid[0]`.
pub fn fisher_pry_ode(t_grid: &[f64], theta: f64, c_m: f64) -> Vec<f64> {
    let Some(&t0) = t_grid.first() else {
        return Vec::new();
    };
    let m0 = fisher_pry(&[t0], theta, c_m)[0];
    let substeps = rk4_substeps(theta.abs(), t_grid);
    rk4_on_grid(
        |_, y, dy| dy[0] = theta * y[0] * (1.0 - y[0]),
        &[m0],
        t_grid,
        substeps,
    )
    .into_iter()
    .map(|y| y[0])
    .collect()
}

/// Substeps so that `rate * h <= 0.01` on the widest grid interval.
fn rk4_substeps(rate: f64, grid: &[f64]) -> usize {
    let widest = grid
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    ((rate * widest / 0.01).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| hi * i as f64 / n as f64).collect()
    }

    #[test]
    fn no_variance_or_at_natural_price_is_constant() {
        let mv = MarketVolumeParams::normalized(0.1, 1.0, 0.5).unwrap();
        let micro = MicroAggregate {
            epsilon: 1.0,
            fitness_scale: 2.0,
            variance: 0.0,
        };
        assert!(mean_price_ode(1.7, &mv, &micro, &grid(10.0, 10))
            .unwrap()
            .iter()
            .all(|m| *m == 1.7));
        let micro = MicroAggregate {
            variance: 0.01,
            ..micro
        };
        assert!(mean_price_ode(1.0, &mv, &micro, &grid(10.0, 10))
            .unwrap()
            .iter()
            .all(|m| *m == 1.0));
    }

    #[test]
    fn colour_tv_decline_rate_matches_closed_form() {
        let mv = MarketVolumeParams::normalized(0.03, 0.4, 0.3).unwrap();
        let variance = 0.002;
        // Choose <eta gamma psi0> so that a = 0.103.
        let scale = 0.103 * mv.width * mv.width / (mv.lower_share() * variance);
        let micro = MicroAggregate {
            epsilon: 1.0,
            fitness_scale: scale,
            variance,
        };
        assert!((decline_rate(&mv, &micro).unwrap() - 0.103).abs() < 1e-15);
        let t = grid(40.0, 400);
        let mu = mean_price_ode(1.4, &mv, &micro, &t).unwrap();
        for (ti, m) in t.iter().zip(&mu) {
            let exact = 1.0 * (-0.103 * ti).exp() + 0.4;
            assert!((m - exact).abs() < 1e-9, "t={ti}");
        }
    }

    #[test]
    fn fisher_pry_examples() {
        assert!(fisher_pry(&[0.0, 5.0, 50.0], 0.0, 0.3)
            .windows(2)
            .all(|w| w[0] == w[1]));
        assert_eq!(fisher_pry(&[0.0], 1.7, 0.0)[0], 0.5);
        let m = fisher_pry(&[9f64.ln() / 0.5], 0.5, (1.0f64 / 9.0).ln())[0];
        assert!((m - 0.5).abs() < 1e-14);
        assert!((substitution_rate(0.3, 0.1, 2.0) - 0.4).abs() < 1e-15);
        assert!(substitution_rate(0.1, 0.3, 1.0) < 0.0);
    }

    #[test]
    fn fisher_pry_ode_agrees_with_closed_form() {
        let t = grid(20.0, 200);
        for theta in [0.1, 0.5, 1.0, -0.4] {
            let closed = fisher_pry(&t, theta, -1.3);
            let ode = fisher_pry_ode(&t, theta, -1.3);
            let sup = closed
                .iter()
                .zip(&ode)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(sup <= 1e-8, "theta {theta}: {sup}");
        }
        assert!(fisher_pry_ode(&[], 1.0, 0.0).is_empty());
    }
}
