use plc_core::competition::{
    decline_rate, gaussian_brands, mean_price_ode, price_histogram_step, run_competition,
    CompetitionConfig, HistogramContext, MarketState, MicroAggregate, PriceHistogram,
    SpreadControl,
};
use plc_core::market::MarketVolumeParams;

const VARIANCES: [f64; 3] = [1e-4, 4e-4, 1e-3];

fn mv() -> MarketVolumeParams {
    MarketVolumeParams::normalized(0.1, 1.0, 1.0).unwrap()
}

/// Exact `-(d<mu>/dtau) / (<mu> - mu_m)` for a Gaussian price distribution
/// `N(mu_m + d, s^2)` under the Gaussian volume law, from Stein's identity
/// `Cov(f, mu) = Var E[f']`.
fn gaussian_rate(f: f64, mv: &MarketVolumeParams, d: f64, s2: f64) -> f64 {
    let w2 = mv.width * mv.width;
    f * mv.lower_share() * s2 * mv.width * (-d * d / (2.0 * (w2 + s2))).exp() / (w2 + s2).powf(1.5)
}

#[test]
fn histogram_decline_rate_is_linear_in_variance() {
    let mv = mv();
    let ctx = HistogramContext::selection_only(1.0);
    let d = 0.1;
    let dtau = 1e-3;
    let mut rates = Vec::new();
    for var in VARIANCES {
        let h = PriceHistogram::gaussian(0.5, 1.7, 4000, 1.0 + d, var.sqrt()).unwrap();
        let next = price_histogram_step(&h, &mv, &ctx, dtau).unwrap();
        let excess = 0.5 * (h.mean() + next.mean()) - 1.0;
        let rate = -(next.mean() - h.mean()) / dtau / excess;
        let want = gaussian_rate(1.0, &mv, h.mean() - 1.0, h.variance());
        assert!(
            ((rate - want) / want).abs() < 1e-2,
            "Var={var}: {rate} vs {want}"
        );
        rates.push((h.variance(), rate));
    }
    let slope = rates.iter().map(|(v, r)| v * r).sum::<f64>()
        / rates.iter().map(|(v, _)| v * v).sum::<f64>();
    for (v, r) in &rates {
        assert!(((r - slope * v) / (slope * v)).abs() < 0.05, "{rates:?}");
    }
    let a16 = mv.lower_share() / (mv.width * mv.width);
    assert!(((slope - a16) / a16).abs() < 0.05, "slope {slope} vs {a16}");
}

#[test]
fn histogram_near_natural_price_follows_exponential_decline() {
    let mv = mv();
    let var = 1e-3;
    let mu0 = 0.1;
    let ctx = HistogramContext::variance_holding(1.0, &mv, var);
    let mut h = PriceHistogram::gaussian(0.8, 1.4, 600, 1.0 + mu0, var.sqrt()).unwrap();
    let a = decline_rate(
        &mv,
        &MicroAggregate {
            epsilon: 1.0,
            fitness_scale: 1.0,
            variance: var,
        },
    )
    .unwrap();
    let steps = 8000;
    let dtau = 1.0 / a / steps as f64;
    let start = h.mean();
    for i in 1..=steps {
        h = price_histogram_step(&h, &mv, &ctx, dtau).unwrap();
        let t = i as f64 * dtau;
        let oracle = (start - 1.0) * (-a * t).exp() + 1.0;
        let err = ((h.mean() - 1.0) - (oracle - 1.0)).abs() / (oracle - 1.0);
        assert!(err < 0.02, "step {i}: excess off by {err}");
    }
    assert!(
        ((h.variance() - var) / var).abs() < 0.05,
        "variance drifted to {}",
        h.variance()
    );
}

/// Replicator run from `<mu> = 1.1` with the mean price recorded on
/// `t = epsilon tau` over one e-folding of the `tau`-clock rate.
fn slow_clock_run(epsilon: f64) -> (Vec<(f64, f64)>, f64, f64) {
    let mv = mv();
    let var = 1e-3;
    let brands = gaussian_brands(50, 1.1, var, 1.0, 1.0, 1.0).unwrap();
    let probe = MarketState {
        brands: brands.clone(),
        consumer_pool: 0.0,
        repurchase_rate: 1.0,
        volume: mv,
        clock: 0.0,
        epsilon,
    };
    let f = probe.psi0().unwrap();
    let tau_rate = decline_rate(
        &mv,
        &MicroAggregate {
            epsilon: 1.0,
            fitness_scale: f,
            variance: var,
        },
    )
    .unwrap();
    let steps = 2000;
    let run = run_competition(&CompetitionConfig {
        brands,
        volume: mv,
        repurchase_rate: 1.0,
        epsilon,
        dtau: 1.0 / tau_rate / steps as f64,
        steps,
        record_every: 50,
        jumps: None,
        spread: SpreadControl::Translate,
        track_demand: true,
        seed: 0,
    })
    .unwrap();
    (
        run.mean_price.iter().map(|p| (p.t, p.mean_price)).collect(),
        f,
        var,
    )
}

#[test]
fn replicator_on_fast_clock_matches_slow_clock_ode() {
    let mv = mv();
    let (traj, f, var) = slow_clock_run(1.0);
    let t: Vec<f64> = traj.iter().map(|p| p.0).collect();
    let micro = MicroAggregate {
        epsilon: 1.0,
        fitness_scale: f,
        variance: var,
    };
    let ode = mean_price_ode(traj[0].1, &mv, &micro, &t).unwrap();
    for ((t, mu), o) in traj.iter().zip(&ode) {
        assert!(((mu - o) / o).abs() < 1e-2, "t={t}: {mu} vs {o}");
    }
}

#[test]
fn slow_clock_rate_is_tau_rate_over_epsilon() {
    // With t = epsilon tau the decline seen on t runs at the tau-clock rate
    // divided by epsilon, which the closed-form rate reproduces when its
    // epsilon argument is 1/epsilon.
    let mv = mv();
    let epsilon = 0.5;
    let (traj, f, var) = slow_clock_run(epsilon);
    let t: Vec<f64> = traj.iter().map(|p| p.0).collect();
    let micro = MicroAggregate {
        epsilon: 1.0 / epsilon,
        fitness_scale: f,
        variance: var,
    };
    let ode = mean_price_ode(traj[0].1, &mv, &micro, &t).unwrap();
    for ((t, mu), o) in traj.iter().zip(&ode) {
        assert!(((mu - o) / o).abs() < 1e-2, "t={t}: {mu} vs {o}");
    }
}
