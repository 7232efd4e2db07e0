#![allow(dead_code)]

use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use plc_core::fit::PlcData;
use plc_core::scenario::PlcParams;
use plc_core::SalesSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Multiplicative Gaussian noise `x (1 + sd z)`, seeded.
pub fn with_noise(s: &SalesSeries, sd: f64, seed: u64) -> SalesSeries {
    if sd == 0.0 {
        return s.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sd).unwrap();
    let values = s
        .values
        .iter()
        .map(|v| v * (1.0 + n.sample(&mut rng)))
        .collect();
    SalesSeries::new(s.t0, s.dt, values).unwrap()
}

/// Synthetic observations of a scenario in fractions of the market
/// potential; prices and penetration only where a Gompertz part exists.
pub fn synthetic(p: &PlcParams, dt: f64, horizon: f64, noise: f64, seed: u64) -> PlcData {
    let c = p.assemble(dt, horizon).unwrap();
    let gomp = p.has_gompertz();
    PlcData {
        sales: with_noise(&c.total, noise, seed),
        penetration: gomp.then(|| with_noise(&c.penetration, noise, seed + 1)),
        prices: gomp.then(|| with_noise(&c.relative_price.scaled(100.0), noise, seed + 2)),
    }
}

pub fn rel_err(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(floor)
}

/// Criteria run one at a time so that their runtimes are not inflated by
/// each other.
static SERIAL: Mutex<()> = Mutex::new(());

/// Times a criterion and prints its verdict line.
pub struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    start: Instant,
    _serial: MutexGuard<'static, ()>,
}

impl Criterion {
    pub fn start(id: u32, title: &'static str, budget_secs: f64) -> Self {
        let serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
        Self {
            _serial: serial,
            id,
            title,
            budget: Duration::from_secs_f64(budget_secs),
            start: Instant::now(),
        }
    }

    /// Prints the verdict and panics with `failures` if any.
    pub fn finish(self, failures: Vec<String>) {
        let elapsed = self.start.elapsed();
        let mut failures = failures;
        if elapsed > self.budget {
            failures.push(format!(
                "runtime {elapsed:.2?} over budget {:.2?}",
                self.budget
            ));
        }
        let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] criterion {}: {} ({elapsed:.2?})",
            self.id, self.title
        );
        for f in &failures {
            println!("       {f}");
        }
        assert!(
            failures.is_empty(),
            "criterion {} failed: {}",
            self.id,
            failures.join("; ")
        );
    }
}
