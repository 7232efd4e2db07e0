use std::collections::BTreeMap;

use crate::error::{PlcError, Result};
use crate::scenario::names;
use crate::series::SalesSeries;

use super::FitResult;

/// Candidate floors `k / 1000`, `k = 0..1000`.
pub fn default_floor_grid() -> Vec<f64> {
    (0..1000).map(|k| k as f64 / 1000.0).collect()
}

struct Line {
    slope: f64,
    ssr: f64,
}

/// Least-squares line through `ln(p - r p0)` against model time.
fn log_line(prices: &SalesSeries, ratio: f64) -> Option<Line> {
    let p0 = prices.values[0];
    let floor = ratio * p0;
    let n = prices.len() as f64;
    let mut ys = Vec::with_capacity(prices.len());
    for p in &prices.values {
        let d = p - floor;
        if !(d > 0.0) {
            return None;
        }
        ys.push(d.ln());
    }
    let ts: Vec<f64> = (0..prices.len()).map(|i| i as f64 * prices.dt).collect();
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        sxy += (t - tm) * (y - ym);
        sxx += (t - tm) * (t - tm);
    }
    let slope = sxy / sxx;
    let ssr = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| {
            let r = y - ym - slope * (t - tm);
            r * r
        })
        .sum();
    Some(Line { slope, ssr })
}

/// Estimates `(p_m/p0, a)` from a price series: for each candidate floor the
/// log of the price excess is regressed on time, and the most linear
/// candidate is refined by golden-section search between its neighbours.
pub fn fit_price_decline(prices: &SalesSeries, floor_grid: &[f64]) -> Result<FitResult> {
    if prices.len() < 4 {
        return Err(PlcError::InvalidInput(format!(
            "price fit needs at least 4 samples, got {}",
            prices.len()
        )));
    }
    if let Some(p) = prices
        .values
        .iter()
        .find(|p| !(**p > 0.0) || !p.is_finite())
    {
        return Err(PlcError::InvalidInput(format!(
            "prices must be positive, got {p}"
        )));
    }
    if floor_grid.is_empty() || floor_grid.iter().any(|r| !(0.0..1.0).contains(r)) {
        return Err(PlcError::param(
            "floor_grid",
            "candidates must lie in [0, 1)",
        ));
    }
    let p0 = prices.values[0];
    let mut params = BTreeMap::new();
    params.insert(names::T0.to_string(), prices.t0);

    if prices.values.iter().all(|p| (p - p0).abs() <= 1e-12 * p0) {
        params.insert(names::FLOOR_RATIO.to_string(), 0.0);
        params.insert(names::DECLINE.to_string(), 0.0);
        return Ok(FitResult {
            parameters: params,
            loss: 0.0,
            n_evals: 0,
            converged: true,
            stages: Vec::new(),
            notes: vec!["flat price series: no decline, a = 0".into()],
        });
    }

    let mut evals = 0usize;
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in floor_grid.iter().enumerate() {
        evals += 1;
        if let Some(line) = log_line(prices, *r) {
            if best.is_none_or(|(_, s)| line.ssr < s) {
                best = Some((i, line.ssr));
            }
        }
    }
    let Some((idx, _)) = best else {
        return Err(PlcError::Infeasible(
            "every candidate floor reaches a sampled price".into(),
        ));
    };

    let pmin = prices.values.iter().copied().fold(f64::INFINITY, f64::min);
    let r_cap = pmin / p0 * (1.0 - 1e-12);
    let lo = if idx > 0 {
        floor_grid[idx - 1]
    } else {
        floor_grid[idx]
    };
    let hi = floor_grid
        .get(idx + 1)
        .copied()
        .unwrap_or(floor_grid[idx])
        .min(r_cap);
    let objective = |r: f64| log_line(prices, r).map_or(f64::INFINITY, |l| l.ssr);
    let mut ratio = floor_grid[idx];
    let mut best_ssr = objective(ratio);
    if hi > lo {
        let (r, s, n) = golden(&objective, lo, hi, 1e-14);
        evals += n;
        if s < best_ssr {
            ratio = r;
            best_ssr = s;
        }
    }
    let line = log_line(prices, ratio).expect("refined floor stays feasible");
    params.insert(names::FLOOR_RATIO.to_string(), ratio);
    params.insert(names::DECLINE.to_string(), -line.slope);
    let mut notes = Vec::new();
    if line.slope > 0.0 {
        notes.push("prices rise on average; the decline rate is negative".into());
    }
    Ok(FitResult {
        parameters: params,
        loss: best_ssr,
        n_evals: evals,
        converged: true,
        stages: Vec::new(),
        notes,
    })
}

/// Least-squares fit of the price levels `c1 + c2 e^{-a t}` for fixed `a`,
/// with `c1 >= 0`. Returns `(c1, c2, ssr)`.
fn project_levels(prices: &SalesSeries, a: f64) -> Option<(f64, f64, f64)> {
    let e: Vec<f64> = (0..prices.len())
        .map(|i| (-a * i as f64 * prices.dt).exp())
        .collect();
    let p = &prices.values;
    let n = p.len() as f64;
    let (se, see) = (e.iter().sum::<f64>(), e.iter().map(|x| x * x).sum::<f64>());
    let (sp, sep) = (
        p.iter().sum::<f64>(),
        e.iter().zip(p).map(|(x, y)| x * y).sum::<f64>(),
    );
    let det = n * see - se * se;
    let (mut c1, mut c2) = if det.abs() > 1e-300 {
        ((see * sp - se * sep) / det, (n * sep - se * sp) / det)
    } else {
        (0.0, sep / see)
    };
    if c1 < 0.0 {
        c1 = 0.0;
        c2 = sep / see;
    }
    if !(c2 > 0.0) {
        return None;
    }
    let ssr = e
        .iter()
        .zip(p)
        .map(|(x, y)| (c1 + c2 * x - y).powi(2))
        .sum();
    Some((c1, c2, ssr))
}

/// Least-squares fit of the price levels, which stays well conditioned
/// once the excess over the floor is within the noise and the log-linear
/// estimate degrades. Scans `a` on a log grid over `[1e-4, 5]` and refines
/// the best cell by golden section.
///
/// Returns `(p_m/p0, a, ssr, evals)` with `p0` the fitted launch price.
pub(crate) fn refine_price_levels(prices: &SalesSeries) -> Option<(f64, f64, f64, usize)> {
    if prices.len() < 4 {
        return None;
    }
    const CELLS: usize = 400;
    let (lo, hi) = (1e-4f64.ln(), 5f64.ln());
    let grid: Vec<f64> = (0..=CELLS)
        .map(|i| lo + (hi - lo) * i as f64 / CELLS as f64)
        .collect();
    let objective = |ln_a: f64| project_levels(prices, ln_a.exp()).map_or(f64::INFINITY, |l| l.2);
    let (best, _) =
        grid.iter()
            .map(|x| objective(*x))
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |b, (i, f)| if f < b.1 { (i, f) } else { b },
            );
    let (ln_a, ssr, n) = golden(
        &objective,
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(CELLS)],
        1e-12,
    );
    let a = ln_a.exp();
    let (c1, c2, _) = project_levels(prices, a)?;
    Some((c1 / (c1 + c2), a, ssr, grid.len() + n))
}

/// Golden-section minimum of `f` on `[lo, hi]`; returns `(x, f(x), evals)`.
fn golden(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64, usize) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut n = 2;
    while hi - lo > tol && n < 200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        n += 1;
    }
    let ends = [(lo, f(lo)), (hi, f(hi)), (x1, f1), (x2, f2)];
    let best = ends
        .iter()
        .copied()
        .fold((lo, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    (best.0, best.1, n + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64) -> SalesSeries {
        SalesSeries::from_fn(1948.0, 0.5, 61, f).unwrap()
    }

    #[test]
    fn recovers_floor_and_rate() {
        let s = series(|t| 400.0 * (0.33 + 0.67 * (-0.2 * t).exp()));
        let r = fit_price_decline(&s, &default_floor_grid()).unwrap();
        assert!((r.get("a").unwrap() - 0.2).abs() < 2e-3);
        assert!((r.get("pm_over_p0").unwrap() - 0.33).abs() < 3.3e-3);
        assert_eq!(r.get("t0"), Some(1948.0));
    }

    #[test]
    fn pure_exponential_slope_is_exact() {
        let s = series(|t| 7.0 * (-0.103 * t).exp());
        let r = fit_price_decline(&s, &default_floor_grid()).unwrap();
        assert!((r.get("a").unwrap() - 0.103).abs() < 1e-10);
        assert!(r.get("pm_over_p0").unwrap() < 1e-9);
    }

    #[test]
    fn flat_series_is_flagged() {
        let s = series(|_| 3.0);
        let r = fit_price_decline(&s, &default_floor_grid()).unwrap();
        assert_eq!(r.get("a"), Some(0.0));
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn errors() {
        let short = SalesSeries::new(0.0, 1.0, vec![3.0, 2.0, 1.0]).unwrap();
        assert!(fit_price_decline(&short, &default_floor_grid()).is_err());
        // Last price below every candidate floor.
        let s = SalesSeries::new(0.0, 1.0, vec![10.0, 9.0, 8.0, 0.0001]).unwrap();
        assert!(matches!(
            fit_price_decline(&s, &[0.5, 0.6]),
            Err(PlcError::Infeasible(_))
        ));
        let neg = SalesSeries::new(0.0, 1.0, vec![10.0, 9.0, -8.0, 1.0]).unwrap();
        assert!(matches!(
            fit_price_decline(&neg, &[0.0]),
            Err(PlcError::InvalidInput(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn invariant_under_price_rescaling(
                c in 0.01f64..1000.0, floor in 0.0f64..0.8, a in 0.02f64..0.5, noise in 0.0f64..0.02,
            ) {
                let s = series(|t| (floor + (1.0 - floor) * (-a * t).exp()) * (1.0 + noise * (3.0 * t).sin()));
                let r1 = fit_price_decline(&s, &default_floor_grid()).unwrap();
                let r2 = fit_price_decline(&s.scaled(c), &default_floor_grid()).unwrap();
                let (a1, a2) = (r1.get("a").unwrap(), r2.get("a").unwrap());
                let (f1, f2) = (r1.get("pm_over_p0").unwrap(), r2.get("pm_over_p0").unwrap());
                prop_assert!((a1 - a2).abs() <= 1e-6 * a1.abs().max(1e-3), "{a1} {a2}");
                prop_assert!((f1 - f2).abs() <= 1e-6, "{f1} {f2}");
            }
        }
    }
}
