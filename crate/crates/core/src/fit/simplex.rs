//! Bounded Nelder-Mead simplex with restarts and ordered multi-start.
//!
//! Parameters are optimised in internal coordinates: log scale for
//! parameters whose bound is marked `log`, linear otherwise. Trial points are
//! clamped into the box before evaluation.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
    /// Search in `ln x`; requires `lo > 0`.
    pub log: bool,
}

impl Bound {
    pub const fn linear(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: false }
    }

    pub const fn log(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: true }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    fn internal_range(&self) -> (f64, f64) {
        if self.log {
            (self.lo.ln(), self.hi.ln())
        } else {
            (self.lo, self.hi)
        }
    }

    fn to_internal(self, x: f64) -> f64 {
        let x = self.clamp(x);
        if self.log {
            x.ln()
        } else {
            x
        }
    }

    fn to_external(self, u: f64) -> f64 {
        let (lo, hi) = self.internal_range();
        let u = u.clamp(lo, hi);
        if self.log {
            self.clamp(u.exp())
        } else {
            u
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Evaluation budget per start, restarts included.
    pub max_evals: usize,
    /// Relative spread of vertex losses at convergence.
    pub f_tol: f64,
    /// Absolute floor added to the loss spread criterion.
    pub f_abs: f64,
    /// Simplex diameter at convergence, as a fraction of each internal range.
    pub x_tol: f64,
    /// Initial edge length as a fraction of each internal range.
    pub initial_step: f64,
    /// Fresh simplices built around the best point after convergence.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            f_tol: 1e-12,
            f_abs: 1e-24,
            x_tol: 1e-10,
            initial_step: 0.1,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexResult {
    /// Minimiser in external coordinates.
    pub x: Vec<f64>,
    pub f: f64,
    pub n_evals: usize,
    /// Stopped on tolerance rather than budget.
    pub converged: bool,
}

/// Minimises `f` inside `bounds` starting from `x0`.
pub fn minimize<F>(f: &F, x0: &[f64], bounds: &[Bound], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    assert_eq!(x0.len(), bounds.len(), "one bound per parameter");
    let n = x0.len();
    let evals = Cell::new(0usize);
    let ext = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(bounds)
            .map(|(v, b)| b.to_external(*v))
            .collect()
    };
    let eval = |u: &[f64]| -> f64 {
        evals.set(evals.get() + 1);
        let v = f(&ext(u));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let ranges: Vec<f64> = bounds
        .iter()
        .map(|b| {
            let (lo, hi) = b.internal_range();
            (hi - lo).max(f64::MIN_POSITIVE)
        })
        .collect();

    let mut best_u: Vec<f64> = x0
        .iter()
        .zip(bounds)
        .map(|(x, b)| b.to_internal(*x))
        .collect();
    let mut best_f = eval(&best_u);
    if n == 0 {
        return SimplexResult {
            x: Vec::new(),
            f: best_f,
            n_evals: evals.get(),
            converged: true,
        };
    }
    let mut converged = false;
    for round in 0..=opts.restarts {
        let step = opts.initial_step / (1u32 << round.min(20)) as f64;
        let run = Run {
            eval: &eval,
            bounds,
            ranges: &ranges,
            opts,
            used: &|| evals.get(),
        };
        let (u, fu, ok) = run.nelder_mead(&best_u, best_f, step);
        let improved = fu < best_f - (opts.f_tol * best_f.abs() + opts.f_abs);
        if fu <= best_f {
            best_u = u;
            best_f = fu;
        }
        converged = ok;
        if !ok || evals.get() >= opts.max_evals || (round > 0 && !improved) {
            break;
        }
    }
    SimplexResult {
        x: ext(&best_u),
        f: best_f,
        n_evals: evals.get(),
        converged,
    }
}

struct Run<'a> {
    eval: &'a dyn Fn(&[f64]) -> f64,
    bounds: &'a [Bound],
    ranges: &'a [f64],
    opts: &'a SimplexOptions,
    used: &'a dyn Fn() -> usize,
}

impl Run<'_> {
    fn nelder_mead(&self, start: &[f64], f_start: f64, step: f64) -> (Vec<f64>, f64, bool) {
        let (eval, bounds, ranges, opts, used) =
            (self.eval, self.bounds, self.ranges, self.opts, self.used);
        let n = start.len();
        let clamp = |u: &mut [f64]| {
            for (v, b) in u.iter_mut().zip(bounds) {
                let (lo, hi) = b.internal_range();
                *v = v.clamp(lo, hi);
            }
        };
        let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
        let mut fs: Vec<f64> = vec![f_start];
        for i in 0..n {
            let mut p = start.to_vec();
            let (lo, hi) = bounds[i].internal_range();
            let h = step * ranges[i];
            p[i] = if p[i] + h <= hi {
                p[i] + h
            } else {
                (p[i] - h).max(lo)
            };
            fs.push(eval(&p));
            pts.push(p);
        }

        loop {
            // Stable sort keeps earlier vertices first on ties.
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            fs = order.iter().map(|&i| fs[i]).collect();

            let spread = fs[n] - fs[0];
            let size = pts[1..]
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(&pts[0])
                        .zip(ranges)
                        .map(|((a, b), r)| ((a - b) / r).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            let f_ok = spread <= opts.f_tol * fs[0].abs() + opts.f_abs;
            if (f_ok && size <= opts.x_tol)
                || size <= 1e-3 * opts.x_tol
                || (fs[0] == 0.0 && spread == 0.0)
            {
                return (pts[0].clone(), fs[0], true);
            }
            if used() >= opts.max_evals {
                return (pts[0].clone(), fs[0], false);
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = (0..n)
                    .map(|j| centroid[j] + t * (pts[n][j] - centroid[j]))
                    .collect();
                clamp(&mut p);
                p
            };

            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < fs[0] {
                let xe = along(-2.0);
                let fe = eval(&xe);
                if fe < fr {
                    pts[n] = xe;
                    fs[n] = fe;
                } else {
                    pts[n] = xr;
                    fs[n] = fr;
                }
                continue;
            }
            if fr < fs[n - 1] {
                pts[n] = xr;
                fs[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < fs[n] {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            if fc < fs[n].min(fr) {
                pts[n] = xc;
                fs[n] = fc;
                continue;
            }
            for i in 1..=n {
                let mut p: Vec<f64> = (0..n)
                    .map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]))
                    .collect();
                clamp(&mut p);
                fs[i] = eval(&p);
                pts[i] = p;
            }
        }
    }
}

/// Runs [`minimize`] from every start in parallel and returns the best
/// result, ties going to the earliest start, plus the total evaluations.
pub fn multi_start<F>(
    f: &F,
    starts: &[Vec<f64>],
    bounds: &[Bound],
    opts: &SimplexOptions,
) -> (SimplexResult, usize)
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    assert!(!starts.is_empty(), "need at least one start");
    let runs: Vec<SimplexResult> = starts
        .par_iter()
        .map(|s| minimize(f, s, bounds, opts))
        .collect();
    let total = runs.iter().map(|r| r.n_evals).sum();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.f < runs[best].f {
            best = i;
        }
    }
    (runs[best].clone(), total)
}

/// Cartesian product of per-parameter candidate values, first axis slowest.
pub fn lattice(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect()
    })
}
