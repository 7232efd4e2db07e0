use serde::{Deserialize, Serialize};

use crate::error::{check, PlcError, Result};
use crate::market::MarketVolumeParams;

use super::{check_stability, fitness_spread, MAX_HALVINGS};

/// Sales-weighted price distribution on fixed bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceHistogram {
    pub bin_edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl PriceHistogram {
    pub fn new(bin_edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        let h = Self { bin_edges, masses };
        h.validate()?;
        Ok(h)
    }

    /// Normalized Gaussian masses on `n` equal bins over `[lo, hi]`,
    /// integrated exactly per bin.
    pub fn gaussian(lo: f64, hi: f64, n: usize, mean: f64, sd: f64) -> Result<Self> {
        check("hi", hi, hi > lo, "must exceed lo")?;
        check("sd", sd, sd > 0.0, "must be positive")?;
        if n == 0 {
            return Err(PlcError::param("n", "need at least one bin"));
        }
        let w = (hi - lo) / n as f64;
        let edges: Vec<f64> = (0..=n).map(|i| lo + i as f64 * w).collect();
        let cdf = |x: f64| {
            0.5 * statrs::function::erf::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
        };
        let raw: Vec<f64> = edges.windows(2).map(|e| cdf(e[1]) - cdf(e[0])).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(PlcError::param("sd", "no mass inside the bin range"));
        }
        Self::new(edges, raw.iter().map(|m| m / total).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.masses.is_empty() || self.bin_edges.len() != self.masses.len() + 1 {
            return Err(PlcError::InvalidInput(format!(
                "histogram needs n + 1 edges for n masses, got {} and {}",
                self.bin_edges.len(),
                self.masses.len()
            )));
        }
        if self.bin_edges.windows(2).any(|e| !(e[1] > e[0])) {
            return Err(PlcError::InvalidInput(
                "bin edges must increase strictly".into(),
            ));
        }
        if self.masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(PlcError::InvalidInput("masses must be non-negative".into()));
        }
        let total: f64 = self.masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(PlcError::InvalidInput(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| 0.5 * (e[0] + e[1]))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.centers()
            .iter()
            .zip(&self.masses)
            .map(|(c, m)| c * m)
            .sum::<f64>()
            / self.total_mass()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.centers()
            .iter()
            .zip(&self.masses)
            .map(|(c, m)| m * (c - mean).powi(2))
            .sum::<f64>()
            / self.total_mass()
    }
}

/// Fitness model for the histogram: `f(mu) = scale * v(mu)` plus optional
/// price diffusion `D d^2P/dmu^2` with zero flux at the outer edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramContext {
    /// `<eta gamma psi0>`.
    pub fitness_scale: f64,
    #[serde(default)]
    pub diffusion: f64,
}

impl HistogramContext {
    pub fn selection_only(fitness_scale: f64) -> Self {
        Self {
            fitness_scale,
            diffusion: 0.0,
        }
    }

    /// Diffusion that balances the variance loss of a Gaussian price
    /// distribution under the quadratic volume law: `D = F m_L Var^2 / (2 Theta^2)`.
    pub fn variance_holding(fitness_scale: f64, mv: &MarketVolumeParams, variance: f64) -> Self {
        Self {
            fitness_scale,
            diffusion: fitness_scale * mv.lower_share() * variance * variance
                / (2.0 * mv.width * mv.width),
        }
    }
}

/// Advances `dP/dtau = (f(mu) - <f>) P` (+ diffusion). `<f>` is recomputed from
/// the masses at every stage, so the update conserves mass without rescaling.
pub fn price_histogram_step(
    h: &PriceHistogram,
    mv: &MarketVolumeParams,
    ctx: &HistogramContext,
    dtau: f64,
) -> Result<PriceHistogram> {
    h.validate()?;
    check("fitness_scale", ctx.fitness_scale, true, "")?;
    check(
        "diffusion",
        ctx.diffusion,
        ctx.diffusion >= 0.0,
        "must be non-negative",
    )?;
    let centers = h.centers();
    let f: Vec<f64> = centers
        .iter()
        .map(|&c| ctx.fitness_scale * mv.density(c))
        .collect();
    check_stability(dtau, fitness_spread(&f, &h.masses))?;

    let widths: Vec<f64> = h.bin_edges.windows(2).map(|e| e[1] - e[0]).collect();
    // Flux conductance between neighbouring bins, in density units.
    let cond: Vec<f64> = centers
        .windows(2)
        .map(|c| ctx.diffusion / (c[1] - c[0]))
        .collect();
    if ctx.diffusion > 0.0 {
        let worst = (0..widths.len())
            .map(|i| {
                let left = if i > 0 { cond[i - 1] } else { 0.0 };
                let right = if i < cond.len() { cond[i] } else { 0.0 };
                (left + right) / widths[i]
            })
            .fold(0.0, f64::max);
        if dtau * worst >= 0.5 {
            return Err(PlcError::StepSize(format!(
                "diffusion number {} exceeds 0.5",
                dtau * worst
            )));
        }
    }

    let model = Model {
        f: &f,
        widths: &widths,
        cond: &cond,
    };
    let mut p = h.masses.clone();
    model.advance(&mut p, dtau, 0)?;
    Ok(PriceHistogram {
        bin_edges: h.bin_edges.clone(),
        masses: p,
    })
}

struct Model<'a> {
    f: &'a [f64],
    widths: &'a [f64],
    cond: &'a [f64],
}

impl Model<'_> {
    fn rhs(&self, p: &[f64], out: &mut [f64]) {
        let total: f64 = p.iter().sum();
        let mean = self.f.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() / total;
        for i in 0..p.len() {
            out[i] = (self.f[i] - mean) * p[i];
        }
        for (i, g) in self.cond.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let flux = g * (p[i + 1] / self.widths[i + 1] - p[i] / self.widths[i]);
            out[i] += flux;
            out[i + 1] -= flux;
        }
    }

    fn advance(&self, p: &mut [f64], h: f64, depth: u32) -> Result<()> {
        let n = p.len();
        let mut k = vec![0.0; n];
        self.rhs(p, &mut k);
        let mid: Vec<f64> = p.iter().zip(&k).map(|(a, b)| a + 0.5 * h * b).collect();
        self.rhs(&mid, &mut k);
        if p.iter().zip(&k).all(|(a, b)| a + h * b >= 0.0) {
            for (a, b) in p.iter_mut().zip(&k) {
                *a += h * b;
            }
            return Ok(());
        }
        if depth >= MAX_HALVINGS {
            return Err(PlcError::StepSize(
                "histogram undershoot persists after step halving".into(),
            ));
        }
        self.advance(p, 0.5 * h, depth + 1)?;
        self.advance(p, 0.5 * h, depth + 1)
    }
}
