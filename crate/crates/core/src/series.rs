use serde::{Deserialize, Serialize};

use crate::error::{check, PlcError, Result};

/// Uniformly sampled time series anchored at calendar time `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalesSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SalesSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        check("t0", t0, true, "")?;
        check("dt", dt, dt > 0.0, "must be positive")?;
        Ok(Self { t0, dt, values })
    }

    /// Samples `f(model_time)` at `model_time = i * dt`, `i = 0..n`.
    pub fn from_fn(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..n).map(|i| f(i as f64 * dt)).collect();
        Self::new(t0, dt, values)
    }

    pub fn zeros_like(other: &SalesSeries) -> Self {
        Self {
            t0: other.t0,
            dt: other.dt,
            values: vec![0.0; other.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Calendar time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    /// Time span covered, `(n - 1) * dt`.
    pub fn horizon(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn same_grid(&self, other: &SalesSeries) -> bool {
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
            && ((self.dt - other.dt) / self.dt).abs() <= 1e-12
    }

    pub(crate) fn require_same_grid(&self, other: &SalesSeries, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(PlcError::Alignment(format!(
                "{what}: (t0={}, dt={}, n={}) vs (t0={}, dt={}, n={})",
                self.t0,
                self.dt,
                self.len(),
                other.t0,
                other.dt,
                other.len()
            )))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pointwise sum; grids must match.
    pub fn add(&self, other: &SalesSeries) -> Result<Self> {
        self.require_same_grid(other, "add")?;
        Ok(Self {
            t0: self.t0,
            dt: self.dt,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Left-point Riemann sum of the values.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dt
    }

    /// Linear interpolation at calendar time `t`, `None` outside the grid.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let x = (t - self.t0) / self.dt;
        let last = (self.len() - 1) as f64;
        if x < -1e-9 || x > last + 1e-9 {
            return None;
        }
        let x = x.clamp(0.0, last);
        let i = x.floor() as usize;
        if i + 1 >= self.len() {
            return Some(self.values[self.len() - 1]);
        }
        let f = x - i as f64;
        Some(self.values[i] * (1.0 - f) + self.values[i + 1] * f)
    }

    /// Indices of interior local maxima. A plateau counts once, at its first sample.
    pub fn local_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        let mut out = Vec::new();
        let mut i = 1;
        while i + 1 < v.len() {
            if v[i] > v[i - 1] {
                let mut j = i;
                while j + 1 < v.len() && v[j + 1] == v[i] {
                    j += 1;
                }
                if j + 1 < v.len() && v[j + 1] < v[i] {
                    out.push(i);
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
        out
    }

    /// Calendar times of the interior local maxima.
    pub fn peak_times(&self) -> Vec<f64> {
        self.local_maxima()
            .into_iter()
            .map(|i| self.time(i))
            .collect()
    }
}
