//! Fixed-step explicit integrators for small ODE systems.
//!
//! The right-hand side writes the derivative of `y` at time `t` into `dy`.

/// One explicit midpoint (RK2) step, in place.
pub fn midpoint_step<F>(rhs: &F, t: f64, y: &mut [f64], h: f64)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    rhs(t, y, &mut k1);
    let mid: Vec<f64> = y
        .iter()
        .zip(&k1)
        .map(|(yi, ki)| yi + 0.5 * h * ki)
        .collect();
    let mut k2 = vec![0.0; n];
    rhs(t + 0.5 * h, &mid, &mut k2);
    for (yi, ki) in y.iter_mut().zip(&k2) {
        *yi += h * ki;
    }
}

/// One classical fourth-order Runge-Kutta step, in place.
pub fn rk4_step<F>(rhs: &F, t: f64, y: &mut [f64], h: f64)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    rhs(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, &tmp, &mut k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrates with RK4 and reports the state at every point of `grid`.
///
/// Each grid interval is split into `substeps` equal RK4 steps. The first
/// row of the output is `y0` at `grid[0]`.
pub fn rk4_on_grid<F>(rhs: F, y0: &[f64], grid: &[f64], substeps: usize) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let substeps = substeps.max(1);
    let mut out = Vec::with_capacity(grid.len());
    let mut y = y0.to_vec();
    if let Some(&t0) = grid.first() {
        out.push(y.clone());
        let mut t = t0;
        for &t_next in &grid[1..] {
            let h = (t_next - t) / substeps as f64;
            for s in 0..substeps {
                rk4_step(&rhs, t + s as f64 * h, &mut y, h);
            }
            t = t_next;
            out.push(y.clone());
        }
    }
    out
}
