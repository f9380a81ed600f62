//! Dormand–Prince 5(4) with local error control and fourth-order dense
//! output, over complex state vectors.

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 50_000_000;

/// A first-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]);

    /// Hook run on every accepted step; may project `y` back onto its
    /// manifold. Return `true` when `y` was modified.
    fn after_step(&mut self, _t: f64, _y: &mut [C64]) -> Result<bool> {
        Ok(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

fn error_norm(err: &[C64], y0: &[C64], y1: &[C64], tol: &Tolerances) -> f64 {
    let n = err.len().max(1);
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.atol + tol.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

fn initial_step<S: OdeSystem>(sys: &mut S, t0: f64, y0: &[C64], f0: &[C64], tol: &Tolerances, span: f64) -> f64 {
    let n = y0.len().max(1) as f64;
    let sc = |y: &C64| tol.atol + tol.rtol * y.norm();
    let d0 = (y0.iter().map(|y| (y.norm() / sc(y)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(y0).map(|(f, y)| (f.norm() / sc(y)).powi(2)).sum::<f64>() / n).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(tol.max_step).min(span);
    let y1: Vec<C64> = y0.iter().zip(f0).map(|(y, f)| y + f * h0).collect();
    let mut f1 = vec![ZERO; y0.len()];
    sys.rhs(t0 + h0, &y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(y0).map(|((a, b), y)| ((a - b).norm() / sc(y)).powi(2)).sum::<f64>() / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(tol.max_step).min(span)
}

/// Integrates from `t0` across every time in `grid` (ascending, first entry
/// ≥ `t0`), calling `observe(index, t, y)` at each grid time.
pub fn integrate<S, O>(
    sys: &mut S,
    t0: f64,
    y0: &[C64],
    grid: &[f64],
    tol: &Tolerances,
    mut observe: O,
) -> Result<StepStats>
where
    S: OdeSystem,
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut next = 0;
    while next < grid.len() && grid[next] <= t0 {
        observe(next, grid[next], &y)?;
        next += 1;
    }
    let Some(&t_end) = grid.last() else {
        return Ok(stats);
    };
    if next == grid.len() {
        return Ok(stats);
    }

    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut k5 = vec![ZERO; n];
    let mut k6 = vec![ZERO; n];
    let mut k7 = vec![ZERO; n];
    let mut stage = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    let mut err = vec![ZERO; n];
    let mut interp = vec![ZERO; n];

    sys.rhs(t, &y, &mut k1);
    stats.rhs_evals += 1;
    let mut h = initial_step(sys, t, &y, &k1, tol, t_end - t);
    stats.rhs_evals += 1;
    let mut last_rejected = false;

    while next < grid.len() {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::Stiffness { t, h });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { t, h });
        }
        h = h.min(t_end - t).min(tol.max_step);

        for i in 0..n {
            stage[i] = y[i] + k1[i] * (h * A21);
        }
        sys.rhs(t + C2 * h, &stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        sys.rhs(t + C3 * h, &stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        sys.rhs(t + C4 * h, &stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        sys.rhs(t + C5 * h, &stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        sys.rhs(t + h, &stage, &mut k6);
        for i in 0..n {
            y_new[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        sys.rhs(t + h, &y_new, &mut k7);
        stats.rhs_evals += 6;

        for i in 0..n {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let e = error_norm(&err, &y, &y_new, tol);
        if !e.is_finite() {
            stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        if e <= 1.0 {
            let t_new = t + h;
            // dense output on [t, t_new]
            while next < grid.len() && grid[next] <= t_new {
                let theta = (grid[next] - t) / h;
                let theta1 = 1.0 - theta;
                for i in 0..n {
                    let ydiff = y_new[i] - y[i];
                    let bspl = k1[i] * h - ydiff;
                    let r4 = ydiff - k7[i] * h - bspl;
                    let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                    interp[i] = y[i] + (ydiff + (bspl + (r4 + r5 * theta1) * theta) * theta1) * theta;
                }
                observe(next, grid[next], &interp)?;
                next += 1;
            }
            std::mem::swap(&mut y, &mut y_new);
            t = t_new;
            stats.accepted += 1;
            if sys.after_step(t, &mut y)? {
                sys.rhs(t, &y, &mut k1);
                stats.rhs_evals += 1;
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            let mut fac = SAFETY * e.max(1e-10).powf(-0.2);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (SAFETY * e.powf(-0.2)).max(FAC_MIN);
            last_rejected = true;
        }
    }
    Ok(stats)
}
