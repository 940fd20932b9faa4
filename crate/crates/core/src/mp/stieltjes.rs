//! Companion Stieltjes transform of the limiting spectral distribution.

use num_complex::Complex64;

use super::lsd::DiscreteLsd;
use super::spike_map::{bisect, critical_points, phi_derivative, phi_raw};
use crate::error::{Error, Result};

/// `z(m) = -1/m + c * sum_i w_i t_i / (1 + t_i m)`.
pub fn inverse_map(m: Complex64, c: f64, h: &DiscreteLsd) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (t, w) in h.scaled() {
        s += w * t / (1.0 + t * m);
    }
    -m.inv() + c * s
}

/// `z'(m) = 1/m^2 - c * sum_i w_i t_i^2 / (1 + t_i m)^2`.
pub fn inverse_map_derivative(m: Complex64, c: f64, h: &DiscreteLsd) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (t, w) in h.scaled() {
        let d = 1.0 + t * m;
        s += w * t * t / (d * d);
    }
    (m * m).inv() - c * s
}

/// `|z + 1/m - c * sum_i w_i t_i / (1 + t_i m)|`.
pub fn residual(z: Complex64, m: Complex64, c: f64, h: &DiscreteLsd) -> f64 {
    (z - inverse_map(m, c, h)).norm()
}

const MAX_NEWTON: usize = 200;

fn newton(z: Complex64, seed: Complex64, c: f64, h: &DiscreteLsd) -> Option<Complex64> {
    let mut m = seed;
    for _ in 0..MAX_NEWTON {
        let g = inverse_map(m, c, h) - z;
        let dg = inverse_map_derivative(m, c, h);
        let mut step = g / dg;
        if !step.is_finite() {
            return None;
        }
        let cap = 0.5 * m.norm();
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        let next = m - step;
        if next.im <= 0.0 {
            // stay in the upper half plane
            m = Complex64::new(next.re, 0.5 * m.im);
            continue;
        }
        m = next;
        if step.norm() <= 1e-15 * m.norm() {
            break;
        }
    }
    let tol = 1e-12 * z.norm().max(1.0);
    (m.im > 0.0 && m.is_finite() && residual(z, m, c, h) <= tol).then_some(m)
}

fn solve_upper(z: Complex64, c: f64, h: &DiscreteLsd) -> Result<Complex64> {
    if let Some(m) = newton(z, -z.inv(), c, h) {
        return Ok(m);
    }
    // continuation from far above the real axis
    let scale = h.range().1 * (1.0 + c.sqrt()).powi(2) + z.norm() + 1.0;
    let mut y = 10.0 * scale;
    let mut m = -Complex64::new(z.re, y).inv();
    m = newton(Complex64::new(z.re, y), m, c, h)
        .ok_or_else(|| Error::numeric(format!("Stieltjes solve failed at z = {z}")))?;
    let mut ratio = 0.5;
    while y > z.im {
        let y_next = (y * ratio).max(z.im);
        match newton(Complex64::new(z.re, y_next), m, c, h) {
            Some(next) => {
                m = next;
                y = y_next;
                ratio = (ratio * 0.8).max(0.05);
            }
            None => {
                ratio = 0.5 * (1.0 + ratio);
                if ratio > 1.0 - 1e-9 {
                    return Err(Error::numeric(format!("Stieltjes continuation stalled at z = {z}")));
                }
            }
        }
    }
    Ok(m)
}

/// Value of the companion Stieltjes transform at `z`.
///
/// Off the real axis this is the unique root of
/// `z = -1/m + c * int t / (1 + t m) dH(t)` with `Im m` of the same sign as
/// `Im z`. On the real axis outside the support it is the real root on the
/// branch where `z'(m) > 0`.
pub fn companion_stieltjes(z: Complex64, c: f64, h: &DiscreteLsd) -> Result<Complex64> {
    check_c(c)?;
    if !z.is_finite() {
        return Err(Error::invalid("z must be finite"));
    }
    if z.im > 0.0 {
        solve_upper(z, c, h)
    } else if z.im < 0.0 {
        Ok(solve_upper(z.conj(), c, h)?.conj())
    } else {
        real_axis(z.re, c, h).map(|m| Complex64::new(m, 0.0))
    }
}

/// Warm-started solve for `Im z > 0`, used along quadrature grids.
pub(crate) fn companion_stieltjes_near(
    z: Complex64,
    seed: Complex64,
    c: f64,
    h: &DiscreteLsd,
) -> Result<Complex64> {
    match newton(z, seed, c, h) {
        Some(m) => Ok(m),
        None => solve_upper(z, c, h),
    }
}

fn real_axis(x: f64, c: f64, h: &DiscreteLsd) -> Result<f64> {
    let zs = critical_points(c, h);
    let f = |t: f64| phi_raw(t, c, h) - x;
    let outside = || Error::domain(format!("z = {x} lies in the support"));

    // (-inf, z0) maps onto (-inf, phi(z0))
    let z0 = zs[0];
    if x < phi_raw(z0, c, h) {
        let mut lo = z0 - z0.abs().max(1.0);
        while f(lo) > 0.0 {
            lo = z0 - 2.0 * (z0 - lo);
        }
        let t = bisect(f, lo, z0);
        if t == 0.0 || x == 0.0 && c < 1.0 {
            return Err(Error::domain("the companion transform has a pole at z = 0"));
        }
        return Ok(-1.0 / t);
    }
    let zl = zs[zs.len() - 1];
    if x > phi_raw(zl, c, h) {
        let mut hi = x.max(2.0 * zl);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        return Ok(-1.0 / bisect(f, zl, hi));
    }
    for pair in zs[1..zs.len() - 1].chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        if x > phi_raw(a, c, h) && x < phi_raw(b, c, h) {
            debug_assert!(phi_derivative(0.5 * (a + b), c, h) > 0.0);
            return Ok(-1.0 / bisect(f, a, b));
        }
    }
    Err(outside())
}

pub(crate) fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("c must be positive and finite, got {c}")))
    }
}
