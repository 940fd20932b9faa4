//! The spike map `phi`, its derivative, inverse and critical points.

use super::lsd::DiscreteLsd;
use super::spikes::Side;
use crate::error::{Error, Result};

/// `phi(alpha) = alpha * (1 + c * sum_i w_i t_i / (alpha - t_i))` with
/// `t_i = sigma2 * r_i`. Defined for `alpha` outside the atom range.
pub fn phi(alpha: f64, c: f64, h: &DiscreteLsd) -> Result<f64> {
    let (lo, hi) = h.range();
    if alpha >= lo && alpha <= hi {
        return Err(Error::SpikeInsideBulk { alpha, lower: lo, upper: hi });
    }
    Ok(phi_raw(alpha, c, h))
}

pub(crate) fn phi_raw(t: f64, c: f64, h: &DiscreteLsd) -> f64 {
    let s: f64 = h.scaled().map(|(ti, w)| w * ti / (t - ti)).sum();
    t + c * t * s
}

/// `phi'(t) = 1 - c * sum_i w_i t_i^2 / (t - t_i)^2`.
pub fn phi_derivative(t: f64, c: f64, h: &DiscreteLsd) -> f64 {
    let s: f64 = h
        .scaled()
        .map(|(ti, w)| {
            let d = t - ti;
            w * ti * ti / (d * d)
        })
        .sum();
    1.0 - c * s
}

fn phi_second(t: f64, c: f64, h: &DiscreteLsd) -> f64 {
    let s: f64 = h
        .scaled()
        .map(|(ti, w)| {
            let d = t - ti;
            w * ti * ti / (d * d * d)
        })
        .sum();
    2.0 * c * s
}

/// Root of `f` on `[lo, hi]` given `f(lo) < 0 < f(hi)` or the reverse.
/// Bisection to floating-point exhaustion.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let neg_at_lo = f(lo) < 0.0;
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == neg_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Step away from `anchor` in `direction` until `pred` holds, starting at
/// `step` and doubling or halving as `grow` requests.
fn probe<F: Fn(f64) -> bool>(anchor: f64, direction: f64, mut step: f64, grow: bool, pred: F) -> Option<f64> {
    for _ in 0..2100 {
        let t = anchor + direction * step;
        if pred(t) {
            return Some(t);
        }
        if grow {
            step *= 2.0;
        } else {
            step *= 0.5;
        }
        if step == 0.0 || !step.is_finite() {
            break;
        }
    }
    None
}

/// Zeros of `phi'`, increasing. There is exactly one below the smallest
/// atom, exactly one above the largest, and zero or two between each pair
/// of consecutive atoms. Consecutive pairs bound the support intervals.
pub fn critical_points(c: f64, h: &DiscreteLsd) -> Vec<f64> {
    let d = |t: f64| phi_derivative(t, c, h);
    let atoms: Vec<f64> = h.scaled().map(|(t, _)| t).collect();
    let first = atoms[0];
    let last = atoms[atoms.len() - 1];
    let mut out = Vec::with_capacity(2 * atoms.len());

    // below the first atom
    let neg = probe(first, -1.0, first, false, |t| d(t) < 0.0).unwrap_or(first);
    let pos = probe(first, -1.0, first - neg, true, |t| d(t) > 0.0).unwrap_or(-1e300);
    out.push(bisect(d, pos, neg));

    for w in atoms.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let tmax = bisect(|t| -phi_second(t, c, h), a + half * 1e-12, b - half * 1e-12);
        if d(tmax) > 0.0 {
            let l = probe(a, 1.0, tmax - a, false, |t| d(t) < 0.0).unwrap_or(a);
            let r = probe(b, -1.0, b - tmax, false, |t| d(t) < 0.0).unwrap_or(b);
            out.push(bisect(d, l, tmax));
            out.push(bisect(d, tmax, r));
        }
    }

    let neg = probe(last, 1.0, last, false, |t| d(t) < 0.0).unwrap_or(last);
    let pos = probe(last, 1.0, neg - last, true, |t| d(t) > 0.0).unwrap_or(1e300);
    out.push(bisect(d, neg, pos));
    out
}

/// Support of the limiting spectral distribution as closed intervals,
/// increasing. For `c > 1` the atom at zero is not included.
pub fn lsd_support(c: f64, h: &DiscreteLsd) -> Vec<(f64, f64)> {
    support_from_critical(&critical_points(c, h), c, h)
}

pub(crate) fn support_from_critical(z: &[f64], c: f64, h: &DiscreteLsd) -> Vec<(f64, f64)> {
    z.chunks(2).map(|p| (phi_raw(p[0], c, h).max(0.0), phi_raw(p[1], c, h))).collect()
}

/// Lower and upper edge of the whole support.
pub fn support_edges(c: f64, h: &DiscreteLsd) -> (f64, f64) {
    let s = lsd_support(c, h);
    (s[0].0, s[s.len() - 1].1)
}

/// Invert the spike map on the requested branch.
///
/// The large branch needs `l` above the upper support edge; the small
/// branch needs `c < 1` and `0 < l` below the lower edge. A single-atom bulk
/// is solved in closed form.
pub fn phi_inverse(l: f64, c: f64, h: &DiscreteLsd, side: Side) -> Result<f64> {
    let fail = || Error::NoInverse { value: l, side: side.name() };
    if !(l.is_finite() && l > 0.0) {
        return Err(fail());
    }
    let z = critical_points(c, h);
    let alpha = if h.is_point_mass() {
        closed_form_inverse(l, c, h.sigma2(), side).ok_or_else(fail)?
    } else {
        match side {
            Side::Large => {
                let zl = z[z.len() - 1];
                if l <= phi_raw(zl, c, h) {
                    return Err(fail());
                }
                bisect(|t| phi_raw(t, c, h) - l, zl, l)
            }
            Side::Small => {
                let z0 = z[0];
                if z0 <= 0.0 || l >= phi_raw(z0, c, h) {
                    return Err(fail());
                }
                bisect(|t| phi_raw(t, c, h) - l, 0.0, z0)
            }
        }
    };
    let ok = match side {
        Side::Large => alpha > z[z.len() - 1],
        Side::Small => alpha > 0.0 && alpha < z[0],
    };
    if ok { Ok(alpha) } else { Err(fail()) }
}

/// Roots of `a^2 + a (c - 1 - l) + l = 0` in units of `sigma2`.
fn closed_form_inverse(l: f64, c: f64, sigma2: f64, side: Side) -> Option<f64> {
    let u = l / sigma2;
    let b = c - 1.0 - u;
    let disc = b * b - 4.0 * u;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = (q, u / q);
    let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    Some(sigma2 * if side == Side::Large { hi } else { lo })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> DiscreteLsd {
        DiscreteLsd::point_mass(1.0).unwrap()
    }

    #[test]
    fn phi_examples() {
        assert!((phi(25.0, 0.5, &unit()).unwrap() - 25.520833333333333).abs() < 1e-12);
        assert!((phi(0.1, 0.5, &unit()).unwrap() - 0.044444444444444446).abs() < 1e-14);
        assert!(phi(1.0, 0.5, &unit()).is_err());
    }

    #[test]
    fn single_atom_critical_points() {
        for &c in &[0.2, 0.5, 0.9, 1.0, 1.5, 3.0] {
            let z = critical_points(c, &unit());
            assert_eq!(z.len(), 2);
            assert!((z[0] - (1.0 - c.sqrt())).abs() < 1e-12, "c={c} {z:?}");
            assert!((z[1] - (1.0 + c.sqrt())).abs() < 1e-12);
        }
    }

    #[test]
    fn support_single_atom() {
        let s = lsd_support(0.5, &unit());
        assert_eq!(s.len(), 1);
        assert!((s[0].0 - 0.085786437626904951).abs() < 1e-12);
        assert!((s[0].1 - 2.9142135623730950).abs() < 1e-12);
        let h = DiscreteLsd::point_mass(4.0).unwrap();
        let (a, b) = support_edges(2.0, &h);
        assert!((a - 4.0 * (1.0 - 2f64.sqrt()).powi(2)).abs() < 1e-11);
        assert!((b - 4.0 * (1.0 + 2f64.sqrt()).powi(2)).abs() < 1e-11);
    }

    #[test]
    fn two_atom_gap_appears_for_small_c() {
        let h = DiscreteLsd::from_pairs(&[(1.0, 0.5), (10.0, 0.5)], 1.0).unwrap();
        assert_eq!(lsd_support(0.05, &h).len(), 2);
        assert_eq!(lsd_support(5.0, &h).len(), 1);
        let s = lsd_support(0.05, &h);
        assert!(s[0].1 < s[1].0);
    }

    #[test]
    fn inverse_examples() {
        let a = phi_inverse(25.520833333333333, 0.5, &unit(), Side::Large).unwrap();
        assert!((a - 25.0).abs() < 1e-10);
        let a = phi_inverse(0.044444444444444446, 0.5, &unit(), Side::Small).unwrap();
        assert!((a - 0.1).abs() < 1e-12);
        // inside the support there is no admissible preimage
        assert!(phi_inverse(1.0, 0.5, &unit(), Side::Large).is_err());
        assert!(phi_inverse(0.05, 1.5, &unit(), Side::Small).is_err());
    }

    #[test]
    fn closed_form_agrees_with_bisection() {
        // a two-atom law with coincident locations would be a point mass;
        // compare against an artificially split single atom instead
        let h2 = DiscreteLsd::from_pairs(&[(1.0, 0.5), (1.0 + 1e-9, 0.5)], 1.0).unwrap();
        for &(l, side) in &[(20.0, Side::Large), (0.05, Side::Small)] {
            let a = phi_inverse(l, 0.5, &unit(), side).unwrap();
            let b = phi_inverse(l, 0.5, &h2, side).unwrap();
            assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
        }
    }
}
