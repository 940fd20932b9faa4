//! Contour integrals for the CLT mean and variance.
//!
//! Everything is integrated in the `m` plane. A closed curve crossing the
//! real axis at `m_R` (between the right critical point and zero) and `m_L`
//! (beyond the left critical point) maps under `z(m)` onto a contour
//! enclosing the support, so `dz = z'(m) dm` turns every `z` integral into
//! a periodic `m` integral that the trapezoid rule handles with
//! exponential accuracy. For c < 1 the curve is an ellipse in `log(-m)`:
//! as c approaches 1 the two crossings drift orders of magnitude apart and
//! an ellipse in `m` itself would starve the inner end of nodes.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::lsd::DiscreteLsd;
use super::spike_map::critical_points;
use super::stieltjes::{check_c, companion_stieltjes, inverse_map};
use super::{ModelMoments, SpectralFn};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourOptions {
    pub initial_nodes: usize,
    /// Successive refinements must agree to this relative tolerance.
    pub tolerance: f64,
    /// Disagreement above this after the last refinement is an error.
    pub failure_tolerance: f64,
    pub max_nodes_single: usize,
    pub max_nodes_double: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            initial_nodes: 2048,
            tolerance: 1e-8,
            failure_tolerance: 1e-6,
            max_nodes_single: 1 << 17,
            max_nodes_double: 1 << 13,
        }
    }
}

/// `w(theta) = center + r cos(theta) + i v sin(theta)` with `m = w`, or
/// `m = -exp(w)` on a logarithmic curve; `r < 0` runs clockwise.
#[derive(Debug, Clone, Copy)]
struct Ellipse {
    center: f64,
    r: f64,
    v: f64,
    log: bool,
}

impl Ellipse {
    fn at(&self, theta: f64) -> (Complex64, Complex64) {
        let (s, co) = theta.sin_cos();
        let w = Complex64::new(self.center + self.r * co, self.v * s);
        let dw = Complex64::new(-self.r * s, self.v * co);
        if self.log {
            let m = -w.exp();
            (m, m * dw)
        } else {
            (w, dw)
        }
    }

    fn stretched(&self, k: f64) -> Self {
        Self { v: self.v * k, ..*self }
    }
}

struct Geometry {
    c: f64,
    right: f64,
    left: Option<f64>,
}

impl Geometry {
    fn new(c: f64, h: &DiscreteLsd) -> Self {
        let z = critical_points(c, h);
        let right = -1.0 / z[z.len() - 1];
        let z0 = z[0];
        let left = if z0.abs() > 1e-12 * z[z.len() - 1] { Some(-1.0 / z0) } else { None };
        Self { c, right, left }
    }

    /// Curve with margin `k` (relative to `|m*_R|`) from the critical points.
    fn ellipse(&self, k: f64) -> Ellipse {
        let mr = self.right;
        let (a, b) = if self.c < 1.0 {
            let ml = self.left.expect("left critical point exists for c < 1");
            // each margin scales with its own crossing; near c = 1 the left
            // one can be orders of magnitude further out than the right
            (mr + k * mr.abs(), ml - k * ml.abs())
        } else {
            let d = k * self.left.map_or(mr.abs(), |ml| mr.abs().min(ml));
            let a = mr + d;
            let b = self.left.map_or(-a, |ml| (ml - d).min(-a));
            (a, b)
        };
        let center = 0.5 * (a + b);
        let r = a - center;
        Ellipse { center, r, v: r.abs(), log: false }
    }

    /// The same crossings on an ellipse in `log(-m)`. Both ends then get a
    /// comparable share of the nodes however far apart they are; only
    /// possible when both crossings are negative (c < 1).
    fn log_ellipse(&self, k: f64) -> Option<Ellipse> {
        let ml = self.left?;
        let (mr, k) = (self.right, k.min(0.9));
        if self.c >= 1.0 || mr >= 0.0 || ml >= 0.0 {
            return None;
        }
        // margins symmetric in log(-m): m*_R (1 - k) and m*_L / (1 - k)
        let (ua, ub) = ((-mr * (1.0 - k)).ln(), (-ml / (1.0 - k)).ln());
        let center = 0.5 * (ua + ub);
        let r = ua - center;
        // conformal, so orientation carries over: start at the end nearest
        // zero and head into the upper m half plane
        Some(Ellipse { center, r, v: r, log: true })
    }
}

/// Points of the curve must sit on the physical branch: solving the
/// companion equation at `z(m)` returns `m` itself.
fn on_branch(e: &Ellipse, c: f64, h: &DiscreteLsd) -> bool {
    const PROBES: usize = 64;
    (1..PROBES).all(|j| {
        let (m, _) = e.at(PI * j as f64 / PROBES as f64);
        let z = inverse_map(m, c, h);
        if !(z.im > 0.0) {
            return false;
        }
        match companion_stieltjes(z, c, h) {
            Ok(back) => (back - m).norm() <= 1e-8 * m.norm(),
            Err(_) => false,
        }
    })
}

/// Curves with margins `ks`, sharing one aspect ratio so they nest.
fn curves(c: f64, h: &DiscreteLsd, ks: &[f64]) -> Result<Vec<Ellipse>> {
    let g = Geometry::new(c, h);
    if let Some(base) = ks.iter().map(|&k| g.log_ellipse(k)).collect::<Option<Vec<_>>>() {
        // one aspect ratio for all curves keeps them nested; the widest must
        // stay clear of the positive real m axis (|Im log(-m)| < pi)
        let widest = base.iter().map(|e| e.r.abs()).fold(0.0, f64::max);
        let cap = 0.9 * PI / widest;
        for stretch in [1.0, 1.5, 2.0, 3.0, 0.75, 0.5] {
            let stretch = f64::min(stretch, cap);
            let cand: Vec<Ellipse> = base.iter().map(|e| e.stretched(stretch)).collect();
            if cand.iter().all(|e| on_branch(e, c, h)) {
                return Ok(cand);
            }
        }
    }
    let base: Vec<Ellipse> = ks.iter().map(|&k| g.ellipse(k)).collect();
    // taller curves clear a bulging support image when c < 1; flatter ones
    // keep clear of it when the curve lies inside
    let factor = if c < 1.0 { 1.25 } else { 0.8 };
    let mut stretch = 1.0;
    for _ in 0..40 {
        let cand: Vec<Ellipse> = base.iter().map(|e| e.stretched(stretch)).collect();
        if cand.iter().all(|e| on_branch(e, c, h)) {
            return Ok(cand);
        }
        stretch *= factor;
    }
    Err(Error::numeric("could not place an integration contour on the physical branch"))
}

#[derive(Clone, Copy)]
enum Integrand {
    F(SpectralFn),
    /// `z` written through the companion equation, `(c m s1 - 1) / m`.
    Bracket,
}

struct Moments {
    z: Complex64,
    s1: Complex64,
    t2_2: Complex64,
    t1_2: Complex64,
    t2_3: Complex64,
}

fn moments(m: Complex64, c: f64, h: &DiscreteLsd) -> Moments {
    let zero = Complex64::new(0.0, 0.0);
    let (mut s1, mut t2_2, mut t1_2, mut t2_3) = (zero, zero, zero, zero);
    for (t, w) in h.scaled() {
        let d = (1.0 + t * m).inv();
        let d2 = d * d;
        s1 += w * t * d;
        t1_2 += w * t * d2;
        t2_2 += w * t * t * d2;
        t2_3 += w * t * t * d2 * d;
    }
    let z = -m.inv() + c * s1;
    Moments { z, s1, t2_2, t1_2, t2_3 }
}

fn value(kind: Integrand, m: Complex64, mo: &Moments, c: f64) -> Complex64 {
    match kind {
        Integrand::F(SpectralFn::Identity) => mo.z,
        Integrand::F(SpectralFn::Log) => mo.z.ln(),
        Integrand::Bracket => (c * m * mo.s1 - 1.0) / m,
    }
}

/// Returns the estimate and an absolute scale for the convergence test.
fn mu_at(kind: Integrand, c: f64, h: &DiscreteLsd, mom: ModelMoments, e: &Ellipse, n: usize) -> (f64, f64) {
    let dt = 2.0 * PI / n as f64;
    let mut iq = Complex64::new(0.0, 0.0);
    let mut ib = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for j in 0..n {
        let (m, dm) = e.at(j as f64 * dt);
        let mo = moments(m, c, h);
        let f = value(kind, m, &mo, c);
        let d = 1.0 - c * m * m * mo.t2_2;
        let gq = f * c * m * mo.t2_3 / d * dm;
        // the weight carries t in both integrals; with a bare
        // int (1 + t m)^-2 the term would scale like 1 / sigma2
        let gb = f * m * mo.s1 * mo.t1_2 * dm;
        iq += gq;
        ib += gb;
        scale += mom.q() * gq.norm() + (mom.beta * c).abs() * gb.norm();
    }
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mu = -(mom.q() * iq * dt) / two_pi_i - (mom.beta * c * ib * dt) / two_pi_i;
    (mu.re, scale * dt / (2.0 * PI))
}

fn nu_at(
    kind: Integrand,
    c: f64,
    h: &DiscreteLsd,
    mom: ModelMoments,
    inner: &Ellipse,
    outer: &Ellipse,
    single: &Ellipse,
    n: usize,
) -> (f64, f64) {
    let dt = 2.0 * PI / n as f64;
    let sample = |e: &Ellipse| -> Vec<(Complex64, Complex64)> {
        (0..n)
            .map(|j| {
                let (m, dm) = e.at(j as f64 * dt);
                let mo = moments(m, c, h);
                (m, value(kind, m, &mo, c) * dm)
            })
            .collect()
    };
    let a = sample(inner);
    let b = sample(outer);

    // the double sum is real: rows below the axis mirror rows above
    let mut total = 0.0;
    let mut scale = 0.0;
    for (j, &(m1, g1)) in a.iter().enumerate().take(n / 2 + 1) {
        let w = if j == 0 || j == n / 2 { 1.0 } else { 2.0 };
        let mut row = Complex64::new(0.0, 0.0);
        let mut row_abs = 0.0;
        for &(m2, g2) in &b {
            let d = m1 - m2;
            let t = g2 / (d * d);
            row += t;
            row_abs += t.norm();
        }
        total += w * (g1 * row).re;
        scale += w * g1.norm() * row_abs;
    }
    let q1 = mom.q() + 1.0;
    let nu_q = -q1 / (4.0 * PI * PI) * total * dt * dt;
    scale *= q1 / (4.0 * PI * PI) * dt * dt;

    let mut nu_b = 0.0;
    if mom.beta != 0.0 {
        let mut j_int = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let (m, dm) = single.at(j as f64 * dt);
            let mo = moments(m, c, h);
            j_int += value(kind, m, &mo, c) * mo.t1_2 * dm;
        }
        j_int *= dt;
        nu_b = -(mom.beta * c / (4.0 * PI * PI)) * (j_int * j_int).re;
        scale += nu_b.abs();
    }
    (nu_q + nu_b, scale)
}

fn refine<F: Fn(usize) -> (f64, f64)>(eval: F, opts: &ContourOptions, max_nodes: usize, what: &str) -> Result<f64> {
    let mut n = opts.initial_nodes.max(16);
    let (mut prev, _) = eval(n);
    let mut last_rel;
    loop {
        n *= 2;
        let (cur, scale) = eval(n);
        let denom = cur.abs().max(scale).max(f64::MIN_POSITIVE);
        last_rel = (cur - prev).abs() / denom;
        if !cur.is_finite() {
            return Err(Error::numeric(format!("{what}: non-finite contour integral")));
        }
        if last_rel <= opts.tolerance {
            return Ok(cur);
        }
        if n >= max_nodes {
            if last_rel <= opts.failure_tolerance {
                return Ok(cur);
            }
            return Err(Error::numeric(format!(
                "{what}: contour quadrature did not converge (relative change {last_rel:e} at {n} nodes)"
            )));
        }
        prev = cur;
    }
}

fn mu_nu_kind(
    kind: Integrand,
    c: f64,
    h: &DiscreteLsd,
    mom: ModelMoments,
    opts: &ContourOptions,
) -> Result<(f64, f64)> {
    check_c(c)?;
    if matches!(kind, Integrand::F(SpectralFn::Log)) && c >= 1.0 {
        return Err(Error::domain(format!("f = log needs c < 1 (got c = {c}); use f = x instead")));
    }
    let cs = curves(c, h, &[0.5, 1.0 / 3.0, 2.0 / 3.0])?;
    let (single, inner, outer) = (cs[0], cs[1], cs[2]);
    let mu = refine(|n| mu_at(kind, c, h, mom, &single, n), opts, opts.max_nodes_single, "mu")?;
    let nu = refine(
        |n| nu_at(kind, c, h, mom, &inner, &outer, &single, n),
        opts,
        opts.max_nodes_double,
        "nu",
    )?;
    Ok((mu, nu))
}

/// CLT mean and variance by contour integration, for any discrete bulk.
pub fn contour_mu_nu(
    f: SpectralFn,
    c: f64,
    h: &DiscreteLsd,
    mom: ModelMoments,
    opts: &ContourOptions,
) -> Result<(f64, f64)> {
    mu_nu_kind(Integrand::F(f), c, h, mom, opts)
}

/// Mean and variance of the trace statistic with `z` written through the
/// companion equation, as it appears in the noise-variance limit theorem.
/// Used to cross-check [`contour_mu_nu`] with `f = x`.
pub fn noise_mu_nu_bracket_form(
    c: f64,
    h: &DiscreteLsd,
    mom: ModelMoments,
    opts: &ContourOptions,
) -> Result<(f64, f64)> {
    mu_nu_kind(Integrand::Bracket, c, h, mom, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> ContourOptions {
        ContourOptions::default()
    }

    #[test]
    fn point_mass_identity() {
        let h = DiscreteLsd::point_mass(1.0).unwrap();
        let (mu, nu) = contour_mu_nu(SpectralFn::Identity, 0.5, &h, ModelMoments::real(), &opts()).unwrap();
        assert!(mu.abs() < 1e-9, "{mu}");
        assert!((nu - 1.0).abs() < 1e-9, "{nu}");
    }

    #[test]
    fn point_mass_log_example() {
        let h = DiscreteLsd::point_mass(1.0).unwrap();
        let (mu, nu) = contour_mu_nu(SpectralFn::Log, 0.5, &h, ModelMoments::real(), &opts()).unwrap();
        assert!((mu + 0.34657359027997265).abs() < 1e-9, "{mu}");
        assert!((nu - 1.3862943611198906).abs() < 1e-9, "{nu}");
    }

    #[test]
    fn above_one_identity() {
        let h = DiscreteLsd::point_mass(2.0).unwrap();
        let mom = ModelMoments::new(1, 1.5).unwrap();
        let (mu, nu) = contour_mu_nu(SpectralFn::Identity, 2.5, &h, mom, &opts()).unwrap();
        assert!(mu.abs() < 1e-8);
        assert!((nu - 3.5 * 2.5 * 4.0).abs() < 1e-8 * 35.0, "{nu}");
    }

    #[test]
    fn bracket_form_agrees() {
        let h = DiscreteLsd::from_pairs(&[(1.0, 0.5), (2.0, 0.5)], 1.5).unwrap();
        let mom = ModelMoments::new(1, 0.7).unwrap();
        let a = contour_mu_nu(SpectralFn::Identity, 0.4, &h, mom, &opts()).unwrap();
        let b = noise_mu_nu_bracket_form(0.4, &h, mom, &opts()).unwrap();
        assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9 * a.1);
    }

    #[test]
    fn log_terms_do_not_depend_on_bulk() {
        // sum log l = log det Sigma + log det of the white sample matrix
        let mom = ModelMoments::new(1, 1.5).unwrap();
        let want_mu = 0.5 * 0.5f64.ln() - 0.375;
        let want_nu = -2.0 * 0.5f64.ln() + 0.75;
        for h in [
            DiscreteLsd::point_mass(3.0).unwrap(),
            DiscreteLsd::from_pairs(&[(0.5, 0.3), (2.0, 0.7)], 2.0).unwrap(),
        ] {
            let (mu, nu) = contour_mu_nu(SpectralFn::Log, 0.5, &h, mom, &opts()).unwrap();
            assert!((mu - want_mu).abs() < 1e-8, "{mu}");
            assert!((nu - want_nu).abs() < 1e-8, "{nu}");
        }
    }
}
