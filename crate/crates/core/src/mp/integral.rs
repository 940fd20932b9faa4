use num_complex::Complex64;

use super::lsd::DiscreteLsd;
use super::spike_map::{lsd_support, phi};
use super::spikes::SpikeSpec;
use super::stieltjes::{check_c, companion_stieltjes, companion_stieltjes_near};
use super::SpectralFn;
use crate::error::{Error, Result};

/// `int log x dF^{c, delta_1}(x)` for `c < 1`, i.e. `(c - 1)/c * log(1 - c) - 1`.
pub fn log_wishart_offset(c: f64) -> Result<f64> {
    check_log(c)?;
    Ok((c - 1.0) / c * (-c).ln_1p() - 1.0)
}

fn check_log(c: f64) -> Result<()> {
    check_c(c)?;
    if c >= 1.0 {
        return Err(Error::domain(format!(
            "f = log needs c < 1 (got c = {c}); use f = x instead"
        )));
    }
    Ok(())
}

/// `int f dF^{c,H}` for the limiting spectral distribution.
///
/// `f = x` returns `int t dH`. `f = log` uses the closed form for a point
/// mass and numerical density recovery otherwise.
pub fn lsd_integral(f: SpectralFn, c: f64, h: &DiscreteLsd) -> Result<f64> {
    check_c(c)?;
    match f {
        SpectralFn::Identity => Ok(h.mean()),
        SpectralFn::Log => {
            check_log(c)?;
            if h.is_point_mass() {
                Ok(h.sigma2().ln() + log_wishart_offset(c)?)
            } else {
                lsd_integral_density(f, c, h)
            }
        }
    }
}

const DENSITY_INTERVALS: usize = 10_000;

/// `int f dF^{c,H}` by recovering the density `Im m_F(x + i eps) / pi` on
/// each support interval and integrating with Simpson's rule after the
/// substitution `x = mid - half * cos(theta)`.
///
/// The smoothing leaks `O(eps)` of mass past the support edges, so the
/// result is extrapolated from `eps` and `eps / 2`.
pub fn lsd_integral_density(f: SpectralFn, c: f64, h: &DiscreteLsd) -> Result<f64> {
    let coarse = density_at(f, c, h, 1e-6)?;
    let fine = density_at(f, c, h, 0.5e-6)?;
    Ok(2.0 * fine - coarse)
}

fn density_at(f: SpectralFn, c: f64, h: &DiscreteLsd, rel: f64) -> Result<f64> {
    check_c(c)?;
    if f == SpectralFn::Log {
        check_log(c)?;
    }
    let support = lsd_support(c, h);
    let width = support[support.len() - 1].1 - support[0].0;
    let eps = rel * width;
    let n = DENSITY_INTERVALS;
    let dtheta = std::f64::consts::PI / n as f64;

    let mut mass = 0.0;
    let mut moment = 0.0;
    for &(a, b) in &support {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut seed: Option<Complex64> = None;
        for k in 0..=n {
            let theta = k as f64 * dtheta;
            let x = mid - half * theta.cos();
            let jac = half * theta.sin();
            if jac == 0.0 {
                continue;
            }
            let z = Complex64::new(x, eps);
            let m = match seed {
                Some(s) => companion_stieltjes_near(z, s, c, h)?,
                None => companion_stieltjes(z, c, h)?,
            };
            seed = Some(m);
            let m_f = (m + (1.0 - c) / z) / c;
            let dens = m_f.im / std::f64::consts::PI;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let g = w * dens * jac;
            mass += g;
            moment += g * f.eval(x);
        }
    }
    if !(mass > 0.0) {
        return Err(Error::numeric("recovered density has no mass"));
    }
    Ok(moment / mass)
}

fn point_integral(f: SpectralFn, c: f64, alpha: f64) -> Result<f64> {
    Ok(match f {
        SpectralFn::Identity => alpha,
        SpectralFn::Log => alpha.ln() + log_wishart_offset(c)?,
    })
}

/// Centering `b = p * int f dF^{c, H_p} - sum_k m_k f(phi(alpha_k))`, where
/// `H_p` is the spectral distribution of the full population covariance
/// (bulk plus spikes).
pub fn centering_b(f: SpectralFn, p: usize, c: f64, h: &DiscreteLsd, spikes: &SpikeSpec) -> Result<f64> {
    centering_b_with_absorbed(f, p, c, h, spikes, &SpikeSpec::empty())
}

/// As [`centering_b`], with extra population spikes that do not separate
/// from the bulk. They enter `H_p` but their sample eigenvalues are summed
/// with the bulk.
pub fn centering_b_with_absorbed(
    f: SpectralFn,
    p: usize,
    c: f64,
    h: &DiscreteLsd,
    spikes: &SpikeSpec,
    absorbed: &SpikeSpec,
) -> Result<f64> {
    check_c(c)?;
    let m = spikes.total() + absorbed.total();
    if m >= p {
        return Err(Error::invalid(format!("{m} spikes leave no bulk out of p = {p}")));
    }
    let mut b = (p - m) as f64 * lsd_integral(f, c, h)?;
    for s in spikes.spikes() {
        let l = phi(s.alpha, c, h)?;
        if f == SpectralFn::Log && l <= 0.0 {
            return Err(Error::domain(format!("spike {} maps to non-positive {l}", s.alpha)));
        }
        b += s.multiplicity as f64 * (point_integral(f, c, s.alpha)? - f.eval(l));
    }
    for s in absorbed.spikes() {
        b += s.multiplicity as f64 * point_integral(f, c, s.alpha)?;
    }
    Ok(b)
}
