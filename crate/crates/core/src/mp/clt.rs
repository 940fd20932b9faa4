use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::contour::{contour_mu_nu, ContourOptions};
use super::integral::centering_b_with_absorbed;
use super::lsd::DiscreteLsd;
use super::spikes::SpikeSpec;
use super::stieltjes::check_c;
use super::{CltMethod, CltTerms, ModelMoments, SpectralFn};
use crate::error::{Error, Result};

/// Fourth moment of the standardized entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourthMoment {
    Finite(f64),
    /// Heavy tails; the correction is dropped.
    Infinite,
}

/// `beta = u4 * (E|x|^4 - q - 2)`, where `u4` is the limit of
/// `sum_t |u_ti|^4` over the spike eigenvector coordinates.
pub fn beta_coefficient(u_fourth_power_sum: f64, fourth: FourthMoment, q: u8) -> f64 {
    match fourth {
        FourthMoment::Finite(m4) => u_fourth_power_sum * (m4 - f64::from(q) - 2.0),
        FourthMoment::Infinite => 0.0,
    }
}

/// Mean of `sum_t u_ti^4` over the given columns.
pub fn u_fourth_power_sum(u: &DMatrix<f64>) -> f64 {
    if u.ncols() == 0 {
        return 0.0;
    }
    let total: f64 = u.column_iter().map(|col| col.iter().map(|v| v.powi(4)).sum::<f64>()).sum();
    total / u.ncols() as f64
}

fn closed_form(f: SpectralFn, c: f64, h: &DiscreteLsd, mom: ModelMoments) -> Result<(f64, f64)> {
    if !h.is_point_mass() {
        return Err(Error::invalid("closed-form CLT terms need a point-mass bulk"));
    }
    let q = mom.q();
    let beta = mom.beta;
    Ok(match f {
        SpectralFn::Identity => {
            let s2 = h.sigma2();
            (0.0, (q + 1.0 + beta) * c * s2 * s2)
        }
        SpectralFn::Log => {
            let l = (-c).ln_1p();
            (0.5 * q * l - 0.5 * beta * c, -(q + 1.0) * l + beta * c)
        }
    })
}

/// Limiting mean `mu` and variance `nu` of the centred statistic.
pub fn clt_mu_nu(
    f: SpectralFn,
    c: f64,
    h: &DiscreteLsd,
    mom: ModelMoments,
    method: CltMethod,
) -> Result<(f64, f64)> {
    check_c(c)?;
    if f == SpectralFn::Log && c >= 1.0 {
        return Err(Error::domain(format!("f = log needs c < 1 (got c = {c}); use f = x instead")));
    }
    match method {
        CltMethod::ClosedForm => closed_form(f, c, h, mom),
        CltMethod::Auto if h.is_point_mass() => closed_form(f, c, h, mom),
        _ => contour_mu_nu(f, c, h, mom, &ContourOptions::default()),
    }
}

/// Centering, mean and variance together.
pub fn clt_terms(
    f: SpectralFn,
    p: usize,
    c: f64,
    h: &DiscreteLsd,
    spikes: &SpikeSpec,
    absorbed: &SpikeSpec,
    mom: ModelMoments,
    method: CltMethod,
) -> Result<CltTerms> {
    let (mu, nu) = clt_mu_nu(f, c, h, mom, method)?;
    if !(nu > 0.0) {
        return Err(Error::numeric(format!("CLT variance {nu} is not positive")));
    }
    let b = centering_b_with_absorbed(f, p, c, h, spikes, absorbed)?;
    let method = match method {
        CltMethod::Auto if h.is_point_mass() => CltMethod::ClosedForm,
        CltMethod::Auto => CltMethod::Contour,
        m => m,
    };
    Ok(CltTerms { f, b, mu, nu, method })
}
