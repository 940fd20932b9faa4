//! Marchenko–Pastur engine for generalized spiked models.

mod clt;
mod contour;
mod integral;
mod lsd;
mod spike_map;
mod spikes;
mod stieltjes;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clt::{beta_coefficient, clt_mu_nu, clt_terms, u_fourth_power_sum, FourthMoment};
pub use contour::{contour_mu_nu, noise_mu_nu_bracket_form, ContourOptions};
pub use integral::{
    centering_b, centering_b_with_absorbed, log_wishart_offset, lsd_integral, lsd_integral_density,
};
pub use lsd::{Atom, DiscreteLsd};
pub use spike_map::{critical_points, lsd_support, phi, phi_derivative, phi_inverse, support_edges};
pub use spikes::{Side, Spike, SpikeSpec};
pub use stieltjes::{companion_stieltjes, inverse_map, inverse_map_derivative, residual};

/// Spectral function applied to eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectralFn {
    #[serde(rename = "x")]
    Identity,
    #[serde(rename = "log")]
    Log,
}

impl SpectralFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            SpectralFn::Identity => x,
            SpectralFn::Log => x.ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpectralFn::Identity => "x",
            SpectralFn::Log => "log",
        }
    }
}

impl std::str::FromStr for SpectralFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "id" | "identity" => Ok(SpectralFn::Identity),
            "log" => Ok(SpectralFn::Log),
            _ => Err(Error::Syntax { what: "spectral function", message: format!("unknown {s:?}") }),
        }
    }
}

/// Field indicator and fourth-moment correction.
///
/// `q = 1` for real data, `q = 0` for complex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMoments {
    pub q: u8,
    pub beta: f64,
}

impl ModelMoments {
    pub fn new(q: u8, beta: f64) -> Result<Self> {
        if q > 1 {
            return Err(Error::invalid(format!("q must be 0 or 1, got {q}")));
        }
        if !beta.is_finite() {
            return Err(Error::invalid("beta must be finite"));
        }
        Ok(Self { q, beta })
    }

    /// Real Gaussian-like data.
    pub fn real() -> Self {
        Self { q: 1, beta: 0.0 }
    }

    pub fn q(&self) -> f64 {
        f64::from(self.q)
    }
}

impl Default for ModelMoments {
    fn default() -> Self {
        Self::real()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltMethod {
    /// Closed form when the bulk is a point mass, contour integration otherwise.
    #[default]
    Auto,
    ClosedForm,
    Contour,
}

/// Centering and limiting mean/variance of a partial linear spectral statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltTerms {
    pub f: SpectralFn,
    pub b: f64,
    pub mu: f64,
    pub nu: f64,
    pub method: CltMethod,
}
