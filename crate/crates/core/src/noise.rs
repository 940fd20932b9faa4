//! Bias-corrected estimation of the bulk noise variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{clt_mu_nu, CltMethod, DiscreteLsd, ModelMoments, Side, SpikeSpec, SpectralFn};
use crate::spectrum::{split_spectrum, EigenSpectrum, SpikeRankSet};
use crate::spike_test::{estimate_spike_values, plug_in_spikes};
use crate::stats::normal_quantile;

/// Spikes and bulk atoms in units of the noise variance: the population
/// spectrum is `sigma2 * alpha_k` and `sigma2 * r_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelSpec {
    pub spikes: SpikeSpec,
    /// Unit-scale bulk (its `sigma2` is ignored).
    pub bulk: DiscreteLsd,
}

impl NoiseModelSpec {
    pub fn new(spikes: SpikeSpec, bulk: DiscreteLsd) -> Result<Self> {
        let bulk = bulk.with_sigma2(1.0)?;
        for s in spikes.spikes() {
            if bulk.atoms().iter().any(|a| a.location == s.alpha) {
                return Err(Error::domain(format!("spike {} coincides with a bulk atom", s.alpha)));
            }
        }
        Ok(Self { spikes, bulk })
    }

    /// Unit point-mass bulk with the given spikes.
    pub fn with_spikes(pairs: &[(f64, usize)]) -> Result<Self> {
        let bulk = DiscreteLsd::point_mass(1.0)?;
        let spikes = SpikeSpec::classify(pairs, &bulk)?;
        Self::new(spikes, bulk)
    }

    /// Spikes visible at ratio `c` and spikes hidden in the bulk.
    pub fn partition(&self, c: f64) -> (SpikeSpec, SpikeSpec) {
        self.spikes.partition(c, &self.bulk)
    }
}

/// Denominator `(p - M) sum_i w_i r_i`, plus the absorbed spikes whose
/// eigenvalues stay in the nonspiked sum.
fn denominator(p: usize, model: &NoiseModelSpec, absorbed: &SpikeSpec) -> f64 {
    let m_all = model.spikes.total() as f64;
    let hidden: f64 = absorbed.spikes().iter().map(|s| s.multiplicity as f64 * s.alpha).sum();
    (p as f64 - m_all) * model.bulk.unit_mean() + hidden
}

fn check_ranks(spec: &EigenSpectrum, model: &NoiseModelSpec, ranks: SpikeRankSet) -> Result<(SpikeSpec, SpikeSpec)> {
    ranks.validate(spec.p())?;
    let (det, abs) = model.partition(spec.c_n());
    if det.count(Side::Large) != ranks.large || det.count(Side::Small) != ranks.small {
        return Err(Error::invalid(format!(
            "rank split {}:{} does not match the {} large and {} small separated spikes",
            ranks.large,
            ranks.small,
            det.count(Side::Large),
            det.count(Side::Small)
        )));
    }
    if model.spikes.total() >= spec.p() {
        return Err(Error::invalid("p must exceed the number of spikes"));
    }
    Ok((det, abs))
}

/// `sigma_hat^2 = sum_{j not in J} l_j / ((p - M) sum_i w_i r_i)`.
pub fn sigma_hat(spec: &EigenSpectrum, model: &NoiseModelSpec, ranks: SpikeRankSet) -> Result<f64> {
    let (_, abs) = check_ranks(spec, model, ranks)?;
    let sum = split_spectrum(spec, ranks, SpectralFn::Identity)?.nonspiked;
    Ok(sum / denominator(spec.p(), model, &abs))
}

/// `sum_k sum_i m_k c alpha_k sigma2 r_i w_i / (alpha_k - r_i)` over the
/// model's spikes. Linear in `sigma2`.
pub fn bias_term(model: &NoiseModelSpec, sigma2: f64, c: f64) -> Result<f64> {
    bias_over(&model.spikes, &model.bulk, sigma2, c)
}

fn bias_over(spikes: &SpikeSpec, bulk: &DiscreteLsd, sigma2: f64, c: f64) -> Result<f64> {
    let mut total = 0.0;
    for s in spikes.spikes() {
        let mut inner = 0.0;
        for a in bulk.atoms() {
            let d = s.alpha - a.location;
            if d == 0.0 {
                return Err(Error::domain(format!("spike {} equals a bulk atom", s.alpha)));
            }
            inner += a.location * a.weight / d;
        }
        total += s.multiplicity as f64 * c * s.alpha * inner;
    }
    Ok(total * sigma2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseOptions {
    pub moments: ModelMoments,
    pub alpha_level: f64,
    pub method: CltMethod,
    /// Plug-in passes. One pass is the estimator; more iterate towards a
    /// fixed point and are experimental.
    pub iterations: usize,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        Self { moments: ModelMoments::real(), alpha_level: 0.05, method: CltMethod::Auto, iterations: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub sigma2_hat: f64,
    pub sigma2_c: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub bias: f64,
    pub mu_x: f64,
    pub nu_x: f64,
    pub denominator: f64,
    pub c_n: f64,
}

/// `sigma_c^2 = sigma_hat^2 + (bias(sigma_hat^2) - mu_x) / denominator`
/// with a normal confidence interval of half-width
/// `z * sqrt(nu_x) / denominator`, `nu_x` evaluated at `sigma_c^2`.
pub fn sigma_hat_corrected(
    spec: &EigenSpectrum,
    model: &NoiseModelSpec,
    ranks: SpikeRankSet,
    opts: &NoiseOptions,
) -> Result<NoiseEstimate> {
    if !(opts.alpha_level > 0.0 && opts.alpha_level < 1.0) {
        return Err(Error::invalid("alpha level must lie in (0, 1)"));
    }
    let c = spec.c_n();
    let (det, abs) = check_ranks(spec, model, ranks)?;
    let sum = split_spectrum(spec, ranks, SpectralFn::Identity)?.nonspiked;
    let denom = denominator(spec.p(), model, &abs);
    let sigma2_hat = sum / denom;
    if !(sigma2_hat > 0.0) {
        return Err(Error::domain("nonspiked eigenvalues sum to zero"));
    }

    let unit_bias = bias_over(&det, &model.bulk, 1.0, c)?;
    let (mu_unit, nu_unit) = clt_mu_nu(SpectralFn::Identity, c, &model.bulk, opts.moments, opts.method)?;
    // mu_x scales with sigma2 and nu_x with sigma2^2
    let mut s2 = sigma2_hat;
    for _ in 0..opts.iterations.max(1) {
        s2 = sigma2_hat + (unit_bias * s2 - mu_unit * s2) / denom;
    }
    let sigma2_c = s2;
    let nu_x = nu_unit * sigma2_c * sigma2_c;
    let z = normal_quantile(1.0 - opts.alpha_level / 2.0);
    let half = z * nu_x.sqrt() / denom;
    Ok(NoiseEstimate {
        sigma2_hat,
        sigma2_c,
        ci_lower: sigma2_c - half,
        ci_upper: sigma2_c + half,
        bias: unit_bias * sigma2_hat,
        mu_x: mu_unit * sigma2_hat,
        nu_x,
        denominator: denom,
        c_n: c,
    })
}

/// Data mode: spike values come from inverting the spike map at the
/// flagged eigenvalues scaled by a provisional noise level, refined once
/// with the corrected estimate.
pub fn noise_from_data(
    spec: &EigenSpectrum,
    ranks: SpikeRankSet,
    bulk: &DiscreteLsd,
    opts: &NoiseOptions,
) -> Result<(NoiseEstimate, NoiseModelSpec)> {
    let bulk = bulk.with_sigma2(1.0)?;
    ranks.validate(spec.p())?;
    let c = spec.c_n();
    let sum = split_spectrum(spec, ranks, SpectralFn::Identity)?.nonspiked;
    let provisional = sum / ((spec.p() - ranks.total()) as f64 * bulk.unit_mean());

    // eigenvalues that fall inside the bulk are clamped to the spike map's
    // critical point, as in the spike-count test
    let build = |s2: f64| -> Result<NoiseModelSpec> {
        let est = estimate_spike_values(&spec.scaled(s2), ranks, c, &bulk)?;
        NoiseModelSpec::new(plug_in_spikes(&est, c, &bulk)?, bulk.clone())
    };

    let model = build(provisional)?;
    let first = sigma_hat_corrected(spec, &model, ranks, opts)?;
    let model = build(first.sigma2_c)?;
    let est = sigma_hat_corrected(spec, &model, ranks, opts)?;
    Ok((est, model))
}
