//! Tests that the smallest population roots are equal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{centering_b_with_absorbed, clt_mu_nu, CltMethod, DiscreteLsd, ModelMoments, Side, SpikeSpec, SpectralFn};
use crate::spectrum::{split_spectrum, EigenSpectrum, SpikeRankSet};
use crate::spike_test::Decision;
use crate::stats::{chi_square_sf, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootsStatistic {
    /// Corrected pseudo-likelihood ratio, needs `p < n`.
    #[serde(rename = "TL")]
    TL,
    /// Trace statistic, any `p / n`.
    #[serde(rename = "Tx")]
    Tx,
    /// Classical chi-square reference for the likelihood ratio.
    #[serde(rename = "TPLR")]
    Tplr,
}

impl std::str::FromStr for RootsStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TL" | "tl" => Ok(Self::TL),
            "Tx" | "tx" | "TX" => Ok(Self::Tx),
            "TPLR" | "tplr" | "PLR" => Ok(Self::Tplr),
            _ => Err(Error::Syntax { what: "statistic", message: format!("unknown {s:?}") }),
        }
    }
}

/// Spikes are given relative to the noise level, `alpha = 1 + a_k / sigma2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallestRootsConfig {
    pub ranks: SpikeRankSet,
    /// Separated spikes, one per flagged rank, in units of `sigma2`.
    pub spikes: SpikeSpec,
    /// Spikes that do not separate at this ratio, in units of `sigma2`.
    #[serde(default)]
    pub absorbed: SpikeSpec,
    pub sigma2: f64,
    pub moments: ModelMoments,
    pub alpha_level: f64,
}

impl SmallestRootsConfig {
    /// Split `pairs` into separated and absorbed spikes at ratio `c` and
    /// flag the ranks of the separated ones.
    pub fn from_spikes(pairs: &[(f64, usize)], c: f64, sigma2: f64) -> Result<Self> {
        let unit = DiscreteLsd::point_mass(1.0)?;
        let all = SpikeSpec::classify(pairs, &unit)?;
        let (spikes, absorbed) = all.partition(c, &unit);
        let ranks = SpikeRankSet::new(spikes.count(Side::Large), spikes.count(Side::Small));
        Ok(Self {
            ranks,
            spikes,
            absorbed,
            sigma2,
            moments: ModelMoments::real(),
            alpha_level: 0.05,
        })
    }

    fn validate(&self, p: usize) -> Result<()> {
        self.ranks.validate(p)?;
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::invalid(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::invalid("alpha level must lie in (0, 1)"));
        }
        for s in self.spikes.spikes().iter().chain(self.absorbed.spikes()) {
            if s.alpha == 1.0 {
                return Err(Error::domain("a spike equal to 1 is not a spike"));
            }
        }
        if self.spikes.count(Side::Large) != self.ranks.large || self.spikes.count(Side::Small) != self.ranks.small {
            return Err(Error::invalid("spike sides do not match the rank split"));
        }
        if self.spikes.total() + self.absorbed.total() >= p {
            return Err(Error::invalid("p must exceed the number of spikes"));
        }
        Ok(())
    }
}

/// All intermediate terms of a smallest-roots test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootsReport {
    pub kind: RootsStatistic,
    #[serde(flatten)]
    pub decision: Decision,
    pub p: usize,
    pub n: usize,
    pub c_n: f64,
    pub flagged: usize,
    pub sigma2: f64,
    pub pseudo_lr: Option<f64>,
    pub nonspiked_sum: f64,
    /// Centering of the trace in absolute units.
    pub b_x: f64,
    pub mu_x: f64,
    pub nu_x: f64,
    /// Terms of `T_L`, in units of `sigma2` (where the statistic is free of it).
    pub b_x_unit: Option<f64>,
    pub b_log_unit: Option<f64>,
    pub mu_log: Option<f64>,
    pub nu_log: Option<f64>,
    pub nu_x_unit: Option<f64>,
    pub nu_l: Option<f64>,
    pub df: Option<f64>,
}

/// `log(mean l) - mean(log l)` over the nonspiked eigenvalues.
pub fn pseudo_lr(spec: &EigenSpectrum, ranks: SpikeRankSet) -> Result<f64> {
    ranks.validate(spec.p())?;
    let rest = spec.nonspiked(ranks);
    if rest.len() < 2 {
        return Err(Error::invalid("at least two nonspiked eigenvalues are needed"));
    }
    if let Some(pos) = rest.iter().position(|&l| l <= 0.0) {
        return Err(Error::domain(format!(
            "nonspiked eigenvalue at rank {} is not positive; use the Tx statistic when p >= n",
            ranks.large + pos + 1
        )));
    }
    let k = rest.len() as f64;
    let mean = pairwise_sum(rest) / k;
    let logs: Vec<f64> = rest.iter().map(|l| (l / mean).ln()).collect();
    // AM >= GM; rounding can only push an exact zero slightly negative
    Ok((-pairwise_sum(&logs) / k).max(0.0))
}

fn unit_bulk() -> DiscreteLsd {
    DiscreteLsd::point_mass(1.0).expect("unit mass is valid")
}

fn base_report(spec: &EigenSpectrum, cfg: &SmallestRootsConfig, kind: RootsStatistic) -> Result<RootsReport> {
    let p = spec.p();
    let c = spec.c_n();
    cfg.validate(p)?;
    let s2 = cfg.sigma2;
    let h = DiscreteLsd::point_mass(s2)?;
    let b_x = centering_b_with_absorbed(
        SpectralFn::Identity,
        p,
        c,
        &h,
        &cfg.spikes.scaled(s2),
        &cfg.absorbed.scaled(s2),
    )?;
    let (mu_x, nu_x) = clt_mu_nu(SpectralFn::Identity, c, &h, cfg.moments, CltMethod::ClosedForm)?;
    let nonspiked_sum = split_spectrum(spec, cfg.ranks, SpectralFn::Identity)?.nonspiked;
    Ok(RootsReport {
        kind,
        decision: Decision { statistic: f64::NAN, p_value: f64::NAN, reject: false, alpha_level: cfg.alpha_level },
        p,
        n: spec.n(),
        c_n: c,
        flagged: cfg.ranks.total(),
        sigma2: s2,
        pseudo_lr: None,
        nonspiked_sum,
        b_x,
        mu_x,
        nu_x,
        b_x_unit: None,
        b_log_unit: None,
        mu_log: None,
        nu_log: None,
        nu_x_unit: None,
        nu_l: None,
        df: None,
    })
}

/// `T_x = (sum_{j not in J} l_j - b_x - mu_x) / sqrt(nu_x)`.
pub fn t_x_statistic(spec: &EigenSpectrum, cfg: &SmallestRootsConfig) -> Result<RootsReport> {
    let mut r = base_report(spec, cfg, RootsStatistic::Tx)?;
    let t = (r.nonspiked_sum - r.b_x - r.mu_x) / r.nu_x.sqrt();
    r.decision = Decision::two_sided(t, cfg.alpha_level);
    Ok(r)
}

/// Corrected pseudo-likelihood ratio statistic.
///
/// `L` is scale free, so every term is evaluated with the noise level set
/// to one; the centering of `log` then carries no `sigma2` term and the
/// variance combination below is exact.
pub fn t_l_statistic(spec: &EigenSpectrum, cfg: &SmallestRootsConfig) -> Result<RootsReport> {
    let c = spec.c_n();
    if c >= 1.0 {
        return Err(Error::domain(format!(
            "TL needs c_n < 1 (got c_n = {c}); use the Tx statistic instead"
        )));
    }
    let mut r = base_report(spec, cfg, RootsStatistic::TL)?;
    let plr = pseudo_lr(spec, cfg.ranks)?;
    let p = spec.p();
    let k = (p - cfg.ranks.total()) as f64;
    let h = unit_bulk();
    let b_x = centering_b_with_absorbed(SpectralFn::Identity, p, c, &h, &cfg.spikes, &cfg.absorbed)?;
    let b_log = centering_b_with_absorbed(SpectralFn::Log, p, c, &h, &cfg.spikes, &cfg.absorbed)?;
    let (_, nu_x) = clt_mu_nu(SpectralFn::Identity, c, &h, cfg.moments, CltMethod::ClosedForm)?;
    let (mu_log, nu_log) = clt_mu_nu(SpectralFn::Log, c, &h, cfg.moments, CltMethod::ClosedForm)?;
    let nu_l = nu_x * (k - 2.0 * b_x) / (k * b_x * b_x) + nu_log / (k * k);
    r.pseudo_lr = Some(plr);
    r.b_x_unit = Some(b_x);
    r.b_log_unit = Some(b_log);
    r.mu_log = Some(mu_log);
    r.nu_log = Some(nu_log);
    r.nu_x_unit = Some(nu_x);
    r.nu_l = Some(nu_l);
    if !(nu_l > 0.0) {
        return Err(Error::invalid(format!(
            "TL variance is not positive: nu_L = {nu_l:e}, nu_x = {nu_x}, nu_log = {nu_log}, b_x = {b_x}, p - M = {k}"
        )));
    }
    let t = (plr - (b_x / k).ln() + (b_log + mu_log) / k) / nu_l.sqrt();
    r.decision = Decision::two_sided(t, cfg.alpha_level);
    Ok(r)
}

/// `-2 log L = n (p - M) * pseudo_lr` against chi-square with
/// `(p - M + 2)(p - M - 1) / 2` degrees of freedom.
pub fn t_plr_statistic(spec: &EigenSpectrum, cfg: &SmallestRootsConfig) -> Result<RootsReport> {
    let mut r = base_report(spec, cfg, RootsStatistic::Tplr)?;
    let plr = pseudo_lr(spec, cfg.ranks)?;
    let k = (spec.p() - cfg.ranks.total()) as f64;
    let stat = spec.n() as f64 * k * plr;
    let df = (k + 2.0) * (k - 1.0) / 2.0;
    let p_value = chi_square_sf(stat, df);
    r.pseudo_lr = Some(plr);
    r.df = Some(df);
    r.decision = Decision { statistic: stat, p_value, reject: p_value < cfg.alpha_level, alpha_level: cfg.alpha_level };
    Ok(r)
}

pub fn smallest_roots_test(spec: &EigenSpectrum, cfg: &SmallestRootsConfig, kind: RootsStatistic) -> Result<RootsReport> {
    match kind {
        RootsStatistic::TL => t_l_statistic(spec, cfg),
        RootsStatistic::Tx => t_x_statistic(spec, cfg),
        RootsStatistic::Tplr => t_plr_statistic(spec, cfg),
    }
}
