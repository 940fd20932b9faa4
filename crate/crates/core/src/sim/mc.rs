//! Monte Carlo drivers.
//!
//! Replicate `r` of a cell draws from `ChaCha8Rng` seeded with
//! `splitmix64(master_seed ^ splitmix64(cell_tag))` on stream `r`, where the
//! cell tag packs the experiment, model, sampler, `p` and `n`. Replicates are
//! therefore independent of scheduling and of each other, and aggregation
//! runs in replicate order.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{haar_orthogonal, sampler_tag, ModelKind, PopulationModel, SamplerKind, MODEL_SPIKES};
use crate::error::{Error, Result};
use crate::mp::{DiscreteLsd, FourthMoment, ModelMoments, Side, Spike, SpikeSpec, SpectralFn};
use crate::noise::{sigma_hat_corrected, NoiseModelSpec, NoiseOptions};
use crate::roots::{smallest_roots_test, RootsStatistic, SmallestRootsConfig};
use crate::spectrum::{gram_spectrum, EigenSpectrum, SpikeRankSet};
use crate::spike_test::{estimate_spike_values, plug_in_spikes, test_spikes, SpikeTestConfig};

pub const NOMINAL_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SizePower,
    Noise,
    SmallestRoots,
    Statistics,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::SizePower => "size_power",
            Self::Noise => "noise",
            Self::SmallestRoots => "smallest_roots",
            Self::Statistics => "statistics",
        }
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn cell_tag(experiment: Experiment, model: ModelKind, sampler: SamplerKind, p: usize, n: usize) -> u64 {
    let head = (experiment as u64) << 8 | model_tag(model) << 4 | sampler_tag(sampler);
    splitmix64(head) ^ splitmix64((p as u64) << 32 | n as u64)
}

fn model_tag(m: ModelKind) -> u64 {
    PopulationModel { kind: m, p: 0 }.tag()
}

pub fn replicate_rng(master_seed: u64, tag: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(tag)));
    rng.set_stream(rep);
    rng
}

/// Sample covariance spectrum of one replicate, divisor `n`.
///
/// With `Sigma^(1/2) = U D U'`, the matrix `X U D` has the same sample
/// spectrum as `X U D U'`, so the trailing rotation is skipped. A fresh
/// Haar `U` is drawn per replicate.
pub fn replicate_spectrum(model: &PopulationModel, sampler: SamplerKind, n: usize, rng: &mut ChaCha8Rng) -> Result<EigenSpectrum> {
    let p = model.p;
    let u = model.kind.rotated().then(|| haar_orthogonal(p, rng));
    let mut y = sampler.matrix(n, p, rng);
    if let Some(u) = u {
        y *= u;
    }
    let root = DVector::from_iterator(p, model.eigenvalues().into_iter().map(f64::sqrt));
    for (j, mut col) in y.column_iter_mut().enumerate() {
        col *= root[j];
    }
    gram_spectrum(&y, n as f64, n)
}

/// How the fourth-moment coefficient enters the CLT in simulations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaPolicy {
    /// `E x^4 - 3` for finite fourth moments, zero otherwise.
    #[default]
    FromSampler,
    Fixed(f64),
}

impl BetaPolicy {
    pub fn beta(self, sampler: SamplerKind) -> f64 {
        match self {
            Self::Fixed(b) => b,
            Self::FromSampler => match sampler.fourth_moment() {
                FourthMoment::Finite(m4) => m4 - 3.0,
                FourthMoment::Infinite => 0.0,
            },
        }
    }

    fn moments(self, sampler: SamplerKind) -> Result<ModelMoments> {
        ModelMoments::new(1, self.beta(sampler))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub m0: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellOutcome {
    Rejection { rates: Vec<RejectionRate> },
    Noise { mae_c: f64, mse_c: f64, mae_raw: f64, mse_raw: f64, mean_c: f64, coverage: f64 },
    Size { statistic: RootsStatistic, size: f64 },
    Statistics { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub p: usize,
    pub n: usize,
    pub c_n: f64,
    /// Replicates whose computation failed; they are left out of the rates.
    pub failures: usize,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub experiment: Experiment,
    pub model: ModelKind,
    pub sampler: SamplerKind,
    pub reps: usize,
    pub seed: u64,
    pub beta: f64,
    pub cells: Vec<McCell>,
}

impl McResult {
    pub fn cell(&self, p: usize, n: usize) -> Option<&McCell> {
        self.cells.iter().find(|c| c.p == p && c.n == n)
    }

    /// One row per cell.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let metrics = self.cells.first().map(|c| metric_pairs(&c.outcome)).unwrap_or_default();
        let mut header = vec!["model".to_string(), "sampler".into(), "p".into(), "n".into(), "c_n".into(), "reps".into(), "failures".into()];
        header.extend(metrics.iter().map(|(k, _)| k.clone()));
        w.write_record(&header).map_err(csv_err)?;
        for c in &self.cells {
            let mut row = vec![
                self.model.name().to_string(),
                self.sampler.name().to_string(),
                c.p.to_string(),
                c.n.to_string(),
                c.c_n.to_string(),
                self.reps.to_string(),
                c.failures.to_string(),
            ];
            row.extend(metric_pairs(&c.outcome).into_iter().map(|(_, v)| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        finish(w)
    }

    /// `experiment, model, sampler, p, n, c_n, metric, value` rows for plotting.
    pub fn to_long_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["experiment", "model", "sampler", "p", "n", "c_n", "metric", "value"]).map_err(csv_err)?;
        for c in &self.cells {
            for (k, v) in metric_pairs(&c.outcome) {
                w.write_record([
                    self.experiment.name(),
                    self.model.name(),
                    self.sampler.name(),
                    &c.p.to_string(),
                    &c.n.to_string(),
                    &c.c_n.to_string(),
                    &k,
                    &v.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        finish(w)
    }
}

fn metric_pairs(o: &CellOutcome) -> Vec<(String, f64)> {
    match o {
        CellOutcome::Rejection { rates } => rates.iter().map(|r| (format!("reject_m0_{}", r.m0), r.rate)).collect(),
        CellOutcome::Noise { mae_c, mse_c, mae_raw, mse_raw, mean_c, coverage } => vec![
            ("mae_c".into(), *mae_c),
            ("mse_c".into(), *mse_c),
            ("mae_raw".into(), *mae_raw),
            ("mse_raw".into(), *mse_raw),
            ("mean_c".into(), *mean_c),
            ("coverage".into(), *coverage),
        ],
        CellOutcome::Size { statistic, size } => vec![(format!("size_{statistic:?}"), *size)],
        CellOutcome::Statistics { values } => values.iter().enumerate().map(|(i, v)| (format!("rep_{i}"), *v)).collect(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::invalid("at least one replicate is needed"));
    }
    Ok(())
}

/// Run `f` on every replicate of one cell, in parallel, collecting in
/// replicate order.
fn replicates<T: Send>(
    reps: usize,
    seed: u64,
    tag: u64,
    f: impl Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
) -> Vec<Result<T>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| f(&mut replicate_rng(seed, tag, r)))
        .collect()
}

/// Order in which true spikes are hypothesized: large spikes first, then
/// small ones from the bottom up.
const ORACLE_ORDER: [(f64, Side); 6] = [
    (25.0, Side::Large),
    (16.0, Side::Large),
    (16.0, Side::Large),
    (0.1, Side::Small),
    (0.2, Side::Small),
    (0.2, Side::Small),
];

/// Test configuration for `M = m0` centred with the true spike values.
/// Hypothesized spikes that do not separate at `c_n` are treated as part of
/// the trace only; ranks beyond the six true spikes are taken from the top
/// with spike values estimated from the data.
pub fn oracle_config(spec: &EigenSpectrum, model: &PopulationModel, m0: usize, moments: ModelMoments) -> Result<SpikeTestConfig> {
    let s2 = model.sigma2();
    let c = spec.c_n();
    let bulk = DiscreteLsd::point_mass(s2)?;
    let hyp: Vec<Spike> = ORACLE_ORDER[..m0.min(ORACLE_ORDER.len())]
        .iter()
        .map(|&(a, side)| Spike { alpha: a * s2, multiplicity: 1, side })
        .collect();
    let (det, absorbed) = SpikeSpec::new(hyp)?.partition(c, &bulk);
    let extra = m0.saturating_sub(ORACLE_ORDER.len());
    let large = det.count(Side::Large);
    let ranks = SpikeRankSet::new(large + extra, det.count(Side::Small));
    let mut spikes = det.spikes().to_vec();
    if extra > 0 {
        let est = estimate_spike_values(spec, ranks, c, &bulk)?;
        let tail: Vec<_> = est.into_iter().filter(|e| e.rank > large && e.rank <= large + extra).collect();
        spikes.extend_from_slice(plug_in_spikes(&tail, c, &bulk)?.spikes());
    }
    let mut cfg = SpikeTestConfig::new(SpectralFn::Identity, ranks, bulk, SpikeSpec::new(spikes)?);
    cfg.absorbed = absorbed;
    cfg.moments = moments;
    cfg.alpha_level = NOMINAL_LEVEL;
    Ok(cfg)
}

/// Rejection rates of the `f = x` spike test for each hypothesized count.
pub fn run_size_power(
    model: ModelKind,
    sampler: SamplerKind,
    grid: &[(usize, usize)],
    m0s: &[usize],
    reps: usize,
    seed: u64,
    beta: BetaPolicy,
) -> Result<McResult> {
    check_reps(reps)?;
    if m0s.is_empty() {
        return Err(Error::invalid("no hypothesized spike counts"));
    }
    let moments = beta.moments(sampler)?;
    let mut cells = Vec::with_capacity(grid.len());
    for &(p, n) in grid {
        let pm = PopulationModel::new(model, p)?;
        if m0s.iter().any(|&m| 2 * m >= p) {
            return Err(Error::invalid(format!("hypothesized counts must stay below p/2 = {}", p / 2)));
        }
        let tag = cell_tag(Experiment::SizePower, model, sampler, p, n);
        let out = replicates(reps, seed, tag, |rng| {
            let spec = replicate_spectrum(&pm, sampler, n, rng)?;
            m0s.iter()
                .map(|&m0| Ok(test_spikes(&spec, &oracle_config(&spec, &pm, m0, moments)?)?.reject()))
                .collect::<Result<Vec<bool>>>()
        });
        let ok: Vec<Vec<bool>> = out.into_iter().filter_map(|r| r.ok()).collect();
        let failures = reps - ok.len();
        let rates = m0s
            .iter()
            .enumerate()
            .map(|(i, &m0)| RejectionRate { m0, rate: fraction(ok.iter().map(|r| r[i])) })
            .collect();
        cells.push(McCell { p, n, c_n: p as f64 / n as f64, failures, outcome: CellOutcome::Rejection { rates } });
    }
    Ok(McResult { experiment: Experiment::SizePower, model, sampler, reps, seed, beta: moments.beta, cells })
}

fn fraction(it: impl Iterator<Item = bool>) -> f64 {
    let (mut k, mut n) = (0usize, 0usize);
    for b in it {
        k += b as usize;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        k as f64 / n as f64
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    crate::stats::pairwise_sum(&v) / v.len() as f64
}

/// MAE and MSE of the raw and corrected noise estimators against the true
/// noise level, with confidence-interval coverage.
pub fn run_noise_mc(
    model: ModelKind,
    sampler: SamplerKind,
    grid: &[(usize, usize)],
    reps: usize,
    seed: u64,
    beta: BetaPolicy,
) -> Result<McResult> {
    check_reps(reps)?;
    let moments = beta.moments(sampler)?;
    let opts = NoiseOptions { moments, alpha_level: NOMINAL_LEVEL, ..NoiseOptions::default() };
    let spec_model = NoiseModelSpec::with_spikes(&MODEL_SPIKES)?;
    let mut cells = Vec::with_capacity(grid.len());
    for &(p, n) in grid {
        let pm = PopulationModel::new(model, p)?;
        let truth = pm.sigma2();
        let c = p as f64 / n as f64;
        let (det, _) = spec_model.partition(c);
        let ranks = SpikeRankSet::new(det.count(Side::Large), det.count(Side::Small));
        let tag = cell_tag(Experiment::Noise, model, sampler, p, n);
        let out = replicates(reps, seed, tag, |rng| {
            let spec = replicate_spectrum(&pm, sampler, n, rng)?;
            sigma_hat_corrected(&spec, &spec_model, ranks, &opts)
        });
        let ok: Vec<_> = out.into_iter().filter_map(|r| r.ok()).collect();
        let failures = reps - ok.len();
        let outcome = CellOutcome::Noise {
            mae_c: mean(ok.iter().map(|e| (e.sigma2_c - truth).abs())),
            mse_c: mean(ok.iter().map(|e| (e.sigma2_c - truth).powi(2))),
            mae_raw: mean(ok.iter().map(|e| (e.sigma2_hat - truth).abs())),
            mse_raw: mean(ok.iter().map(|e| (e.sigma2_hat - truth).powi(2))),
            mean_c: mean(ok.iter().map(|e| e.sigma2_c)),
            coverage: fraction(ok.iter().map(|e| e.ci_lower <= truth && truth <= e.ci_upper)),
        };
        cells.push(McCell { p, n, c_n: c, failures, outcome });
    }
    Ok(McResult { experiment: Experiment::Noise, model, sampler, reps, seed, beta: moments.beta, cells })
}

/// Empirical size of a smallest-roots test under the model's own null,
/// with the true noise level.
pub fn run_smallest_roots_size(
    model: ModelKind,
    sampler: SamplerKind,
    statistic: RootsStatistic,
    grid: &[(usize, usize)],
    reps: usize,
    seed: u64,
    beta: BetaPolicy,
) -> Result<McResult> {
    check_reps(reps)?;
    let moments = beta.moments(sampler)?;
    let mut cells = Vec::with_capacity(grid.len());
    for &(p, n) in grid {
        let pm = PopulationModel::new(model, p)?;
        let c = p as f64 / n as f64;
        if statistic != RootsStatistic::Tx && p >= n {
            return Err(Error::domain(format!("{statistic:?} needs p < n, got p = {p}, n = {n}")));
        }
        let mut cfg = SmallestRootsConfig::from_spikes(&MODEL_SPIKES, c, pm.sigma2())?;
        cfg.moments = moments;
        cfg.alpha_level = NOMINAL_LEVEL;
        let tag = cell_tag(Experiment::SmallestRoots, model, sampler, p, n) ^ statistic as u64;
        let out = replicates(reps, seed, tag, |rng| {
            let spec = replicate_spectrum(&pm, sampler, n, rng)?;
            Ok(smallest_roots_test(&spec, &cfg, statistic)?.decision.reject)
        });
        let ok: Vec<bool> = out.into_iter().filter_map(|r| r.ok()).collect();
        let failures = reps - ok.len();
        let size = fraction(ok.into_iter());
        cells.push(McCell { p, n, c_n: c, failures, outcome: CellOutcome::Size { statistic, size } });
    }
    Ok(McResult { experiment: Experiment::SmallestRoots, model, sampler, reps, seed, beta: moments.beta, cells })
}

/// Raw `f = x` spike-test statistics at the true count, for normality checks.
pub fn collect_spike_statistics(
    model: ModelKind,
    sampler: SamplerKind,
    p: usize,
    n: usize,
    m0: usize,
    reps: usize,
    seed: u64,
    beta: BetaPolicy,
) -> Result<McResult> {
    check_reps(reps)?;
    let moments = beta.moments(sampler)?;
    let pm = PopulationModel::new(model, p)?;
    let tag = cell_tag(Experiment::Statistics, model, sampler, p, n);
    let out = replicates(reps, seed, tag, |rng| {
        let spec = replicate_spectrum(&pm, sampler, n, rng)?;
        Ok(test_spikes(&spec, &oracle_config(&spec, &pm, m0, moments)?)?.statistic())
    });
    let values: Vec<f64> = out.into_iter().filter_map(|r| r.ok()).collect();
    let failures = reps - values.len();
    let cell = McCell { p, n, c_n: p as f64 / n as f64, failures, outcome: CellOutcome::Statistics { values } };
    Ok(McResult { experiment: Experiment::Statistics, model, sampler, reps, seed, beta: moments.beta, cells: vec![cell] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        use rand::Rng;
        let a: u64 = replicate_rng(1, 2, 0).next_u64();
        let b: u64 = replicate_rng(1, 2, 1).next_u64();
        let a2: u64 = replicate_rng(1, 2, 0).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn oracle_splits() {
        let pm = PopulationModel::new(ModelKind::Model1, 100).unwrap();
        let spec = EigenSpectrum::from_eigenvalues((1..=100).map(|i| 40.0 / i as f64).collect(), 200).unwrap();
        let m = ModelMoments::real();
        assert_eq!(oracle_config(&spec, &pm, 3, m).unwrap().ranks, SpikeRankSet::new(3, 0));
        assert_eq!(oracle_config(&spec, &pm, 5, m).unwrap().ranks, SpikeRankSet::new(3, 2));
        let seven = oracle_config(&spec, &pm, 7, m).unwrap();
        assert_eq!(seven.ranks, SpikeRankSet::new(4, 3));
        assert_eq!(seven.spikes.total(), 7);
        // small spikes do not separate at c = 2
        let wide = EigenSpectrum::from_eigenvalues((1..=100).map(|i| 40.0 / i as f64).collect(), 50).unwrap();
        let cfg = oracle_config(&wide, &pm, 6, m).unwrap();
        assert_eq!(cfg.ranks, SpikeRankSet::new(3, 0));
        assert_eq!(cfg.absorbed.total(), 3);
    }

    #[test]
    fn small_runs_are_deterministic() {
        let a = run_size_power(ModelKind::Model2, SamplerKind::Gaussian, &[(20, 40)], &[6], 16, 9, BetaPolicy::FromSampler).unwrap();
        let b = run_size_power(ModelKind::Model2, SamplerKind::Gaussian, &[(20, 40)], &[6], 16, 9, BetaPolicy::FromSampler).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.to_csv().unwrap().lines().count() == 2);
        assert!(a.to_long_csv().unwrap().contains("reject_m0_6"));
    }

    #[test]
    fn beta_policy() {
        assert_eq!(BetaPolicy::FromSampler.beta(SamplerKind::Gamma), 1.5);
        assert_eq!(BetaPolicy::FromSampler.beta(SamplerKind::ScaledT4), 0.0);
        assert_eq!(BetaPolicy::Fixed(0.3).beta(SamplerKind::Gaussian), 0.3);
    }
}
