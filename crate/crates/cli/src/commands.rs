use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use spiked::mp::{DiscreteLsd, ModelMoments, SpectralFn, SpikeSpec};
use spiked::noise::{noise_from_data, NoiseOptions};
use spiked::report::{
    Envelope, NoiseOutput, ReportBody, RunManifest, SmallestOutput, SpikeTestOutput,
};
use spiked::roots::{smallest_roots_test, RootsStatistic, SmallestRootsConfig};
use spiked::sim::{self, BetaPolicy, ModelKind, SamplerKind};
use spiked::spectrum::{parse_csv, spectrum_from_data, Header};
use spiked::spike_test::{
    data_config, estimate_spike_count, estimate_spike_values, plug_in_spikes, split_for, test_spikes, ScanTemplate,
    SpikeEstimate, SplitPolicy,
};
use spiked::syntax::{parse_bulk, parse_counts, parse_grid, parse_sigma2, parse_split, Sigma2Arg};
use spiked::{EigenSpectrum, Error, Result, SpikeRankSet};

use crate::args::*;

pub fn run(cmd: Command) -> Result<String> {
    match cmd {
        Command::TestSpikes(a) => test_spikes_cmd(&a),
        Command::EstimateM(a) => estimate_m_cmd(&a),
        Command::EstimateNoise(a) => estimate_noise_cmd(&a),
        Command::TestSmallest(a) => test_smallest_cmd(&a),
        Command::Simulate(a) => simulate_cmd(&a),
    }
}

fn timestamp() -> Result<u64> {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        return v
            .trim()
            .parse()
            .map_err(|_| Error::Syntax { what: "SOURCE_DATE_EPOCH", message: format!("{v:?} is not a timestamp") });
    }
    Ok(SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

fn manifest(command: &str, args: &impl Serialize, seed: Option<u64>, digest: Option<String>) -> Result<RunManifest> {
    let value = serde_json::to_value(args).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut flags = BTreeMap::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let s = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Null => continue,
                other => other.to_string(),
            };
            flags.insert(k, s);
        }
    }
    Ok(RunManifest {
        command: command.to_string(),
        flags,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        input_sha256: digest,
        timestamp: timestamp()?,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn load(d: &DataArgs) -> Result<(EigenSpectrum, String)> {
    let bytes = std::fs::read(&d.csv)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", d.csv.display()))))?;
    let digest = hex(&Sha256::digest(&bytes));
    let header = match d.header {
        HeaderArg::Auto => Header::Auto,
        HeaderArg::Yes => Header::Present,
        HeaderArg::No => Header::Absent,
    };
    let data = parse_csv(&bytes[..], header, d.standardize)?;
    Ok((spectrum_from_data(&data, !d.no_center)?, digest))
}

fn moments(q: u8, beta: f64) -> Result<ModelMoments> {
    ModelMoments::new(q, beta)
}

fn f_of(f: FArg) -> SpectralFn {
    match f {
        FArg::X => SpectralFn::Identity,
        FArg::Log => SpectralFn::Log,
    }
}

fn ranks_for(split: Option<&str>, m: usize) -> Result<SpikeRankSet> {
    match split {
        None => Ok(SpikeRankSet::new(m, 0)),
        Some(s) => {
            let r = parse_split(s)?;
            if r.total() != m {
                return Err(Error::Invalid(format!("split {s} does not add up to {m}")));
            }
            Ok(r)
        }
    }
}

fn write_files(dir: Option<&Path>, files: &[(&str, &str)]) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn finish(env: Envelope, dir: Option<&Path>, extra: &[(&str, &str)]) -> Result<String> {
    let json = env.to_json()?;
    let mut files = vec![("report.json", json.as_str())];
    files.extend_from_slice(extra);
    write_files(dir, &files)?;
    Ok(json)
}

fn test_spikes_cmd(a: &TestSpikesArgs) -> Result<String> {
    let (spec, digest) = load(&a.data)?;
    let bulk = parse_bulk(&a.model.bulk)?.with_sigma2(a.sigma2)?;
    let ranks = match &a.split {
        Some(s) => ranks_for(Some(s), a.m0)?,
        None => split_for(SplitPolicy::EdgeGuided, &spec, a.m0, &bulk),
    };
    let (cfg, estimates) =
        data_config(&spec, f_of(a.f), ranks, &bulk, moments(a.model.q, a.model.beta)?, a.model.alpha)?;
    let report = test_spikes(&spec, &cfg)?;
    let env = Envelope::new(
        manifest("test-spikes", a, None, Some(digest))?,
        ReportBody::TestSpikes(SpikeTestOutput { report, estimates }),
    );
    finish(env, a.data.out.as_deref(), &[])
}

fn estimate_m_cmd(a: &EstimateMArgs) -> Result<String> {
    let (spec, digest) = load(&a.data)?;
    let template = ScanTemplate {
        f: f_of(a.f),
        bulk: parse_bulk(&a.model.bulk)?.with_sigma2(a.sigma2)?,
        moments: moments(a.model.q, a.model.beta)?,
        alpha_level: a.model.alpha,
        policy: match a.policy {
            PolicyArg::Edge => SplitPolicy::EdgeGuided,
            PolicyArg::Large => SplitPolicy::LargeOnly,
        },
    };
    let scan = estimate_spike_count(&spec, &template, a.m_max)?;
    let table = scan_table(&scan);
    let env = Envelope::new(manifest("estimate-m", a, None, Some(digest))?, ReportBody::EstimateM(scan));
    finish(env, a.data.out.as_deref(), &[("scan.csv", &table)])
}

/// Rows: M0, p-value, then the estimate and its spike values.
fn scan_table(scan: &spiked::spike_test::ScanResult) -> String {
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(",");
    let mut out = String::new();
    out.push_str(&format!("M0,{}\n", join(&mut scan.steps.iter().map(|s| s.m0.to_string()))));
    out.push_str(&format!("p_value,{}\n", join(&mut scan.steps.iter().map(|s| format!("{:.4}", s.p_value)))));
    out.push_str(&format!("estimated_number,{}\n", scan.m_hat));
    if let Some(step) = scan.steps.iter().find(|s| s.m0 == scan.m_hat) {
        let vals = join(&mut step.estimates.iter().map(|e| match e.alpha {
            Some(a) => format!("{a:.4}"),
            None => "NA".to_string(),
        }));
        out.push_str(&format!("estimated_spikes,{vals}\n"));
    }
    out
}

fn spike_estimates(spec: &EigenSpectrum, ranks: SpikeRankSet, spikes: &SpikeSpec) -> Vec<SpikeEstimate> {
    ranks
        .ranks(spec.p())
        .into_iter()
        .zip(spikes.spikes())
        .map(|(rank, s)| SpikeEstimate { rank, eigenvalue: spec.rank(rank), side: s.side, alpha: Some(s.alpha) })
        .collect()
}

fn estimate_noise_cmd(a: &EstimateNoiseArgs) -> Result<String> {
    let (spec, digest) = load(&a.data)?;
    let ranks = ranks_for(a.split.as_deref(), a.m)?;
    let bulk = parse_bulk(&a.model.bulk)?;
    let opts = NoiseOptions {
        moments: moments(a.model.q, a.model.beta)?,
        alpha_level: a.model.alpha,
        iterations: a.iterations.max(1),
        ..NoiseOptions::default()
    };
    let (estimate, model) = noise_from_data(&spec, ranks, &bulk, &opts)?;
    let estimates = spike_estimates(&spec, ranks, &model.spikes);
    let env = Envelope::new(
        manifest("estimate-noise", a, None, Some(digest))?,
        ReportBody::EstimateNoise(NoiseOutput { estimate, ranks, estimates }),
    );
    finish(env, a.data.out.as_deref(), &[])
}

fn test_smallest_cmd(a: &TestSmallestArgs) -> Result<String> {
    let (spec, digest) = load(&a.data)?;
    let ranks = ranks_for(a.split.as_deref(), a.m)?;
    let mom = moments(a.q, a.beta)?;
    let unit = DiscreteLsd::point_mass(1.0)?;
    let (sigma2, spikes, noise) = match parse_sigma2(&a.sigma2)? {
        Sigma2Arg::Auto => {
            let opts = NoiseOptions { moments: mom, alpha_level: a.alpha, ..NoiseOptions::default() };
            let (est, model) = noise_from_data(&spec, ranks, &unit, &opts)?;
            (est.sigma2_c, model.spikes, Some(est))
        }
        Sigma2Arg::Value(s2) => {
            let scaled = spec.scaled(s2);
            let est = estimate_spike_values(&scaled, ranks, scaled.c_n(), &unit)?;
            (s2, plug_in_spikes(&est, scaled.c_n(), &unit)?, None)
        }
    };
    if spikes.spikes().iter().any(|s| s.alpha == 1.0) {
        return Err(Error::Domain("an estimated spike equals the noise level".into()));
    }
    let cfg = SmallestRootsConfig {
        ranks,
        spikes,
        absorbed: SpikeSpec::empty(),
        sigma2,
        moments: mom,
        alpha_level: a.alpha,
    };
    let kind = stat_of(a.stat);
    let report = smallest_roots_test(&spec, &cfg, kind)?;
    let env = Envelope::new(
        manifest("test-smallest", a, None, Some(digest))?,
        ReportBody::TestSmallest(SmallestOutput { report, noise }),
    );
    finish(env, a.data.out.as_deref(), &[])
}

fn stat_of(s: StatArg) -> RootsStatistic {
    match s {
        StatArg::TL => RootsStatistic::TL,
        StatArg::Tx => RootsStatistic::Tx,
        StatArg::Tplr => RootsStatistic::Tplr,
    }
}

fn simulate_cmd(a: &SimulateArgs) -> Result<String> {
    let model: ModelKind = a.model.parse()?;
    let sampler: SamplerKind = a.sampler.parse()?;
    let grid = parse_grid(&a.grid)?;
    let beta = if a.beta.trim().eq_ignore_ascii_case("auto") {
        BetaPolicy::FromSampler
    } else {
        let b: f64 = a
            .beta
            .trim()
            .parse()
            .map_err(|_| Error::Syntax { what: "beta", message: format!("{:?} is neither a number nor auto", a.beta) })?;
        BetaPolicy::Fixed(b)
    };
    let result = match a.experiment {
        Experiment::Size => sim::run_size_power(model, sampler, &grid, &parse_counts(&a.m0)?, a.reps, a.seed, beta)?,
        Experiment::Noise => {
            if !matches!(model, ModelKind::Model3 | ModelKind::Model4) {
                return Err(Error::Invalid("noise experiments use model3 or model4".into()));
            }
            sim::run_noise_mc(model, sampler, &grid, a.reps, a.seed, beta)?
        }
        Experiment::Roots => {
            if !matches!(model, ModelKind::Model1 | ModelKind::Model2) {
                return Err(Error::Invalid("smallest-root experiments use model1 or model2".into()));
            }
            sim::run_smallest_roots_size(model, sampler, stat_of(a.stat), &grid, a.reps, a.seed, beta)?
        }
    };
    let csv = result.to_csv()?;
    let long = result.to_long_csv()?;
    let env = Envelope::new(manifest("simulate", a, Some(a.seed), None)?, ReportBody::Simulation(result));
    finish(env, Some(&a.out), &[("results.csv", &csv), ("results_long.csv", &long)])
}

