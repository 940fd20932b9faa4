//! Versioned JSON envelopes for command output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseEstimate;
use crate::roots::{RootsReport, RootsStatistic};
use crate::sim::McResult;
use crate::spike_test::{ScanResult, SpikeEstimate, TestReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to rerun a command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    /// SHA-256 of the input file, hex encoded.
    pub input_sha256: Option<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTestOutput {
    #[serde(flatten)]
    pub report: TestReport,
    pub estimates: Vec<SpikeEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseOutput {
    #[serde(flatten)]
    pub estimate: NoiseEstimate,
    pub ranks: crate::spectrum::SpikeRankSet,
    pub estimates: Vec<SpikeEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallestOutput {
    #[serde(flatten)]
    pub report: RootsReport,
    /// Present when the noise level was estimated first.
    pub noise: Option<NoiseEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "snake_case")]
pub enum ReportBody {
    TestSpikes(SpikeTestOutput),
    EstimateM(ScanResult),
    EstimateNoise(NoiseOutput),
    TestSmallest(SmallestOutput),
    Simulation(McResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema_version: u32,
    pub manifest: RunManifest,
    #[serde(flatten)]
    pub body: ReportBody,
}

impl Envelope {
    pub fn new(manifest: RunManifest, body: ReportBody) -> Self {
        Self { schema_version: SCHEMA_VERSION, manifest, body }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(format!("cannot serialise report: {e}")))
    }
}

/// Parse a report, rejecting other schema versions.
pub fn parse_report(s: &str) -> Result<Envelope> {
    let env: Envelope =
        serde_json::from_str(s).map_err(|e| Error::Syntax { what: "report", message: e.to_string() })?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(Error::Syntax {
            what: "report",
            message: format!("schema version {} is not {SCHEMA_VERSION}", env.schema_version),
        });
    }
    Ok(env)
}

/// The test statistic rebuilt from the reported terms, for audit.
pub fn recompute_statistic(body: &ReportBody) -> Option<f64> {
    match body {
        ReportBody::TestSpikes(o) => {
            let r = &o.report;
            Some((r.nonspiked_sum - r.terms.b - r.terms.mu) / r.terms.nu.sqrt())
        }
        ReportBody::TestSmallest(o) => roots_statistic(&o.report),
        _ => None,
    }
}

pub fn roots_statistic(r: &RootsReport) -> Option<f64> {
    match r.kind {
        RootsStatistic::Tx => Some((r.nonspiked_sum - r.b_x - r.mu_x) / r.nu_x.sqrt()),
        RootsStatistic::TL => {
            let k = (r.p - r.flagged) as f64;
            let b_x = r.b_x_unit?;
            Some((r.pseudo_lr? - (b_x / k).ln() + (r.b_log_unit? + r.mu_log?) / k) / r.nu_l?.sqrt())
        }
        RootsStatistic::Tplr => Some(r.n as f64 * (r.p - r.flagged) as f64 * r.pseudo_lr?),
    }
}
