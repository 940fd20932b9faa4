use serde::{Deserialize, Serialize};

use super::lsd::DiscreteLsd;
use super::spike_map::phi_derivative;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Large,
    Small,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Large => "large",
            Side::Small => "small",
        }
    }
}

/// A population spike `alpha` with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub alpha: f64,
    pub multiplicity: usize,
    pub side: Side,
}

/// Ordered list of population spikes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpikeSpec {
    spikes: Vec<Spike>,
}

impl SpikeSpec {
    pub fn new(spikes: Vec<Spike>) -> Result<Self> {
        for s in &spikes {
            if !(s.alpha.is_finite() && s.alpha > 0.0) {
                return Err(Error::invalid(format!("spike {} must be positive and finite", s.alpha)));
            }
            if s.multiplicity == 0 {
                return Err(Error::invalid("spike multiplicity must be at least 1"));
            }
        }
        Ok(Self { spikes })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Assign sides by comparing with the bulk atom range. Spikes inside the
    /// range are rejected.
    pub fn classify(pairs: &[(f64, usize)], h: &DiscreteLsd) -> Result<Self> {
        let (lo, hi) = h.range();
        let mut spikes = Vec::with_capacity(pairs.len());
        for &(alpha, multiplicity) in pairs {
            let side = if alpha > hi {
                Side::Large
            } else if alpha < lo {
                Side::Small
            } else {
                return Err(Error::SpikeInsideBulk { alpha, lower: lo, upper: hi });
            };
            spikes.push(Spike { alpha, multiplicity, side });
        }
        Self::new(spikes)
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    /// Total multiplicity `M`.
    pub fn total(&self) -> usize {
        self.spikes.iter().map(|s| s.multiplicity).sum()
    }

    pub fn count(&self, side: Side) -> usize {
        self.spikes.iter().filter(|s| s.side == side).map(|s| s.multiplicity).sum()
    }

    /// Multiply every spike by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            spikes: self.spikes.iter().map(|sp| Spike { alpha: sp.alpha * s, ..*sp }).collect(),
        }
    }

    /// Every spike lies on its declared side of the bulk atoms, and distinct
    /// spikes satisfy `|alpha_k / alpha_i - 1| > separation`.
    pub fn check_against(&self, h: &DiscreteLsd, separation: f64) -> Result<()> {
        let (lo, hi) = h.range();
        for s in &self.spikes {
            let ok = match s.side {
                Side::Large => s.alpha > hi,
                Side::Small => s.alpha < lo,
            };
            if !ok {
                return Err(Error::SpikeInsideBulk { alpha: s.alpha, lower: lo, upper: hi });
            }
        }
        for (i, a) in self.spikes.iter().enumerate() {
            for b in &self.spikes[i + 1..] {
                if (a.alpha / b.alpha - 1.0).abs() <= separation {
                    return Err(Error::invalid(format!(
                        "spikes {} and {} violate the separation margin {separation}",
                        a.alpha, b.alpha
                    )));
                }
            }
        }
        Ok(())
    }

    /// Split into spikes that produce outlying sample eigenvalues at ratio
    /// `c` (the spike map is increasing there) and spikes absorbed by the bulk.
    pub fn partition(&self, c: f64, h: &DiscreteLsd) -> (SpikeSpec, SpikeSpec) {
        let (lo, hi) = h.range();
        // a critical point (where clamped estimates land) counts as separated
        let (det, abs): (Vec<Spike>, Vec<Spike>) = self.spikes.iter().partition(|s| {
            (s.alpha > hi || s.alpha < lo) && phi_derivative(s.alpha, c, h) > -1e-12
        });
        (SpikeSpec { spikes: det }, SpikeSpec { spikes: abs })
    }
}
