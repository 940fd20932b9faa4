//! Population models and samplers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::FourthMoment;
use crate::spectrum::DataMatrix;

/// Spikes shared by every model, in units of the noise level.
pub const MODEL_SPIKES: [(f64, usize); 4] = [(25.0, 1), (16.0, 2), (0.2, 2), (0.1, 1)];

/// Models 1 and 2 have unit noise, 3 and 4 have noise level 4. Even models
/// hide the spectrum behind a Haar rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Model1,
    Model2,
    Model3,
    Model4,
}

impl ModelKind {
    pub fn sigma2(self) -> f64 {
        match self {
            Self::Model1 | Self::Model2 => 1.0,
            Self::Model3 | Self::Model4 => 4.0,
        }
    }

    pub fn rotated(self) -> bool {
        matches!(self, Self::Model2 | Self::Model4)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Model1 => "model1",
            Self::Model2 => "model2",
            Self::Model3 => "model3",
            Self::Model4 => "model4",
        }
    }

    fn code(self) -> u64 {
        self as u64 + 1
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "model1" | "1" => Ok(Self::Model1),
            "model2" | "2" => Ok(Self::Model2),
            "model3" | "3" => Ok(Self::Model3),
            "model4" | "4" => Ok(Self::Model4),
            _ => Err(Error::Syntax { what: "model", message: format!("unknown model {s:?}") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Gaussian,
    /// `Gamma(shape 4, scale 0.5) - 2`.
    #[serde(rename = "gamma_4_half_minus2")]
    Gamma,
    /// `t(4) / sqrt(2)`.
    ScaledT4,
}

impl SamplerKind {
    pub fn fourth_moment(self) -> FourthMoment {
        match self {
            Self::Gaussian => FourthMoment::Finite(3.0),
            Self::Gamma => FourthMoment::Finite(4.5),
            Self::ScaledT4 => FourthMoment::Infinite,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Gamma => "gamma_4_half_minus2",
            Self::ScaledT4 => "scaled_t4",
        }
    }

    fn code(self) -> u64 {
        self as u64 + 1
    }

    /// `n x p` matrix of i.i.d. standardized entries, filled column by column.
    pub fn matrix<R: Rng + ?Sized>(self, n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
        match self {
            Self::Gaussian => DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng)),
            Self::Gamma => {
                let g = Gamma::new(4.0, 0.5).expect("valid gamma");
                DMatrix::from_fn(n, p, |_, _| g.sample(rng) - 2.0)
            }
            Self::ScaledT4 => {
                let t = StudentT::new(4.0).expect("valid t");
                let s = std::f64::consts::FRAC_1_SQRT_2;
                DMatrix::from_fn(n, p, |_, _| s * t.sample(rng))
            }
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "gamma" | "gamma_4_half_minus2" => Ok(Self::Gamma),
            "t4" | "scaled_t4" => Ok(Self::ScaledT4),
            _ => Err(Error::Syntax { what: "sampler", message: format!("unknown sampler {s:?}") }),
        }
    }
}

/// One of the four models at dimension `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    pub kind: ModelKind,
    pub p: usize,
}

impl PopulationModel {
    pub fn new(kind: ModelKind, p: usize) -> Result<Self> {
        let m: usize = MODEL_SPIKES.iter().map(|s| s.1).sum();
        if p <= m + 1 {
            return Err(Error::invalid(format!("models need p > {}, got {p}", m + 1)));
        }
        Ok(Self { kind, p })
    }

    pub fn sigma2(&self) -> f64 {
        self.kind.sigma2()
    }

    /// Population eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let s2 = self.sigma2();
        let m: usize = MODEL_SPIKES.iter().map(|s| s.1).sum();
        let mut v = Vec::with_capacity(self.p);
        for &(a, k) in &MODEL_SPIKES[..2] {
            v.extend(std::iter::repeat(a * s2).take(k));
        }
        v.extend(std::iter::repeat(s2).take(self.p - m));
        for &(a, k) in &MODEL_SPIKES[2..] {
            v.extend(std::iter::repeat(a * s2).take(k));
        }
        v
    }

    pub(crate) fn tag(&self) -> u64 {
        self.kind.code()
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal moved into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Square-root factor `T_p` of the population covariance.
#[derive(Debug, Clone)]
pub struct Population {
    pub model: PopulationModel,
    pub factor: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

pub fn generate_population<R: Rng + ?Sized>(model: PopulationModel, rng: &mut R) -> Population {
    let eigenvalues = model.eigenvalues();
    let root = nalgebra::DVector::from_iterator(model.p, eigenvalues.iter().map(|l| l.sqrt()));
    let factor = if model.kind.rotated() {
        let u = haar_orthogonal(model.p, rng);
        let ud = &u * DMatrix::from_diagonal(&root);
        ud * u.transpose()
    } else {
        DMatrix::from_diagonal(&root)
    };
    Population { model, factor, eigenvalues }
}

/// Rows are `T_p x_j` for i.i.d. standardized `x_j`.
pub fn draw_sample<R: Rng + ?Sized>(
    pop: &Population,
    n: usize,
    sampler: SamplerKind,
    rng: &mut R,
) -> Result<DataMatrix> {
    let x = sampler.matrix(n, pop.model.p, rng);
    // T_p is symmetric, so X T_p has rows (T_p x_j)'
    DataMatrix::new(x * &pop.factor)
}

pub(crate) fn sampler_tag(s: SamplerKind) -> u64 {
    s.code()
}
