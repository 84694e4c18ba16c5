//! Interference-channel instances, dataset generators and the binary dataset
//! format.
//!
//! Entry `(k, j)` of the channel matrix is the coefficient from transmitter
//! `j` to receiver `k`, so the diagonal holds the direct links.

mod format;
mod generate;

pub use format::{load_dataset, read_dataset, save_dataset, write_dataset, FORMAT_VERSION, MAGIC};
pub use generate::{
    dbm_to_watts, gen_gaussian, gen_geometric, gen_geometric_var_distance, instance_rng,
    path_loss_db, GaussianConfig, GeometricConfig, PathLossBase, VarDistanceConfig,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("instance invariant violated: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a dataset file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported dataset format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("malformed dataset header: {0}")]
    Header(String),
    #[error("record {record}: {reason}")]
    Record { record: usize, reason: String },
}

/// Transmitter and receiver positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub tx: Vec<[f64; 2]>,
    pub rx: Vec<[f64; 2]>,
}

impl Geometry {
    /// Distance from transmitter `j` to receiver `k`.
    pub fn distance(&self, k: usize, j: usize) -> f64 {
        let (r, t) = (self.rx[k], self.tx[j]);
        ((r[0] - t[0]).powi(2) + (r[1] - t[1]).powi(2)).sqrt()
    }
}

/// One realization of the K-user interference channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInstance {
    k: usize,
    /// Row-major `k×k`, entry `(k, j)` from transmitter `j` to receiver `k`.
    h: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub noise: Vec<f64>,
    pub p_max: f64,
    pub geometry: Option<Geometry>,
}

impl ChannelInstance {
    pub fn new(
        k: usize,
        h: Vec<Complex64>,
        weights: Vec<f64>,
        noise: Vec<f64>,
        p_max: f64,
        geometry: Option<Geometry>,
    ) -> Result<Self, ChannelError> {
        let c = Self {
            k,
            h,
            weights,
            noise,
            p_max,
            geometry,
        };
        c.validate()?;
        Ok(c)
    }

    /// Real-valued channel from a row-major gain-amplitude matrix with unit
    /// weights, unit noise and unit power budget.
    pub fn from_real(k: usize, h: &[f64]) -> Result<Self, ChannelError> {
        Self::new(
            k,
            h.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            vec![1.0; k],
            vec![1.0; k],
            1.0,
            None,
        )
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let k = self.k;
        if k == 0 {
            return Err(ChannelError::Invariant("K must be at least 1".into()));
        }
        if self.h.len() != k * k || self.weights.len() != k || self.noise.len() != k {
            return Err(ChannelError::Invariant(format!(
                "field lengths do not match K={k}"
            )));
        }
        if let Some(i) = self
            .h
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(ChannelError::Invariant(format!(
                "non-finite channel entry ({}, {})",
                i / k,
                i % k
            )));
        }
        if let Some(i) = self
            .noise
            .iter()
            .position(|&s| !(s > 0.0) || !s.is_finite())
        {
            return Err(ChannelError::Invariant(format!(
                "noise power {i} must be positive"
            )));
        }
        if let Some(i) = self
            .weights
            .iter()
            .position(|&w| !(w >= 0.0) || !w.is_finite())
        {
            return Err(ChannelError::Invariant(format!(
                "weight {i} must be non-negative"
            )));
        }
        if !(self.p_max > 0.0) || !self.p_max.is_finite() {
            return Err(ChannelError::Invariant("p_max must be positive".into()));
        }
        if let Some(g) = &self.geometry {
            if g.tx.len() != k || g.rx.len() != k {
                return Err(ChannelError::Invariant("geometry length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self, k: usize, j: usize) -> Complex64 {
        self.h[k * self.k + j]
    }

    pub fn set_h(&mut self, k: usize, j: usize, value: Complex64) {
        self.h[k * self.k + j] = value;
    }

    pub fn h_matrix(&self) -> &[Complex64] {
        &self.h
    }

    /// `|h_kj|`.
    pub fn magnitude(&self, k: usize, j: usize) -> f64 {
        self.h(k, j).norm()
    }

    /// `|h_kj|²`.
    pub fn gain(&self, k: usize, j: usize) -> f64 {
        self.h(k, j).norm_sqr()
    }

    /// Row-major `|h_kj|²` matrix.
    pub fn gains(&self) -> Vec<f64> {
        self.h.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.h.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorTag {
    Gaussian,
    Geometric,
    GeometricVarDistance,
}

impl GeneratorTag {
    pub fn code(self) -> u8 {
        match self {
            Self::Gaussian => 0,
            Self::Geometric => 1,
            Self::GeometricVarDistance => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Gaussian),
            1 => Some(Self::Geometric),
            2 => Some(Self::GeometricVarDistance),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Geometric => "geometric",
            Self::GeometricVarDistance => "geometric-var-distance",
        }
    }
}

impl std::fmt::Display for GeneratorTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An ordered collection of instances sharing `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<ChannelInstance>,
    pub seed: u64,
    pub generator: GeneratorTag,
}

impl Dataset {
    pub fn new(
        instances: Vec<ChannelInstance>,
        seed: u64,
        generator: GeneratorTag,
    ) -> Result<Self, ChannelError> {
        if let Some(first) = instances.first() {
            let k = first.k();
            if let Some(i) = instances.iter().position(|c| c.k() != k) {
                return Err(ChannelError::Record {
                    record: i,
                    reason: format!("K={} differs from K={k}", instances[i].k()),
                });
            }
        }
        Ok(Self {
            instances,
            seed,
            generator,
        })
    }

    pub fn k(&self) -> usize {
        self.instances.first().map_or(0, ChannelInstance::k)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn has_geometry(&self) -> bool {
        !self.instances.is_empty() && self.instances.iter().all(|c| c.geometry.is_some())
    }

    /// Splits off the trailing `fraction` of instances, returning
    /// `(head, tail)`. A positive fraction keeps at least one instance in
    /// each part when the dataset has two or more.
    pub fn split_tail(&self, fraction: f64) -> (Dataset, Dataset) {
        let n = self.len();
        let mut tail = ((n as f64) * fraction).round() as usize;
        if fraction <= 0.0 {
            tail = 0;
        } else if n >= 2 {
            tail = tail.clamp(1, n - 1);
        } else {
            tail = 0;
        }
        let head = n - tail;
        let mk = |v: &[ChannelInstance]| Dataset {
            instances: v.to_vec(),
            seed: self.seed,
            generator: self.generator,
        };
        (mk(&self.instances[..head]), mk(&self.instances[head..]))
    }

    pub fn subset(&self, n: usize) -> Dataset {
        Dataset {
            instances: self.instances[..n.min(self.len())].to_vec(),
            seed: self.seed,
            generator: self.generator,
        }
    }
}
