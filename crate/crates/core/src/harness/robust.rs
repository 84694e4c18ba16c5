//! Imperfect CSI: distance-based missing links and additive channel noise.
//!
//! Powers are always decided on the corrupted copy and scored on the true
//! channel.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{instance_rng, ChannelInstance, Dataset};
use crate::metrics::weighted_sum_rate;
use crate::model::IgcNetModel;

use super::eval::{mean, ratio};
use super::HarnessError;

/// Zeroes the `⌈ratio·K(K−1)⌉` cross links with the longest
/// transmitter-receiver distance. Direct links are kept.
pub fn partial_csi(
    c: &ChannelInstance,
    missing_ratio: f64,
) -> Result<ChannelInstance, HarnessError> {
    if !(0.0..1.0).contains(&missing_ratio) {
        return Err(HarnessError::Config(format!(
            "missing ratio {missing_ratio} outside [0, 1)"
        )));
    }
    let geo = c.geometry.as_ref().ok_or(HarnessError::MissingGeometry)?;
    let k = c.k();
    let mut cross: Vec<(usize, usize)> = (0..k)
        .flat_map(|r| (0..k).filter(move |&t| t != r).map(move |t| (r, t)))
        .collect();
    let drop = ((missing_ratio * cross.len() as f64) - 1e-9)
        .ceil()
        .max(0.0) as usize;
    // Longest first; stable sort keeps row-major order among equal distances.
    cross.sort_by(|&(r1, t1), &(r2, t2)| geo.distance(r2, t2).total_cmp(&geo.distance(r1, t1)));
    let mut out = c.clone();
    for &(r, t) in cross.iter().take(drop) {
        out.set_h(r, t, Complex64::new(0.0, 0.0));
    }
    Ok(out)
}

/// `Ĥ = H + N` with i.i.d. circular complex normal entries of variance
/// `eta·‖H‖_F²/K²`.
pub fn noisy_csi_with_rng(
    c: &ChannelInstance,
    eta: f64,
    rng: &mut impl Rng,
) -> Result<ChannelInstance, HarnessError> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(HarnessError::Config(format!(
            "eta {eta} must be finite and >= 0"
        )));
    }
    let mut out = c.clone();
    if eta == 0.0 {
        return Ok(out);
    }
    let k = c.k();
    let var = eta * c.frobenius_sq() / (k * k) as f64;
    let normal = Normal::new(0.0, (var / 2.0).sqrt()).expect("finite std");
    for r in 0..k {
        for t in 0..k {
            let n = Complex64::new(normal.sample(rng), normal.sample(rng));
            out.set_h(r, t, c.h(r, t) + n);
        }
    }
    Ok(out)
}

pub fn noisy_csi(
    c: &ChannelInstance,
    eta: f64,
    seed: u64,
) -> Result<ChannelInstance, HarnessError> {
    noisy_csi_with_rng(c, eta, &mut instance_rng(seed, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsiMode {
    Partial,
    Noisy,
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsiMode::Partial => "partial",
            CsiMode::Noisy => "noisy",
        })
    }
}

impl FromStr for CsiMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "partial" => Ok(CsiMode::Partial),
            "noisy" => Ok(CsiMode::Noisy),
            _ => Err(HarnessError::Config(format!("unknown CSI mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustRow {
    pub level: f64,
    /// Mean true rate with powers decided on clean CSI.
    pub clean_rate: f64,
    /// Mean true rate with powers decided on corrupted CSI.
    pub corrupted_rate: f64,
    pub relative: f64,
}

/// Relative performance of `model` at each corruption level. Noise for
/// instance `i` at level index `j` is drawn from stream `(seed + j, i)`.
pub fn robustness_curve(
    model: &IgcNetModel,
    data: &Dataset,
    mode: CsiMode,
    levels: &[f64],
    seed: u64,
) -> Result<Vec<RobustRow>, HarnessError> {
    if data.is_empty() || levels.is_empty() {
        return Err(HarnessError::Config("empty dataset or sweep".into()));
    }
    if mode == CsiMode::Partial && !data.has_geometry() {
        return Err(HarnessError::MissingGeometry);
    }
    let clean: Vec<f64> = data
        .instances
        .par_iter()
        .map(|c| Ok(weighted_sum_rate(c, &model.predict(c)?)))
        .collect::<Result<_, HarnessError>>()?;
    let clean_rate = mean(&clean);
    levels
        .iter()
        .enumerate()
        .map(|(j, &level)| {
            let rates: Vec<f64> = data
                .instances
                .par_iter()
                .enumerate()
                .map(|(i, truth)| {
                    let observed = match mode {
                        CsiMode::Partial => partial_csi(truth, level)?,
                        CsiMode::Noisy => noisy_csi_with_rng(
                            truth,
                            level,
                            &mut instance_rng(seed.wrapping_add(j as u64), i as u64),
                        )?,
                    };
                    let p = model.predict(&observed)?;
                    Ok(weighted_sum_rate(truth, &p))
                })
                .collect::<Result<_, HarnessError>>()?;
            let corrupted_rate = mean(&rates);
            Ok(RobustRow {
                level,
                clean_rate,
                corrupted_rate,
                relative: ratio(corrupted_rate, clean_rate),
            })
        })
        .collect()
}
