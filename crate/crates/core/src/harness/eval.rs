//! Per-method weighted sum rates, WMMSE-normalized ratios and timings.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{greedy_baseline, wmmse, WmmseConfig};
use crate::channel::{
    gen_gaussian, gen_geometric, gen_geometric_var_distance, Dataset, GaussianConfig, GeneratorTag,
    GeometricConfig, VarDistanceConfig,
};
use crate::graph::InterferenceGraph;
use crate::metrics::weighted_sum_rate;
use crate::model::IgcNetModel;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Wmmse,
    Igcnet,
    Greedy,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Wmmse => "wmmse",
            Method::Igcnet => "igcnet",
            Method::Greedy => "greedy",
        }
    }

    /// Parses a comma-separated list, dropping duplicates.
    pub fn parse_list(s: &str) -> Result<Vec<Method>, HarnessError> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(HarnessError::Config("empty method list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wmmse" => Ok(Method::Wmmse),
            "igcnet" => Ok(Method::Igcnet),
            "greedy" => Ok(Method::Greedy),
            _ => Err(HarnessError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub wmmse: WmmseConfig,
    /// Keep fraction for the greedy baseline, calibrated beforehand.
    pub greedy_fraction: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            wmmse: WmmseConfig::default(),
            greedy_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub k: usize,
    pub setting: String,
    pub data_seed: u64,
    pub instances: usize,
    pub threads: usize,
    pub build_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    /// Weighted sum rate per instance, bits/s/Hz.
    pub rates: Vec<f64>,
    /// Wall-clock forward or solve time per instance, milliseconds.
    pub times_ms: Vec<f64>,
    pub mean_rate: f64,
    /// `mean_rate / WMMSE mean_rate` on the same instances.
    pub ratio: f64,
}

impl MethodResult {
    pub fn mean_time_ms(&self) -> f64 {
        mean(&self.times_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub methods: Vec<MethodResult>,
    /// Mean WMMSE rate used as the normalizer.
    pub wmmse_mean: f64,
    pub greedy_fraction: Option<f64>,
}

impl EvalReport {
    pub fn get(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn ratio(&self, m: Method) -> Option<f64> {
        self.get(m).map(|r| r.ratio)
    }
}

/// Identifier of the build that produced a report.
pub fn build_id() -> String {
    format!(
        "{}-{}",
        env!("CARGO_PKG_VERSION"),
        option_env!("IGCNET_BUILD_ID").unwrap_or("dev")
    )
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// `num / den`, with `0/0 = 1` so identical all-zero scores normalize to 1.
pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 && num == 0.0 {
        1.0
    } else {
        num / den
    }
}

pub(crate) fn meta(data: &Dataset) -> ReportMeta {
    ReportMeta {
        k: data.k(),
        setting: data.generator.name().to_string(),
        data_seed: data.seed,
        instances: data.len(),
        threads: rayon::current_num_threads(),
        build_id: build_id(),
    }
}

/// Offset between a dataset's seed and its greedy calibration set's seed.
pub const CALIBRATION_SEED_OFFSET: u64 = 0x0c0f_fee0;

/// A fresh validation set drawn like `data` (same generator, `K` and
/// weighting, default generator parameters) for calibrating the greedy keep
/// fraction without touching `data` itself.
pub fn calibration_set(data: &Dataset, n: usize) -> Result<Dataset, HarnessError> {
    let k = data.k();
    let seed = data.seed.wrapping_add(CALIBRATION_SEED_OFFSET);
    Ok(match data.generator {
        GeneratorTag::Gaussian => {
            let weighted = data
                .instances
                .iter()
                .any(|c| c.weights.iter().any(|&w| w != 1.0));
            gen_gaussian(&GaussianConfig::new(k, n, seed, weighted))?
        }
        GeneratorTag::Geometric => gen_geometric(&GeometricConfig::new(k, n, seed))?,
        GeneratorTag::GeometricVarDistance => {
            gen_geometric_var_distance(&VarDistanceConfig::new(k, n, seed))?
        }
    })
}

/// Runs every requested method on every instance. WMMSE always runs since
/// it is the normalizer; it is reported only when requested.
pub fn evaluate(
    model: Option<&IgcNetModel>,
    data: &Dataset,
    methods: &[Method],
    opts: &EvalOptions,
) -> Result<EvalReport, HarnessError> {
    if data.is_empty() {
        return Err(HarnessError::Config("empty evaluation set".into()));
    }
    if methods.is_empty() {
        return Err(HarnessError::Config("no methods requested".into()));
    }
    if methods.contains(&Method::Igcnet) && model.is_none() {
        return Err(HarnessError::Config(
            "igcnet requested without a model".into(),
        ));
    }

    let run = |m: Method| -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
        let graphs: Option<Vec<InterferenceGraph>> = match (m, model) {
            (Method::Igcnet, Some(model)) => Some(
                data.instances
                    .par_iter()
                    .map(|c| model.graph(c))
                    .collect::<Result<_, _>>()?,
            ),
            _ => None,
        };
        let rows: Vec<(f64, f64)> = data
            .instances
            .par_iter()
            .enumerate()
            .map(|(i, c)| -> Result<(f64, f64), HarnessError> {
                let start = Instant::now();
                let p = match m {
                    Method::Wmmse => wmmse(c, &opts.wmmse)?.powers,
                    Method::Greedy => greedy_baseline(c, opts.greedy_fraction)?,
                    Method::Igcnet => {
                        let g = &graphs.as_ref().expect("built above")[i];
                        model.expect("checked above").forward(g)?
                    }
                };
                let ms = start.elapsed().as_secs_f64() * 1e3;
                Ok((weighted_sum_rate(c, &p), ms))
            })
            .collect::<Result<_, _>>()?;
        Ok(rows.into_iter().unzip())
    };

    let (wmmse_rates, wmmse_times) = run(Method::Wmmse)?;
    let wmmse_mean = mean(&wmmse_rates);
    let mut out = Vec::new();
    for &m in methods {
        let (rates, times_ms) = if m == Method::Wmmse {
            (wmmse_rates.clone(), wmmse_times.clone())
        } else {
            run(m)?
        };
        let mean_rate = mean(&rates);
        out.push(MethodResult {
            method: m,
            ratio: if m == Method::Wmmse {
                1.0
            } else {
                ratio(mean_rate, wmmse_mean)
            },
            rates,
            times_ms,
            mean_rate,
        });
    }
    Ok(EvalReport {
        meta: meta(data),
        methods: out,
        wmmse_mean,
        greedy_fraction: methods
            .contains(&Method::Greedy)
            .then_some(opts.greedy_fraction),
    })
}
