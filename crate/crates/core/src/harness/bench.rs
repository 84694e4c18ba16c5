//! Per-instance inference timing of the network against converged WMMSE.
//!
//! Both methods run sequentially on the calling thread. Graph construction
//! happens before the clock starts.

use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use crate::baselines::{wmmse, WmmseConfig};
use crate::channel::Dataset;
use crate::graph::InterferenceGraph;
use crate::model::IgcNetModel;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingRow {
    pub k: usize,
    pub instances: usize,
    pub igcnet_ms: f64,
    pub wmmse_ms: f64,
    /// `wmmse_ms / igcnet_ms`.
    pub speedup: f64,
    pub wmmse_iterations: f64,
}

/// Mean milliseconds per instance, after one untimed warm-up pass over up
/// to `warmup` instances.
pub fn benchmark_time(
    model: &IgcNetModel,
    data: &Dataset,
    wmmse_cfg: &WmmseConfig,
    warmup: usize,
) -> Result<TimingRow, HarnessError> {
    if data.is_empty() {
        return Err(HarnessError::Config("empty timing set".into()));
    }
    let graphs: Vec<InterferenceGraph> = data
        .instances
        .iter()
        .map(|c| model.graph(c))
        .collect::<Result<_, _>>()?;
    let n = data.len();
    for (c, g) in data.instances.iter().zip(&graphs).take(warmup) {
        black_box(model.forward(g)?);
        black_box(wmmse(c, wmmse_cfg)?);
    }

    let start = Instant::now();
    for g in &graphs {
        black_box(model.forward(black_box(g))?);
    }
    let igcnet_ms = start.elapsed().as_secs_f64() * 1e3 / n as f64;

    let mut iterations = 0usize;
    let start = Instant::now();
    for c in &data.instances {
        iterations += black_box(wmmse(black_box(c), wmmse_cfg)?).iterations;
    }
    let wmmse_ms = start.elapsed().as_secs_f64() * 1e3 / n as f64;

    Ok(TimingRow {
        k: data.k(),
        instances: n,
        igcnet_ms,
        wmmse_ms,
        speedup: wmmse_ms / igcnet_ms,
        wmmse_iterations: iterations as f64 / n as f64,
    })
}
