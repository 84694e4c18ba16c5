//! Complete interference graph of a channel instance.
//!
//! Pair `v` becomes vertex `v` with label `(|h_vv|, w_v)`. The directed
//! edge `u → v` carries `(|h_uv|, |h_vu|)`: the interference `v` causes at
//! receiver `u` and the interference `u` causes at receiver `v`. Channel
//! magnitudes pass through a [`NormalizationScheme`] before use.

use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::channel::{ChannelInstance, Dataset};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("non-finite channel entry ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("permutation of length {perm} applied to K={k}")]
    SizeMismatch { perm: usize, k: usize },
    #[error("not a permutation: {0:?}")]
    NotBijection(Vec<usize>),
    #[error("graphs in a batch must share K (found {0} and {1})")]
    MixedK(usize, usize),
    #[error("empty batch")]
    EmptyBatch,
}

/// Affine standardization `(x - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub mean: f64,
    pub std: f64,
}

impl Affine {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    fn fit(xs: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
        for x in xs {
            n += 1;
            sum += x;
            sq += x * x;
        }
        if n == 0 {
            return Self {
                mean: 0.0,
                std: 1.0,
            };
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }
}

/// How channel magnitudes become graph features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NormalizationScheme {
    /// Raw `|h|`.
    Identity,
    /// `log10(1 + |h_rt|² p_max / σ_r²)` standardized separately for direct
    /// and cross links. A zeroed link maps to a finite value.
    LogSnr { direct: Affine, cross: Affine },
    /// `|h_rt|·sqrt(p_max / σ_r²) / scale`: linear amplitude SNR with
    /// `scale` the geometric mean of direct-link amplitude SNRs in training.
    Scaled { scale: f64 },
}

impl NormalizationScheme {
    /// Fits log-SNR statistics on every link of `d`.
    pub fn fit_log_snr(d: &Dataset) -> Self {
        let direct = Affine::fit(
            d.instances
                .iter()
                .flat_map(|c| (0..c.k()).map(move |r| log_snr(c, r, r))),
        );
        let cross = Affine::fit(d.instances.iter().flat_map(|c| {
            (0..c.k()).flat_map(move |r| {
                (0..c.k())
                    .filter(move |&t| t != r)
                    .map(move |t| log_snr(c, r, t))
            })
        }));
        Self::LogSnr { direct, cross }
    }

    /// Fits the amplitude scale on the direct links of `d`.
    pub fn fit_scaled(d: &Dataset) -> Self {
        let (mut n, mut sum) = (0usize, 0.0);
        for c in &d.instances {
            for r in 0..c.k() {
                let a = amplitude_snr(c, r, r);
                if a > 0.0 {
                    sum += a.ln();
                    n += 1;
                }
            }
        }
        let scale = if n == 0 { 1.0 } else { (sum / n as f64).exp() };
        Self::Scaled { scale }
    }

    /// Feature of the link from transmitter `t` to receiver `r`.
    pub fn link_feature(&self, c: &ChannelInstance, r: usize, t: usize) -> f64 {
        match self {
            Self::Identity => c.magnitude(r, t),
            Self::LogSnr { direct, cross } => {
                let a = if r == t { direct } else { cross };
                a.apply(log_snr(c, r, t))
            }
            Self::Scaled { scale } => amplitude_snr(c, r, t) / scale,
        }
    }
}

fn amplitude_snr(c: &ChannelInstance, r: usize, t: usize) -> f64 {
    c.magnitude(r, t) * (c.p_max / c.noise[r]).sqrt()
}

fn log_snr(c: &ChannelInstance, r: usize, t: usize) -> f64 {
    (1.0 + c.gain(r, t) * c.p_max / c.noise[r]).log10()
}

/// Number of features on each vertex: direct link, weight.
pub const NODE_FEATURES: usize = 2;
/// Number of features on each directed edge: `h_uv`, `h_vu`.
pub const EDGE_FEATURES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceGraph {
    k: usize,
    /// `k × NODE_FEATURES`, row-major.
    node_feat: Vec<f64>,
    /// `k × k × EDGE_FEATURES`; the diagonal is zero and unused.
    edge_feat: Vec<f64>,
    pub noise: Vec<f64>,
    pub p_max: f64,
}

impl InterferenceGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node(&self, v: usize) -> [f64; NODE_FEATURES] {
        let i = v * NODE_FEATURES;
        [self.node_feat[i], self.node_feat[i + 1]]
    }

    /// Features of the directed edge `u → v`.
    pub fn edge(&self, u: usize, v: usize) -> [f64; EDGE_FEATURES] {
        let i = (u * self.k + v) * EDGE_FEATURES;
        [self.edge_feat[i], self.edge_feat[i + 1]]
    }

    pub fn num_edges(&self) -> usize {
        self.k * (self.k - 1)
    }
}

pub fn build_graph(
    c: &ChannelInstance,
    norm: &NormalizationScheme,
) -> Result<InterferenceGraph, GraphError> {
    let k = c.k();
    for r in 0..k {
        for t in 0..k {
            let z = c.h(r, t);
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(GraphError::NonFinite { row: r, col: t });
            }
        }
    }
    let mut node_feat = Vec::with_capacity(k * NODE_FEATURES);
    for v in 0..k {
        node_feat.push(norm.link_feature(c, v, v));
        node_feat.push(c.weights[v]);
    }
    let mut edge_feat = vec![0.0; k * k * EDGE_FEATURES];
    for u in 0..k {
        for v in 0..k {
            if u != v {
                let i = (u * k + v) * EDGE_FEATURES;
                edge_feat[i] = norm.link_feature(c, u, v);
                edge_feat[i + 1] = norm.link_feature(c, v, u);
            }
        }
    }
    Ok(InterferenceGraph {
        k,
        node_feat,
        edge_feat,
        noise: c.noise.clone(),
        p_max: c.p_max,
    })
}

/// A bijection on node indices: position `i` of the relabeled instance
/// holds old node `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
}

impl Permutation {
    pub fn new(perm: Vec<usize>) -> Result<Self, GraphError> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(GraphError::NotBijection(perm));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            perm: (0..k).collect(),
        }
    }

    /// Uniformly random permutation (Fisher–Yates).
    pub fn random(k: usize, rng: &mut impl rand::Rng) -> Self {
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        Self { perm: inv }
    }

    /// `out[i] = x[perm[i]]`, i.e. `Πᵀ x`.
    pub fn apply<T: Clone>(&self, x: &[T]) -> Vec<T> {
        self.perm.iter().map(|&p| x[p].clone()).collect()
    }
}

/// Relabels pairs: `H' = Πᵀ H Π`, `w' = Πᵀ w`, noise and geometry alike.
pub fn permute(c: &ChannelInstance, p: &Permutation) -> Result<ChannelInstance, GraphError> {
    let k = c.k();
    if p.len() != k {
        return Err(GraphError::SizeMismatch { perm: p.len(), k });
    }
    let idx = p.as_slice();
    let mut h = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            h.push(c.h(idx[i], idx[j]));
        }
    }
    let geometry = c.geometry.as_ref().map(|g| crate::channel::Geometry {
        tx: p.apply(&g.tx),
        rx: p.apply(&g.rx),
    });
    Ok(ChannelInstance::new(
        k,
        h,
        p.apply(&c.weights),
        p.apply(&c.noise),
        c.p_max,
        geometry,
    )
    .expect("permutation preserves instance invariants"))
}

/// Several graphs with a shared `K`, flattened for batched evaluation.
///
/// Nodes are ordered `(b, v)`; edges are grouped by destination, ordered
/// `(b, v, u)` with `u ≠ v` ascending, so the `K - 1` incoming edges of a
/// node are contiguous.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub k: usize,
    pub graphs: usize,
    /// `[N, NODE_FEATURES]` with `N = graphs · k`.
    pub node_feat: Tensor,
    /// `[E, 4]`: `(h_uv, h_vu, w_v, h_uu)` per edge `u → v`.
    pub edge_input: Tensor,
    /// Global source node of every edge.
    pub src: Rc<[usize]>,
    /// Global destination node of every edge.
    pub dst: Rc<[usize]>,
}

/// Width of [`GraphBatch::edge_input`].
pub const EDGE_INPUT_FEATURES: usize = 4;

impl GraphBatch {
    pub fn new(graphs: &[&InterferenceGraph]) -> Result<Self, GraphError> {
        let first = graphs.first().ok_or(GraphError::EmptyBatch)?;
        let k = first.k();
        if let Some(g) = graphs.iter().find(|g| g.k() != k) {
            return Err(GraphError::MixedK(k, g.k()));
        }
        let b = graphs.len();
        let mut node = Vec::with_capacity(b * k * NODE_FEATURES);
        let mut edge = Vec::with_capacity(b * k * k.saturating_sub(1) * EDGE_INPUT_FEATURES);
        let mut src = Vec::with_capacity(b * k * k.saturating_sub(1));
        let mut dst = Vec::with_capacity(src.capacity());
        for (gi, g) in graphs.iter().enumerate() {
            node.extend_from_slice(&g.node_feat);
            for v in 0..k {
                let [_, w_v] = g.node(v);
                for u in (0..k).filter(|&u| u != v) {
                    let [h_uv, h_vu] = g.edge(u, v);
                    let [h_uu, _] = g.node(u);
                    edge.extend_from_slice(&[h_uv, h_vu, w_v, h_uu]);
                    src.push(gi * k + u);
                    dst.push(gi * k + v);
                }
            }
        }
        let e = src.len();
        Ok(Self {
            k,
            graphs: b,
            node_feat: Tensor::new(vec![b * k, NODE_FEATURES], node).expect("sized above"),
            edge_input: Tensor::new(vec![e, EDGE_INPUT_FEATURES], edge).expect("sized above"),
            src: src.into(),
            dst: dst.into(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graphs * self.k
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }
}
