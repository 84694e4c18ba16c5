//! IGCNet and the comparison aggregators.
//!
//! One IGCNet layer updates every vertex `v` from its incoming edges:
//!
//! ```text
//! γ_uv = MLP1(h_uv, h_vu, w_v, h_uu, β_u)          for every u ≠ v
//! α_v  = CONCAT(max_u γ_uv, Σ_u γ_uv)
//! β_v' = MLP2(α_v, h_vv, β_v, w_v)
//! ```
//!
//! and the readout maps the last embedding to a power
//! `p_v = p_max · sigmoid(⟨r, β_v⟩ + b)`. Every parameter is shared across
//! vertices and edges, so one model evaluates any `K`.
//!
//! The first linear map of MLP1 is stored as two blocks, one over the four
//! scalar edge inputs and one over `β_u`. The `β_u` block is applied once per
//! vertex and gathered onto edges, which is the same affine map as applying
//! a single weight to the concatenated input.

mod checkpoint;
mod loss;

pub use checkpoint::{load_model, read_model, save_model, write_model, CHECKPOINT_VERSION};
pub use loss::{loss, loss_on_tape, LossBatch};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::channel::ChannelInstance;
use crate::graph::{
    build_graph, GraphBatch, GraphError, InterferenceGraph, NormalizationScheme,
    EDGE_INPUT_FEATURES, NODE_FEATURES,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("feature layout mismatch: {0}")]
    Layout(String),
    #[error("instance {instance}: power {value} at pair {index} outside [0, {p_max}]")]
    PowerOutOfBounds {
        instance: usize,
        index: usize,
        value: f64,
        p_max: f64,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    #[default]
    Igcnet,
    /// Mean over the closed neighborhood, then a linear map and relu.
    Gcn,
    /// `relu(W1 β_v + W2 Σ_u β_u)`.
    Structure2vec,
    /// `MLP((1 + ε) β_v + Σ_u β_u)`.
    Gin,
}

impl std::str::FromStr for Aggregator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "igcnet" => Ok(Self::Igcnet),
            "gcn" => Ok(Self::Gcn),
            "structure2vec" => Ok(Self::Structure2vec),
            "gin" => Ok(Self::Gin),
            other => Err(format!("unknown aggregator {other:?}")),
        }
    }
}

/// Nonlinearity applied to the combine network's output `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    #[default]
    Tanh,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Linear => x,
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => {
                let s = tape.scale(x, 2.0);
                let s = tape.sigmoid(s);
                let s = tape.scale(s, 2.0);
                tape.add_scalar(s, -1.0)
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(Self::Linear),
            "relu" => Ok(Self::Relu),
            "sigmoid" => Ok(Self::Sigmoid),
            "tanh" => Ok(Self::Tanh),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IgcNetConfig {
    pub num_layers: usize,
    /// Width of the hidden layers inside MLP1 and MLP2.
    pub hidden_dim: usize,
    /// Width of the vertex embeddings `β` and edge messages `γ`.
    pub embed_dim: usize,
    /// Number of linear maps in MLP1.
    pub mlp1_layers: usize,
    /// Number of linear maps in MLP2 (and in the GIN update).
    pub mlp2_layers: usize,
    pub tie_layers: bool,
    pub aggregator: Aggregator,
    /// GIN self-weight `ε`.
    pub gin_eps: f64,
    /// Output activation of MLP2. Keeps `β` bounded so sum pooling does not
    /// compound across layers.
    pub combine_activation: Activation,
}

impl Default for IgcNetConfig {
    fn default() -> Self {
        Self {
            num_layers: 5,
            hidden_dim: 32,
            embed_dim: 32,
            mlp1_layers: 3,
            mlp2_layers: 3,
            tie_layers: false,
            aggregator: Aggregator::Igcnet,
            gin_eps: 0.0,
            combine_activation: Activation::default(),
        }
    }
}

impl IgcNetConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.num_layers == 0 {
            return bad("num_layers must be at least 1");
        }
        if self.hidden_dim == 0 || self.mlp1_layers == 0 || self.mlp2_layers == 0 {
            return bad("MLP widths and depths must be at least 1");
        }
        if self.embed_dim < NODE_FEATURES {
            return bad("embed_dim must hold the vertex features");
        }
        if !self.gin_eps.is_finite() {
            return bad("gin_eps must be finite");
        }
        Ok(())
    }
}

/// Index of a linear map's weight `[in, out]` and bias `[1, out]`.
#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct Mlp {
    layers: Vec<Linear>,
}

#[derive(Debug, Clone)]
enum Block {
    Igc {
        edge_w: usize,
        src_w: usize,
        first_b: usize,
        mlp1_rest: Vec<Linear>,
        mlp2: Mlp,
    },
    Gcn {
        w: usize,
    },
    Structure2vec {
        w_self: usize,
        w_neigh: usize,
    },
    Gin {
        mlp: Mlp,
    },
}

#[derive(Debug, Clone)]
struct Layout {
    blocks: Vec<Block>,
    readout: Linear,
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    /// Whether each tensor feeds a relu (He init) or not (Xavier init).
    relu_fed: Vec<bool>,
}

impl Layout {
    fn new(cfg: &IgcNetConfig) -> Self {
        let mut l = Layout {
            blocks: Vec::new(),
            readout: Linear { w: 0, b: 0 },
            names: Vec::new(),
            shapes: Vec::new(),
            relu_fed: Vec::new(),
        };
        let n_blocks = if cfg.tie_layers { 1 } else { cfg.num_layers };
        let (h, e) = (cfg.hidden_dim, cfg.embed_dim);
        for bi in 0..n_blocks {
            let block = match cfg.aggregator {
                Aggregator::Igcnet => {
                    let out1 = if cfg.mlp1_layers == 1 { e } else { h };
                    let relu1 = cfg.mlp1_layers > 1;
                    let edge_w = l.add(
                        format!("l{bi}.mlp1.0.w_edge"),
                        vec![EDGE_INPUT_FEATURES, out1],
                        relu1,
                    );
                    let src_w = l.add(format!("l{bi}.mlp1.0.w_src"), vec![e, out1], relu1);
                    let first_b = l.add(format!("l{bi}.mlp1.0.b"), vec![1, out1], relu1);
                    let mlp1_rest = l.mlp(&format!("l{bi}.mlp1"), 1, out1, h, e, cfg.mlp1_layers);
                    let mlp2_in = 2 * e + 1 + e + 1;
                    let mlp2 = Mlp {
                        layers: l.mlp(&format!("l{bi}.mlp2"), 0, mlp2_in, h, e, cfg.mlp2_layers),
                    };
                    Block::Igc {
                        edge_w,
                        src_w,
                        first_b,
                        mlp1_rest,
                        mlp2,
                    }
                }
                Aggregator::Gcn => Block::Gcn {
                    w: l.add(format!("l{bi}.gcn.w"), vec![e, e], true),
                },
                Aggregator::Structure2vec => Block::Structure2vec {
                    w_self: l.add(format!("l{bi}.s2v.w_self"), vec![e, e], true),
                    w_neigh: l.add(format!("l{bi}.s2v.w_neigh"), vec![e, e], true),
                },
                Aggregator::Gin => Block::Gin {
                    mlp: Mlp {
                        layers: l.mlp(&format!("l{bi}.gin"), 0, e, h, e, cfg.mlp2_layers),
                    },
                },
            };
            l.blocks.push(block);
        }
        let w = l.add("readout.w".into(), vec![e, 1], false);
        let b = l.add("readout.b".into(), vec![1, 1], false);
        l.readout = Linear { w, b };
        l
    }

    fn add(&mut self, name: String, shape: Vec<usize>, relu_fed: bool) -> usize {
        self.names.push(name);
        self.shapes.push(shape);
        self.relu_fed.push(relu_fed);
        self.names.len() - 1
    }

    /// Linear maps `start..depth` of an MLP `in → hidden … hidden → out`.
    fn mlp(
        &mut self,
        prefix: &str,
        start: usize,
        first_in: usize,
        hidden: usize,
        out: usize,
        depth: usize,
    ) -> Vec<Linear> {
        let mut layers = Vec::new();
        let mut width = first_in;
        for i in start..depth {
            let last = i + 1 == depth;
            let o = if last { out } else { hidden };
            let w = self.add(format!("{prefix}.{i}.w"), vec![width, o], !last);
            let b = self.add(format!("{prefix}.{i}.b"), vec![1, o], !last);
            layers.push(Linear { w, b });
            width = o;
        }
        layers
    }
}

/// Trained (or freshly initialized) parameters plus everything needed to
/// turn a channel instance into powers.
#[derive(Debug, Clone)]
pub struct IgcNetModel {
    config: IgcNetConfig,
    pub normalization: NormalizationScheme,
    params: Vec<Tensor>,
    layout: Layout,
}

impl IgcNetModel {
    /// Random initialization: He-uniform for maps followed by relu,
    /// Xavier-uniform otherwise, zero biases.
    pub fn new(
        config: IgcNetConfig,
        normalization: NormalizationScheme,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layout
            .shapes
            .iter()
            .zip(&layout.names)
            .zip(&layout.relu_fed)
            .map(|((shape, name), &relu)| {
                if name.ends_with(".b") {
                    return Tensor::zeros(shape);
                }
                let (fan_in, fan_out) = (shape[0] as f64, shape[1] as f64);
                let bound = if relu {
                    (6.0 / fan_in).sqrt()
                } else {
                    (6.0 / (fan_in + fan_out)).sqrt()
                };
                let data = (0..shape[0] * shape[1])
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Tensor::new(shape.clone(), data).expect("shape from layout")
            })
            .collect();
        Ok(Self {
            config,
            normalization,
            params,
            layout,
        })
    }

    pub(crate) fn from_parts(
        config: IgcNetConfig,
        normalization: NormalizationScheme,
        params: Vec<Tensor>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.shapes.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                layout.shapes.len(),
                params.len()
            )));
        }
        for ((p, s), n) in params.iter().zip(&layout.shapes).zip(&layout.names) {
            if p.shape() != s.as_slice() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {n} has shape {:?}, config implies {s:?}",
                    p.shape()
                )));
            }
        }
        Ok(Self {
            config,
            normalization,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &IgcNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.layout.names
    }

    /// Parameter tensor by name.
    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.layout
            .names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.params[i])
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Records every parameter tensor on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p.clone())).collect()
    }

    pub fn graph(&self, c: &ChannelInstance) -> Result<InterferenceGraph, ModelError> {
        Ok(build_graph(c, &self.normalization)?)
    }

    /// Records the forward pass; returns powers of shape `[N, 1]`.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        params: &[Var],
        batch: &GraphBatch,
        p_max: &[f64],
    ) -> Result<Var, ModelError> {
        if batch.node_feat.shape()[1] != NODE_FEATURES
            || batch.edge_input.shape()[1] != EDGE_INPUT_FEATURES
        {
            return Err(ModelError::Layout(format!(
                "graph features {:?}/{:?} do not match model ({NODE_FEATURES}/{EDGE_INPUT_FEATURES})",
                batch.node_feat.shape(),
                batch.edge_input.shape()
            )));
        }
        if params.len() != self.params.len() {
            return Err(ModelError::Layout("parameter binding length".into()));
        }
        if p_max.len() != batch.graphs {
            return Err(ModelError::Layout("one p_max per graph required".into()));
        }
        let n = batch.num_nodes();
        let k = batch.k;
        let e = self.config.embed_dim;
        let p = |i: usize| params[i];

        let nf = batch.node_feat.data();
        let column = |c: usize| {
            let data = (0..n).map(|v| nf[v * NODE_FEATURES + c]).collect();
            Tensor::new(vec![n, 1], data).expect("n rows")
        };
        let direct = tape.constant(column(0));
        let weight = tape.constant(column(1));
        let mut beta0 = Tensor::zeros(&[n, e]);
        for v in 0..n {
            beta0.data_mut()[v * e..v * e + NODE_FEATURES]
                .copy_from_slice(&nf[v * NODE_FEATURES..(v + 1) * NODE_FEATURES]);
        }
        let mut beta = tape.constant(beta0);
        let edge_input = tape.constant(batch.edge_input.clone());

        for layer in 0..self.config.num_layers {
            let block = &self.layout.blocks[if self.config.tie_layers { 0 } else { layer }];
            beta = match block {
                Block::Igc {
                    edge_w,
                    src_w,
                    first_b,
                    mlp1_rest,
                    mlp2,
                } => {
                    let src_proj = tape.matmul(beta, p(*src_w))?;
                    let gathered = tape.gather_rows(src_proj, batch.src.clone())?;
                    let edge_proj = tape.matmul(edge_input, p(*edge_w))?;
                    let z = tape.add(edge_proj, gathered)?;
                    let mut z = tape.add(z, p(*first_b))?;
                    if !mlp1_rest.is_empty() {
                        z = tape.relu(z);
                    }
                    let gamma = apply_mlp(tape, params, mlp1_rest, z)?;
                    let gamma = tape.reshape(gamma, &[n, k - 1, e])?;
                    let mx = tape.max_reduce(gamma, 1)?;
                    let sm = tape.sum_reduce(gamma, 1)?;
                    let input = tape.concat(&[mx, sm, direct, beta, weight], 1)?;
                    let out = apply_mlp(tape, params, &mlp2.layers, input)?;
                    self.config.combine_activation.apply(tape, out)
                }
                Block::Gcn { w } => {
                    let neigh = neighbor_sum(tape, beta, batch, e)?;
                    let closed = tape.add(neigh, beta)?;
                    let mean = tape.scale(closed, 1.0 / k as f64);
                    let z = tape.matmul(mean, p(*w))?;
                    tape.relu(z)
                }
                Block::Structure2vec { w_self, w_neigh } => {
                    let neigh = neighbor_sum(tape, beta, batch, e)?;
                    let a = tape.matmul(beta, p(*w_self))?;
                    let b = tape.matmul(neigh, p(*w_neigh))?;
                    let z = tape.add(a, b)?;
                    tape.relu(z)
                }
                Block::Gin { mlp } => {
                    let neigh = neighbor_sum(tape, beta, batch, e)?;
                    let own = tape.scale(beta, 1.0 + self.config.gin_eps);
                    let z = tape.add(own, neigh)?;
                    apply_mlp(tape, params, &mlp.layers, z)?
                }
            };
        }
        let ro = self.layout.readout;
        let logit = tape.matmul(beta, p(ro.w))?;
        let logit = tape.add(logit, p(ro.b))?;
        let unit = tape.sigmoid(logit);
        let scale: Vec<f64> = (0..n).map(|v| p_max[v / k]).collect();
        let scale = tape.constant(Tensor::new(vec![n, 1], scale).expect("n rows"));
        Ok(tape.mul(unit, scale)?)
    }

    /// Powers for several graphs with a shared `K`, one vector per graph.
    pub fn forward_batch(
        &self,
        graphs: &[&InterferenceGraph],
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        let batch = GraphBatch::new(graphs)?;
        let p_max: Vec<f64> = graphs.iter().map(|g| g.p_max).collect();
        let mut tape = Tape::new();
        let params = self.bind_constants(&mut tape);
        let out = self.forward_on_tape(&mut tape, &params, &batch, &p_max)?;
        Ok(tape
            .value(out)
            .data()
            .chunks(batch.k)
            .map(<[f64]>::to_vec)
            .collect())
    }

    pub fn forward(&self, graph: &InterferenceGraph) -> Result<Vec<f64>, ModelError> {
        Ok(self.forward_batch(&[graph])?.remove(0))
    }

    /// Builds the graph with this model's normalization and runs `forward`.
    pub fn predict(&self, c: &ChannelInstance) -> Result<Vec<f64>, ModelError> {
        self.forward(&self.graph(c)?)
    }

    fn bind_constants(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.constant(p.clone()))
            .collect()
    }
}

fn apply_mlp(
    tape: &mut Tape,
    params: &[Var],
    layers: &[Linear],
    mut x: Var,
) -> Result<Var, AutodiffError> {
    for (i, l) in layers.iter().enumerate() {
        x = tape.matmul(x, params[l.w])?;
        x = tape.add(x, params[l.b])?;
        if i + 1 < layers.len() {
            x = tape.relu(x);
        }
    }
    Ok(x)
}

/// `Σ_{u ∈ N(v)} β_u` for every vertex.
fn neighbor_sum(
    tape: &mut Tape,
    beta: Var,
    batch: &GraphBatch,
    width: usize,
) -> Result<Var, AutodiffError> {
    let g = tape.gather_rows(beta, batch.src.clone())?;
    let g = tape.reshape(g, &[batch.num_nodes(), batch.k - 1, width])?;
    tape.sum_reduce(g, 1)
}
