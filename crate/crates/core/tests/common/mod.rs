//! Independent reference implementations shared by the integration tests
//! and the acceptance suite.

#![allow(dead_code)]

use igcnet::autodiff::Tensor;
use igcnet::channel::{gen_gaussian, ChannelInstance, GaussianConfig};
use igcnet::graph::NormalizationScheme;
use igcnet::harness::loss_and_grads;
use igcnet::model::{loss, Activation, IgcNetConfig, IgcNetModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p<'a>(m: &'a IgcNetModel, name: &str) -> &'a Tensor {
    m.param(name)
        .unwrap_or_else(|| panic!("missing parameter {name}"))
}

/// `x · W + b` for a row vector `x`, `W` of shape `[in, out]`.
fn affine(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    assert_eq!(rows, x.len());
    (0..cols)
        .map(|o| {
            b.data()[o]
                + (0..rows)
                    .map(|r| x[r] * w.data()[r * cols + o])
                    .sum::<f64>()
        })
        .collect()
}

fn relu(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(|v| v.max(0.0)).collect()
}

fn activate(a: Activation, x: Vec<f64>) -> Vec<f64> {
    match a {
        Activation::Linear => x,
        Activation::Relu => relu(x),
        Activation::Sigmoid => x.into_iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect(),
        Activation::Tanh => x.into_iter().map(f64::tanh).collect(),
    }
}

/// Straight-line evaluation of the untied IGCNet update, one vertex and one
/// edge at a time.
pub fn reference_forward(m: &IgcNetModel, c: &ChannelInstance) -> Vec<f64> {
    let cfg = *m.config();
    assert!(!cfg.tie_layers);
    let k = c.k();
    let e = cfg.embed_dim;
    let f = |r: usize, t: usize| m.normalization.link_feature(c, r, t);
    let mut beta: Vec<Vec<f64>> = (0..k)
        .map(|v| {
            let mut b = vec![0.0; e];
            b[0] = f(v, v);
            b[1] = c.weights[v];
            b
        })
        .collect();
    for l in 0..cfg.num_layers {
        let w_edge = p(m, &format!("l{l}.mlp1.0.w_edge"));
        let w_src = p(m, &format!("l{l}.mlp1.0.w_src"));
        let b0 = p(m, &format!("l{l}.mlp1.0.b"));
        let mut next = Vec::with_capacity(k);
        for v in 0..k {
            let mut gammas = Vec::new();
            for u in (0..k).filter(|&u| u != v) {
                // First layer on the concatenation [h_uv, h_vu, w_v, h_uu, β_u].
                let mut x = vec![f(u, v), f(v, u), c.weights[v], f(u, u)];
                x.extend_from_slice(&beta[u]);
                let mut w = w_edge.data().to_vec();
                w.extend_from_slice(w_src.data());
                let w = Tensor::new(vec![4 + e, w_edge.shape()[1]], w).unwrap();
                let mut z = affine(&x, &w, b0);
                for i in 1..cfg.mlp1_layers {
                    z = affine(
                        &relu(z),
                        p(m, &format!("l{l}.mlp1.{i}.w")),
                        p(m, &format!("l{l}.mlp1.{i}.b")),
                    );
                }
                gammas.push(z);
            }
            let mut mx = vec![0.0; e];
            let mut sm = vec![0.0; e];
            if !gammas.is_empty() {
                for j in 0..e {
                    mx[j] = gammas
                        .iter()
                        .map(|g| g[j])
                        .fold(f64::NEG_INFINITY, f64::max);
                    sm[j] = gammas.iter().map(|g| g[j]).sum();
                }
            }
            let mut x = mx;
            x.extend_from_slice(&sm);
            x.push(f(v, v));
            x.extend_from_slice(&beta[v]);
            x.push(c.weights[v]);
            for i in 0..cfg.mlp2_layers {
                if i > 0 {
                    x = relu(x);
                }
                x = affine(
                    &x,
                    p(m, &format!("l{l}.mlp2.{i}.w")),
                    p(m, &format!("l{l}.mlp2.{i}.b")),
                );
            }
            next.push(activate(cfg.combine_activation, x));
        }
        beta = next;
    }
    beta.iter()
        .map(|b| {
            let logit = affine(b, p(m, "readout.w"), p(m, "readout.b"))[0];
            c.p_max / (1.0 + (-logit).exp())
        })
        .collect()
}

pub struct GradCheck {
    pub coords: usize,
    pub passed: usize,
    pub max_rel: f64,
}

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-4;
/// Denominator floor for the relative error, so coordinates whose true
/// gradient is numerically zero are compared absolutely.
pub const FD_FLOOR: f64 = 1e-8;

/// Central finite differences of the full forward+loss composition against
/// reverse mode, for one random small configuration.
pub fn gradient_check(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=3);
    let cfg = IgcNetConfig {
        num_layers: rng.random_range(1..=3),
        hidden_dim: 4,
        embed_dim: 4,
        mlp1_layers: rng.random_range(1..=3),
        mlp2_layers: rng.random_range(1..=3),
        ..Default::default()
    };
    let data = gen_gaussian(&GaussianConfig::new(k, 3, seed, rng.random())).unwrap();
    let mut model = IgcNetModel::new(cfg, NormalizationScheme::Identity, seed).unwrap();
    // Nonzero biases so no coordinate sits exactly on a relu kink.
    for t in model.params_mut() {
        for x in t.data_mut() {
            *x += rng.random_range(-0.1..0.1);
        }
    }
    let graphs: Vec<_> = data
        .instances
        .iter()
        .map(|c| model.graph(c).unwrap())
        .collect();
    let g_refs: Vec<_> = graphs.iter().collect();
    let c_refs: Vec<_> = data.instances.iter().collect();
    let (_, grads) = loss_and_grads(&model, &g_refs, &c_refs).unwrap();

    let eval = |m: &IgcNetModel| {
        let powers: Vec<Vec<f64>> = graphs.iter().map(|g| m.forward(g).unwrap()).collect();
        loss(&powers, &c_refs).unwrap()
    };
    let mut out = GradCheck {
        coords: 0,
        passed: 0,
        max_rel: 0.0,
    };
    for (pi, g) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let orig = model.params()[pi].data()[j];
            model.params_mut()[pi].data_mut()[j] = orig + FD_STEP;
            let up = eval(&model);
            model.params_mut()[pi].data_mut()[j] = orig - FD_STEP;
            let down = eval(&model);
            model.params_mut()[pi].data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * FD_STEP);
            let ad = g.data()[j];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(FD_FLOOR);
            out.coords += 1;
            if rel < FD_REL_TOL {
                out.passed += 1;
            }
            out.max_rel = out.max_rel.max(rel);
        }
    }
    out
}
