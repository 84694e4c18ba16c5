//! Negative weighted sum rate as a differentiable training objective.

use crate::autodiff::{Tape, Tensor, Var};
use crate::channel::ChannelInstance;

use super::ModelError;

/// Channel constants of a batch, laid out for [`loss_on_tape`].
#[derive(Debug, Clone)]
pub struct LossBatch {
    pub graphs: usize,
    pub k: usize,
    /// `[B, K, K]`, `|h_kj|²` with a zero diagonal.
    cross_gain: Tensor,
    /// `[B, K]`, `|h_kk|²`.
    direct_gain: Tensor,
    noise: Tensor,
    weights: Tensor,
}

impl LossBatch {
    pub fn new(instances: &[&ChannelInstance]) -> Result<Self, ModelError> {
        let first = instances
            .first()
            .ok_or_else(|| ModelError::Layout("empty loss batch".into()))?;
        let k = first.k();
        let b = instances.len();
        let mut cross = Vec::with_capacity(b * k * k);
        let mut direct = Vec::with_capacity(b * k);
        let mut noise = Vec::with_capacity(b * k);
        let mut weights = Vec::with_capacity(b * k);
        for c in instances {
            if c.k() != k {
                return Err(ModelError::Layout(format!(
                    "loss batch mixes K={k} and K={}",
                    c.k()
                )));
            }
            for r in 0..k {
                for t in 0..k {
                    cross.push(if r == t { 0.0 } else { c.gain(r, t) });
                }
                direct.push(c.gain(r, r));
            }
            noise.extend_from_slice(&c.noise);
            weights.extend_from_slice(&c.weights);
        }
        let t = |s: Vec<usize>, d| Tensor::new(s, d).expect("sized above");
        Ok(Self {
            graphs: b,
            k,
            cross_gain: t(vec![b, k, k], cross),
            direct_gain: t(vec![b, k], direct),
            noise: t(vec![b, k], noise),
            weights: t(vec![b, k], weights),
        })
    }
}

/// `−mean_b Σ_k w_k log2(1 + SINR_k)` for powers of shape `[B·K, 1]`.
pub fn loss_on_tape(tape: &mut Tape, powers: Var, batch: &LossBatch) -> Result<Var, ModelError> {
    let (b, k) = (batch.graphs, batch.k);
    let p_row = tape.reshape(powers, &[b, 1, k])?;
    let cross = tape.constant(batch.cross_gain.clone());
    let rx = tape.mul(cross, p_row)?;
    let interference = tape.sum_reduce(rx, 2)?;
    let noise = tape.constant(batch.noise.clone());
    let denom = tape.add(interference, noise)?;
    let p = tape.reshape(powers, &[b, k])?;
    let direct = tape.constant(batch.direct_gain.clone());
    let signal = tape.mul(direct, p)?;
    let sinr = tape.div(signal, denom)?;
    let one_plus = tape.add_scalar(sinr, 1.0);
    let rate = tape.log2(one_plus)?;
    let weights = tape.constant(batch.weights.clone());
    let weighted = tape.mul(weights, rate)?;
    let per_graph = tape.sum_reduce(weighted, 1)?;
    let mean = tape.mean_all(per_graph)?;
    Ok(tape.neg(mean))
}

/// Loss value for explicit power vectors, after checking `0 ≤ p ≤ p_max`.
pub fn loss(powers: &[Vec<f64>], instances: &[&ChannelInstance]) -> Result<f64, ModelError> {
    if powers.len() != instances.len() {
        return Err(ModelError::Layout(format!(
            "{} power vectors for {} instances",
            powers.len(),
            instances.len()
        )));
    }
    for (i, (p, c)) in powers.iter().zip(instances).enumerate() {
        if p.len() != c.k() {
            return Err(ModelError::Layout(format!("instance {i}: power length")));
        }
        if let Some((j, &v)) = p
            .iter()
            .enumerate()
            .find(|(_, &v)| !(0.0..=c.p_max).contains(&v))
        {
            return Err(ModelError::PowerOutOfBounds {
                instance: i,
                index: j,
                value: v,
                p_max: c.p_max,
            });
        }
    }
    let batch = LossBatch::new(instances)?;
    let flat: Vec<f64> = powers.iter().flatten().copied().collect();
    let mut tape = Tape::new();
    let n = flat.len();
    let p = tape.constant(Tensor::new(vec![n, 1], flat)?);
    let l = loss_on_tape(&mut tape, p, &batch)?;
    Ok(tape.value(l).item().expect("scalar loss"))
}
