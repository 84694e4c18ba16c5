//! Reference power-control algorithms: WMMSE, the greedy strongest-link
//! heuristic and an exhaustive grid search for small `K`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{instance_rng, ChannelInstance, Dataset};
use crate::metrics::weighted_sum_rate;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("WMMSE produced a non-finite iterate at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid search over {levels}^{k} points is too large (K must be at most {max_k})")]
    TooLarge {
        k: usize,
        levels: usize,
        max_k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WmmseInit {
    FullPower,
    /// Amplitudes uniform in `[0, sqrt(p_max)]`, seeded.
    Random {
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmmseConfig {
    pub max_iters: usize,
    /// Stop when the relative change of the weighted sum rate falls below this.
    pub tol: f64,
    pub init: WmmseInit,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-5,
            init: WmmseInit::FullPower,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseResult {
    pub powers: Vec<f64>,
    /// Weighted sum rate at the initial point and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl WmmseResult {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial point")
    }
}

const MSE_FLOOR: f64 = 1e-12;

/// One block-coordinate sweep on transmit amplitudes `v` (receivers, MSE
/// weights, then transmitters), returning the new amplitudes.
fn sweep(c: &ChannelInstance, v: &[f64]) -> Vec<f64> {
    let k = c.k();
    let v_max = c.p_max.sqrt();
    let mut u = vec![0.0; k];
    let mut m = vec![0.0; k];
    for r in 0..k {
        let received: f64 = (0..k).map(|j| c.gain(r, j) * v[j] * v[j]).sum::<f64>() + c.noise[r];
        let h = c.magnitude(r, r);
        u[r] = h * v[r] / received;
        m[r] = 1.0 / (1.0 - u[r] * h * v[r]).max(MSE_FLOOR);
    }
    (0..k)
        .map(|t| {
            let num = c.weights[t] * u[t] * c.magnitude(t, t) * m[t];
            let den: f64 = (0..k)
                .map(|r| c.weights[r] * c.gain(r, t) * u[r] * u[r] * m[r])
                .sum();
            let x = if den > 0.0 {
                num / den
            } else if num > 0.0 {
                v_max
            } else {
                v[t]
            };
            x.clamp(0.0, v_max)
        })
        .collect()
}

/// WMMSE on scalar channel magnitudes.
pub fn wmmse(c: &ChannelInstance, cfg: &WmmseConfig) -> Result<WmmseResult, BaselineError> {
    if cfg.max_iters == 0 || !(cfg.tol > 0.0) {
        return Err(BaselineError::InvalidParameter(
            "WMMSE needs max_iters >= 1 and tol > 0".into(),
        ));
    }
    let k = c.k();
    let v_max = c.p_max.sqrt();
    let mut v: Vec<f64> = match &cfg.init {
        WmmseInit::FullPower => vec![v_max; k],
        WmmseInit::Random { seed } => {
            let mut rng = instance_rng(*seed, 0);
            (0..k).map(|_| rng.random::<f64>() * v_max).collect()
        }
    };
    let powers = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    let mut trace = vec![weighted_sum_rate(c, &powers(&v))];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iters {
        v = sweep(c, &v);
        iterations = it;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(BaselineError::Diverged { iteration: it });
        }
        let f = weighted_sum_rate(c, &powers(&v));
        if !f.is_finite() {
            return Err(BaselineError::Diverged { iteration: it });
        }
        let prev = *trace.last().unwrap();
        trace.push(f);
        if (f - prev).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(WmmseResult {
        powers: powers(&v),
        trace,
        iterations,
        converged,
    })
}

/// One WMMSE sweep starting from powers `p`.
pub fn wmmse_sweep(c: &ChannelInstance, p: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = p.iter().map(|x| x.max(0.0).sqrt()).collect();
    sweep(c, &v).into_iter().map(|x| x * x).collect()
}

/// Full power to the `⌈fraction·K⌉` pairs with the largest `w_i |h_ii|²`
/// (lowest index wins ties), zero to the rest.
pub fn greedy_baseline(c: &ChannelInstance, keep_fraction: f64) -> Result<Vec<f64>, BaselineError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(BaselineError::InvalidParameter(format!(
            "keep_fraction {keep_fraction} outside (0, 1]"
        )));
    }
    let k = c.k();
    let keep = ((keep_fraction * k as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut order: Vec<usize> = (0..k).collect();
    let coef = |i: usize| c.weights[i] * c.gain(i, i);
    // Stable sort keeps ascending index among equal coefficients.
    order.sort_by(|&a, &b| coef(b).total_cmp(&coef(a)));
    let mut p = vec![0.0; k];
    for &i in order.iter().take(keep.min(k)) {
        p[i] = c.p_max;
    }
    Ok(p)
}

/// Picks the keep fraction with the highest mean weighted sum rate on
/// `validation`. Candidates are `j/K` for `j = 1..=K`; returns the winner
/// (smallest on ties) and every candidate's score.
pub fn calibrate_greedy(validation: &Dataset) -> Result<(f64, Vec<(f64, f64)>), BaselineError> {
    let k = validation.k();
    if validation.is_empty() {
        return Err(BaselineError::InvalidParameter(
            "empty validation set".into(),
        ));
    }
    let mut scores = Vec::with_capacity(k);
    for j in 1..=k {
        let f = j as f64 / k as f64;
        let mut total = 0.0;
        for c in &validation.instances {
            total += weighted_sum_rate(c, &greedy_baseline(c, f)?);
        }
        scores.push((f, total / validation.len() as f64));
    }
    let best = scores
        .iter()
        .fold(scores[0], |b, &s| if s.1 > b.1 { s } else { b });
    Ok((best.0, scores))
}

pub const GRID_MAX_K: usize = 4;

/// Exhaustive search over `{0, p_max/(levels−1), …, p_max}^K`. The first
/// maximizer in lexicographic order is returned.
pub fn grid_oracle(c: &ChannelInstance, levels: usize) -> Result<(Vec<f64>, f64), BaselineError> {
    let k = c.k();
    if levels < 2 {
        return Err(BaselineError::InvalidParameter(
            "levels must be at least 2".into(),
        ));
    }
    if k > GRID_MAX_K {
        return Err(BaselineError::TooLarge {
            k,
            levels,
            max_k: GRID_MAX_K,
        });
    }
    let grid: Vec<f64> = (0..levels)
        .map(|i| c.p_max * i as f64 / (levels - 1) as f64)
        .collect();
    let mut idx = vec![0usize; k];
    let mut p = vec![0.0; k];
    let mut best = (p.clone(), f64::NEG_INFINITY);
    loop {
        for (x, &i) in p.iter_mut().zip(&idx) {
            *x = grid[i];
        }
        let f = weighted_sum_rate(c, &p);
        if f > best.1 {
            best = (p.clone(), f);
        }
        let mut d = k;
        loop {
            if d == 0 {
                return Ok(best);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < levels {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_gaussian, GaussianConfig};
    use crate::graph::{permute, Permutation};

    #[test]
    fn single_pair_full_power_in_one_update() {
        let c = ChannelInstance::from_real(1, &[0.6]).unwrap();
        let r = wmmse(
            &c,
            &WmmseConfig {
                init: WmmseInit::Random { seed: 3 },
                ..Default::default()
            },
        )
        .unwrap();
        assert!((wmmse_sweep(&c, &[0.3])[0] - 1.0).abs() < 1e-12);
        assert!((r.powers[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.trace[1], weighted_sum_rate(&c, &[1.0]));
    }

    #[test]
    fn trace_non_decreasing_and_feasible() {
        let d = gen_gaussian(&GaussianConfig::new(8, 30, 4, true)).unwrap();
        for c in &d.instances {
            let r = wmmse(c, &WmmseConfig::default()).unwrap();
            for w in r.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            assert!(r.powers.iter().all(|&p| (0.0..=c.p_max).contains(&p)));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let c = ChannelInstance::from_real(1, &[1.0]).unwrap();
        let cfg = WmmseConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(wmmse(&c, &cfg).is_err());
    }

    #[test]
    fn greedy_examples() {
        let c = ChannelInstance::from_real(
            3,
            &[3f64.sqrt(), 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2f64.sqrt()],
        )
        .unwrap();
        assert_eq!(greedy_baseline(&c, 1.0).unwrap(), vec![1.0; 3]);
        assert_eq!(greedy_baseline(&c, 1.0 / 3.0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(greedy_baseline(&c, 0.5).unwrap(), vec![1.0, 0.0, 1.0]);
        assert!(greedy_baseline(&c, 0.0).is_err());
        let tie =
            ChannelInstance::from_real(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(greedy_baseline(&tie, 0.3).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn greedy_equivariant() {
        let d = gen_gaussian(&GaussianConfig::new(7, 10, 9, true)).unwrap();
        let mut rng = instance_rng(1, 1);
        for c in &d.instances {
            let p = Permutation::random(7, &mut rng);
            let a = p.apply(&greedy_baseline(c, 0.4).unwrap());
            let b = greedy_baseline(&permute(c, &p).unwrap(), 0.4).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn grid_examples() {
        let c = ChannelInstance::from_real(1, &[0.5]).unwrap();
        assert_eq!(grid_oracle(&c, 11).unwrap().0, vec![1.0]);
        let c = ChannelInstance::from_real(2, &[0.5, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(grid_oracle(&c, 5).unwrap().0, vec![1.0, 1.0]);
        let big = gen_gaussian(&GaussianConfig::new(5, 1, 0, false)).unwrap();
        assert!(matches!(
            grid_oracle(&big.instances[0], 2),
            Err(BaselineError::TooLarge { .. })
        ));
        assert!(grid_oracle(&c, 1).is_err());
    }
}
