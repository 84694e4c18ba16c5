//! SINR and weighted sum rate of a power allocation.

use crate::channel::ChannelInstance;

/// Per-receiver SINR for powers `p`.
pub fn sinr(c: &ChannelInstance, p: &[f64]) -> Vec<f64> {
    let k = c.k();
    assert_eq!(p.len(), k, "power vector length must equal K");
    (0..k)
        .map(|r| {
            let interference: f64 = (0..k)
                .filter(|&j| j != r)
                .map(|j| c.gain(r, j) * p[j])
                .sum();
            c.gain(r, r) * p[r] / (interference + c.noise[r])
        })
        .collect()
}

/// Per-pair weighted rates `w_k log2(1 + SINR_k)`, bits/s/Hz.
pub fn weighted_rates(c: &ChannelInstance, p: &[f64]) -> Vec<f64> {
    sinr(c, p)
        .iter()
        .zip(&c.weights)
        .map(|(s, w)| w * (1.0 + s).log2())
        .collect()
}

pub fn weighted_sum_rate(c: &ChannelInstance, p: &[f64]) -> f64 {
    weighted_rates(c, p).iter().sum()
}

/// True when every entry lies in `[0, p_max]`.
pub fn is_feasible(c: &ChannelInstance, p: &[f64]) -> bool {
    p.len() == c.k() && p.iter().all(|&x| (0.0..=c.p_max).contains(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_unit_snr_is_one_bit() {
        let c = ChannelInstance::from_real(1, &[1.0]).unwrap();
        assert_eq!(weighted_sum_rate(&c, &[1.0]), 1.0);
        assert_eq!(weighted_sum_rate(&c, &[0.0]), 0.0);
    }

    #[test]
    fn two_pair_hand_computation() {
        // h = [[2, 0.5], [1, 1]], p = (1, 0.5), unit noise and weights.
        let c = ChannelInstance::from_real(2, &[2.0, 0.5, 1.0, 1.0]).unwrap();
        let s = sinr(&c, &[1.0, 0.5]);
        assert!((s[0] - 4.0 / (0.25 * 0.5 + 1.0)).abs() < 1e-15);
        assert!((s[1] - 0.5 / (1.0 + 1.0)).abs() < 1e-15);
    }
}
