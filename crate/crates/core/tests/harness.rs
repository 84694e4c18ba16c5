use igcnet::channel::instance_rng;
use igcnet::channel::{
    gen_gaussian, gen_geometric, ChannelInstance, GaussianConfig, GeometricConfig,
};
use igcnet::graph::NormalizationScheme;
use igcnet::harness::{
    evaluate, noisy_csi_with_rng, partial_csi, robustness_curve, train, CsiMode, EvalOptions,
    Method, TrainConfig,
};
use igcnet::model::{IgcNetConfig, IgcNetModel};

fn tiny_model() -> IgcNetConfig {
    IgcNetConfig {
        num_layers: 2,
        hidden_dim: 8,
        embed_dim: 6,
        ..Default::default()
    }
}

/// `Σ_k w_k log2(1 + |h_kk|² p_k / (Σ_{j≠k} |h_kj|² p_j + σ_k²))`, written
/// out for K = 2.
fn hand_rate_k2(c: &ChannelInstance, p: &[f64]) -> f64 {
    let g = |r: usize, t: usize| c.h(r, t).norm_sqr();
    let s0 = g(0, 0) * p[0] / (g(0, 1) * p[1] + c.noise[0]);
    let s1 = g(1, 1) * p[1] / (g(1, 0) * p[0] + c.noise[1]);
    c.weights[0] * (1.0 + s0).log2() + c.weights[1] * (1.0 + s1).log2()
}

#[test]
fn evaluate_rates_match_hand_objective() {
    let d = gen_gaussian(&GaussianConfig::new(2, 40, 31, true)).unwrap();
    let model = IgcNetModel::new(tiny_model(), NormalizationScheme::Identity, 1).unwrap();
    let opts = EvalOptions {
        greedy_fraction: 0.5,
        ..Default::default()
    };
    let r = evaluate(
        Some(&model),
        &d,
        &[Method::Wmmse, Method::Igcnet, Method::Greedy],
        &opts,
    )
    .unwrap();
    for (i, c) in d.instances.iter().enumerate() {
        let ig = hand_rate_k2(c, &model.predict(c).unwrap());
        assert!((r.get(Method::Igcnet).unwrap().rates[i] - ig).abs() < 1e-12);
        let w = igcnet::baselines::wmmse(c, &opts.wmmse).unwrap().powers;
        assert!((r.get(Method::Wmmse).unwrap().rates[i] - hand_rate_k2(c, &w)).abs() < 1e-12);
    }
    // Aggregates recomputed from per-instance rates.
    let wm: f64 = r.get(Method::Wmmse).unwrap().rates.iter().sum::<f64>() / 40.0;
    for m in &r.methods {
        let mean: f64 = m.rates.iter().sum::<f64>() / 40.0;
        assert!((m.mean_rate - mean).abs() < 1e-12);
        assert!((m.ratio - mean / wm).abs() < 1e-12);
    }
}

#[test]
fn overfit_single_instance() {
    // Adam is not a strict descent method, so an occasional overshoot is
    // tolerated across a fixed batch of instances.
    let mut monotone = 0;
    for seed in 40..60 {
        let d = gen_gaussian(&GaussianConfig::new(4, 1, seed, false)).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            patience: 50,
            lr: 1e-3,
            model: tiny_model(),
            ..Default::default()
        };
        let out = train(&cfg, &d).unwrap();
        assert_eq!(out.history.len(), 50);
        let h = &out.history;
        assert!(
            h[49].train_loss < h[0].train_loss - 0.01,
            "seed {seed}: {h:?}"
        );
        if h.windows(2).all(|w| w[1].train_loss < w[0].train_loss) {
            monotone += 1;
        }
    }
    assert!(monotone >= 18, "{monotone}/20 strictly decreasing");
}

#[test]
fn same_seed_identical_history_and_parameters() {
    let d = gen_gaussian(&GaussianConfig::new(5, 60, 33, true)).unwrap();
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 16,
        seed: 8,
        model: tiny_model(),
        ..Default::default()
    };
    let a = train(&cfg, &d).unwrap();
    let b = train(&cfg, &d).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params(), b.model.params());
    let c = train(&TrainConfig { seed: 9, ..cfg }, &d).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn corrupted_powers_scored_on_true_channel() {
    let d = gen_geometric(&GeometricConfig::new(5, 12, 34)).unwrap();
    let norm = NormalizationScheme::fit_log_snr(&d);
    let model = IgcNetModel::new(tiny_model(), norm, 2).unwrap();
    let rate = |c: &ChannelInstance, p: &[f64]| igcnet::metrics::weighted_sum_rate(c, p);
    let rows = robustness_curve(&model, &d, CsiMode::Noisy, &[0.0, 0.2], 5).unwrap();
    assert_eq!(rows[0].relative, 1.0);
    let mut want = 0.0;
    for (i, c) in d.instances.iter().enumerate() {
        let hat = noisy_csi_with_rng(c, 0.2, &mut instance_rng(6, i as u64)).unwrap();
        want += rate(c, &model.predict(&hat).unwrap());
    }
    assert!((rows[1].corrupted_rate - want / 12.0).abs() < 1e-12);

    let rows = robustness_curve(&model, &d, CsiMode::Partial, &[0.5], 0).unwrap();
    let want: f64 = d
        .instances
        .iter()
        .map(|c| rate(c, &model.predict(&partial_csi(c, 0.5).unwrap()).unwrap()))
        .sum::<f64>()
        / 12.0;
    assert!((rows[0].corrupted_rate - want).abs() < 1e-12);
}

#[test]
fn partial_sweep_rejects_gaussian_data() {
    let d = gen_gaussian(&GaussianConfig::new(3, 2, 0, false)).unwrap();
    let model = IgcNetModel::new(tiny_model(), NormalizationScheme::Identity, 0).unwrap();
    assert!(robustness_curve(&model, &d, CsiMode::Partial, &[0.3], 0).is_err());
}
