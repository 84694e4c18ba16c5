mod common;

use igcnet::autodiff::{Adam, AdamConfig, Tape, Tensor};

#[test]
fn full_loss_gradients_match_finite_differences() {
    let (mut coords, mut passed) = (0, 0);
    for seed in 0..20 {
        let r = common::gradient_check(seed);
        coords += r.coords;
        passed += r.passed;
    }
    assert!(coords > 1000);
    assert!(passed as f64 >= 0.99 * coords as f64, "{passed}/{coords}");
}

/// Reverse mode through every primitive, checked coordinate-wise.
#[test]
fn primitive_ops_match_finite_differences() {
    let x0 = Tensor::new(vec![2, 3], vec![0.3, -1.2, 0.8, 1.5, -0.4, 0.1]).unwrap();
    let w0 = Tensor::new(vec![3, 2], vec![0.5, -0.7, 0.2, 0.9, -1.1, 0.4]).unwrap();
    let f = |x: &Tensor, w: &Tensor, grad: bool| -> (f64, Option<(Tensor, Tensor)>) {
        let mut t = Tape::new();
        let (x, w) = if grad {
            (t.param(x.clone()), t.param(w.clone()))
        } else {
            (t.constant(x.clone()), t.constant(w.clone()))
        };
        let y = t.matmul(x, w).unwrap();
        let s = t.sigmoid(y);
        let e = t.exp(s);
        let r = t.relu(y);
        let sum = t.add(e, r).unwrap();
        let q = t.div(sum, e).unwrap();
        let l = t.add_scalar(q, 1.5);
        let l = t.log2(l).unwrap();
        let g = t.gather_rows(l, vec![1usize, 0, 1].into()).unwrap();
        let c = t.concat(&[g, s], 0).unwrap();
        let m = t.max_reduce(c, 0).unwrap();
        let z = t.sum_reduce(c, 1).unwrap();
        let a = t.mean_all(m).unwrap();
        let b = t.sum_all(z).unwrap();
        let bm = t.mul(b, a).unwrap();
        let out = t.sub(bm, a).unwrap();
        let v = t.value(out).item().unwrap();
        if !grad {
            return (v, None);
        }
        let gr = t.backward(out).unwrap();
        (
            v,
            Some((gr.get(x).unwrap().clone(), gr.get(w).unwrap().clone())),
        )
    };
    let (_, g) = f(&x0, &w0, true);
    let (gx, gw) = g.unwrap();
    let h = 1e-6;
    for (which, base, grad) in [(0, &x0, &gx), (1, &w0, &gw)] {
        for j in 0..base.len() {
            let mut up = base.clone();
            up.data_mut()[j] += h;
            let mut dn = base.clone();
            dn.data_mut()[j] -= h;
            let (fu, fd) = if which == 0 {
                (f(&up, &w0, false).0, f(&dn, &w0, false).0)
            } else {
                (f(&x0, &up, false).0, f(&x0, &dn, false).0)
            };
            let num = (fu - fd) / (2.0 * h);
            let ad = grad.data()[j];
            assert!(
                (num - ad).abs() < 1e-6 * ad.abs().max(1.0),
                "{which}/{j}: {num} vs {ad}"
            );
        }
    }
}

/// With a constant gradient `g`, bias-corrected moments equal `g` and `g²`
/// exactly, so every step moves by `lr·g/(|g| + eps)`.
#[test]
fn adam_constant_gradient_closed_form() {
    let cfg = AdamConfig::default();
    let g = Tensor::new(vec![1, 3], vec![0.5, -2.0, 1e-3]).unwrap();
    let mut params = vec![Tensor::zeros(&[1, 3])];
    let mut opt = Adam::new(cfg, &params);
    for t in 1..=50 {
        opt.step(&mut params, std::slice::from_ref(&g)).unwrap();
        for (j, &gj) in g.data().iter().enumerate() {
            let want = -(t as f64) * cfg.lr * gj / (gj.abs() + cfg.eps);
            assert!((params[0].data()[j] - want).abs() < 1e-12);
        }
    }
    assert_eq!(opt.step_count(), 50);
}

/// Scalar re-implementation of the Adam recursion on a quadratic.
#[test]
fn adam_matches_scalar_recursion_on_quadratic() {
    let cfg = AdamConfig {
        lr: 0.05,
        ..Default::default()
    };
    let target = [1.0, -3.0];
    let mut params = vec![Tensor::zeros(&[2])];
    let mut opt = Adam::new(cfg, &params);
    let (mut theta, mut m, mut v) = ([0.0f64; 2], [0.0f64; 2], [0.0f64; 2]);
    for t in 1..=200 {
        let grad: Vec<f64> = (0..2)
            .map(|i| 2.0 * (params[0].data()[i] - target[i]))
            .collect();
        opt.step(&mut params, &[Tensor::new(vec![2], grad).unwrap()])
            .unwrap();
        for i in 0..2 {
            let g = 2.0 * (theta[i] - target[i]);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = m[i] / (1.0 - cfg.beta1.powi(t));
            let vh = v[i] / (1.0 - cfg.beta2.powi(t));
            theta[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
            assert!((theta[i] - params[0].data()[i]).abs() < 1e-12);
        }
    }
    assert!((theta[0] - 1.0).abs() < 0.05 && (theta[1] + 3.0).abs() < 0.05);
}
