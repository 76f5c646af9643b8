use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use t2rec::nn::{activations, gradient_check, Activation, LayerParams, Mlp};

fn random_net(widths: &[usize], act: Activation, seed: u64) -> Mlp {
    Mlp::uniform(widths, act, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Independent forward pass: explicit loops over rows and columns.
fn straight_line(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let last = net.depth() - 1;
    for (l, layer) in net.layers().iter().enumerate() {
        let mut z = vec![0.0; layer.rows()];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut acc = layer.bias()[r];
            for (c, hc) in h.iter().enumerate() {
                acc += layer.weight(r, c) * hc;
            }
            *zr = acc;
        }
        h = if l < last { activations(net.activation(), &z) } else { z };
    }
    h
}

fn widths_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=16, 3..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_matches_straight_line(widths in widths_strategy(), seed in 0u64..1000, relu in any::<bool>()) {
        let act = if relu { Activation::Relu } else { Activation::Sigmoid };
        let net = random_net(&widths, act, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let x: Vec<f64> = (0..widths[0]).map(|_| rand::Rng::random_range(&mut rng, -1.0..=1.0)).collect();
        let a = net.forward(&x).unwrap();
        let b = straight_line(&net, &x);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
        prop_assert_eq!(a, net.forward(&x).unwrap());
    }

    #[test]
    fn backward_matches_finite_differences(widths in widths_strategy(), seed in 0u64..1000, relu in any::<bool>()) {
        let act = if relu { Activation::Relu } else { Activation::Sigmoid };
        let net = random_net(&widths, act, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let x: Vec<f64> = (0..widths[0]).map(|_| rand::Rng::random_range(&mut rng, -1.0..=1.0)).collect();
        let up: Vec<f64> = (0..*widths.last().unwrap()).map(|_| rand::Rng::random_range(&mut rng, -1.0..=1.0)).collect();
        let g = gradient_check(&net, &x, &up, 1e-5, 1e-5, 1e-8).unwrap();
        prop_assert!(g.passed(), "{:?}", g);
    }

    #[test]
    fn arch_stats_scale_equivariance(widths in widths_strategy(), seed in 0u64..1000, c in 0.01f64..10.0) {
        let mut net = random_net(&widths, Activation::Relu, seed);
        net.layers_mut()[0].weights_mut()[0] = 0.0;
        let before = net.arch_stats();
        net.scale_params(c);
        let after = net.arch_stats();
        prop_assert_eq!(before.effective_params, after.effective_params);
        prop_assert!((after.param_scale - c * before.param_scale).abs() <= 1e-12 * after.param_scale);
    }

    #[test]
    fn relu_idempotent(x in prop::collection::vec(-1e6f64..1e6, 0..32)) {
        let once = activations(Activation::Relu, &x);
        prop_assert_eq!(activations(Activation::Relu, &once), once);
    }

    #[test]
    fn json_round_trip(widths in widths_strategy(), seed in 0u64..1000) {
        let net = random_net(&widths, Activation::Sigmoid, seed);
        let back = Mlp::from_json(&net.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, net);
    }
}

#[test]
fn hand_examples() {
    let l1 = LayerParams::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0]).unwrap();
    let l2 = LayerParams::from_rows(&[&[1.0, 1.0]], &[0.0]).unwrap();
    let net = Mlp::new(vec![l1, l2], Activation::Relu).unwrap();
    assert_eq!(net.forward(&[1.0, -1.0]).unwrap(), vec![1.0]);
    assert_eq!(activations(Activation::Sigmoid, &[0.0, 3f64.ln()]), vec![0.5, 0.75]);
    assert!(net.forward(&[1.0]).is_err());
}
