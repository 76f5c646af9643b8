use proptest::prelude::*;
use t2rec::harness::T2recSettings;
use t2rec::synthgen::SyntheticSpec;
use t2rec::theory::{
    approx_bound, c1, c2, c3, empirical_rate_experiment, entropy_bound, lipschitz_constant, rate_exponent, BoundInputs,
    RateConfig,
};
use t2rec::twotower::TrainConfig;

fn inputs(depth: u32) -> BoundInputs {
    BoundInputs {
        width: 8.0,
        depth,
        scale: 2.0,
        width_item: 4.0,
        depth_item: 2,
        scale_item: 1.0,
        p: 3,
        radius: 1.0,
        beta: 2.0,
        d_u: 4.0,
        d_i: 3.0,
        omega_size: 10_000,
        sigma2: 0.1,
        noise_bound: 1.0,
        lambda_omega: 0.0,
        j_r0: 0.0,
        eps: 0.01,
    }
}

#[test]
fn calculator_exact_values() {
    assert!((lipschitz_constant(2.0, 2, 1.0).unwrap() - 13.0).abs() < 1e-12);
    assert!((c2(5, 5) - 140.0).abs() < 1e-12);
    assert!((c3(4, 1.0, 2.0, 1.0) - 32.0).abs() < 1e-12);
    assert!((rate_exponent(2.0, 4.0) - 0.5).abs() < 1e-12);
    assert!((approx_bound(30, 1.0, 0.01) - 0.9).abs() < 1e-12);
    assert!((c1(1, 1.0, 0.0, 0.0) - 7500.0 / 13.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn entropy_decreasing_in_eps(e1 in 1e-6f64..1e-2, f in 1.01f64..100.0) {
        let a = entropy_bound(&inputs(3), e1).unwrap();
        let b = entropy_bound(&inputs(3), e1 * f).unwrap();
        prop_assert!(b < a);
        prop_assert_eq!(a, entropy_bound(&inputs(3), e1).unwrap());
    }

    #[test]
    fn lipschitz_monotone_in_depth(w in 1.5f64..16.0, b in 0.7f64..3.0, l in 1u32..6) {
        prop_assume!(w * b > 1.0);
        prop_assert!(lipschitz_constant(w, l + 1, b).unwrap() > lipschitz_constant(w, l, b).unwrap());
        prop_assert!(entropy_bound(&inputs(l + 1), 1e-3).unwrap() >= entropy_bound(&inputs(l), 1e-3).unwrap());
    }
}

#[test]
fn rate_probe_slope_and_degenerate_floor() {
    let spec = SyntheticSpec {
        n_users: 20,
        n_items: 20,
        user_dim: 4,
        item_dim: 4,
        embed_dim: 2,
        intrinsic_dim: 2,
        n_ratings: 0,
        noise_var: 0.0,
        coeff_range: 0.0,
        seed: 0,
    };
    let cfg = RateConfig {
        d_values: vec![2],
        omega_grid: vec![60, 80, 100, 120],
        replications: 1,
        lambda_grid: vec![1e-3],
        t2rec: T2recSettings {
            hidden: vec![4],
            embed_dim: 2,
            train: TrainConfig {
                max_epochs: 3,
                ..TrainConfig::default()
            },
        },
        spec,
        ..RateConfig::desk(1, 1e-3)
    };
    let table = empirical_rate_experiment(&cfg, 1).unwrap();
    assert_eq!(table.cells.len(), 4);
    // Independent least squares of ln(excess) on ln |Omega|.
    let xs: Vec<f64> = cfg.omega_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = table.cells.iter().map(|c| c.excess_mse.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    assert!((table.slope(2).unwrap() - sxy / sxx).abs() < 1e-9);
    for c in &table.cells {
        assert_eq!(c.excess_mse, c.test_mse);
    }

    let floored = RateConfig {
        degenerate_floor: 1e12,
        ..cfg.clone()
    };
    assert_eq!(empirical_rate_experiment(&floored, 1).unwrap().slope(2), None);
    let bad = RateConfig {
        omega_grid: vec![60, 80, 80, 120],
        ..cfg
    };
    assert!(empirical_rate_experiment(&bad, 1).is_err());
}
