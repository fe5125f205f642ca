use nlkw_core::{build_grid, simulate_batch, MCEstimate, PathGenerator, PathSource, TimeGrid};
use proptest::prelude::*;

#[test]
fn correlated_driver_covaries_with_first_component() {
    let rho = 0.5;
    let gen = PathGenerator::new(build_grid(1.0, 16).unwrap(), 100_000, rho, 11).unwrap();
    let products: Vec<f64> = (0..gen.n_paths())
        .map(|i| {
            let p = gen.generate(i);
            p.w()[16] * p.w1()[16]
        })
        .collect();
    let cov = MCEstimate::from_samples(&products);
    assert!(cov.within(rho, 3.0), "{cov:?}");
}

#[test]
fn terminal_moments() {
    let n = 100_000;
    let gen = PathGenerator::new(build_grid(1.0, 8).unwrap(), n, 0.3, 5).unwrap();
    let w1: Vec<f64> = (0..n).map(|i| gen.generate(i).w1()[8]).collect();
    let w: Vec<f64> = (0..n).map(|i| gen.generate(i).w()[8]).collect();
    let mean_w1 = w1.iter().sum::<f64>() / n as f64;
    assert!(mean_w1.abs() <= 4.0 * (1.0 / n as f64).sqrt());
    let mean_w = w.iter().sum::<f64>() / n as f64;
    let var_w = w.iter().map(|v| (v - mean_w).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var_w - 1.0).abs() <= 0.05, "{var_w}");
}

#[test]
fn batches_are_pure_functions_of_their_arguments() {
    let a = simulate_batch(build_grid(2.0, 32).unwrap(), 50, 0.4, 99).unwrap();
    let b = simulate_batch(build_grid(2.0, 32).unwrap(), 50, 0.4, 99).unwrap();
    assert_eq!(a, b);
    let c = simulate_batch(build_grid(2.0, 32).unwrap(), 50, 0.4, 100).unwrap();
    assert_ne!(a.paths()[0].w1(), c.paths()[0].w1());
}

#[test]
fn path_streams_do_not_depend_on_batch_size() {
    let small = simulate_batch(build_grid(1.0, 8).unwrap(), 3, 0.2, 7).unwrap();
    let large = simulate_batch(build_grid(1.0, 8).unwrap(), 300, 0.2, 7).unwrap();
    assert_eq!(small.paths(), &large.paths()[..3]);
}

#[test]
fn rho_outside_unit_interval_is_rejected() {
    for rho in [-0.1, 1.5, f64::NAN] {
        assert!(simulate_batch(build_grid(1.0, 4).unwrap(), 1, rho, 0).is_err());
    }
}

proptest! {
    #[test]
    fn uniform_grid_invariants(horizon in 1e-3f64..50.0, n in 1usize..400) {
        let g = TimeGrid::uniform(horizon, n).unwrap();
        prop_assert_eq!(g.nodes().len(), n + 1);
        prop_assert_eq!(g.nodes()[0], 0.0);
        prop_assert_eq!(g.horizon(), horizon);
        for k in 1..=n {
            prop_assert!(g.dt(k) > 0.0);
        }
    }

    #[test]
    fn mixing_identity_holds_on_every_node(rho in 0.0f64..=1.0, seed in any::<u64>()) {
        let batch = simulate_batch(build_grid(1.0, 16).unwrap(), 2, rho, seed).unwrap();
        let c = (1.0 - rho * rho).sqrt();
        for p in batch.paths() {
            for k in 0..=16 {
                let expected = rho * p.w1()[k] + c * p.w2()[k];
                let scale = expected.abs().max(p.w1()[k].abs()).max(p.w2()[k].abs()).max(f64::MIN_POSITIVE);
                prop_assert!((p.w()[k] - expected).abs() <= 4.0 * f64::EPSILON * scale);
            }
        }
    }
}
