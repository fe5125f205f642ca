use nlkw_core::integrate::{isometry_gap, ito_integral, nonlinear_integral, Driver, StrategyPath};
use nlkw_core::{
    build_grid, simulate_batch, ulps_apart, ExponentialFamily, LinearFamily, MCEstimate, MartingaleFamily,
    PathBundle, PathGenerator, PathSource,
};
use proptest::prelude::*;

fn generator(n_steps: usize, n_paths: usize, rho: f64, seed: u64) -> PathGenerator {
    PathGenerator::new(build_grid(1.0, n_steps).unwrap(), n_paths, rho, seed).unwrap()
}

#[test]
fn ito_isometry_for_scaled_first_component() {
    let rho = 0.5;
    let gen = generator(256, 100_000, rho, 3);
    let sq: Vec<f64> = (0..gen.n_paths())
        .map(|i| {
            let p = gen.generate(i);
            let h = StrategyPath::from_fn(&p, |_, at| 2.0 * rho * at.w1());
            ito_integral(&h, p.w(), p.grid()).unwrap().terminal().powi(2)
        })
        .collect();
    let est = MCEstimate::from_samples(&sq);
    assert!(est.within(2.0 * rho * rho, 3.0), "{est:?}");
}

#[test]
fn unit_and_zero_integrands() {
    let batch = simulate_batch(build_grid(1.0, 32).unwrap(), 20, 0.5, 1).unwrap();
    for p in batch.paths() {
        let one = ito_integral(&StrategyPath::constant(32, 1.0), p.w(), p.grid()).unwrap();
        assert!((one.terminal() - p.w()[32]).abs() <= 1e-14);
        let zero = ito_integral(&StrategyPath::constant(32, 0.0), p.w(), p.grid()).unwrap();
        assert_eq!(zero.terminal(), 0.0);
        assert_eq!(zero.running()[0], 0.0);
    }
}

#[test]
fn isometry_gap_vanishes_for_predictable_integrands() {
    let gen = generator(128, 50_000, 0.5, 20);
    type Integrand = fn(&nlkw_core::PathPrefix<'_>) -> f64;
    let cases: [(&str, Integrand); 3] = [
        ("one", |_| 1.0),
        ("w1", |at| at.w1()),
        ("sign", |at| if at.w() >= 0.0 { 1.0 } else { -1.0 }),
    ];
    for (name, h) in cases {
        let gap = isometry_gap(&gen, Driver::W, |_, at| h(at)).unwrap();
        assert!(gap.within(0.0, 3.0), "{name}: {gap:?}");
    }
}

#[test]
fn exponential_integral_has_zero_mean() {
    let gen = generator(64, 100_000, 0.5, 8);
    let terminal: Vec<f64> = (0..gen.n_paths())
        .map(|i| {
            let p = gen.generate(i);
            let theta = StrategyPath::from_fn(&p, |_, at| (at.w1()).clamp(-1.0, 1.0));
            nonlinear_integral(&ExponentialFamily, &theta, &p).unwrap().terminal()
        })
        .collect();
    let est = MCEstimate::from_samples(&terminal);
    assert!(est.within(0.0, 3.0), "{est:?}");
}

fn path_scale(family: &dyn MartingaleFamily, p: &PathBundle, c: f64) -> f64 {
    (0..=p.n_steps())
        .map(|k| family.eval(&p.prefix(k), c).unwrap().abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_strategies_telescope(c in -3.0f64..3.0, n in 1usize..300, seed in any::<u64>(), rho in 0.0f64..=1.0) {
        let batch = simulate_batch(build_grid(1.0, n).unwrap(), 3, rho, seed).unwrap();
        for p in batch.paths() {
            let theta = StrategyPath::constant(n, c);
            for family in [&ExponentialFamily as &dyn MartingaleFamily, &LinearFamily] {
                let got = nonlinear_integral(family, &theta, p).unwrap().terminal();
                let want = family.eval(&p.terminal(), c).unwrap();
                prop_assert!(ulps_apart(got, want, path_scale(family, p, c)) <= 8.0);
            }
        }
    }

    #[test]
    fn linear_family_reduces_to_ito(values in proptest::collection::vec(-5.0f64..5.0, 1..200), seed in any::<u64>()) {
        let n = values.len();
        let batch = simulate_batch(build_grid(1.0, n).unwrap(), 2, 0.5, seed).unwrap();
        let theta = StrategyPath::from_values(values);
        for p in batch.paths() {
            let a = nonlinear_integral(&LinearFamily, &theta, p).unwrap();
            let b = ito_integral(&theta, p.w(), p.grid()).unwrap();
            let scale = a.running().iter().chain(b.running()).fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.running().iter().zip(b.running()) {
                prop_assert!(ulps_apart(*x, *y, scale) <= 8.0);
            }
        }
    }

    #[test]
    fn running_values_ignore_the_future(k in 0usize..40, seed in any::<u64>(), shift in -2.0f64..2.0) {
        let batch = simulate_batch(build_grid(1.0, 40).unwrap(), 1, 0.6, seed).unwrap();
        let p = &batch.paths()[0];
        let mut w1 = p.w1().to_vec();
        let mut w2 = p.w2().to_vec();
        for j in k + 1..=40 {
            w1[j] += shift;
            w2[j] -= shift;
        }
        w1[k + 1..].reverse();
        let q = PathBundle::from_components(p.shared_grid().clone(), p.rho(), 0, w1, w2).unwrap();
        let policy = |_: usize, at: &nlkw_core::PathPrefix<'_>| at.w1() + 0.5 * at.w();
        for family in [&ExponentialFamily as &dyn MartingaleFamily, &LinearFamily] {
            let a = nonlinear_integral(family, &StrategyPath::from_fn(p, policy), p).unwrap();
            let b = nonlinear_integral(family, &StrategyPath::from_fn(&q, policy), &q).unwrap();
            prop_assert_eq!(&a.running()[..=k], &b.running()[..=k]);
        }
    }
}
