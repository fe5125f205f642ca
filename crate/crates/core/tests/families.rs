use std::sync::Arc;

use nlkw_core::family::{derivative_check, holder_estimate, martingale_mean, representation_check, HolderReport};
use nlkw_core::{
    build_grid, DerivativeOf, ExponentialAsPrintedFamily, ExponentialFamily, FamilyKind, LinearFamily,
    MartingaleFamily, PathBundle, PathGenerator, PathSource, TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn generator(n_steps: usize, n_paths: usize, seed: u64) -> PathGenerator {
    PathGenerator::new(build_grid(1.0, n_steps).unwrap(), n_paths, 0.5, seed).unwrap()
}

#[test]
fn closed_form_value() {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1).unwrap());
    let p = PathBundle::from_components(grid, 1.0, 0, vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
    let v = ExponentialFamily.eval(&p.terminal(), 1.0).unwrap();
    assert!((v - 0.6487212707).abs() < 1e-10);
}

#[test]
fn families_are_martingales_in_time() {
    let gen = generator(4, 100_000, 17);
    for kind in FamilyKind::ALL {
        for x in [-1.0, 0.5, 2.0] {
            let m = martingale_mean(&kind, x, &gen).unwrap();
            assert!(m.within(0.0, 3.0), "{kind} x={x}: {m:?}");
        }
    }
}

#[test]
fn linear_left_point_sums_are_exact() {
    let gen = generator(1024, 200, 2);
    for x in [-2.5, 0.3, 7.0] {
        let r = representation_check(&LinearFamily, x, &[64, 256, 1024], &gen).unwrap();
        for rung in &r.rungs {
            assert!(rung.rmse <= 8.0 * f64::EPSILON * r.scale, "{r:?}");
        }
    }
}

#[test]
fn corrected_integrand_converges_at_order_one_half() {
    let gen = generator(1024, 4_000, 4);
    let r = representation_check(&ExponentialFamily, 1.0, &[64, 256, 1024], &gen).unwrap();
    for ratio in r.ratios() {
        let ratio = ratio.unwrap();
        assert!((1.6..=2.4).contains(&ratio), "{r:?}");
    }
    assert!(!r.stalled(1.2));
}

#[test]
fn printed_integrand_stalls() {
    let gen = generator(1024, 4_000, 4);
    let r = representation_check(&ExponentialAsPrintedFamily, 1.0, &[64, 256, 1024], &gen).unwrap();
    assert!(r.stalled(1.2), "{r:?}");
    assert!(r.rungs.last().unwrap().rmse > 0.1 * r.scale);
}

#[test]
fn derivative_of_integral_converges() {
    let gen = generator(1024, 4_000, 6);
    let r = representation_check(&DerivativeOf(ExponentialFamily), 0.8, &[64, 256, 1024], &gen).unwrap();
    for ratio in r.ratios() {
        assert!((1.6..=2.4).contains(&ratio.unwrap()), "{r:?}");
    }
}

#[test]
fn analytic_derivatives_match_central_differences() {
    let gen = generator(64, 100, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let path = gen.generate(rng.random_range(0..gen.n_paths()));
        let k = rng.random_range(0..=64);
        let x = rng.random_range(-2.0..2.0);
        let r = derivative_check(&ExponentialFamily, &path.prefix(k), x, 1e-5).unwrap();
        assert!(r.d_integrand.relative_error <= 1e-6, "k={k} x={x}: {r:?}");
        assert!(r.d_eval.relative_error <= 1e-6, "k={k} x={x}: {r:?}");
    }
}

#[test]
fn integrand_derivative_zero_set() {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1).unwrap());
    let p = PathBundle::from_components(grid, 1.0, 0, vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
    let at = p.terminal();
    for x in [-1.0, 1.0] {
        assert!(ExponentialFamily.d_integrand(&at, x).unwrap().abs() < 1e-15);
    }
    let mut cps = ExponentialFamily.integrand_critical_points(&at).unwrap();
    cps.sort_by(f64::total_cmp);
    assert_eq!(cps, vec![-1.0, 1.0]);
}

#[test]
fn holder_exponent_of_spatial_derivative() {
    let gen = generator(8, 2_000, 12);
    let grid = [0.2, 0.2001, 0.201, 0.21, 0.3];
    let report = holder_estimate(&ExponentialFamily, &gen, &grid).unwrap();
    let share = report.fraction_at_least(0.9).expect("exponential derivative is not constant");
    assert!(share >= 0.95, "share {share}");
    assert_eq!(
        holder_estimate(&LinearFamily, &gen, &[-1.0, 0.0, 1.0]).unwrap(),
        HolderReport::ConstantDerivative
    );
    assert!(holder_estimate(&ExponentialFamily, &gen, &[0.5]).is_err());
}
