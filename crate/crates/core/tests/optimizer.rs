use std::sync::Arc;

use nlkw_core::kw::{analytic_kw_example, regression_kw, ExamplePayoff, RegressionOptions};
use nlkw_core::optimizer::{
    assess_strategy, build_pointwise_strategy, directional_derivative_check, nelder_mead, objective_mc,
    optimize_parametric, pointwise_solve, ConstantStrategy, KwStrategy, NelderMeadOptions, ParametricPolicy,
    Pointwise, PointwiseOptions, Shifted, SolveMode,
};
use nlkw_core::{
    build_grid, ExponentialAsPrintedFamily, ExponentialFamily, Feature, LinearFamily, MCEstimate,
    MartingaleFamily, PathBundle, PathGenerator, PathSource, TimeGrid,
};

fn generator(n_steps: usize, n_paths: usize, seed: u64) -> PathGenerator {
    PathGenerator::new(build_grid(1.0, n_steps).unwrap(), n_paths, 0.5, seed).unwrap()
}

fn node(t: f64, w: f64) -> PathBundle {
    let grid = Arc::new(TimeGrid::from_nodes(vec![0.0, t]).unwrap());
    PathBundle::from_components(grid, 1.0, 0, vec![0.0, w], vec![0.0, 0.0]).unwrap()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(lo) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn identity_at_time_zero() {
    let p = node(1.0, 0.4);
    let opts = PointwiseOptions::default();
    let r = pointwise_solve(&ExponentialFamily, 0.42, &p.prefix(0), opts.default_bracket(), &opts).unwrap();
    assert_eq!(r.mode, SolveMode::Root);
    assert!((r.theta - 0.42).abs() < 1e-12);
}

#[test]
fn reachable_target_is_hit_at_the_smallest_root() {
    let p = node(1.0, 0.0);
    let opts = PointwiseOptions::default();
    let r = pointwise_solve(&ExponentialFamily, 0.3, &p.terminal(), opts.default_bracket(), &opts).unwrap();
    let oracle = bisect(|x| x * (-x * x / 2.0).exp() - 0.3, 0.0, 1.0);
    assert_eq!(r.mode, SolveMode::Root);
    assert!((r.theta - oracle).abs() <= 1e-6, "{} vs {oracle}", r.theta);
    assert!((r.theta - 0.315).abs() < 1e-3);
}

#[test]
fn unreachable_target_settles_on_the_stationary_point() {
    let p = node(1.0, 0.0);
    let opts = PointwiseOptions::default();
    let r = pointwise_solve(&ExponentialFamily, 0.7, &p.terminal(), opts.default_bracket(), &opts).unwrap();
    assert_eq!(r.mode, SolveMode::Stationary);
    assert!((r.theta - 1.0).abs() < 1e-12);
    assert!((r.gap - (0.7 - (-0.5f64).exp())).abs() <= 1e-9);
}

#[test]
fn linear_family_copies_the_projection() {
    let gen = generator(64, 20, 1);
    let kw = analytic_kw_example(0.5, &gen).unwrap();
    let opts = PointwiseOptions::default();
    for i in 0..gen.n_paths() {
        let p = gen.generate(i);
        let built = build_pointwise_strategy(&LinearFamily, &kw, &p, &opts).unwrap();
        assert_eq!(built.strategy.values(), &built.targets[..]);
        assert_eq!(built.stationary_nodes(), 0);
    }
}

#[test]
fn printed_integrand_is_always_invertible() {
    let gen = generator(64, 50, 2);
    let kw = analytic_kw_example(0.5, &gen).unwrap();
    let opts = PointwiseOptions::default();
    for i in 0..gen.n_paths() {
        let p = gen.generate(i);
        let built = build_pointwise_strategy(&ExponentialAsPrintedFamily, &kw, &p, &opts).unwrap();
        assert_eq!(built.stationary_nodes(), 0);
    }
}

/// `sup_x |x e^{xW - x²t/2}|` by a dense scan followed by local refinement.
fn range_bound(t: f64, w: f64, sign: f64) -> f64 {
    let mu = |x: f64| sign * x * (x * w - x * x * t / 2.0).exp();
    let mut best = (0.0, 0.0);
    let mut x = -20.0;
    while x <= 20.0 {
        if mu(x) > best.1 {
            best = (x, mu(x));
        }
        x += 1e-3;
    }
    let (mut lo, mut hi) = (best.0 - 1e-3, best.0 + 1e-3);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if mu(m1) < mu(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    mu(0.5 * (lo + hi))
}

#[test]
fn stationary_nodes_are_exactly_the_out_of_range_targets() {
    let gen = generator(32, 40, 3);
    let kw = analytic_kw_example(0.5, &gen).unwrap();
    let opts = PointwiseOptions::default();
    let mut stationary = 0;
    for i in 0..gen.n_paths() {
        let p = gen.generate(i);
        let built = build_pointwise_strategy(&ExponentialFamily, &kw, &p, &opts).unwrap();
        for (k, (r, h)) in built.reports.iter().zip(&built.targets).enumerate() {
            let at = p.prefix(k);
            if at.t() == 0.0 {
                assert_eq!(r.mode, SolveMode::Root);
                continue;
            }
            let bound = range_bound(at.t(), at.w(), h.signum());
            if (h.abs() - bound).abs() < 1e-6 {
                continue;
            }
            let expected = if h.abs() > bound { SolveMode::Stationary } else { SolveMode::Root };
            assert_eq!(r.mode, expected, "path {i} node {k}: h={h} bound={bound}");
            if r.mode == SolveMode::Stationary {
                stationary += 1;
                assert!((r.gap - (h.abs() - bound)).abs() < 1e-8);
            }
        }
    }
    assert!(stationary > 0);
}

#[test]
fn product_condition_holds_at_every_node() {
    let gen = generator(64, 200, 4);
    let kw = analytic_kw_example(0.5, &gen).unwrap();
    let opts = PointwiseOptions::default();
    let tol = opts.tol_root_rel.max(opts.tol_stat);
    for i in 0..gen.n_paths() {
        let p = gen.generate(i);
        let built = build_pointwise_strategy(&ExponentialFamily, &kw, &p, &opts).unwrap();
        for (k, (r, h)) in built.reports.iter().zip(&built.targets).enumerate() {
            let at = p.prefix(k);
            let gap = h - ExponentialFamily.integrand(&at, r.theta).unwrap();
            let slope = ExponentialFamily.d_integrand(&at, r.theta).unwrap();
            let scale = 1.0 + h.abs() + slope.abs();
            assert!((gap * slope).abs() <= tol * scale, "path {i} node {k}: {r:?}");
            match r.mode {
                SolveMode::Root => assert!(r.gap <= opts.tol_root(*h)),
                SolveMode::Stationary => {
                    assert!(slope.abs() <= opts.tol_stat);
                    assert!(r.gap > opts.tol_root(*h));
                }
            }
        }
    }
}

#[test]
fn linear_pointwise_objective_reaches_the_floor() {
    let gen = generator(256, 50_000, 5);
    let kw = analytic_kw_example(0.5, &gen).unwrap();
    let strategy = Pointwise {
        family: &LinearFamily,
        kw: &kw,
        options: PointwiseOptions::default(),
    };
    let r = objective_mc(&LinearFamily, &strategy, &ExamplePayoff, &gen, kw.lambda_sq).unwrap();
    assert!(r.objective.within(1.5, 3.0), "{r:?}");
    assert!(r.orthogonality.within(0.0, 3.0), "{r:?}");
    assert!(r.respects_floor());
    assert_eq!(r.mode_counts.unwrap().stationary, 0);
    assert!(r.excess.unwrap().mean.abs() < 1e-20);
}

#[test]
fn null_strategy_leaves_the_payoff_untouched() {
    let gen = generator(16, 100_000, 6);
    let floor = MCEstimate::from_samples(&[]);
    let r = objective_mc(&ExponentialFamily, &ConstantStrategy(0.0), &ExamplePayoff, &gen, floor).unwrap();
    assert!(r.objective.within(2.0, 3.0), "{r:?}");
    assert!(r.orthogonality.mean.is_finite());
}

#[test]
fn exponential_pointwise_optimum_is_orthogonal_and_minimal() {
    let gen = generator(64, 20_000, 7);
    let kw = analytic_kw_example(0.5, &gen).unwrap();
    let optimum = Pointwise {
        family: &ExponentialFamily,
        kw: &kw,
        options: PointwiseOptions::default(),
    };
    let (at_opt, slope) = assess_strategy(&ExponentialFamily, &optimum, &ExamplePayoff, &gen, kw.lambda_sq, &[0.1, 0.025]).unwrap();
    assert!(at_opt.orthogonality.within(0.0, 3.0), "{at_opt:?}");
    assert!(at_opt.respects_floor());
    let excess = at_opt.excess.unwrap();
    assert!(excess.mean > 0.0);
    assert!(at_opt.mode_counts.unwrap().stationary > 0);
    let fd = slope.smallest_eps().unwrap();
    assert!(fd.finite_difference.within(0.0, 3.0), "{slope:?}");
    assert!(fd.agrees, "{slope:?}");

    let perturbed = Shifted {
        inner: optimum,
        offset: 0.5,
    };
    let off = objective_mc(&ExponentialFamily, &perturbed, &ExamplePayoff, &gen, kw.lambda_sq).unwrap();
    assert!(off.orthogonality.mean.abs() > 3.0 * off.orthogonality.std_err, "{off:?}");
    let gap = off.objective.mean - at_opt.objective.mean;
    assert!(gap > 3.0 * off.objective.joint_se(&at_opt.objective), "{gap}");
}

#[test]
fn linear_directional_derivatives() {
    let gen = generator(64, 20_000, 8);
    let kw = analytic_kw_example(0.5, &gen).unwrap();
    let at_h = directional_derivative_check(&LinearFamily, &KwStrategy(&kw), &ExamplePayoff, &gen, &[0.1, 0.025]).unwrap();
    assert!(at_h.analytic.within(0.0, 3.0), "{at_h:?}");
    assert!(at_h.smallest_eps().unwrap().finite_difference.within(0.0, 3.0), "{at_h:?}");

    let shifted = Shifted {
        inner: KwStrategy(&kw),
        offset: 1.0,
    };
    let off = directional_derivative_check(&LinearFamily, &shifted, &ExamplePayoff, &gen, &[0.1, 0.05, 0.025]).unwrap();
    assert!(off.analytic.within(2.0, 3.0), "{off:?}");
    for rung in &off.rungs {
        assert!(rung.agrees, "{off:?}");
        // F is exactly quadratic in ε here
        assert!((rung.finite_difference.mean - off.analytic.mean).abs() < 1e-9);
    }
}

#[test]
fn too_few_paths_are_rejected() {
    let gen = generator(4, 99, 0);
    let floor = MCEstimate::from_samples(&[]);
    let err = objective_mc(&LinearFamily, &ConstantStrategy(0.0), &ExamplePayoff, &gen, floor).unwrap_err();
    match err {
        nlkw_core::Error::Parameter { name, reason } => {
            assert_eq!(name, "n_paths");
            assert!(reason.contains("below minimum 100"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn parametric_linear_policy_matches_the_regression() {
    let fit = generator(64, 20_000, 9);
    let eval = generator(64, 20_000, 10);
    let features: Vec<Feature> = vec!["w1".parse().unwrap()];
    let reg = regression_kw(
        &ExamplePayoff,
        &features,
        &fit,
        RegressionOptions {
            holdout_fraction: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    let floor = analytic_kw_example(0.5, &eval).unwrap().lambda_sq;
    let out = optimize_parametric(
        &LinearFamily,
        &ParametricPolicy::new(features),
        &ExamplePayoff,
        &fit,
        &eval,
        floor,
        &NelderMeadOptions::default(),
    )
    .unwrap();
    assert!(out.converged);
    let beta = out.policy.beta[0];
    assert!((beta - reg.coefficients()[0]).abs() < 1e-6, "{beta} vs {:?}", reg.coefficients());
    assert!((beta - 1.0).abs() <= 3.0 * reg.coefficient_se[0]);
    assert!(out.report.respects_floor());
}

#[test]
fn parametric_constant_policy_satisfies_first_order_condition() {
    let fit = generator(32, 20_000, 11);
    let eval = generator(32, 20_000, 12);
    let floor = analytic_kw_example(0.5, &eval).unwrap().lambda_sq;
    let out = optimize_parametric(
        &ExponentialFamily,
        &ParametricPolicy::new(vec!["const".parse().unwrap()]),
        &ExamplePayoff,
        &fit,
        &eval,
        floor,
        &NelderMeadOptions::default(),
    )
    .unwrap();
    assert!(out.converged);
    let beta0 = out.policy.beta[0];
    let slope = directional_derivative_check(&ExponentialFamily, &ConstantStrategy(beta0), &ExamplePayoff, &eval, &[0.025]).unwrap();
    let fd = slope.rungs[0].finite_difference;
    assert!(fd.within(0.0, 3.0), "{beta0}: {fd:?}");
}

#[test]
fn zero_feature_policy_is_the_null_strategy() {
    let fit = generator(16, 500, 13);
    let eval = generator(16, 50_000, 14);
    let floor = MCEstimate::from_samples(&[]);
    let out = optimize_parametric(
        &ExponentialFamily,
        &ParametricPolicy::new(vec![]),
        &ExamplePayoff,
        &fit,
        &eval,
        floor,
        &NelderMeadOptions::default(),
    )
    .unwrap();
    assert!(out.policy.beta.is_empty());
    assert!(out.report.objective.within(2.0, 3.0), "{:?}", out.report);
}

#[test]
fn simplex_search_is_deterministic_under_common_random_numbers() {
    let f = |b: &[f64]| (b[0] - 0.25).powi(2) + (b[1] + 1.0).powi(2);
    let a = nelder_mead(f, &[0.0, 0.0], &NelderMeadOptions::default());
    let b = nelder_mead(f, &[0.0, 0.0], &NelderMeadOptions::default());
    assert_eq!(a, b);
}
