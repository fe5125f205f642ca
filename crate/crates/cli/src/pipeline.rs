//! simulate → decompose → optimize → assess → ladder.

use std::time::Instant;

use nlkw_core::family::{representation_check, RepresentationReport};
use nlkw_core::kw::{analytic_kw, regression_kw, RegressionOptions};
use nlkw_core::optimizer::{
    assess_strategy, build_pointwise_strategy, optimize_parametric, DirectionalReport, ModeCounts,
    NelderMeadOptions, ObjectiveReport, ParametricPolicy, Pointwise, SolveMode, StrategySource,
};
use nlkw_core::{
    build_grid, FamilyKind, KWDecomposition, MCEstimate, MartingaleFamily, PathGenerator,
    PathSource, PayoffKind,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, KwMethod, StrategyKind};
use crate::error::{RunError, Stage, StageExt};

/// Offsets from the master seed for the auxiliary path sets.
const FIT_SEED_OFFSET: u64 = 1;
const LADDER_SEED_OFFSET: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KwSummary {
    pub method: KwMethod,
    pub lambda_sq: MCEstimate,
    pub coefficients: Vec<f64>,
    pub coefficient_se: Vec<f64>,
}

impl From<&KWDecomposition> for KwSummary {
    fn from(kw: &KWDecomposition) -> Self {
        let method = match kw.integrand {
            nlkw_core::kw::KwIntegrand::Analytic { .. } => KwMethod::Analytic,
            nlkw_core::kw::KwIntegrand::Regression { .. } => KwMethod::Regression,
        };
        Self {
            method,
            lambda_sq: kw.lambda_sq,
            coefficients: kw.coefficients().to_vec(),
            coefficient_se: kw.coefficient_se.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParametricSummary {
    pub beta: Vec<f64>,
    pub converged: bool,
    pub evaluations: usize,
    pub in_sample_objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderStatus {
    /// Every rung at rounding level.
    Exact,
    /// Successive 4x refinements shrink the error by a factor in [1.6, 2.4].
    Converging,
    /// The last refinement gained less than a factor 1.2.
    Stalled,
    Irregular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderSummary {
    pub status: LadderStatus,
    pub ratios: Vec<Option<f64>>,
    pub report: RepresentationReport,
}

impl LadderSummary {
    pub fn new(report: RepresentationReport) -> Self {
        let ratios = report.ratios();
        let exact = report
            .rungs
            .iter()
            .all(|r| r.rmse <= 8.0 * f64::EPSILON * report.scale.max(1.0));
        let status = if exact {
            LadderStatus::Exact
        } else if report.stalled(1.2) {
            LadderStatus::Stalled
        } else if ratios
            .iter()
            .all(|r| r.is_some_and(|r| (1.6..=2.4).contains(&r)))
        {
            LadderStatus::Converging
        } else {
            LadderStatus::Irregular
        };
        Self {
            status,
            ratios,
            report,
        }
    }
}

/// One grid interval of the first path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeRow {
    /// Left end `t_{k-1}` of the interval.
    pub t: f64,
    pub h: f64,
    pub theta: f64,
    pub mode: &'static str,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub family: FamilyKind,
    pub payoff: PayoffKind,
    pub kw: KwSummary,
    pub lambda_sq: MCEstimate,
    pub objective: MCEstimate,
    pub orthogonality: MCEstimate,
    pub excess: Option<MCEstimate>,
    pub floor_joint_se: f64,
    pub floor_respected: bool,
    pub mode_counts: Option<ModeCounts>,
    pub stationary_fraction: Option<f64>,
    pub directional: DirectionalReport,
    pub parametric: Option<ParametricSummary>,
    pub ladder: Option<LadderSummary>,
    pub nodes: Vec<NodeRow>,
    pub wall_clock_seconds: f64,
}

pub fn generator(config: &ExperimentConfig, rho: f64) -> Result<PathGenerator, RunError> {
    let grid = build_grid(config.horizon, config.n_steps).stage(Stage::Simulate)?;
    PathGenerator::new(grid, config.n_paths, rho, config.master_seed).stage(Stage::Simulate)
}

pub fn decompose<S: PathSource + ?Sized>(
    config: &ExperimentConfig,
    paths: &S,
) -> Result<KWDecomposition, RunError> {
    match config.kw_method {
        KwMethod::Analytic => analytic_kw(config.payoff, paths),
        KwMethod::Regression => regression_kw(
            &config.payoff,
            &config.basis,
            paths,
            RegressionOptions {
                holdout_fraction: config.holdout_fraction,
                ..RegressionOptions::default()
            },
        ),
    }
    .stage(Stage::Decompose)
}

/// Paths on the finest ladder grid; coarser rungs subsample them.
pub fn ladder_source(config: &ExperimentConfig) -> Result<PathGenerator, RunError> {
    let top = config.ladder.iter().copied().max().unwrap_or(1);
    let grid = build_grid(config.horizon, top).stage(Stage::Ladder)?;
    PathGenerator::new(
        grid,
        config.ladder_paths,
        config.rho,
        config.master_seed.wrapping_add(LADDER_SEED_OFFSET),
    )
    .stage(Stage::Ladder)
}

pub fn ladder(config: &ExperimentConfig) -> Result<LadderSummary, RunError> {
    let paths = ladder_source(config)?;
    let report = representation_check(&config.family(), config.ladder_x, &config.ladder, &paths)
        .stage(Stage::Ladder)?;
    Ok(LadderSummary::new(report))
}

/// Everything except the ladder, at the configured `rho`.
pub struct Evaluation {
    pub kw: KWDecomposition,
    pub objective: ObjectiveReport,
    pub directional: DirectionalReport,
    pub parametric: Option<ParametricSummary>,
    pub nodes: Vec<NodeRow>,
}

pub fn evaluate(config: &ExperimentConfig, rho: f64) -> Result<Evaluation, RunError> {
    let family = config.family();
    let paths = generator(config, rho)?;
    let kw = decompose(config, &paths)?;

    let (policy, parametric) = match config.strategy {
        StrategyKind::Pointwise => (None, None),
        StrategyKind::Parametric => {
            let fitting = PathGenerator::with_shared_grid(
                paths.shared_grid().clone(),
                config.fit_paths,
                rho,
                config.master_seed.wrapping_add(FIT_SEED_OFFSET),
            )
            .stage(Stage::Optimize)?;
            let options = NelderMeadOptions {
                budget: config.budget,
                ..NelderMeadOptions::default()
            };
            let fit = optimize_parametric(
                &family,
                &ParametricPolicy::new(config.policy_features.clone()),
                &config.payoff,
                &fitting,
                &paths,
                kw.lambda_sq,
                &options,
            )
            .stage(Stage::Optimize)?;
            let summary = ParametricSummary {
                beta: fit.policy.beta.clone(),
                converged: fit.converged,
                evaluations: fit.evaluations,
                in_sample_objective: fit.in_sample_objective,
            };
            (Some(fit.policy), Some(summary))
        }
    };

    let pointwise = Pointwise {
        family: &family,
        kw: &kw,
        options: config.pointwise_options(),
    };
    let strategy: &dyn StrategySource = match &policy {
        Some(p) => p,
        None => &pointwise,
    };
    let (objective, directional) = assess_strategy(
        &family,
        strategy,
        &config.payoff,
        &paths,
        kw.lambda_sq,
        &config.eps_ladder,
    )
    .stage(Stage::Assess)?;
    let nodes = first_path_nodes(config, &family, &kw, policy.as_ref(), &paths)?;
    Ok(Evaluation {
        kw,
        objective,
        directional,
        parametric,
        nodes,
    })
}

fn first_path_nodes(
    config: &ExperimentConfig,
    family: &FamilyKind,
    kw: &KWDecomposition,
    policy: Option<&ParametricPolicy>,
    paths: &PathGenerator,
) -> Result<Vec<NodeRow>, RunError> {
    let path = paths.generate(0);
    let grid = path.grid();
    match policy {
        None => {
            let built = build_pointwise_strategy(family, kw, &path, &config.pointwise_options())
                .stage(Stage::Optimize)?;
            Ok(built
                .reports
                .iter()
                .zip(&built.targets)
                .enumerate()
                .map(|(k, (r, h))| NodeRow {
                    t: grid.t(k),
                    h: *h,
                    theta: r.theta,
                    mode: match r.mode {
                        SolveMode::Root => "root",
                        SolveMode::Stationary => "stationary",
                    },
                    gap: r.gap,
                })
                .collect())
        }
        Some(policy) => {
            let theta = policy.strategy(&path);
            (1..=path.n_steps())
                .map(|k| {
                    let at = path.prefix(k - 1);
                    let h = kw.target(k, &at);
                    let mu = family
                        .integrand(&at, theta.theta(k))
                        .stage(Stage::Optimize)?;
                    Ok(NodeRow {
                        t: grid.t(k - 1),
                        h,
                        theta: theta.theta(k),
                        mode: "policy",
                        gap: (h - mu).abs(),
                    })
                })
                .collect()
        }
    }
}

pub fn run_pipeline(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    config.validate()?;
    let started = Instant::now();
    let eval = evaluate(config, config.rho)?;
    let ladder = ladder(config)?;
    let o = &eval.objective;
    Ok(RunSummary {
        version: nlkw_core::VERSION,
        config: config.clone(),
        family: config.family(),
        payoff: config.payoff,
        kw: KwSummary::from(&eval.kw),
        lambda_sq: eval.kw.lambda_sq,
        objective: o.objective,
        orthogonality: o.orthogonality,
        excess: o.excess,
        floor_joint_se: o.floor_joint_se(),
        floor_respected: o.respects_floor(),
        mode_counts: o.mode_counts,
        stationary_fraction: o.mode_counts.map(|m| m.stationary_fraction()),
        directional: eval.directional,
        parametric: eval.parametric,
        ladder: Some(ladder),
        nodes: eval.nodes,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rho: f64,
    pub lambda_sq: MCEstimate,
    pub objective: MCEstimate,
    pub orthogonality: MCEstimate,
    pub excess: Option<MCEstimate>,
    pub floor_respected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
    pub wall_clock_seconds: f64,
}

pub fn sweep_rho(config: &ExperimentConfig) -> Result<SweepSummary, RunError> {
    config.validate()?;
    let started = Instant::now();
    let points = config
        .rho_sweep
        .iter()
        .map(|&rho| {
            let eval = evaluate(config, rho)?;
            Ok(SweepPoint {
                rho,
                lambda_sq: eval.kw.lambda_sq,
                objective: eval.objective.objective,
                orthogonality: eval.objective.orthogonality,
                excess: eval.objective.excess,
                floor_respected: eval.objective.respects_floor(),
            })
        })
        .collect::<Result<_, RunError>>()?;
    Ok(SweepSummary {
        version: nlkw_core::VERSION,
        config: config.clone(),
        points,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}
