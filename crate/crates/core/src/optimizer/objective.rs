use alloc::format;
use alloc::vec::Vec;

use super::pointwise::{build_pointwise_strategy, PointwiseOptions, PointwiseSolveReport, SolveMode};
use crate::family::{DerivativeOf, MartingaleFamily};
use crate::integrate::{nonlinear_integral, StrategyPath};
use crate::kw::{KWDecomposition, Payoff};
use crate::math::NeumaierSum;
use crate::par::try_map_paths;
use crate::path::{PathBundle, PathPrefix, PathSource};
use crate::stats::MCEstimate;
use crate::{Error, Result};

/// Below this many paths standard errors are not worth reporting.
pub const MIN_OBJECTIVE_PATHS: usize = 100;

/// A strategy for one path, with the pointwise solver's per-node reports when it produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedStrategy {
    pub strategy: StrategyPath,
    pub nodes: Option<Vec<PointwiseSolveReport>>,
}

impl From<StrategyPath> for PlannedStrategy {
    fn from(strategy: StrategyPath) -> Self {
        Self {
            strategy,
            nodes: None,
        }
    }
}

/// Produces a predictable strategy for any path.
pub trait StrategySource: Sync {
    fn plan(&self, path: &PathBundle) -> Result<PlannedStrategy>;
}

impl<S: StrategySource + ?Sized> StrategySource for &S {
    fn plan(&self, path: &PathBundle) -> Result<PlannedStrategy> {
        (**self).plan(path)
    }
}

/// The node-by-node minimiser of the L² objective.
#[derive(Debug, Clone, Copy)]
pub struct Pointwise<'a, F: ?Sized> {
    pub family: &'a F,
    pub kw: &'a KWDecomposition,
    pub options: PointwiseOptions,
}

impl<F: MartingaleFamily + ?Sized> StrategySource for Pointwise<'_, F> {
    fn plan(&self, path: &PathBundle) -> Result<PlannedStrategy> {
        let built = build_pointwise_strategy(self.family, self.kw, path, &self.options)?;
        Ok(PlannedStrategy {
            strategy: built.strategy,
            nodes: Some(built.reports),
        })
    }
}

/// `θ = h`, the KW integrand itself.
#[derive(Debug, Clone, Copy)]
pub struct KwStrategy<'a>(pub &'a KWDecomposition);

impl StrategySource for KwStrategy<'_> {
    fn plan(&self, path: &PathBundle) -> Result<PlannedStrategy> {
        Ok(self.0.strategy(path).into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantStrategy(pub f64);

impl StrategySource for ConstantStrategy {
    fn plan(&self, path: &PathBundle) -> Result<PlannedStrategy> {
        Ok(StrategyPath::constant(path.n_steps(), self.0).into())
    }
}

/// Any predictable rule `θ_k = f(k, prefix up to t_{k-1})`.
#[derive(Debug, Clone, Copy)]
pub struct FnStrategy<F>(pub F);

impl<F> StrategySource for FnStrategy<F>
where
    F: Fn(usize, &PathPrefix<'_>) -> f64 + Sync,
{
    fn plan(&self, path: &PathBundle) -> Result<PlannedStrategy> {
        Ok(StrategyPath::from_fn(path, &self.0).into())
    }
}

/// `θ + offset`; drops the inner solver reports since they no longer describe `θ`.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<S> {
    pub inner: S,
    pub offset: f64,
}

impl<S: StrategySource> StrategySource for Shifted<S> {
    fn plan(&self, path: &PathBundle) -> Result<PlannedStrategy> {
        Ok(self.inner.plan(path)?.strategy.shifted(self.offset).into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeCounts {
    pub root: u64,
    pub stationary: u64,
}

impl ModeCounts {
    pub fn stationary_fraction(&self) -> f64 {
        let total = self.root + self.stationary;
        if total == 0 {
            0.0
        } else {
            self.stationary as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectiveReport {
    /// `E[(H - ∫ M(ds, θ))²]`.
    pub objective: MCEstimate,
    /// `E[(H - ∫ M(ds, θ)) · ∫ ∂ₓM(ds, θ)]`.
    pub orthogonality: MCEstimate,
    /// `E[(λ^H_T)²]` from the KW decomposition.
    pub lambda_floor: MCEstimate,
    /// `E[Σ_k (h_k - μ(t_{k-1}, θ_k))² Δt_k]`, when the strategy came from the pointwise solver.
    pub excess: Option<MCEstimate>,
    pub mode_counts: Option<ModeCounts>,
}

impl ObjectiveReport {
    pub fn floor_joint_se(&self) -> f64 {
        self.objective.joint_se(&self.lambda_floor)
    }

    /// `objective >= floor - 3 joint s.e.`
    pub fn respects_floor(&self) -> bool {
        self.objective.mean >= self.lambda_floor.mean - 3.0 * self.floor_joint_se()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionalRung {
    pub eps: f64,
    /// `[F(ε) - F(-ε)] / 2ε` with common random numbers.
    pub finite_difference: MCEstimate,
    /// `sqrt(se_fd² + se_analytic²)`.
    pub joint_se: f64,
    /// Standard error of the per-path difference.
    pub paired_se: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionalReport {
    /// `-2 E[(H - ∫ M(ds, θ)) · ∫ ∂ₓM(ds, θ)]`.
    pub analytic: MCEstimate,
    pub rungs: Vec<DirectionalRung>,
}

impl DirectionalReport {
    pub fn smallest_eps(&self) -> Option<&DirectionalRung> {
        self.rungs.iter().min_by(|a, b| a.eps.total_cmp(&b.eps))
    }
}

struct PathOutcome {
    residual_sq: f64,
    orthogonality: f64,
    excess: Option<f64>,
    stationary: u64,
    nodes: u64,
    fd: Vec<f64>,
}

fn evaluate_path<F, S, P>(
    family: &F,
    strategy: &S,
    payoff: &P,
    path: &PathBundle,
    eps: &[f64],
) -> Result<PathOutcome>
where
    F: MartingaleFamily + ?Sized,
    S: StrategySource + ?Sized,
    P: Payoff + ?Sized,
{
    let plan = strategy.plan(path)?;
    let theta = &plan.strategy;
    let h = payoff.evaluate(path);
    let residual = h - nonlinear_integral(family, theta, path)?.terminal();
    let derivative = nonlinear_integral(&DerivativeOf(family), theta, path)?.terminal();
    let (excess, stationary, nodes) = match &plan.nodes {
        Some(reports) => {
            let grid = path.grid();
            let ex = reports
                .iter()
                .enumerate()
                .map(|(i, r)| r.gap * r.gap * grid.dt(i + 1))
                .collect::<NeumaierSum>()
                .value();
            let st = reports.iter().filter(|r| r.mode == SolveMode::Stationary).count();
            (Some(ex), st as u64, reports.len() as u64)
        }
        None => (None, 0, 0),
    };
    let fd = eps
        .iter()
        .map(|&e| {
            let up = h - nonlinear_integral(family, &theta.shifted(e), path)?.terminal();
            let down = h - nonlinear_integral(family, &theta.shifted(-e), path)?.terminal();
            Ok((up * up - down * down) / (2.0 * e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathOutcome {
        residual_sq: residual * residual,
        orthogonality: residual * derivative,
        excess,
        stationary,
        nodes,
        fd,
    })
}

/// Objective, orthogonality and the finite-difference slope of
/// `F(ε) = E[(H - ∫ M(ds, θ + ε))²]` in one pass over the paths.
pub fn assess_strategy<F, S, P, B>(
    family: &F,
    strategy: &S,
    payoff: &P,
    paths: &B,
    lambda_floor: MCEstimate,
    eps_ladder: &[f64],
) -> Result<(ObjectiveReport, DirectionalReport)>
where
    F: MartingaleFamily + ?Sized,
    S: StrategySource + ?Sized,
    P: Payoff + ?Sized,
    B: PathSource + ?Sized,
{
    let n = paths.n_paths();
    if n < MIN_OBJECTIVE_PATHS {
        return Err(Error::parameter(
            "n_paths",
            format!("{n} below minimum {MIN_OBJECTIVE_PATHS}"),
        ));
    }
    if eps_ladder.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::parameter("eps_ladder", "steps must be positive"));
    }
    let outcomes = try_map_paths(n, |id| evaluate_path(family, strategy, payoff, &paths.path(id), eps_ladder))?;

    let collect = |f: &dyn Fn(&PathOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };
    let objective = MCEstimate::from_samples(&collect(&|o| o.residual_sq));
    let orthogonality = MCEstimate::from_samples(&collect(&|o| o.orthogonality));
    let has_nodes = outcomes.iter().all(|o| o.excess.is_some());
    let (excess, mode_counts) = if has_nodes {
        let ex = MCEstimate::from_samples(&collect(&|o| o.excess.unwrap_or(0.0)));
        let stationary: u64 = outcomes.iter().map(|o| o.stationary).sum();
        let nodes: u64 = outcomes.iter().map(|o| o.nodes).sum();
        (
            Some(ex),
            Some(ModeCounts {
                root: nodes - stationary,
                stationary,
            }),
        )
    } else {
        (None, None)
    };

    let analytic_samples = collect(&|o| -2.0 * o.orthogonality);
    let analytic = MCEstimate::from_samples(&analytic_samples);
    let rungs = eps_ladder
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let fd_samples = collect(&|o| o.fd[i]);
            let finite_difference = MCEstimate::from_samples(&fd_samples);
            let diffs: Vec<f64> = fd_samples.iter().zip(&analytic_samples).map(|(a, b)| a - b).collect();
            let paired_se = MCEstimate::from_samples(&diffs).std_err;
            let joint_se = finite_difference.joint_se(&analytic);
            DirectionalRung {
                eps,
                finite_difference,
                joint_se,
                paired_se,
                agrees: (finite_difference.mean - analytic.mean).abs() <= 3.0 * joint_se,
            }
        })
        .collect();

    Ok((
        ObjectiveReport {
            objective,
            orthogonality,
            lambda_floor,
            excess,
            mode_counts,
        },
        DirectionalReport { analytic, rungs },
    ))
}

/// MC estimate of the objective and of the orthogonality inner product.
pub fn objective_mc<F, S, P, B>(
    family: &F,
    strategy: &S,
    payoff: &P,
    paths: &B,
    lambda_floor: MCEstimate,
) -> Result<ObjectiveReport>
where
    F: MartingaleFamily + ?Sized,
    S: StrategySource + ?Sized,
    P: Payoff + ?Sized,
    B: PathSource + ?Sized,
{
    Ok(assess_strategy(family, strategy, payoff, paths, lambda_floor, &[])?.0)
}

/// Central differences of `F(ε)` against `-2 E[(H - ∫ M(ds, θ)) ∫ ∂ₓM(ds, θ)]`.
pub fn directional_derivative_check<F, S, P, B>(
    family: &F,
    strategy: &S,
    payoff: &P,
    paths: &B,
    eps_ladder: &[f64],
) -> Result<DirectionalReport>
where
    F: MartingaleFamily + ?Sized,
    S: StrategySource + ?Sized,
    P: Payoff + ?Sized,
    B: PathSource + ?Sized,
{
    let floor = MCEstimate::from_samples(&[]);
    Ok(assess_strategy(family, strategy, payoff, paths, floor, eps_ladder)?.1)
}
