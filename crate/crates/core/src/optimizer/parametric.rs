use alloc::vec::Vec;

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::objective::{objective_mc, ObjectiveReport, PlannedStrategy, StrategySource};
use crate::family::MartingaleFamily;
use crate::integrate::{nonlinear_integral, StrategyPath};
use crate::kw::{Feature, Payoff};
use crate::math::NeumaierSum;
use crate::par::map_paths;
use crate::path::{PathBundle, PathSource};
use crate::stats::MCEstimate;
use crate::Result;

/// `θ_k = Σ_i β_i φ_i(prefix up to t_{k-1})`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParametricPolicy {
    pub features: Vec<Feature>,
    pub beta: Vec<f64>,
}

impl ParametricPolicy {
    /// All coefficients start at zero.
    pub fn new(features: Vec<Feature>) -> Self {
        let beta = alloc::vec![0.0; features.len()];
        Self { features, beta }
    }

    pub fn with_beta(&self, beta: &[f64]) -> Self {
        Self {
            features: self.features.clone(),
            beta: beta.to_vec(),
        }
    }

    pub fn strategy(&self, path: &PathBundle) -> StrategyPath {
        StrategyPath::from_fn(path, |_, at| {
            self.features
                .iter()
                .zip(&self.beta)
                .map(|(f, b)| b * f.eval(at))
                .sum()
        })
    }
}

impl StrategySource for ParametricPolicy {
    fn plan(&self, path: &PathBundle) -> Result<PlannedStrategy> {
        Ok(self.strategy(path).into())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParametricFit {
    pub policy: ParametricPolicy,
    /// Mean squared residual on the fitting paths at the returned `β`.
    pub in_sample_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Out-of-sample report on the evaluation paths.
    pub report: ObjectiveReport,
}

/// Nelder-Mead over `β` on a fixed set of fitting paths, then an
/// out-of-sample report on `evaluation`.
///
/// Reusing the same fitting paths for every `β` makes the in-sample
/// objective a deterministic function. Parameters whose integral overflows
/// score `+∞`.
#[allow(clippy::too_many_arguments)]
pub fn optimize_parametric<F, P, A, B>(
    family: &F,
    policy: &ParametricPolicy,
    payoff: &P,
    fitting: &A,
    evaluation: &B,
    lambda_floor: MCEstimate,
    options: &NelderMeadOptions,
) -> Result<ParametricFit>
where
    F: MartingaleFamily + ?Sized,
    P: Payoff + ?Sized,
    A: PathSource + ?Sized,
    B: PathSource + ?Sized,
{
    let payoffs: Vec<f64> = map_paths(fitting.n_paths(), |id| payoff.evaluate(&fitting.path(id)));
    let in_sample = |beta: &[f64]| -> f64 {
        let candidate = policy.with_beta(beta);
        let sq = map_paths(fitting.n_paths(), |id| {
            let path = fitting.path(id);
            nonlinear_integral(family, &candidate.strategy(&path), &path)
                .map(|i| {
                    let r = payoffs[id] - i.terminal();
                    r * r
                })
                .unwrap_or(f64::INFINITY)
        });
        sq.into_iter().collect::<NeumaierSum>().value() / fitting.n_paths() as f64
    };
    let result = nelder_mead(in_sample, &policy.beta, options);
    let fitted = policy.with_beta(&result.x);
    let report = objective_mc(family, &fitted, payoff, evaluation, lambda_floor)?;
    Ok(ParametricFit {
        policy: fitted,
        in_sample_objective: result.f,
        evaluations: result.evaluations,
        converged: result.converged,
        report,
    })
}
