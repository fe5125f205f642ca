//! The L² approximation problem `inf_θ E[(H - ∫ M(ds, θ_s))²]`.
//!
//! Writing `H = ∫ h dW + λ^H` and `∫ M(ds, θ) = ∫ μ(s, θ_s) dW`, the
//! objective splits into `E[(λ^H_T)²] + E ∫ (h_s - μ(s, θ_s))² ds`, so the
//! minimiser is found one grid node at a time: match `μ(s, θ) = h_s` where
//! that has a solution, otherwise sit at a stationary point of `μ(s, ·)`.
//! Either way `(h_s - μ(s, θ_s)) ∂ₓμ(s, θ_s) = 0`.

mod nelder_mead;
mod objective;
mod parametric;
mod pointwise;
mod scalar;

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use objective::{
    assess_strategy, directional_derivative_check, objective_mc, ConstantStrategy,
    DirectionalReport, DirectionalRung, FnStrategy, KwStrategy, ModeCounts, ObjectiveReport,
    PlannedStrategy, Pointwise, Shifted, StrategySource, MIN_OBJECTIVE_PATHS,
};
pub use parametric::{optimize_parametric, ParametricFit, ParametricPolicy};
pub use pointwise::{
    build_pointwise_strategy, pointwise_solve, PointwiseOptions, PointwiseSolveReport,
    PointwiseStrategy, SolveMode,
};
pub use scalar::{bisect_root, brent_root, golden_section_min};
