use alloc::vec;
use alloc::vec::Vec;

use super::MartingaleFamily;
use crate::math::{ln, sqrt, exp, NeumaierSum};
use crate::par::try_map_paths;
use crate::path::{PathPrefix, PathSource};
use crate::stats::MCEstimate;
use crate::{Error, Result};

/// Sample mean of `M(T, x)` over the source; should vanish for a martingale family.
pub fn martingale_mean<F, S>(family: &F, x: f64, source: &S) -> Result<MCEstimate>
where
    F: MartingaleFamily + ?Sized,
    S: PathSource + ?Sized,
{
    let samples = try_map_paths(source.n_paths(), |id| family.eval(&source.path(id).terminal(), x))?;
    Ok(MCEstimate::from_samples(&samples))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LadderRung {
    pub n_steps: usize,
    pub rmse: f64,
}

/// RMSE of the left-point sum `Σ μ(t_{j-1}, x) ΔW_j` against `M(T, x)` on
/// successively finer grids cut from the same Brownian paths.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepresentationReport {
    pub family: &'static str,
    pub x: f64,
    pub rungs: Vec<LadderRung>,
    /// Root mean square of `M(T, x)` itself.
    pub scale: f64,
}

impl RepresentationReport {
    /// `rmse(N_i) / rmse(N_{i+1})`; `None` where the finer rung is exactly zero.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.rungs
            .windows(2)
            .map(|w| (w[1].rmse > 0.0).then(|| w[0].rmse / w[1].rmse))
            .collect()
    }

    /// Empirical convergence orders `ln(ratio) / ln(N_{i+1} / N_i)`.
    pub fn orders(&self) -> Vec<Option<f64>> {
        self.rungs
            .windows(2)
            .map(|w| {
                (w[1].rmse > 0.0 && w[0].rmse > 0.0).then(|| {
                    ln(w[0].rmse / w[1].rmse) / ln(w[1].n_steps as f64 / w[0].n_steps as f64)
                })
            })
            .collect()
    }

    /// True when the last refinement improves the error by less than `min_ratio`
    /// while the error is still well above rounding level.
    pub fn stalled(&self, min_ratio: f64) -> bool {
        match (self.ratios().last(), self.rungs.last()) {
            (Some(Some(r)), Some(top)) => *r < min_ratio && top.rmse > 1e-8 * self.scale.max(1.0),
            _ => false,
        }
    }
}

/// Ladder check of `M(x) = ∫ μ(s, x) dW_s`.
///
/// The source grid must have a step count divisible by every rung.
pub fn representation_check<F, S>(
    family: &F,
    x: f64,
    ladder: &[usize],
    source: &S,
) -> Result<RepresentationReport>
where
    F: MartingaleFamily + ?Sized,
    S: PathSource + ?Sized,
{
    if ladder.is_empty() {
        return Err(Error::parameter("ladder", "need at least one rung"));
    }
    let n_fine = source.grid().n_steps();
    let mut strides = Vec::with_capacity(ladder.len());
    for &n in ladder {
        if n == 0 || !n_fine.is_multiple_of(n) {
            return Err(Error::parameter(
                "ladder",
                alloc::format!("rung {n} does not divide the simulated {n_fine} steps"),
            ));
        }
        strides.push(n_fine / n);
    }
    let per_path = try_map_paths(source.n_paths(), |id| -> Result<(Vec<f64>, f64)> {
        let path = source.path(id);
        let target = family.eval(&path.terminal(), x)?;
        let mut sq = Vec::with_capacity(strides.len());
        for &stride in &strides {
            let mut acc = NeumaierSum::new();
            let mut prev: PathPrefix<'_> = path.prefix(0);
            for k in (stride..=n_fine).step_by(stride) {
                let next = path.prefix(k);
                acc.add(family.integrand(&prev, x)? * (next.w() - prev.w()));
                prev = next;
            }
            let err = acc.value() - target;
            sq.push(err * err);
        }
        Ok((sq, target * target))
    })?;
    let n = per_path.len() as f64;
    let rungs = ladder
        .iter()
        .enumerate()
        .map(|(i, &n_steps)| {
            let mse = per_path.iter().map(|(sq, _)| sq[i]).collect::<NeumaierSum>().value() / n;
            LadderRung {
                n_steps,
                rmse: sqrt(mse),
            }
        })
        .collect();
    let scale = sqrt(per_path.iter().map(|(_, m2)| *m2).collect::<NeumaierSum>().value() / n);
    Ok(RepresentationReport {
        family: family.name(),
        x,
        rungs,
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiniteDifference {
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

impl FiniteDifference {
    fn new(analytic: f64, finite_difference: f64) -> Self {
        let diff = (analytic - finite_difference).abs();
        let relative_error = if analytic == 0.0 {
            diff
        } else {
            diff / analytic.abs()
        };
        Self {
            analytic,
            finite_difference,
            relative_error,
        }
    }
}

/// Analytic `∂ₓM` and `∂ₓμ` against central differences with step `bump`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivativeReport {
    pub d_eval: FiniteDifference,
    pub d_integrand: FiniteDifference,
}

pub fn derivative_check<F>(family: &F, at: &PathPrefix<'_>, x: f64, bump: f64) -> Result<DerivativeReport>
where
    F: MartingaleFamily + ?Sized,
{
    if !(bump > 0.0) || !bump.is_finite() {
        return Err(Error::parameter("bump", "must be positive"));
    }
    let fd_eval = (family.eval(at, x + bump)? - family.eval(at, x - bump)?) / (2.0 * bump);
    let fd_integrand =
        (family.integrand(at, x + bump)? - family.integrand(at, x - bump)?) / (2.0 * bump);
    Ok(DerivativeReport {
        d_eval: FiniteDifference::new(family.d_eval(at, x)?, fd_eval),
        d_integrand: FiniteDifference::new(family.d_integrand(at, x)?, fd_integrand),
    })
}

/// Empirical Hölder exponent and constant of `x ↦ ∂ₓM(T, x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum HolderReport {
    /// `∂ₓM(T, ·)` took identical values on every grid point of every path.
    ConstantDerivative,
    Estimated {
        /// Per-path slope of `ln|∂ₓM(x) - ∂ₓM(y)|` on `ln|x - y|`.
        delta: Vec<f64>,
        /// Per-path `exp(intercept)`.
        k: Vec<f64>,
        delta_hat: MCEstimate,
        k_hat: MCEstimate,
    },
}

impl HolderReport {
    /// Share of paths whose exponent is at least `threshold`.
    pub fn fraction_at_least(&self, threshold: f64) -> Option<f64> {
        match self {
            HolderReport::ConstantDerivative => None,
            HolderReport::Estimated { delta, .. } => {
                Some(delta.iter().filter(|d| **d >= threshold).count() as f64 / delta.len() as f64)
            }
        }
    }
}

/// Diagnostic only: per-path log-log regression over all pairs of `x_grid`.
pub fn holder_estimate<F, S>(family: &F, source: &S, x_grid: &[f64]) -> Result<HolderReport>
where
    F: MartingaleFamily + ?Sized,
    S: PathSource + ?Sized,
{
    if x_grid.len() < 3 {
        return Err(Error::parameter("x_grid", "need at least three points"));
    }
    if x_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::parameter("x_grid", "points must be finite"));
    }
    let mut sorted = x_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::parameter("x_grid", "points must be distinct"));
    }
    let fits = try_map_paths(source.n_paths(), |id| -> Result<Option<(f64, f64)>> {
        let path = source.path(id);
        let at = path.terminal();
        let values = x_grid
            .iter()
            .map(|&x| family.d_eval(&at, x))
            .collect::<Result<Vec<_>>>()?;
        let mut pts = vec![];
        for i in 0..x_grid.len() {
            for j in i + 1..x_grid.len() {
                let dv = (values[i] - values[j]).abs();
                if dv > 0.0 {
                    pts.push((ln((x_grid[i] - x_grid[j]).abs()), ln(dv)));
                }
            }
        }
        Ok(log_log_fit(&pts))
    })?;
    let (delta, k): (Vec<f64>, Vec<f64>) = fits.into_iter().flatten().unzip();
    if delta.is_empty() {
        return Ok(HolderReport::ConstantDerivative);
    }
    Ok(HolderReport::Estimated {
        delta_hat: MCEstimate::from_samples(&delta),
        k_hat: MCEstimate::from_samples(&k),
        delta,
        k,
    })
}

/// Least-squares line through `(ln d, ln v)`; returns `(slope, exp(intercept))`.
fn log_log_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, exp(my - slope * mx)))
}
