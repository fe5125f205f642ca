use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::scalar::{brent_root, golden_section_min};
use crate::family::MartingaleFamily;
use crate::integrate::StrategyPath;
use crate::kw::KWDecomposition;
use crate::path::{PathBundle, PathPrefix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SolveMode {
    /// `μ(s, θ) = h_s` was solved.
    Root,
    /// No solution in range; `θ` is a stationary point of `μ(s, ·)`.
    Stationary,
}

impl SolveMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMode::Root => "root",
            SolveMode::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointwiseOptions {
    /// Root tolerance is `tol_root_rel * (1 + |h_s|)` on the gap.
    pub tol_root_rel: f64,
    pub tol_stat: f64,
    /// Initial bracket half-width.
    pub x_max: f64,
    /// The bracket doubles while the best point sits on its edge, up to this half-width.
    pub x_max_limit: f64,
    /// Step of the outward sign scan for families without a known critical set.
    pub scan_step: f64,
}

impl Default for PointwiseOptions {
    fn default() -> Self {
        Self {
            tol_root_rel: 1e-10,
            tol_stat: 1e-8,
            x_max: 50.0,
            x_max_limit: 800.0,
            scan_step: 0.05,
        }
    }
}

impl PointwiseOptions {
    pub fn tol_root(&self, target: f64) -> f64 {
        self.tol_root_rel * (1.0 + target.abs())
    }

    pub fn default_bracket(&self) -> (f64, f64) {
        (-self.x_max, self.x_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointwiseSolveReport {
    pub theta: f64,
    pub mode: SolveMode,
    /// `|h_s - μ(s, θ)|`.
    pub gap: f64,
    /// Roots located in the final bracket; ties go to the smallest `|x|`.
    pub root_count: usize,
    pub bracket: (f64, f64),
}

const ROOT_ITERS: usize = 200;

/// Minimises `(h_s - μ(s, x))²` over `x` in the bracket at the prefix's node.
pub fn pointwise_solve<F>(
    family: &F,
    target: f64,
    at: &PathPrefix<'_>,
    bracket: (f64, f64),
    options: &PointwiseOptions,
) -> Result<PointwiseSolveReport>
where
    F: MartingaleFamily + ?Sized,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::parameter("bracket", format!("empty or infinite bracket [{lo}, {hi}]")));
    }
    if !target.is_finite() {
        return Err(Error::Numeric(format!("non-finite target h = {target}")));
    }
    let critical = family.integrand_critical_points(at);
    loop {
        let found = match &critical {
            Some(cps) => solve_segmented(family, target, at, lo, hi, cps)?,
            None => solve_scanned(family, target, at, lo, hi, options.scan_step)?,
        };
        match found {
            Outcome::Solved { theta, gap, mode, root_count } => {
                return Ok(PointwiseSolveReport {
                    theta,
                    mode,
                    gap,
                    root_count,
                    bracket: (lo, hi),
                });
            }
            Outcome::AtBoundary => {
                let width = lo.abs().max(hi.abs());
                if width >= options.x_max_limit {
                    return Err(Error::Numeric(format!(
                        "gap still decreasing at the bracket edge {width} (t = {}, h = {target})",
                        at.t()
                    )));
                }
                let grown = (2.0 * width).min(options.x_max_limit);
                lo = if lo < 0.0 { -grown } else { lo };
                hi = if hi > 0.0 { grown } else { hi };
            }
        }
    }
}

enum Outcome {
    Solved {
        theta: f64,
        gap: f64,
        mode: SolveMode,
        root_count: usize,
    },
    AtBoundary,
}

/// Zero-finding when the critical points of `μ(s, ·)` are known: between
/// consecutive breakpoints `μ` is monotone, so each sign change is one root.
fn solve_segmented<F>(
    family: &F,
    target: f64,
    at: &PathPrefix<'_>,
    lo: f64,
    hi: f64,
    critical: &[f64],
) -> Result<Outcome>
where
    F: MartingaleFamily + ?Sized,
{
    let g = |x: f64| -> Result<f64> { Ok(family.integrand(at, x)? - target) };
    let mut pts: Vec<f64> = Vec::with_capacity(critical.len() + 3);
    pts.push(lo);
    pts.extend(critical.iter().copied().filter(|c| *c > lo && *c < hi));
    if lo < 0.0 && hi > 0.0 {
        pts.push(0.0);
    }
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let vals = pts.iter().map(|&x| g(x)).collect::<Result<Vec<_>>>()?;

    let mut root_count = vals.iter().filter(|v| **v == 0.0).count();
    let mut best: Option<f64> = pts
        .iter()
        .zip(&vals)
        .filter(|(_, v)| **v == 0.0)
        .map(|(x, _)| *x)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()));
    // the sign-change segment nearest 0 on each side holds that side's smallest root
    let mut nearest_pos: Option<usize> = None;
    let mut nearest_neg: Option<usize> = None;
    for i in 0..pts.len() - 1 {
        if vals[i] * vals[i + 1] < 0.0 {
            root_count += 1;
            if pts[i] >= 0.0 {
                nearest_pos.get_or_insert(i);
            } else if pts[i + 1] <= 0.0 {
                nearest_neg = Some(i);
            }
        }
    }
    for i in [nearest_neg, nearest_pos].into_iter().flatten() {
        let mut err = None;
        let x = brent_root(
            |x| g(x).unwrap_or_else(|e| {
                err = Some(e);
                0.0
            }),
            pts[i],
            pts[i + 1],
            vals[i],
            vals[i + 1],
            ROOT_ITERS,
        );
        if let Some(e) = err {
            return Err(e);
        }
        if best.is_none_or(|b| x.abs() < b.abs()) {
            best = Some(x);
        }
    }
    if let Some(theta) = best {
        return Ok(Outcome::Solved {
            theta,
            gap: g(theta)?.abs(),
            mode: SolveMode::Root,
            root_count,
        });
    }

    // no root: the best point is a critical point unless an edge does better
    let mut best_idx = 0;
    for i in 1..pts.len() {
        if vals[i].abs() < vals[best_idx].abs() {
            best_idx = i;
        }
    }
    let x = pts[best_idx];
    if best_idx == 0 || best_idx == pts.len() - 1 || !critical.contains(&x) {
        return Ok(Outcome::AtBoundary);
    }
    Ok(Outcome::Solved {
        theta: x,
        gap: vals[best_idx].abs(),
        mode: SolveMode::Stationary,
        root_count: 0,
    })
}

/// Zero-finding by stepping outward from 0 until the sign of `μ - h` flips
/// on each side. Only the innermost root per side is located.
fn solve_scanned<F>(
    family: &F,
    target: f64,
    at: &PathPrefix<'_>,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<Outcome>
where
    F: MartingaleFamily + ?Sized,
{
    let g = |x: f64| -> Result<f64> { Ok(family.integrand(at, x)? - target) };
    let anchor = 0.0f64.clamp(lo, hi);
    let g0 = g(anchor)?;
    if g0 == 0.0 {
        return Ok(Outcome::Solved {
            theta: anchor,
            gap: 0.0,
            mode: SolveMode::Root,
            root_count: 1,
        });
    }
    let mut scanned: Vec<(f64, f64)> = vec![(anchor, g0.abs())];
    let mut roots: Vec<(f64, f64, f64, f64)> = Vec::new();
    for dir in [1.0f64, -1.0] {
        let limit = if dir > 0.0 { hi } else { lo };
        let (mut x, mut gx) = (anchor, g0);
        while x != limit {
            let nx = if dir > 0.0 { (x + step).min(limit) } else { (x - step).max(limit) };
            let gn = g(nx)?;
            scanned.push((nx, gn.abs()));
            if gn == 0.0 || gx * gn < 0.0 {
                roots.push((x, nx, gx, gn));
                break;
            }
            x = nx;
            gx = gn;
        }
    }
    if !roots.is_empty() {
        let mut theta = f64::NAN;
        let mut err = None;
        for &(a, b, ga, gb) in &roots {
            let x = brent_root(
                |x| g(x).unwrap_or_else(|e| {
                    err = Some(e);
                    0.0
                }),
                a,
                b,
                ga,
                gb,
                ROOT_ITERS,
            );
            if theta.is_nan() || x.abs() < theta.abs() {
                theta = x;
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        return Ok(Outcome::Solved {
            theta,
            gap: g(theta)?.abs(),
            mode: SolveMode::Root,
            root_count: roots.len(),
        });
    }
    // no sign change anywhere: both walks reached the bracket edges
    scanned.sort_by(|a, b| a.0.total_cmp(&b.0));
    let i = (0..scanned.len())
        .min_by(|&a, &b| scanned[a].1.total_cmp(&scanned[b].1))
        .unwrap_or(0);
    if i == 0 || i == scanned.len() - 1 {
        return Ok(Outcome::AtBoundary);
    }
    let (a, b) = (scanned[i - 1].0, scanned[i + 1].0);
    let mut err = None;
    let (theta, gap) = golden_section_min(
        |x| match g(x) {
            Ok(v) => v.abs(),
            Err(e) => {
                err = Some(e);
                f64::INFINITY
            }
        },
        a,
        b,
        1e-12,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Outcome::Solved {
        theta,
        gap,
        mode: SolveMode::Stationary,
        root_count: 0,
    })
}

/// Pointwise solutions along one path with the KW integrand as target.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseStrategy {
    pub strategy: StrategyPath,
    pub targets: Vec<f64>,
    pub reports: Vec<PointwiseSolveReport>,
}

impl PointwiseStrategy {
    pub fn stationary_nodes(&self) -> usize {
        self.reports.iter().filter(|r| r.mode == SolveMode::Stationary).count()
    }
}

pub fn build_pointwise_strategy<F>(
    family: &F,
    kw: &KWDecomposition,
    path: &PathBundle,
    options: &PointwiseOptions,
) -> Result<PointwiseStrategy>
where
    F: MartingaleFamily + ?Sized,
{
    let n = path.n_steps();
    let mut targets = Vec::with_capacity(n);
    let mut reports = Vec::with_capacity(n);
    for k in 1..=n {
        let at = path.prefix(k - 1);
        let h = kw.target(k, &at);
        reports.push(pointwise_solve(family, h, &at, options.default_bracket(), options)?);
        targets.push(h);
    }
    Ok(PointwiseStrategy {
        strategy: StrategyPath::from_values(reports.iter().map(|r| r.theta).collect()),
        targets,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{ExponentialAsPrintedFamily, ExponentialFamily, LinearFamily};
    use crate::path::TimeGrid;
    use alloc::sync::Arc;

    fn at_node(t: f64, w: f64) -> PathBundle {
        let grid = Arc::new(TimeGrid::from_nodes(vec![0.0, t]).unwrap());
        PathBundle::from_components(grid, 1.0, 0, vec![0.0, w], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn identity_integrand_at_time_zero() {
        let p = at_node(1.0, 0.4);
        let opts = PointwiseOptions::default();
        let r = pointwise_solve(&ExponentialFamily, 0.42, &p.prefix(0), opts.default_bracket(), &opts).unwrap();
        assert_eq!(r.mode, SolveMode::Root);
        assert!((r.theta - 0.42).abs() < 1e-12);
    }

    #[test]
    fn empty_bracket_is_rejected() {
        let p = at_node(1.0, 0.0);
        let opts = PointwiseOptions::default();
        let err = pointwise_solve(&ExponentialFamily, 0.3, &p.terminal(), (1.0, 1.0), &opts);
        assert!(matches!(err, Err(Error::Parameter { name: "bracket", .. })));
    }

    #[test]
    fn linear_family_copies_target() {
        let p = at_node(0.5, -0.2);
        let opts = PointwiseOptions::default();
        for h in [-3.0, -0.1, 0.0, 0.7, 12.0] {
            let r = pointwise_solve(&LinearFamily, h, &p.terminal(), opts.default_bracket(), &opts).unwrap();
            assert_eq!(r.mode, SolveMode::Root);
            assert_eq!(r.theta, h);
            assert_eq!(r.root_count, 1);
        }
    }

    #[test]
    fn smallest_root_wins_and_all_roots_are_counted() {
        let p = at_node(1.0, 0.0);
        let opts = PointwiseOptions::default();
        let r = pointwise_solve(&ExponentialFamily, 0.3, &p.terminal(), opts.default_bracket(), &opts).unwrap();
        assert_eq!(r.root_count, 2);
        assert!(r.theta > 0.0 && r.theta < 1.0);
    }

    #[test]
    fn bracket_grows_when_the_critical_point_lies_outside() {
        // t tiny: the maximiser of μ sits far out
        let p = at_node(1e-4, 0.01);
        let opts = PointwiseOptions::default();
        let cps = ExponentialFamily.integrand_critical_points(&p.terminal()).unwrap();
        assert!(cps[1] > 50.0);
        let top = ExponentialFamily.integrand(&p.terminal(), cps[1]).unwrap();
        let target = 0.5 * (top + ExponentialFamily.integrand(&p.terminal(), 50.0).unwrap());
        let r = pointwise_solve(&ExponentialFamily, target, &p.terminal(), opts.default_bracket(), &opts).unwrap();
        assert_eq!(r.mode, SolveMode::Root);
        assert!(r.bracket.1 > 50.0);
        assert!(r.gap <= opts.tol_root(target));
    }

    #[test]
    fn scanned_solver_handles_printed_integrand() {
        let p = at_node(1.0, 0.3);
        let opts = PointwiseOptions::default();
        for h in [-4.0, -0.5, 0.05, 0.7, 4.0] {
            let r = pointwise_solve(&ExponentialAsPrintedFamily, h, &p.terminal(), opts.default_bracket(), &opts)
                .unwrap();
            assert_eq!(r.mode, SolveMode::Root, "h = {h}: {r:?}");
            assert!(r.gap <= opts.tol_root(h), "h = {h}: {r:?}");
        }
    }
}
