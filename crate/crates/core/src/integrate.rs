//! Discrete stochastic integrals on a path's grid.
//!
//! A strategy value `θ_k` is frozen on `(t_{k-1}, t_k]` and is built from
//! the path prefix ending at `t_{k-1}`; the nonlinear integral is the
//! left-point sum `Σ_k [M(t_k, θ_k) - M(t_{k-1}, θ_k)]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::family::MartingaleFamily;
use crate::math::NeumaierSum;
use crate::par::try_map_paths;
use crate::path::{PathBundle, PathPrefix, PathSource, TimeGrid};
use crate::stats::MCEstimate;
use crate::{Error, Result};

/// Predictable simple process: `values[k - 1]` is `θ_k`, applied on `(t_{k-1}, t_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPath {
    values: Vec<f64>,
}

impl StrategyPath {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(n_steps: usize, c: f64) -> Self {
        Self {
            values: vec![c; n_steps],
        }
    }

    /// Builds `θ_k = f(k, prefix up to t_{k-1})` for `k = 1..=N`.
    ///
    /// The callback never sees the path beyond `t_{k-1}`.
    pub fn from_fn<F>(path: &PathBundle, mut f: F) -> Self
    where
        F: FnMut(usize, &PathPrefix<'_>) -> f64,
    {
        let values = (1..=path.n_steps()).map(|k| f(k, &path.prefix(k - 1))).collect();
        Self { values }
    }

    pub fn try_from_fn<F>(path: &PathBundle, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &PathPrefix<'_>) -> Result<f64>,
    {
        let values = (1..=path.n_steps())
            .map(|k| f(k, &path.prefix(k - 1)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_steps(&self) -> usize {
        self.values.len()
    }

    /// `θ_k`, one-based.
    #[inline]
    pub fn theta(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + by).collect(),
        }
    }
}

/// Running values of a discrete integral; `running[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult {
    running: Vec<f64>,
}

impl IntegralResult {
    pub fn running(&self) -> &[f64] {
        &self.running
    }

    pub fn terminal(&self) -> f64 {
        self.running[self.running.len() - 1]
    }

    pub fn into_running(self) -> Vec<f64> {
        self.running
    }
}

fn check_steps(theta: &StrategyPath, grid: &TimeGrid) -> Result<()> {
    if theta.n_steps() != grid.n_steps() {
        return Err(Error::Shape(format!(
            "strategy has {} steps, grid has {}",
            theta.n_steps(),
            grid.n_steps()
        )));
    }
    Ok(())
}

/// Left-point Itô sum `Σ_{j<=k} h_j (driver[j] - driver[j-1])`.
pub fn ito_integral(h: &StrategyPath, driver: &[f64], grid: &TimeGrid) -> Result<IntegralResult> {
    check_steps(h, grid)?;
    if driver.len() != grid.nodes().len() {
        return Err(Error::Shape(format!(
            "driver has {} values, grid has {} nodes",
            driver.len(),
            grid.nodes().len()
        )));
    }
    let mut running = Vec::with_capacity(driver.len());
    running.push(0.0);
    let mut acc = NeumaierSum::new();
    for k in 1..driver.len() {
        acc.add(h.theta(k) * (driver[k] - driver[k - 1]));
        running.push(acc.value());
    }
    Ok(IntegralResult { running })
}

/// `∫ M(ds, θ_s)` as the left-point telescoping sum along `path`.
pub fn nonlinear_integral<F>(family: &F, theta: &StrategyPath, path: &PathBundle) -> Result<IntegralResult>
where
    F: MartingaleFamily + ?Sized,
{
    check_steps(theta, path.grid())?;
    let n = path.n_steps();
    let mut running = Vec::with_capacity(n + 1);
    running.push(0.0);
    let mut acc = NeumaierSum::new();
    let mut prev = path.prefix(0);
    for k in 1..=n {
        let next = path.prefix(k);
        acc.add(family.increment(&prev, &next, theta.theta(k))?);
        running.push(acc.value());
        prev = next;
    }
    Ok(IntegralResult { running })
}

/// Which Brownian component drives an integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    W,
    W1,
    W2,
}

impl Driver {
    pub fn values(self, path: &PathBundle) -> &[f64] {
        match self {
            Driver::W => path.w(),
            Driver::W1 => path.w1(),
            Driver::W2 => path.w2(),
        }
    }
}

/// MC estimate of `E[(∫ h dB)²] - E[Σ h_j² Δt_j]` for a predictable integrand.
pub fn isometry_gap<S, H>(source: &S, driver: Driver, integrand: H) -> Result<MCEstimate>
where
    S: PathSource + ?Sized,
    H: Fn(usize, &PathPrefix<'_>) -> f64 + Sync + Send,
{
    let gaps = try_map_paths(source.n_paths(), |id| {
        let path = source.path(id);
        let h = StrategyPath::from_fn(&path, &integrand);
        let integral = ito_integral(&h, driver.values(&path), path.grid())?.terminal();
        let qv = (1..=path.n_steps())
            .map(|k| h.theta(k) * h.theta(k) * path.grid().dt(k))
            .collect::<NeumaierSum>()
            .value();
        Ok(integral * integral - qv)
    })?;
    Ok(MCEstimate::from_samples(&gaps))
}
