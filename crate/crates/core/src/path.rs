//! Correlated Brownian paths on a time grid.
//!
//! Every path is generated from its own ChaCha8 stream selected by
//! `(master_seed, path_id)`, so a path can be regenerated on demand and a
//! batch is bit-identical no matter how the work is scheduled.

use alloc::borrow::Cow;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::sqrt;
use crate::par::map_paths;
use crate::{Error, Result};

/// Increasing time nodes `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

/// Uniform grid with `n_steps` steps on `[0, horizon]`.
pub fn build_grid(horizon: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::uniform(horizon, n_steps)
}

impl TimeGrid {
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::parameter("T", "horizon must be positive and finite"));
        }
        if n_steps == 0 {
            return Err(Error::parameter("n_steps", "need at least one step"));
        }
        let n = n_steps as f64;
        let mut nodes: Vec<f64> = (0..=n_steps).map(|k| k as f64 * horizon / n).collect();
        nodes[n_steps] = horizon;
        Ok(Self { nodes })
    }

    /// Arbitrary grid; nodes must start at exactly 0 and increase strictly.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::parameter("nodes", "need at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::parameter("nodes", "first node must be 0"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::parameter("nodes", "nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Length of step `k` (the interval `(t_{k-1}, t_k]`), `1 <= k <= N`.
    #[inline]
    pub fn dt(&self, k: usize) -> f64 {
        self.nodes[k] - self.nodes[k - 1]
    }

    /// Every `stride`-th node; `stride` must divide `N`.
    pub fn coarsen(&self, stride: usize) -> Result<TimeGrid> {
        if stride == 0 || !self.n_steps().is_multiple_of(stride) {
            return Err(Error::Shape(format!(
                "stride {stride} does not divide {} steps",
                self.n_steps()
            )));
        }
        Ok(Self {
            nodes: self.nodes.iter().copied().step_by(stride).collect(),
        })
    }
}

/// One realisation of `(W1, W2, W)` with `W = ρ W1 + sqrt(1-ρ²) W2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    grid: Arc<TimeGrid>,
    rho: f64,
    path_id: u64,
    w1: Vec<f64>,
    w2: Vec<f64>,
    w: Vec<f64>,
}

impl PathBundle {
    /// Builds a path from given `W1`, `W2` node values, recomputing `W`.
    pub fn from_components(
        grid: Arc<TimeGrid>,
        rho: f64,
        path_id: u64,
        w1: Vec<f64>,
        w2: Vec<f64>,
    ) -> Result<Self> {
        check_rho(rho)?;
        let len = grid.nodes().len();
        if w1.len() != len || w2.len() != len {
            return Err(Error::Shape(format!(
                "path arrays need {len} values, got {} and {}",
                w1.len(),
                w2.len()
            )));
        }
        if w1[0] != 0.0 || w2[0] != 0.0 {
            return Err(Error::parameter("w1/w2", "paths must start at 0"));
        }
        let w = mix(rho, &w1, &w2);
        Ok(Self {
            grid,
            rho,
            path_id,
            w1,
            w2,
            w,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn path_id(&self) -> u64 {
        self.path_id
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    /// Path information up to and including node `k`.
    pub fn prefix(&self, k: usize) -> PathPrefix<'_> {
        PathPrefix {
            times: &self.grid.nodes()[..=k],
            rho: self.rho,
            w1: &self.w1[..=k],
            w2: &self.w2[..=k],
            w: &self.w[..=k],
        }
    }

    pub fn terminal(&self) -> PathPrefix<'_> {
        self.prefix(self.n_steps())
    }
}

fn mix(rho: f64, w1: &[f64], w2: &[f64]) -> Vec<f64> {
    let c = sqrt(1.0 - rho * rho);
    w1.iter().zip(w2).map(|(a, b)| rho * a + c * b).collect()
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::parameter("rho", "correlation must lie in [0, 1]"));
    }
    Ok(())
}

/// The observable history of a path up to some node.
///
/// Strategies and families only ever see a prefix; the last entry is the
/// "current" node.
#[derive(Debug, Clone, Copy)]
pub struct PathPrefix<'a> {
    times: &'a [f64],
    rho: f64,
    w1: &'a [f64],
    w2: &'a [f64],
    w: &'a [f64],
}

impl<'a> PathPrefix<'a> {
    /// Index of the current node.
    #[inline]
    pub fn node(&self) -> usize {
        self.times.len() - 1
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.times[self.node()]
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w[self.node()]
    }

    #[inline]
    pub fn w1(&self) -> f64 {
        self.w1[self.node()]
    }

    #[inline]
    pub fn w2(&self) -> f64 {
        self.w2[self.node()]
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    pub fn w_history(&self) -> &'a [f64] {
        self.w
    }

    pub fn w1_history(&self) -> &'a [f64] {
        self.w1
    }

    pub fn w2_history(&self) -> &'a [f64] {
        self.w2
    }
}

/// Anything that can hand out paths by id: a stored batch or a lazy generator.
pub trait PathSource: Sync {
    fn grid(&self) -> &TimeGrid;
    fn rho(&self) -> f64;
    fn n_paths(&self) -> usize;
    fn path(&self, id: usize) -> Cow<'_, PathBundle>;
}

/// Regenerates path `id` from `(master_seed, id)` whenever asked.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGenerator {
    grid: Arc<TimeGrid>,
    n_paths: usize,
    rho: f64,
    master_seed: u64,
}

impl PathGenerator {
    pub fn new(grid: TimeGrid, n_paths: usize, rho: f64, master_seed: u64) -> Result<Self> {
        Self::with_shared_grid(Arc::new(grid), n_paths, rho, master_seed)
    }

    pub fn with_shared_grid(
        grid: Arc<TimeGrid>,
        n_paths: usize,
        rho: f64,
        master_seed: u64,
    ) -> Result<Self> {
        check_rho(rho)?;
        if n_paths == 0 {
            return Err(Error::parameter("n_paths", "need at least one path"));
        }
        Ok(Self {
            grid,
            n_paths,
            rho,
            master_seed,
        })
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn shared_grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// Same seed and grid, different path count.
    pub fn with_paths(&self, n_paths: usize) -> Result<Self> {
        Self::with_shared_grid(self.grid.clone(), n_paths, self.rho, self.master_seed)
    }

    pub fn generate(&self, id: usize) -> PathBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(id as u64);
        let n = self.grid.n_steps();
        let mut w1 = vec![0.0; n + 1];
        let mut w2 = vec![0.0; n + 1];
        for k in 1..=n {
            let sd = sqrt(self.grid.dt(k));
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            w1[k] = w1[k - 1] + sd * z1;
            w2[k] = w2[k - 1] + sd * z2;
        }
        let w = mix(self.rho, &w1, &w2);
        PathBundle {
            grid: self.grid.clone(),
            rho: self.rho,
            path_id: id as u64,
            w1,
            w2,
            w,
        }
    }

    pub fn materialize(&self) -> PathBatch {
        let paths = map_paths(self.n_paths, |id| self.generate(id));
        PathBatch {
            grid: self.grid.clone(),
            rho: self.rho,
            master_seed: self.master_seed,
            paths,
        }
    }
}

impl PathSource for PathGenerator {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn path(&self, id: usize) -> Cow<'_, PathBundle> {
        Cow::Owned(self.generate(id))
    }
}

/// A stored batch of paths with ids `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    grid: Arc<TimeGrid>,
    rho: f64,
    master_seed: u64,
    paths: Vec<PathBundle>,
}

/// Generates and stores `n_paths` paths.
pub fn simulate_batch(
    grid: TimeGrid,
    n_paths: usize,
    rho: f64,
    master_seed: u64,
) -> Result<PathBatch> {
    Ok(PathGenerator::new(grid, n_paths, rho, master_seed)?.materialize())
}

impl PathBatch {
    /// Assembles a batch from stored paths; ids must run `0..n` in order.
    pub fn from_paths(
        grid: Arc<TimeGrid>,
        rho: f64,
        master_seed: u64,
        paths: Vec<PathBundle>,
    ) -> Result<Self> {
        check_rho(rho)?;
        if paths.is_empty() {
            return Err(Error::parameter("n_paths", "need at least one path"));
        }
        for (i, p) in paths.iter().enumerate() {
            if p.path_id != i as u64 {
                return Err(Error::Shape(format!("path {i} carries id {}", p.path_id)));
            }
            if *p.grid != *grid || p.rho != rho {
                return Err(Error::Shape(format!("path {i} disagrees with batch grid/rho")));
            }
        }
        Ok(Self {
            grid,
            rho,
            master_seed,
            paths,
        })
    }

    pub fn paths(&self) -> &[PathBundle] {
        &self.paths
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn shared_grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }
}

impl PathSource for PathBatch {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn n_paths(&self) -> usize {
        self.paths.len()
    }

    fn path(&self, id: usize) -> Cow<'_, PathBundle> {
        Cow::Borrowed(&self.paths[id])
    }
}
