//! One function per subcommand; `main` only parses arguments.

use std::fs;
use std::path::{Path, PathBuf};

use nlkw_core::family::{
    derivative_check, holder_estimate, martingale_mean, representation_check, HolderReport,
};
use nlkw_core::{DerivativeOf, FamilyKind, MCEstimate, PathSource, PayoffKind};
use serde::Serialize;

use crate::config::{parse_config, ExperimentConfig, KwMethod, StrategyKind};
use crate::dump::{write_dump, DumpHeader};
use crate::error::{RunError, Stage, StageExt};
use crate::output::{emit_ladder, emit_outputs, emit_sweep, ensure_dir, write_json};
use crate::pipeline::{self, KwSummary, LadderSummary, RunSummary, SweepSummary};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub rho: Option<f64>,
    pub family: Option<FamilyKind>,
}

pub fn load_config(
    file: Option<&Path>,
    overrides: &Overrides,
) -> Result<ExperimentConfig, RunError> {
    let mut config = match file {
        Some(file) => parse_config(&fs::read_to_string(file).map_err(|e| RunError::io(file, e))?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &overrides.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        config.master_seed = seed;
    }
    if let Some(paths) = overrides.paths {
        config.n_paths = paths;
    }
    if let Some(steps) = overrides.steps {
        config.n_steps = steps;
    }
    if let Some(rho) = overrides.rho {
        config.rho = rho;
    }
    if let Some(family) = overrides.family {
        config.family = family;
        config.use_as_printed_family = false;
    }
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub dump: PathBuf,
    pub header: DumpHeaderJson,
    /// Sample mean of `W_T · W1_T`, which should approach `ρT`.
    pub terminal_covariance: MCEstimate,
    /// Sample mean of `W_T²`, which should approach `T`.
    pub terminal_second_moment: MCEstimate,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DumpHeaderJson {
    pub n_paths: u64,
    pub n_steps: u64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub rho: f64,
    pub master_seed: u64,
}

impl From<DumpHeader> for DumpHeaderJson {
    fn from(h: DumpHeader) -> Self {
        Self {
            n_paths: h.n_paths,
            n_steps: h.n_steps,
            horizon: h.horizon,
            rho: h.rho,
            master_seed: h.master_seed,
        }
    }
}

pub fn simulate(config: &ExperimentConfig) -> Result<SimulateReport, RunError> {
    let paths = pipeline::generator(config, config.rho)?;
    ensure_dir(&config.out_dir)?;
    let dump = config.out_dir.join("paths.nlkw");
    let header = write_dump(&paths, &dump)?;
    let (cov, second): (Vec<f64>, Vec<f64>) = (0..paths.n_paths())
        .map(|id| {
            let at = paths.generate(id);
            let end = at.terminal();
            (end.w() * end.w1(), end.w() * end.w())
        })
        .unzip();
    let report = SimulateReport {
        dump,
        header: header.into(),
        terminal_covariance: MCEstimate::from_samples(&cov),
        terminal_second_moment: MCEstimate::from_samples(&second),
    };
    write_json(&config.out_dir, "simulate.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleCheck {
    pub x: f64,
    pub mean: MCEstimate,
    pub within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderSummary {
    pub x_grid: Vec<f64>,
    pub constant_derivative: bool,
    pub delta_hat: Option<MCEstimate>,
    pub k_hat: Option<MCEstimate>,
    pub share_delta_at_least_0_9: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub family: FamilyKind,
    pub martingale: Vec<MartingaleCheck>,
    pub ladder: LadderSummary,
    /// Ladder of `Σ ∂ₓμ ΔW` against `∂ₓM(T, x)`.
    pub derivative_ladder: Option<LadderSummary>,
    /// Largest relative error of the analytic `∂ₓμ` against central differences.
    pub max_d_integrand_error: Option<f64>,
    pub max_d_eval_error: Option<f64>,
    pub derivative_points: usize,
    pub holder: HolderSummary,
}

const MARTINGALE_XS: [f64; 3] = [-1.0, 0.5, 2.0];
const DERIVATIVE_BUMP: f64 = 1e-5;

pub fn verify_family(config: &ExperimentConfig) -> Result<FamilyReport, RunError> {
    let family = config.family();
    let paths = pipeline::generator(config, config.rho)?;
    let martingale = MARTINGALE_XS
        .iter()
        .map(|&x| {
            let mean = martingale_mean(&family, x, &paths).stage(Stage::Family)?;
            Ok(MartingaleCheck {
                x,
                mean,
                within_3se: mean.within(0.0, 3.0),
            })
        })
        .collect::<Result<_, RunError>>()?;

    let ladder = pipeline::ladder(config)?;
    let ladder_paths = pipeline::ladder_source(config)?;
    let derivative_ladder = match representation_check(
        &DerivativeOf(family),
        config.ladder_x,
        &config.ladder,
        &ladder_paths,
    ) {
        Ok(report) => Some(LadderSummary::new(report)),
        Err(nlkw_core::Error::Capability { .. }) => None,
        Err(e) => return Err(e).stage(Stage::Ladder),
    };

    // a fixed lattice of (path, node, x) points
    let mut max_mu: Option<f64> = None;
    let mut max_m: Option<f64> = None;
    let mut points = 0;
    let n_steps = paths.grid().n_steps();
    for i in 0..10usize {
        let path = paths.generate(i % paths.n_paths());
        for j in 0..10usize {
            let k = (7 * i + 13 * j + 1) % (n_steps + 1);
            let x = -2.0 + 4.0 * (j as f64 + 0.5) / 10.0 + 0.013 * i as f64;
            match derivative_check(&family, &path.prefix(k), x, DERIVATIVE_BUMP) {
                Ok(r) => {
                    points += 1;
                    max_mu = Some(max_mu.unwrap_or(0.0).max(r.d_integrand.relative_error));
                    max_m = Some(max_m.unwrap_or(0.0).max(r.d_eval.relative_error));
                }
                Err(nlkw_core::Error::Capability { .. }) => {}
                Err(e) => return Err(e).stage(Stage::Family),
            }
        }
    }

    let x_grid: Vec<f64> = [0.0, 1e-4, 1e-3, 1e-2, 1e-1]
        .iter()
        .map(|d| config.ladder_x + d)
        .collect();
    let holder = match holder_estimate(&family, &paths, &x_grid) {
        Ok(HolderReport::ConstantDerivative) => HolderSummary {
            x_grid,
            constant_derivative: true,
            delta_hat: None,
            k_hat: None,
            share_delta_at_least_0_9: None,
        },
        Ok(report @ HolderReport::Estimated { .. }) => {
            let share = report.fraction_at_least(0.9);
            let HolderReport::Estimated {
                delta_hat, k_hat, ..
            } = report
            else {
                unreachable!()
            };
            HolderSummary {
                x_grid,
                constant_derivative: false,
                delta_hat: Some(delta_hat),
                k_hat: Some(k_hat),
                share_delta_at_least_0_9: share,
            }
        }
        Err(e) => return Err(e).stage(Stage::Family),
    };

    let report = FamilyReport {
        family,
        martingale,
        ladder,
        derivative_ladder,
        max_d_integrand_error: max_mu,
        max_d_eval_error: max_m,
        derivative_points: points,
        holder,
    };
    emit_ladder(&report.ladder, &config.out_dir)?;
    write_json(&config.out_dir, "family.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct KwReport {
    pub payoff: PayoffKind,
    pub n_paths: usize,
    pub kw: KwSummary,
    /// `2(1 - ρ²)T²`, for the built-in example payoff.
    pub closed_form_floor: Option<f64>,
}

pub fn kw(config: &ExperimentConfig) -> Result<KwReport, RunError> {
    let paths = pipeline::generator(config, config.rho)?;
    let kw = pipeline::decompose(config, &paths)?;
    let report = KwReport {
        payoff: config.payoff,
        n_paths: config.n_paths,
        kw: KwSummary::from(&kw),
        closed_form_floor: (config.payoff == PayoffKind::Example)
            .then_some(2.0 * (1.0 - config.rho * config.rho) * config.horizon * config.horizon),
    };
    ensure_dir(&config.out_dir)?;
    write_json(&config.out_dir, "kw.json", &report)?;
    Ok(report)
}

pub fn optimize(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let summary = pipeline::run_pipeline(config)?;
    emit_outputs(&summary, &config.out_dir)?;
    Ok(summary)
}

/// The exponential-family example: analytic projection and pointwise optimum.
pub fn reproduce_example(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let mut config = config.clone();
    if config.family() != FamilyKind::ExponentialAsPrinted {
        config.family = FamilyKind::Exponential;
    }
    config.payoff = PayoffKind::Example;
    config.kw_method = KwMethod::Analytic;
    config.strategy = StrategyKind::Pointwise;
    optimize(&config)
}

pub fn sweep(config: &ExperimentConfig) -> Result<SweepSummary, RunError> {
    let summary = pipeline::sweep_rho(config)?;
    emit_sweep(&summary, &config.out_dir)?;
    Ok(summary)
}
