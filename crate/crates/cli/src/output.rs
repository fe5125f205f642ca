//! Result files: JSON summaries, CSV tables and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::RunError;
use crate::pipeline::{LadderSummary, NodeRow, RunSummary, SweepSummary};
use crate::svg::{Plot, Scale, Series};

pub const NODES_HEADER: &str = "t,h,theta,mode,gap";
pub const LADDER_HEADER: &str = "N,rmse";

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| RunError::io(&path, e))?;
    Ok(path)
}

pub fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries always serialize");
    text.push('\n');
    write_file(dir, name, &text)
}

pub fn nodes_csv(rows: &[NodeRow]) -> String {
    let mut out = format!("{NODES_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.t, r.h, r.theta, r.mode, r.gap);
    }
    out
}

pub fn ladder_csv(ladder: &LadderSummary) -> String {
    let mut out = format!("{LADDER_HEADER}\n");
    for rung in &ladder.report.rungs {
        let _ = writeln!(out, "{},{}", rung.n_steps, rung.rmse);
    }
    out
}

pub fn ladder_svg(ladder: &LadderSummary) -> String {
    let title = format!(
        "Left-point representation error, {} at x = {}",
        ladder.report.family, ladder.report.x
    );
    Plot {
        title: &title,
        x_label: "N",
        y_label: "RMSE",
        x_scale: Scale::Log,
        y_scale: Scale::Log,
        series: vec![Series {
            name: "rmse",
            points: ladder
                .report
                .rungs
                .iter()
                .map(|r| (r.n_steps as f64, r.rmse))
                .collect(),
        }],
    }
    .render()
}

pub fn sweep_csv(sweep: &SweepSummary) -> String {
    let mut out =
        String::from("rho,lambda_sq,lambda_sq_se,objective,objective_se,excess,excess_se\n");
    for p in &sweep.points {
        let (ex, ex_se) = p
            .excess
            .map_or((f64::NAN, f64::NAN), |e| (e.mean, e.std_err));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.rho,
            p.lambda_sq.mean,
            p.lambda_sq.std_err,
            p.objective.mean,
            p.objective.std_err,
            ex,
            ex_se
        );
    }
    out
}

pub fn residual_svg(sweep: &SweepSummary) -> String {
    let mut series = vec![
        Series {
            name: "objective",
            points: sweep
                .points
                .iter()
                .map(|p| (p.rho, p.objective.mean))
                .collect(),
        },
        Series {
            name: "lambda_sq floor",
            points: sweep
                .points
                .iter()
                .map(|p| (p.rho, p.lambda_sq.mean))
                .collect(),
        },
    ];
    if sweep.points.iter().all(|p| p.excess.is_some()) {
        series.push(Series {
            name: "excess",
            points: sweep
                .points
                .iter()
                .filter_map(|p| Some((p.rho, p.excess?.mean)))
                .collect(),
        });
    }
    Plot {
        title: "Residual against correlation",
        x_label: "rho",
        y_label: "E[(H - I)^2]",
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        series,
    }
    .render()
}

/// `summary.json`, `nodes.csv`, `ladder.csv` and `ladder.svg`.
pub fn emit_outputs(summary: &RunSummary, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    ensure_dir(dir)?;
    let mut written = vec![
        write_json(dir, "summary.json", summary)?,
        write_file(dir, "nodes.csv", &nodes_csv(&summary.nodes))?,
    ];
    if let Some(ladder) = &summary.ladder {
        written.push(write_file(dir, "ladder.csv", &ladder_csv(ladder))?);
        written.push(write_file(dir, "ladder.svg", &ladder_svg(ladder))?);
    }
    Ok(written)
}

/// `sweep.json`, `sweep.csv` and `residual.svg`.
pub fn emit_sweep(sweep: &SweepSummary, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    ensure_dir(dir)?;
    Ok(vec![
        write_json(dir, "sweep.json", sweep)?,
        write_file(dir, "sweep.csv", &sweep_csv(sweep))?,
        write_file(dir, "residual.svg", &residual_svg(sweep))?,
    ])
}

/// `ladder.csv`, `ladder.svg` alone.
pub fn emit_ladder(ladder: &LadderSummary, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    ensure_dir(dir)?;
    Ok(vec![
        write_file(dir, "ladder.csv", &ladder_csv(ladder))?,
        write_file(dir, "ladder.svg", &ladder_svg(ladder))?,
    ])
}
