//! Branches `S_∞^{(j)}` of the scalar limit problem.

use rayon::prelude::*;
use serde::Serialize;

use crossflux::continuation::side_label;
use crossflux::io::write_scalar_branch_csv;
use crossflux::limit::{trace_scalar_branch, ScalarTraceOptions};
use crossflux::spectral::{limit_coefficients, limiting_critical_d2, Regime};
use crossflux::{Grid, ModelParams, ScalarBranch};

use crate::commands::finite;
use crate::config::ExperimentConfig;
use crate::svg::{render, Panel, Series};
use crate::{CliError, Output};

#[derive(Debug, Clone, Serialize)]
struct ScalarSummary {
    id: String,
    j: usize,
    side: &'static str,
    onset: Option<f64>,
    points: usize,
    d2_min: Option<f64>,
    termination: Option<String>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Report {
    gamma: Option<f64>,
    offset: f64,
    slope: f64,
    xi_star: f64,
    onsets: Vec<(usize, Option<f64>)>,
    branches: Vec<ScalarSummary>,
}

pub fn scalar_options(cfg: &ExperimentConfig, params: &ModelParams, grid: &Grid) -> ScalarTraceOptions<f64> {
    let c = &cfg.continuation;
    let mut controls = cfg.step_controls_for(params, grid);
    controls.stability = false;
    controls.tol = c.tol.unwrap_or_else(|| grid.residual_tolerance(1e-10, 1.0 + cfg.gamma_value().min(1e6)));
    ScalarTraceOptions { amplitude: c.amplitude, delta: c.delta, controls }
}

/// Fails with a config error outside the scalar-field regime.
pub fn check_regime(cfg: &ExperimentConfig, params: &ModelParams) -> Result<(), CliError> {
    let lc = limit_coefficients(params, cfg.gamma())?;
    if lc.regime != Regime::ScalarField {
        return Err(CliError::Config(format!(
            "the scalar limit needs gamma > A tau* = {}, got gamma = {}",
            crossflux::model::constant_state(params).gamma_threshold,
            cfg.gamma()
        )));
    }
    Ok(())
}

pub fn scalar_panel(branches: &[&ScalarBranch], title: &str) -> Panel {
    let series = branches
        .iter()
        .enumerate()
        .map(|(k, b)| Series::new(b.id.clone(), b.points.iter().map(|p| (p.d2, p.sup_v)).collect(), k))
        .collect();
    Panel { title: title.into(), x_label: "d2".into(), y_label: "sup v".into(), series, guides: vec![] }
}

pub fn run(cfg: &ExperimentConfig, out: &Output) -> Result<String, CliError> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    check_regime(cfg, &params)?;
    let gamma = cfg.gamma();
    let lc = limit_coefficients(&params, gamma)?;
    let opts = scalar_options(cfg, &params, &grid);
    let jobs: Vec<(usize, i8)> = cfg.continuation.j_list.iter().flat_map(|&j| [(j, -1), (j, 1)]).collect();
    let results: Vec<_> = jobs
        .into_par_iter()
        .map(|(j, sign)| (j, sign, trace_scalar_branch(&params, gamma, j, sign, &grid, &opts)))
        .collect();
    let mut summaries = Vec::new();
    let mut traced = Vec::new();
    for (j, sign, r) in &results {
        match r {
            Ok(b) => {
                write_scalar_branch_csv(out.create(&format!("{}.csv", b.id))?, b)?;
                summaries.push(ScalarSummary {
                    id: b.id.clone(),
                    j: *j,
                    side: side_label(*sign),
                    onset: Some(b.onset),
                    points: b.points.len(),
                    d2_min: b.points.iter().map(|p| p.d2).reduce(f64::min),
                    termination: Some(b.termination.to_string()),
                    error: None,
                });
                traced.push(b);
            }
            Err(e) => {
                eprintln!("S{j}_{}: {e}", side_label(*sign));
                summaries.push(ScalarSummary {
                    id: format!("S{j}_{}", side_label(*sign)),
                    j: *j,
                    side: side_label(*sign),
                    onset: None,
                    points: 0,
                    d2_min: None,
                    termination: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let onsets = cfg
        .continuation
        .j_list
        .iter()
        .map(|&j| Ok((j, limiting_critical_d2(j, &params, gamma)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    out.write_text("limit.svg", &render(&[scalar_panel(&traced, &format!("scalar limit, gamma = {gamma}"))], 1))?;
    out.write_json(
        "limit.json",
        &Report {
            gamma: finite(cfg.gamma_value()),
            offset: lc.offset,
            slope: lc.slope,
            xi_star: lc.xi_star,
            onsets: onsets.clone(),
            branches: summaries.clone(),
        },
    )?;
    if traced.is_empty() {
        return Err(CliError::Numerical("no scalar branch could be traced".into()));
    }
    let list: Vec<String> = onsets.iter().map(|(j, d)| format!("j={j} onset={:.6}", d.unwrap_or(f64::NAN))).collect();
    Ok(format!("{}; {} branches written", list.join(", "), traced.len()))
}
