//! Both sides of `Γ_j` for each requested mode, as CSVs and one diagram.

use rayon::prelude::*;
use serde::Serialize;

use crossflux::continuation::{side_label, trivial_branch_stability};
use crossflux::io::{write_branch_csv, write_state_csv};
use crossflux::model::constant_state;
use crossflux::{Branch, Grid, ModelParams};

use crate::commands::{log_samples, trace_side, BranchSummary, Traced};
use crate::config::{ExperimentConfig, Measure};
use crate::svg::{render, Panel, Series};
use crate::{CliError, Output};

#[derive(Debug, Clone, Serialize)]
struct Report {
    grid_n: usize,
    tolerance: f64,
    measure: Measure,
    branches: Vec<BranchSummary>,
}

/// Traces every `(j, side)` pair; failures are kept per pair.
pub fn trace_all(
    cfg: &ExperimentConfig,
    params: &ModelParams,
    grid: &Grid,
) -> Vec<(usize, i8, crossflux::Result<Traced>)> {
    let controls = cfg.step_controls_for(params, grid);
    let jobs: Vec<(usize, i8)> = cfg.continuation.j_list.iter().flat_map(|&j| [(j, -1), (j, 1)]).collect();
    jobs.into_par_iter()
        .map(|(j, sign)| {
            let c = &cfg.continuation;
            (j, sign, trace_side(params, grid, j, sign, c.amplitude, c.delta, &controls))
        })
        .collect()
}

pub fn diagram(
    branches: &[&Branch],
    params: &ModelParams,
    measure: Measure,
    title: &str,
    d2_range: (f64, f64),
) -> Panel {
    let series: Vec<Series> = branches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let mut s = Series::new(b.id.clone(), b.points.iter().map(|p| (p.d2, measure.of(&p.norms))).collect(), k);
            s.unstable = b.points.iter().map(|p| p.stability_index.is_some_and(|i| i > 0)).collect();
            s
        })
        .collect();
    let c = constant_state(params);
    let level = match measure {
        Measure::SupV => c.v_star,
        Measure::SupU => c.u_star,
        Measure::L2V => c.v_star * params.length.sqrt(),
        Measure::L2U => c.u_star * params.length.sqrt(),
    };
    let d2s = log_samples(d2_range.0, d2_range.1, 200);
    let unstable = trivial_branch_stability(params, &d2s, 50).into_iter().map(|(_, k)| k > 0).collect();
    let mut trivial = Series::new("trivial", d2s.iter().map(|&d| (d, level)).collect(), 7);
    trivial.unstable = unstable;
    Panel { title: title.into(), x_label: "d2".into(), y_label: measure.label().into(), series, guides: vec![trivial] }
}

pub fn run(cfg: &ExperimentConfig, out: &Output) -> Result<String, CliError> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let results = trace_all(cfg, &params, &grid);
    let stride = cfg.output.snapshot_stride;
    let states = if stride > 0 { Some(out.subdir("states")?) } else { None };
    let mut summaries = Vec::new();
    let mut traced = Vec::new();
    let mut failures = Vec::new();
    for (j, sign, r) in &results {
        match r {
            Ok(t) => {
                let b = &t.branch;
                write_branch_csv(out.create(&format!("{}.csv", b.id))?, b)?;
                if let Some(dir) = &states {
                    for (k, p) in b.points.iter().enumerate().step_by(stride) {
                        let f = std::fs::File::create(dir.join(format!("{}_{k:05}.csv", b.id)))?;
                        write_state_csv(std::io::BufWriter::new(f), &p.state, &grid, p.d2)?;
                    }
                }
                summaries.push(BranchSummary::of(t, *j, *sign, &params));
                traced.push(b);
            }
            Err(e) => {
                eprintln!("G{j}_{}: {e}", side_label(*sign));
                failures.push(format!("G{j}_{}", side_label(*sign)));
                summaries.push(BranchSummary::failed(*j, *sign, e));
            }
        }
    }
    let hi = summaries.iter().filter_map(|s| s.d2_max).fold(cfg.continuation.d2_floor, f64::max) * 1.2;
    let panel = diagram(&traced, &params, cfg.output.measure, "bifurcation diagram", (cfg.continuation.d2_floor, hi));
    out.write_text("branches.svg", &render(&[panel], 1))?;
    out.write_json(
        "branches.json",
        &Report {
            grid_n: grid.n,
            tolerance: cfg.tolerance(&params, &grid),
            measure: cfg.output.measure,
            branches: summaries.clone(),
        },
    )?;
    let lines: Vec<String> = summaries
        .iter()
        .map(|s| match &s.error {
            None => format!(
                "{}: {} points, onset {:.6} (d* {:.6}), {} folds, {}",
                s.id,
                s.points,
                s.onset_estimate.unwrap_or(f64::NAN),
                s.d_star.unwrap_or(f64::NAN),
                s.fold_count.unwrap_or(0),
                s.termination.as_deref().unwrap_or("")
            ),
            Some(e) => format!("{}: failed: {e}", s.id),
        })
        .collect();
    if !failures.is_empty() && traced.is_empty() {
        return Err(CliError::Numerical(format!("every branch failed: {}", lines.join("; "))));
    }
    Ok(lines.join("\n"))
}
