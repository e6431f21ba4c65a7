//! Convergence of `Γ_j` to the scalar-limit branch along a ray of flux strengths.
//!
//! Distances and ratio defects are measured on the common window
//! `d2 >= max(d2_floor, w)`, where `w` is the largest of the smallest `d2`
//! reached by the traced `Γ_j` of one side across all scales. Branches are cut
//! after `sweep.max_folds` folds so each one is a graph over that window.

use rayon::prelude::*;
use serde::Serialize;

use crossflux::continuation::side_label;
use crossflux::io::{write_branch_csv, write_scalar_branch_csv};
use crossflux::limit::{
    branch_distance, branch_distance_within, common_window, max_ratio_defect_within, ratio_defect_profile,
    trace_scalar_branch,
};
use crossflux::spectral::limiting_critical_d2;
use crossflux::{Branch, ModelParams};

use crate::commands::{finite, limit::scalar_options, trace_side, Traced};
use crate::config::ExperimentConfig;
use crate::svg::{render, Panel, Series};
use crate::{CliError, Output};

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub j: usize,
    pub side: String,
    pub d_star: Option<f64>,
    /// `|d_*^{(j)}(s α0, s β0) - d_{*,∞}^{(j)}|` from the closed forms.
    pub onset_gap: Option<f64>,
    pub onset_estimate: Option<f64>,
    pub hausdorff: Option<f64>,
    pub hausdorff_full: Option<f64>,
    pub max_ratio_defect: Option<f64>,
    pub max_ratio_defect_full: Option<f64>,
    pub points: usize,
    pub d2_min: Option<f64>,
    pub fold_count: Option<usize>,
    pub termination: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trend {
    pub j: usize,
    pub side: String,
    pub window_d2_min: Option<f64>,
    pub onset_gap_decreasing: bool,
    pub hausdorff_decreasing: bool,
    pub ratio_defect_decreasing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma: Option<f64>,
    pub limit_onsets: Vec<(usize, Option<f64>)>,
    pub entries: Vec<Entry>,
    pub trends: Vec<Trend>,
}

fn strictly_decreasing(xs: &[Option<f64>]) -> bool {
    xs.iter().all(Option::is_some) && xs.windows(2).all(|w| w[1] < w[0])
}

fn side_name(sign: i8) -> String {
    side_label(sign).to_string()
}

/// Runs the sweep and writes nothing; `run` adds the files.
pub fn sweep(cfg: &ExperimentConfig) -> Result<(Report, Vec<(f64, usize, i8, Option<Traced>)>, Vec<crossflux::ScalarBranch>), CliError> {
    let base = cfg.params()?;
    let grid = cfg.grid()?;
    let sw = &cfg.sweep;
    let limit_cfg = {
        let mut c = cfg.clone();
        c.model.alpha = sw.alpha0;
        c.model.beta = sw.beta0;
        c.model.gamma = None;
        c
    };
    let p0 = base.with_flux(sw.alpha0, sw.beta0)?;
    crate::commands::limit::check_regime(&limit_cfg, &p0)?;
    let gamma = limit_cfg.gamma();
    let mut sopts = scalar_options(&limit_cfg, &p0, &grid);
    sopts.controls.max_folds = sw.max_folds;
    let sides: Vec<(usize, i8)> = sw.j_list.iter().flat_map(|&j| [(j, -1), (j, 1)]).collect();
    let scalar: Vec<_> = sides
        .par_iter()
        .map(|&(j, sign)| trace_scalar_branch(&p0, gamma, j, sign, &grid, &sopts))
        .collect::<crossflux::Result<Vec<_>>>()?;
    let jobs: Vec<(f64, usize, i8)> =
        sw.scales.iter().flat_map(|&s| sides.iter().map(move |&(j, sign)| (s, j, sign))).collect();
    let traced: Vec<(f64, usize, i8, crossflux::Result<Traced>, ModelParams)> = jobs
        .into_par_iter()
        .map(|(s, j, sign)| {
            let p = match base.with_flux(s * sw.alpha0, s * sw.beta0) {
                Ok(p) => p,
                Err(e) => return (s, j, sign, Err(e), base),
            };
            let mut controls = cfg.step_controls_for(&p, &grid);
            controls.max_folds = sw.max_folds;
            controls.stability = false;
            let c = &cfg.continuation;
            (s, j, sign, trace_side(&p, &grid, j, sign, c.amplitude, c.delta, &controls), p)
        })
        .collect();

    let mut entries = Vec::new();
    let mut trends = Vec::new();
    let limit_onsets = sw
        .j_list
        .iter()
        .map(|&j| Ok((j, limiting_critical_d2(j, &p0, gamma)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    for (k, &(j, sign)) in sides.iter().enumerate() {
        let sb = &scalar[k];
        let ours: Vec<&(f64, usize, i8, crossflux::Result<Traced>, ModelParams)> =
            traced.iter().filter(|t| t.1 == j && t.2 == sign).collect();
        let ok: Vec<&Branch> = ours.iter().filter_map(|t| t.3.as_ref().ok().map(|x| &x.branch)).collect();
        let window = common_window(&ok).map(|w| w.max(cfg.continuation.d2_floor));
        let limit_onset = limit_onsets.iter().find(|o| o.0 == j).and_then(|o| o.1);
        let mut gaps = Vec::new();
        let mut hs = Vec::new();
        let mut rds = Vec::new();
        for (s, _, _, r, p) in ours {
            let d_star = crossflux::spectral::critical_d2(j, p);
            let onset_gap = d_star.zip(limit_onset).map(|(a, b)| (a - b).abs());
            let mut e = Entry {
                s: *s,
                alpha: p.alpha,
                beta: p.beta,
                j,
                side: side_name(sign),
                d_star,
                onset_gap,
                onset_estimate: None,
                hausdorff: None,
                hausdorff_full: None,
                max_ratio_defect: None,
                max_ratio_defect_full: None,
                points: 0,
                d2_min: None,
                fold_count: None,
                termination: None,
                error: None,
            };
            match r {
                Ok(t) => {
                    let b = &t.branch;
                    e.onset_estimate = t.onset;
                    e.points = b.points.len();
                    e.d2_min = b.points.iter().map(|q| q.d2).reduce(f64::min);
                    e.fold_count = Some(b.fold_count);
                    e.termination = Some(b.termination.to_string());
                    e.hausdorff_full = branch_distance(b, sb).ok().map(|d| d.hausdorff);
                    e.max_ratio_defect_full = Some(ratio_defect_profile(b, p).max);
                    if let Some(w) = window {
                        e.hausdorff = branch_distance_within(b, sb, w).ok().map(|d| d.hausdorff);
                        e.max_ratio_defect = Some(max_ratio_defect_within(b, p, w));
                    }
                }
                Err(err) => e.error = Some(err.to_string()),
            }
            gaps.push(e.onset_gap);
            hs.push(e.hausdorff);
            rds.push(e.max_ratio_defect);
            entries.push(e);
        }
        trends.push(Trend {
            j,
            side: side_name(sign),
            window_d2_min: window,
            onset_gap_decreasing: strictly_decreasing(&gaps),
            hausdorff_decreasing: strictly_decreasing(&hs),
            ratio_defect_decreasing: strictly_decreasing(&rds),
        });
    }
    let report = Report {
        alpha0: sw.alpha0,
        beta0: sw.beta0,
        gamma: finite(limit_cfg.gamma_value()),
        limit_onsets,
        entries,
        trends,
    };
    let traced = traced.into_iter().map(|(s, j, sign, r, _)| (s, j, sign, r.ok())).collect();
    Ok((report, traced, scalar))
}

pub fn run(cfg: &ExperimentConfig, out: &Output) -> Result<String, CliError> {
    let (report, traced, scalar) = sweep(cfg)?;
    let dir = out.subdir("branches")?;
    for sb in &scalar {
        let f = std::fs::File::create(dir.join(format!("{}.csv", sb.id)))?;
        write_scalar_branch_csv(std::io::BufWriter::new(f), sb)?;
    }
    for (s, _, _, t) in &traced {
        if let Some(t) = t {
            let f = std::fs::File::create(dir.join(format!("{}_s{s}.csv", t.branch.id)))?;
            write_branch_csv(std::io::BufWriter::new(f), &t.branch)?;
        }
    }
    let mut panels = Vec::new();
    let letters = "abcdefghijklmnopqrstuvwxyz";
    for (k, &s) in cfg.sweep.scales.iter().enumerate() {
        let mut series = Vec::new();
        for (color, (_, _, _, t)) in traced.iter().filter(|t| t.0 == s).enumerate() {
            if let Some(t) = t {
                let b = &t.branch;
                series.push(Series::new(b.id.clone(), b.points.iter().map(|p| (p.d2, p.norms.sup_v)).collect(), color));
            }
        }
        let guides =
            scalar.iter().map(|b| Series::new(b.id.clone(), b.points.iter().map(|p| (p.d2, p.sup_v)).collect(), 7)).collect();
        panels.push(Panel {
            title: format!("({}) alpha = {}, beta = {}", &letters[k % 26..k % 26 + 1], s * cfg.sweep.alpha0, s * cfg.sweep.beta0),
            x_label: "d2".into(),
            y_label: "sup v".into(),
            series,
            guides,
        });
    }
    let k = cfg.sweep.scales.len();
    let refs: Vec<&crossflux::ScalarBranch> = scalar.iter().collect();
    panels.push(crate::commands::limit::scalar_panel(
        &refs,
        &format!("({}) scalar limit, gamma = {}", &letters[k % 26..k % 26 + 1], cfg.sweep.alpha0 / cfg.sweep.beta0),
    ));
    out.write_text("compare.svg", &render(&panels, 3))?;
    out.write_json("compare.json", &report)?;
    let mut lines = Vec::new();
    for e in &report.entries {
        lines.push(format!(
            "s={} G{}_{}: onset gap {:.3e}, hausdorff {}, max ratio defect {}{}",
            e.s,
            e.j,
            e.side,
            e.onset_gap.unwrap_or(f64::NAN),
            e.hausdorff.map(|x| format!("{x:.4e}")).unwrap_or("-".into()),
            e.max_ratio_defect.map(|x| format!("{x:.4e}")).unwrap_or("-".into()),
            e.error.as_ref().map(|m| format!(" (failed: {m})")).unwrap_or_default()
        ));
    }
    for t in &report.trends {
        lines.push(format!(
            "G{}_{} window d2 >= {:.5}: decreasing onset gap {}, hausdorff {}, ratio defect {}",
            t.j,
            t.side,
            t.window_d2_min.unwrap_or(f64::NAN),
            t.onset_gap_decreasing,
            t.hausdorff_decreasing,
            t.ratio_defect_decreasing
        ));
    }
    Ok(lines.join("\n"))
}
