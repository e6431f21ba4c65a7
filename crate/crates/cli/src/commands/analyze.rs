//! Spectral table of the constant state: `modes.csv` and `modes.json`.

use serde::Serialize;

use crossflux::continuation::{detect_bifurcations, Bifurcation};
use crossflux::io::fmt_float;
use crossflux::model::constant_state;
use crossflux::spectral::{
    critical_d2, kernel_ratios, limit_coefficients, limiting_critical_d2, mode_set_and_threshold, neumann_eigenvalue,
    region_membership, Regime,
};

use crate::commands::finite;
use crate::config::ExperimentConfig;
use crate::{CliError, Output};

#[derive(Debug, Clone, Serialize)]
pub struct ModeRow {
    pub j: usize,
    pub lambda: f64,
    pub in_region: bool,
    pub d_star: Option<f64>,
    pub kappa: f64,
    pub kappa_star: f64,
    pub d_star_limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTable {
    pub u_star: f64,
    pub v_star: f64,
    pub tau_star: f64,
    pub gamma: Option<f64>,
    pub gamma_threshold: f64,
    /// `logistic`, `degenerate`, `scalar_field`, or `none` without cross-diffusion.
    pub regime: String,
    pub modes: Vec<usize>,
    pub threshold: f64,
    pub constant_state: String,
    pub cutoff_certified: bool,
    pub lambda_bound: Option<f64>,
    pub bifurcations: Vec<Bifurcation<f64>>,
    pub rows: Vec<ModeRow>,
}

pub fn table(cfg: &ExperimentConfig) -> Result<ModeTable, CliError> {
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let c = constant_state(&p);
    let j_max = cfg.continuation.j_max;
    let set = mode_set_and_threshold(&p, j_max)?;
    let no_flux = p.alpha == 0.0 && p.beta == 0.0;
    let limit = if no_flux { None } else { Some(limit_coefficients(&p, cfg.gamma())?) };
    let regime = match limit.map(|l| l.regime) {
        None => "none".to_string(),
        Some(Regime::Logistic) => "logistic".into(),
        Some(Regime::Degenerate) => "degenerate".into(),
        Some(Regime::ScalarField) => "scalar_field".into(),
    };
    let scalar_field = limit.is_some_and(|l| l.regime == Regime::ScalarField);
    let mut rows = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let (kappa, kappa_star) = kernel_ratios(j, &p);
        rows.push(ModeRow {
            j,
            lambda: neumann_eigenvalue(j, p.length),
            in_region: region_membership(j, &p)?,
            d_star: critical_d2(j, &p),
            kappa,
            kappa_star,
            d_star_limit: if scalar_field { limiting_critical_d2(j, &p, cfg.gamma())? } else { None },
        });
    }
    let range = (cfg.continuation.d2_floor, cfg.continuation.d2_max);
    let constant_state = if set.modes.is_empty() {
        "linearly stable for every d2".to_string()
    } else {
        format!("linearly stable for d2 > {}", set.threshold)
    };
    Ok(ModeTable {
        u_star: c.u_star,
        v_star: c.v_star,
        tau_star: c.tau_star,
        gamma: if no_flux { None } else { finite(cfg.gamma_value()) },
        gamma_threshold: c.gamma_threshold,
        regime,
        modes: set.modes.clone(),
        threshold: set.threshold,
        constant_state,
        cutoff_certified: set.certified,
        lambda_bound: set.lambda_bound,
        bifurcations: detect_bifurcations(&p, range, j_max, Some(&grid)),
        rows,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[ModeRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["j", "lambda", "in_region", "d_star", "kappa", "kappa_star", "d_star_limit"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.j.to_string(),
            fmt_float(r.lambda),
            r.in_region.to_string(),
            opt(r.d_star),
            fmt_float(r.kappa),
            fmt_float(r.kappa_star),
            opt(r.d_star_limit),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, out: &Output) -> Result<String, CliError> {
    let t = table(cfg)?;
    write_csv(out.create("modes.csv")?, &t.rows)?;
    out.write_json("modes.json", &t)?;
    let list: Vec<String> = t.bifurcations.iter().map(|b| format!("j={} d*={:.6}", b.j, b.d_star)).collect();
    Ok(format!(
        "modes {:?}; threshold {:.6}; regime {}; bifurcations in [{}, {}]: {}",
        t.modes,
        t.threshold,
        t.regime,
        cfg.continuation.d2_floor,
        cfg.continuation.d2_max,
        if list.is_empty() { "none".into() } else { list.join(", ") }
    ))
}
