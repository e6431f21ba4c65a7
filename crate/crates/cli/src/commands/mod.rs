//! One module per subcommand, plus the branch tracing they share.

pub mod analyze;
pub mod branches;
pub mod compare;
pub mod evolve;
pub mod limit;
pub mod verify;

use serde::Serialize;

use crossflux::continuation::{
    continue_branch, estimate_onset, side_label, switch_branch, Orientation, Origin, SwitchOptions,
};
use crossflux::model::l2_bounds;
use crossflux::solver::NewtonOptions;
use crossflux::spectral::critical_d2;
use crossflux::{Branch, Grid, ModelParams, StepControls};

/// A traced `Γ_j` side together with its recovered onset.
#[derive(Debug, Clone)]
pub struct Traced {
    pub branch: Branch,
    pub d_star: f64,
    pub onset: Option<f64>,
}

/// Branch id used in file names: `G{j}_{upper|lower}`.
pub fn branch_id(j: usize, sign: i8) -> String {
    format!("G{j}_{}", side_label(sign))
}

/// Switches onto `Γ_j` on the side `sign` and follows it down in `d2`.
pub fn trace_side(
    params: &ModelParams,
    grid: &Grid,
    j: usize,
    sign: i8,
    amplitude: f64,
    delta: f64,
    controls: &StepControls,
) -> crossflux::Result<Traced> {
    let d_star = critical_d2(j, params).ok_or_else(|| crossflux::Error::SwitchFailed {
        j,
        reason: "(alpha, beta) is outside the destabilizing region of this mode".into(),
    })?;
    let opts = SwitchOptions {
        delta,
        newton: NewtonOptions { tol: controls.tol, ..Default::default() },
        with_stability: controls.stability,
    };
    let seed = switch_branch(j, sign, amplitude, params, grid, &opts)?;
    let onset = estimate_onset(&seed, j, params, grid, controls.tol).ok().map(|e| e.d2);
    let branch = continue_branch(
        &seed,
        branch_id(j, sign),
        Origin::Bifurcation { j, sign },
        params,
        grid,
        controls,
        &Orientation::DecreasingD2,
    )?;
    Ok(Traced { branch, d_star, onset })
}

/// Per-branch entry of a JSON summary.
#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub id: String,
    pub j: usize,
    pub side: &'static str,
    pub d_star: Option<f64>,
    pub onset_estimate: Option<f64>,
    pub points: usize,
    pub d2_min: Option<f64>,
    pub d2_max: Option<f64>,
    pub termination: Option<String>,
    pub fold_count: Option<usize>,
    pub box_violations: Option<usize>,
    pub error: Option<String>,
}

impl BranchSummary {
    pub fn of(t: &Traced, j: usize, sign: i8, params: &ModelParams) -> Self {
        let b = &t.branch;
        let (bu, bv) = l2_bounds(params);
        BranchSummary {
            id: b.id.clone(),
            j,
            side: side_label(sign),
            d_star: Some(t.d_star),
            onset_estimate: t.onset,
            points: b.points.len(),
            d2_min: b.points.iter().map(|p| p.d2).reduce(f64::min),
            d2_max: b.points.iter().map(|p| p.d2).reduce(f64::max),
            termination: Some(b.termination.to_string()),
            fold_count: Some(b.fold_count),
            box_violations: Some(b.points.iter().filter(|p| p.norms.l2_u > bu || p.norms.l2_v > bv).count()),
            error: None,
        }
    }

    pub fn failed(j: usize, sign: i8, err: &crossflux::Error) -> Self {
        BranchSummary {
            id: branch_id(j, sign),
            j,
            side: side_label(sign),
            d_star: None,
            onset_estimate: None,
            points: 0,
            d2_min: None,
            d2_max: None,
            termination: None,
            fold_count: None,
            box_violations: None,
            error: Some(err.to_string()),
        }
    }
}

/// `n` points spread evenly in `log d2` over `[lo, hi]`.
pub fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// JSON cannot hold infinities; those become `None`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
