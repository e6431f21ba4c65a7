//! Time evolution from a seeded perturbation of the constant state.

use serde::Serialize;

use crossflux::continuation::node_count;
use crossflux::evolve::{evolve, perturbed_constant, EvolveTermination};
use crossflux::io::write_state_csv;
use crossflux::mesh::{StateVector, SystemProblem};
use crossflux::model::constant_state;
use crossflux::solver::{newton_solve, NewtonOptions};

use crate::config::ExperimentConfig;
use crate::{CliError, Output};

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub d2: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub termination: String,
    pub t_final: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub final_distance: f64,
    pub final_residual: f64,
    pub snapshots: usize,
    /// Interior sign changes of `v'` for a nonconstant final state.
    pub node_count: Option<usize>,
    pub polish_change: Option<f64>,
    pub polished_distance: Option<f64>,
}

pub fn run(cfg: &ExperimentConfig, out: &Output) -> Result<String, CliError> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let e = &cfg.evolve;
    let s0 = perturbed_constant(&params, &grid, e.amplitude, e.seed);
    let run = evolve(&s0, e.d2, &params, &grid, &cfg.evolve_controls())?;
    let dir = out.subdir("snapshots")?;
    for (k, snap) in run.snapshots.iter().enumerate() {
        let f = std::fs::File::create(dir.join(format!("snap_{k:05}.csv")))?;
        write_state_csv(std::io::BufWriter::new(f), &snap.state, &grid, e.d2)?;
    }
    let last = run.final_state();
    let mut summary = Summary {
        d2: e.d2,
        seed: e.seed,
        amplitude: e.amplitude,
        termination: run.termination.to_string(),
        t_final: run.snapshots.last().map(|s| s.t).unwrap_or(0.0),
        accepted: run.accepted,
        rejected: run.rejected,
        final_distance: run.final_distance(),
        final_residual: run.final_residual,
        snapshots: run.snapshots.len(),
        node_count: node_count(last, &grid).ok(),
        polish_change: None,
        polished_distance: None,
    };
    if e.polish && run.termination == EvolveTermination::Steady {
        let tol = cfg.tolerance(&params, &grid);
        let problem = SystemProblem::new(&params, &grid);
        let (x, _) = newton_solve(&problem, &last.to_flat(), e.d2, &NewtonOptions { tol, ..Default::default() })?;
        let polished = StateVector::from_flat(&x);
        let c = constant_state(&params);
        summary.polish_change = Some(polished.sup_distance(last));
        summary.polished_distance = Some(polished.sup_distance(&StateVector::constant(grid.n, c.u_star, c.v_star)));
        write_state_csv(out.create("polished.csv")?, &polished, &grid, e.d2)?;
    }
    out.write_json("summary.json", &summary)?;
    if run.termination == EvolveTermination::Blowup {
        return Err(CliError::Numerical(format!("evolution blew up at t = {}", summary.t_final)));
    }
    Ok(format!(
        "{} at t = {:.3} after {} steps ({} rejected); distance to constant state {:.3e}; nodes {}",
        summary.termination,
        summary.t_final,
        summary.accepted,
        summary.rejected,
        summary.final_distance,
        summary.node_count.map(|n| n.to_string()).unwrap_or_else(|| "-".into())
    ))
}
