//! Semi-implicit time stepping of the parabolic system.
//!
//! Each step solves `(I - dt D(sⁿ)) sⁿ⁺¹ = sⁿ + dt R(sⁿ)`, where `D(sⁿ)` is the
//! conservative flux operator with its coefficients frozen at `sⁿ` and `R` is
//! the reaction. Steady states of the discrete system are exact fixed points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{assemble_residual, Grid, StateVector};
use crate::model::{constant_state, reaction, ModelParams};
use crate::scalar::{max_abs, Scalar};
use crate::solver::BandedMatrix;

/// Nodal values below this after a step are a positivity violation.
pub const POSITIVITY_FLOOR: f64 = -1e-6;

/// Sup-norm above which a run is stopped as a blowup.
pub const BLOWUP_GUARD: f64 = 1e3;

fn flux_operator<T: Scalar>(state: &StateVector<T>, d2: T, p: &ModelParams<T>, grid: &Grid<T>) -> BandedMatrix<T> {
    let n = grid.n;
    let mut d = BandedMatrix::zeros(2 * n, 3, 3);
    let half = T::lit(0.5);
    for e in 0..n - 1 {
        let ub = (state.u[e] + state.u[e + 1]) * half;
        let vb = (state.v[e] + state.v[e + 1]) * half;
        // flux coefficients on (u_{e+1} - u_e) and (v_{e+1} - v_e)
        let uu = (p.d1 + p.alpha * vb) / grid.h;
        let uv = -p.alpha * ub / grid.h;
        let vv = (d2 + p.beta * ub) / grid.h;
        let vu = -p.beta * vb / grid.h;
        for (node, sign) in [(e, T::one()), (e + 1, -T::one())] {
            let w = sign / grid.weight(node);
            let (ru, rv) = (2 * node, 2 * node + 1);
            d.add(ru, 2 * (e + 1), w * uu);
            d.add(ru, 2 * e, -w * uu);
            d.add(ru, 2 * (e + 1) + 1, w * uv);
            d.add(ru, 2 * e + 1, -w * uv);
            d.add(rv, 2 * (e + 1) + 1, w * vv);
            d.add(rv, 2 * e + 1, -w * vv);
            d.add(rv, 2 * (e + 1), w * vu);
            d.add(rv, 2 * e, -w * vu);
        }
    }
    d
}

/// One semi-implicit step with the reaction switched on or off.
pub fn step_imex_with<T: Scalar>(
    state: &StateVector<T>,
    dt: T,
    d2: T,
    params: &ModelParams<T>,
    grid: &Grid<T>,
    with_reaction: bool,
) -> Result<StateVector<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter("time step must be positive".into()));
    }
    state.check(grid)?;
    let mut m = flux_operator(state, d2, params, grid);
    m.scale(-dt);
    m.shift_diagonal(T::one());
    let mut rhs = state.to_flat();
    if with_reaction {
        for i in 0..grid.n {
            let (fu, fv) = reaction(state.u[i], state.v[i], params);
            rhs[2 * i] = rhs[2 * i] + dt * fu;
            rhs[2 * i + 1] = rhs[2 * i + 1] + dt * fv;
        }
    }
    m.factor()?.solve_in_place(&mut rhs);
    let next = StateVector::from_flat(&rhs);
    if !next.is_finite() {
        return Err(Error::NoConvergence { iterations: 1, residual: f64::NAN });
    }
    let min = next.min_value();
    if min < T::lit(POSITIVITY_FLOOR) {
        return Err(Error::Positivity { min: min.as_f64() });
    }
    Ok(next)
}

/// One semi-implicit step of the full system.
pub fn step_imex<T: Scalar>(
    state: &StateVector<T>,
    dt: T,
    d2: T,
    params: &ModelParams<T>,
    grid: &Grid<T>,
) -> Result<StateVector<T>> {
    step_imex_with(state, dt, d2, params, grid, true)
}

/// `(u*, v*)` times `1 + amplitude · ξ` with `ξ` uniform on `[-1, 1]` per node.
pub fn perturbed_constant<T: Scalar>(params: &ModelParams<T>, grid: &Grid<T>, amplitude: T, seed: u64) -> StateVector<T> {
    let c = constant_state(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || T::lit(rng.random_range(-1.0..=1.0));
    let u = (0..grid.n).map(|_| c.u_star * (T::one() + amplitude * draw())).collect();
    let v = (0..grid.n).map(|_| c.v_star * (T::one() + amplitude * draw())).collect();
    StateVector { u, v }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveControls<T> {
    pub dt: T,
    pub dt_min: T,
    pub dt_max: T,
    pub t_max: T,
    /// Steady when `‖F(s)‖_∞`, the sup of the time derivative, drops below this.
    pub steady_tol: T,
    /// A step whose sup-norm change exceeds this is rejected.
    pub max_change: T,
    /// Snapshot every this many accepted steps.
    pub snapshot_every: usize,
}

impl<T: Scalar> Default for EvolveControls<T> {
    fn default() -> Self {
        EvolveControls {
            dt: T::lit(0.01),
            dt_min: T::lit(1e-8),
            dt_max: T::lit(0.5),
            t_max: T::lit(2000.0),
            steady_tol: T::lit(1e-8),
            max_change: T::lit(0.05),
            snapshot_every: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvolveTermination {
    Steady,
    Blowup,
    TimeBudget,
}

impl std::fmt::Display for EvolveTermination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvolveTermination::Steady => "steady",
            EvolveTermination::Blowup => "blowup",
            EvolveTermination::TimeBudget => "time_budget",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub t: T,
    pub state: StateVector<T>,
    /// `‖(u, v) - (u*, v*)‖_∞`.
    pub distance: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRun<T> {
    pub snapshots: Vec<Snapshot<T>>,
    pub termination: EvolveTermination,
    pub accepted: usize,
    pub rejected: usize,
    /// Sup-norm residual of the steady system at the final state.
    pub final_residual: T,
}

impl<T: Scalar> EvolutionRun<T> {
    pub fn final_state(&self) -> &StateVector<T> {
        &self.snapshots.last().expect("a run always holds its initial snapshot").state
    }

    pub fn final_distance(&self) -> T {
        self.snapshots.last().expect("nonempty").distance
    }
}

/// Adaptive semi-implicit evolution from `state0`.
pub fn evolve<T: Scalar>(
    state0: &StateVector<T>,
    d2: T,
    params: &ModelParams<T>,
    grid: &Grid<T>,
    controls: &EvolveControls<T>,
) -> Result<EvolutionRun<T>> {
    if !(controls.dt > T::zero() && controls.dt_min > T::zero() && controls.t_max > T::zero()) {
        return Err(Error::InvalidParameter("dt, dt_min and t_max must be positive".into()));
    }
    state0.check(grid)?;
    let c = constant_state(params);
    let star = StateVector::constant(grid.n, c.u_star, c.v_star);
    let snap = |t: T, s: &StateVector<T>| Snapshot {
        t,
        distance: s.sup_distance(&star),
        state: s.clone(),
    };
    let mut snapshots = vec![snap(T::zero(), state0)];
    let mut state = state0.clone();
    let mut t = T::zero();
    let mut dt = controls.dt.min(controls.dt_max);
    let (mut accepted, mut rejected, mut streak) = (0usize, 0usize, 0usize);
    let mut residual = max_abs(&assemble_residual(&state, d2, params, grid)?);

    let termination = loop {
        if residual <= controls.steady_tol {
            break EvolveTermination::Steady;
        }
        if t >= controls.t_max {
            break EvolveTermination::TimeBudget;
        }
        let h = dt.min(controls.t_max - t);
        let next = match step_imex(&state, h, d2, params, grid) {
            Ok(next) if next.sup_distance(&state) <= controls.max_change => Some(next),
            Ok(_) | Err(Error::Positivity { .. }) | Err(Error::NoConvergence { .. }) => None,
            Err(e) => return Err(e),
        };
        let Some(next) = next else {
            rejected += 1;
            streak = 0;
            dt = dt * T::lit(0.5);
            if dt < controls.dt_min {
                return Err(Error::InvalidParameter(format!(
                    "time step fell below dt_min = {:e} at t = {t}",
                    controls.dt_min
                )));
            }
            continue;
        };
        state = next;
        t = t + h;
        accepted += 1;
        streak += 1;
        if streak >= 10 {
            dt = (dt * T::lit(1.2)).min(controls.dt_max);
            streak = 0;
        }
        if max_abs(&state.u).max(max_abs(&state.v)) > T::lit(BLOWUP_GUARD) {
            break EvolveTermination::Blowup;
        }
        residual = max_abs(&assemble_residual(&state, d2, params, grid)?);
        if controls.snapshot_every > 0 && accepted % controls.snapshot_every == 0 {
            snapshots.push(snap(t, &state));
        }
    };
    if snapshots.last().is_none_or(|s| s.t < t) {
        snapshots.push(snap(t, &state));
    }
    Ok(EvolutionRun {
        snapshots,
        termination,
        accepted,
        rejected,
        final_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SystemProblem;
    use crate::solver::SteadyProblem;

    fn setup(alpha: f64, beta: f64, n: usize) -> (ModelParams<f64>, Grid<f64>) {
        let p = ModelParams::reference(alpha, beta, 0.05).unwrap();
        let g = Grid::for_params(n, &p).unwrap();
        (p, g)
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let (p, g) = setup(2.0, 1.0, 41);
        let s = StateVector::constant(41, 0.5, 0.5);
        let next = step_imex(&s, 0.7, 0.05, &p, &g).unwrap();
        assert!(next.sup_distance(&s) < 1e-12);
    }

    #[test]
    fn frozen_operator_reproduces_the_steady_residual() {
        let (p, g) = setup(2.0, 1.0, 31);
        let s = StateVector {
            u: g.sample(|x| 0.5 + 0.1 * (3.0 * x).cos()),
            v: g.sample(|x| 0.4 + 0.2 * x * x),
        };
        let d = flux_operator(&s, 0.05, &p, &g);
        let flux = d.mul_vec(&s.to_flat());
        let f = SystemProblem::new(&p, &g).residual_vec(&s.to_flat(), 0.05);
        for i in 0..31 {
            let (ru, rv) = reaction(s.u[i], s.v[i], &p);
            assert!((flux[2 * i] + ru - f[2 * i]).abs() < 1e-11);
            assert!((flux[2 * i + 1] + rv - f[2 * i + 1]).abs() < 1e-11);
        }
    }

    #[test]
    fn flux_only_step_conserves_mass() {
        let (p, g) = setup(2.0, 1.0, 51);
        let s = StateVector {
            u: g.sample(|x| 0.5 + 0.2 * (2.0 * x).sin()),
            v: g.sample(|x| 0.6 - 0.3 * x),
        };
        let next = step_imex_with(&s, 0.1, 0.05, &p, &g, false).unwrap();
        assert!((g.integrate(&next.u) - g.integrate(&s.u)).abs() < 1e-13);
        assert!((g.integrate(&next.v) - g.integrate(&s.v)).abs() < 1e-13);
    }

    #[test]
    fn heat_flow_decays_first_mode() {
        let (p, g) = setup(0.0, 0.0, 101);
        let phi = g.sample_mode(1);
        let s = StateVector {
            u: phi.iter().map(|f| 1.0 + 0.1 * f).collect(),
            v: vec![1.0; 101],
        };
        let dt = 0.1;
        let next = step_imex_with(&s, dt, 0.05, &p, &g, false).unwrap();
        let du: Vec<f64> = next.u.iter().map(|u| u - 1.0).collect();
        let ratio = g.inner(&du, &phi) / g.inner(&s.u.iter().map(|u| u - 1.0).collect::<Vec<_>>(), &phi);
        let implicit = 1.0 / (1.0 + dt * p.d1 * g.laplacian_eigenvalue(1));
        assert!((ratio - implicit).abs() < 1e-12);
        assert!((ratio - (-p.d1 * std::f64::consts::PI.powi(2) * dt).exp()).abs() < 1e-5);
    }

    #[test]
    fn first_order_in_time() {
        let (p, g) = setup(2.0, 1.0, 41);
        let s0 = perturbed_constant(&p, &g, 0.2, 3);
        let run = |dt: f64, steps: usize| {
            let mut s = s0.clone();
            for _ in 0..steps {
                s = step_imex(&s, dt, 0.05, &p, &g).unwrap();
            }
            s
        };
        let t = 0.2;
        let reference = run(t / 64.0, 64);
        let e1 = run(t / 8.0, 8).sup_distance(&reference);
        let e2 = run(t / 16.0, 16).sup_distance(&reference);
        let ratio = e1 / e2;
        assert!(ratio > 1.7 && ratio < 2.6, "ratio {ratio}");
    }

    #[test]
    fn perturbation_is_reproducible() {
        let (p, g) = setup(2.0, 1.0, 21);
        assert_eq!(perturbed_constant(&p, &g, 0.01, 9), perturbed_constant(&p, &g, 0.01, 9));
        assert_ne!(perturbed_constant(&p, &g, 0.01, 9), perturbed_constant(&p, &g, 0.01, 10));
    }
}
