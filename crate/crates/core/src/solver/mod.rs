//! Damped Newton iteration on banded discrete residuals.

mod banded;

pub use banded::{banded_solve, BandedLu, BandedMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{max_abs, Scalar};

/// A discretized steady-state problem `F(x; d2) = 0` with a banded Jacobian.
pub trait SteadyProblem<T: Scalar> {
    fn dim(&self) -> usize;

    /// Writes `F(x; d2)` into `out`; both slices have length [`Self::dim`].
    fn residual(&self, x: &[T], d2: T, out: &mut [T]);

    fn jacobian(&self, x: &[T], d2: T) -> BandedMatrix<T>;

    /// Writes `∂F/∂d2` into `out`.
    fn d2_derivative(&self, x: &[T], d2: T, out: &mut [T]);

    fn residual_vec(&self, x: &[T], d2: T) -> Vec<T> {
        let mut r = vec![T::zero(); self.dim()];
        self.residual(x, d2, &mut r);
        r
    }
}

/// Largest entrywise gap between the analytic Jacobian and central
/// differences of the residual with step `eps`, each gap divided by
/// `max(|J_ik|, 1)`.
pub fn fd_jacobian_error<T: Scalar, P: SteadyProblem<T> + ?Sized>(problem: &P, x: &[T], d2: T, eps: T) -> Result<T> {
    let n = problem.dim();
    if x.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: x.len() });
    }
    let jac = problem.jacobian(x, d2);
    let mut worst = T::zero();
    let mut xp = x.to_vec();
    for k in 0..n {
        xp[k] = x[k] + eps;
        let rp = problem.residual_vec(&xp, d2);
        xp[k] = x[k] - eps;
        let rm = problem.residual_vec(&xp, d2);
        xp[k] = x[k];
        for i in 0..n {
            let fd = (rp[i] - rm[i]) / (eps + eps);
            let an = jac.get(i, k);
            worst = worst.max((fd - an).abs() / an.abs().max(T::one()));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions<T> {
    /// Sup-norm tolerance on the residual.
    pub tol: T,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Converged states with an entry below this value are rejected.
    pub min_value: Option<T>,
}

impl<T: Scalar> Default for NewtonOptions<T> {
    fn default() -> Self {
        NewtonOptions {
            tol: T::lit(1e-10),
            max_iter: 25,
            max_halvings: 30,
            min_value: Some(T::lit(-1e-8)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport<T> {
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: T,
    pub residual_history: Vec<T>,
    pub step_norms: Vec<T>,
    pub damping_events: usize,
}

/// Solves `F(x; d2) = 0` from `x0` by Newton's method with step halving.
///
/// A step is accepted as soon as the residual sup-norm decreases; after
/// `max_halvings` failed halvings the smallest trial step is taken anyway.
/// Fails with [`Error::NoConvergence`] when `max_iter` is exhausted and with
/// [`Error::Positivity`] when the converged state leaves the positive cone.
pub fn newton_solve<T: Scalar, P: SteadyProblem<T> + ?Sized>(
    problem: &P,
    x0: &[T],
    d2: T,
    opts: &NewtonOptions<T>,
) -> Result<(Vec<T>, NewtonReport<T>)> {
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidParameter("Newton tolerance must be positive".into()));
    }
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: x0.len() });
    }
    let mut x = x0.to_vec();
    let mut r = problem.residual_vec(&x, d2);
    let mut rn = max_abs(&r);
    let mut report = NewtonReport {
        converged: false,
        iterations: 0,
        residual_norm: rn,
        residual_history: vec![rn],
        step_norms: Vec::new(),
        damping_events: 0,
    };
    let mut trial = vec![T::zero(); n];
    let mut r_trial = vec![T::zero(); n];

    while !(rn <= opts.tol) {
        if report.iterations >= opts.max_iter || !rn.is_finite() {
            return Err(Error::NoConvergence {
                iterations: report.iterations,
                residual: rn.as_f64(),
            });
        }
        let jac = problem.jacobian(&x, d2);
        let mut dx: Vec<T> = r.iter().map(|&v| -v).collect();
        jac.factor()?.solve_in_place(&mut dx);

        let mut t = T::one();
        let mut halvings = 0;
        let mut rn_trial;
        loop {
            for i in 0..n {
                trial[i] = x[i] + t * dx[i];
            }
            problem.residual(&trial, d2, &mut r_trial);
            rn_trial = max_abs(&r_trial);
            if rn_trial < rn || halvings >= opts.max_halvings {
                break;
            }
            t = t * T::lit(0.5);
            halvings += 1;
        }
        if halvings > 0 {
            report.damping_events += 1;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        rn = rn_trial;
        report.iterations += 1;
        report.step_norms.push(t * max_abs(&dx));
        report.residual_history.push(rn);
    }
    report.converged = true;
    report.residual_norm = rn;
    if let Some(floor) = opts.min_value {
        let min = x.iter().fold(T::infinity(), |m, &v| m.min(v));
        if min < floor {
            return Err(Error::Positivity { min: min.as_f64() });
        }
    }
    Ok((x, report))
}
