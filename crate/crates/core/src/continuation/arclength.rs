//! Keller pseudo-arclength continuation for any [`SteadyProblem`].
//!
//! The continuation variable is `p = d2 / d2_scale` so that the parameter and
//! the state (measured in the mean-square norm `|x|² / N`) enter the arclength
//! on comparable scales. The bordered Newton system is solved by block
//! elimination with the banded factorization of `∂F/∂x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, max_abs, Scalar};
use crate::solver::{newton_solve, NewtonOptions, SteadyProblem};

/// Step-size and termination controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControls<T> {
    pub ds: T,
    pub ds_min: T,
    pub ds_max: T,
    /// Factor applied after two consecutive easy steps.
    pub grow: T,
    /// Corrector iteration count regarded as easy.
    pub easy_iterations: usize,
    pub max_corrector_iter: usize,
    /// Sup-norm residual tolerance.
    pub tol: T,
    pub max_points: usize,
    pub max_folds: usize,
    /// Tracing stops when `d2` leaves `[d2_min, d2_max]`; the last point is
    /// placed exactly on the bound.
    pub d2_min: T,
    pub d2_max: T,
    /// Converged states with an entry below this value are rejected.
    pub min_value: Option<T>,
    /// Whether branch points get a stability index.
    pub stability: bool,
}

impl<T: Scalar> Default for StepControls<T> {
    fn default() -> Self {
        StepControls {
            ds: T::lit(0.02),
            ds_min: T::lit(1e-6),
            ds_max: T::lit(0.05),
            grow: T::lit(1.3),
            easy_iterations: 3,
            max_corrector_iter: 8,
            tol: T::lit(1e-10),
            max_points: 2000,
            max_folds: 4,
            d2_min: T::lit(1e-3),
            d2_max: T::infinity(),
            min_value: Some(T::lit(-1e-8)),
            stability: true,
        }
    }
}

impl<T: Scalar> StepControls<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.ds_min > T::zero() && self.ds_min <= self.ds && self.ds <= self.ds_max) {
            return Err(Error::InvalidParameter("step sizes must satisfy 0 < ds_min <= ds <= ds_max".into()));
        }
        if !(self.tol > T::zero()) || !(self.grow >= T::one()) {
            return Err(Error::InvalidParameter("tol must be positive and grow >= 1".into()));
        }
        if !(self.d2_min < self.d2_max) {
            return Err(Error::InvalidParameter("d2_min must be below d2_max".into()));
        }
        Ok(())
    }
}

/// Why a trace stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// `d2` reached `d2_min` or `d2_max`.
    D2Bound,
    /// Repeated corrector failures at the minimal step.
    StepFailure,
    PointBudget,
    FoldCount,
    /// The caller's observer asked to stop.
    Observer,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::D2Bound => "d2_bound",
            Termination::StepFailure => "step_failure",
            Termination::PointBudget => "point_budget",
            Termination::FoldCount => "fold_count",
            Termination::Observer => "observer",
        })
    }
}

/// Initial orientation of the tangent.
#[derive(Debug, Clone, PartialEq)]
pub enum Orientation<T> {
    DecreasingD2,
    IncreasingD2,
    /// Positive inner product with `(state weights, parameter weight)`.
    Along(Vec<T>, T),
}

/// A converged continuation point in raw (flat) form.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPoint<T> {
    pub x: Vec<T>,
    pub d2: T,
    /// Arclength coordinate.
    pub s: T,
    /// State part of the unit tangent in the scaled metric.
    pub tangent_x: Vec<T>,
    /// Parameter part of the unit tangent, in units of `d2_scale`.
    pub tangent_p: T,
    pub residual: T,
    pub corrector_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub points: Vec<RawPoint<T>>,
    pub termination: Termination,
    pub folds: usize,
    pub d2_scale: T,
}

struct Metric<T> {
    inv_n: T,
}

impl<T: Scalar> Metric<T> {
    fn inner(&self, ax: &[T], ap: T, bx: &[T], bp: T) -> T {
        self.inv_n * dot(ax, bx) + ap * bp
    }

    fn normalize(&self, x: &mut [T], p: &mut T) -> T {
        let norm = self.inner(x, *p, x, *p).sqrt();
        for v in x.iter_mut() {
            *v = *v / norm;
        }
        *p = *p / norm;
        norm
    }
}

/// Tangent of the solution curve at `(x, d2)` from `J z = -F_p`, oriented.
pub fn tangent_at<T: Scalar, P: SteadyProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    d2: T,
    d2_scale: T,
    orientation: &Orientation<T>,
) -> Result<(Vec<T>, T)> {
    let n = problem.dim();
    let metric = Metric { inv_n: T::one() / T::from_usize_lossy(n) };
    let mut fp = vec![T::zero(); n];
    problem.d2_derivative(x, d2, &mut fp);
    let lu = problem.jacobian(x, d2).factor()?;
    let mut z: Vec<T> = fp.iter().map(|&v| -v * d2_scale).collect();
    lu.solve_in_place(&mut z);
    let mut tp = T::one();
    metric.normalize(&mut z, &mut tp);
    let flip = match orientation {
        Orientation::DecreasingD2 => tp > T::zero(),
        Orientation::IncreasingD2 => tp < T::zero(),
        Orientation::Along(w, wp) => dot(&z, w) + tp * *wp < T::zero(),
    };
    if flip {
        for v in &mut z {
            *v = -*v;
        }
        tp = -tp;
    }
    Ok((z, tp))
}

struct Corrected<T> {
    x: Vec<T>,
    p: T,
    residual: T,
    iterations: usize,
}

#[allow(clippy::too_many_arguments)]
fn correct<T: Scalar, P: SteadyProblem<T> + ?Sized>(
    problem: &P,
    metric: &Metric<T>,
    x_pred: &[T],
    p_pred: T,
    tx: &[T],
    tp: T,
    d2_scale: T,
    controls: &StepControls<T>,
) -> Option<Corrected<T>> {
    let n = problem.dim();
    let mut x = x_pred.to_vec();
    let mut p = p_pred;
    let mut f = vec![T::zero(); n];
    let mut fp = vec![T::zero(); n];
    let mut last_step = T::infinity();
    for it in 0..=controls.max_corrector_iter {
        let d2 = p * d2_scale;
        if !(d2 > T::zero()) {
            return None;
        }
        problem.residual(&x, d2, &mut f);
        let rn = max_abs(&f);
        if !rn.is_finite() {
            return None;
        }
        let dx_pred: Vec<T> = x.iter().zip(x_pred).map(|(&a, &b)| a - b).collect();
        let constraint = metric.inner(tx, tp, &dx_pred, p - p_pred);
        if rn <= controls.tol && constraint.abs() <= controls.tol {
            return Some(Corrected { x, p, residual: rn, iterations: it });
        }
        if it == controls.max_corrector_iter {
            return None;
        }
        problem.d2_derivative(&x, d2, &mut fp);
        let lu = problem.jacobian(&x, d2).factor().ok()?;
        let mut a: Vec<T> = f.iter().map(|&v| -v).collect();
        lu.solve_in_place(&mut a);
        let mut b: Vec<T> = fp.iter().map(|&v| -v * d2_scale).collect();
        lu.solve_in_place(&mut b);
        let denom = metric.inv_n * dot(tx, &b) + tp;
        if denom == T::zero() || !denom.is_finite() {
            return None;
        }
        let dp = (-constraint - metric.inv_n * dot(tx, &a)) / denom;
        let mut step = dp.abs();
        for i in 0..n {
            let d = a[i] + dp * b[i];
            x[i] = x[i] + d;
            step = step.max(d.abs());
        }
        p = p + dp;
        // Diverging corrector: give up early and let the caller shrink the step.
        if it >= 2 && step > last_step {
            return None;
        }
        last_step = step;
    }
    None
}

/// Follows the solution curve through `(x0, d2_0)`.
///
/// `initial_tangent` (state part, parameter part in units of `d2_0`) is used
/// as given when supplied; otherwise it is computed from the Jacobian and
/// oriented by `orientation`. `observer` sees each accepted point and may stop
/// the trace by returning `false`.
pub fn trace<T: Scalar, P: SteadyProblem<T> + ?Sized>(
    problem: &P,
    x0: &[T],
    d2_0: T,
    initial_tangent: Option<(Vec<T>, T)>,
    orientation: &Orientation<T>,
    controls: &StepControls<T>,
    mut observer: impl FnMut(&RawPoint<T>) -> bool,
) -> Result<Trace<T>> {
    controls.validate()?;
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: x0.len() });
    }
    if !(d2_0 > T::zero()) {
        return Err(Error::InvalidParameter("continuation needs a positive starting d2".into()));
    }
    let d2_scale = d2_0;
    let metric = Metric { inv_n: T::one() / T::from_usize_lossy(n) };
    let residual0 = max_abs(&problem.residual_vec(x0, d2_0));
    if !(residual0 <= controls.tol) {
        return Err(Error::InvalidParameter(format!(
            "seed residual {residual0:e} exceeds tolerance {:e}",
            controls.tol
        )));
    }
    let (mut tx, mut tp) = match initial_tangent {
        Some((mut tx, mut tp)) => {
            metric.normalize(&mut tx, &mut tp);
            (tx, tp)
        }
        None => tangent_at(problem, x0, d2_0, d2_scale, orientation)?,
    };

    let mut points = vec![RawPoint {
        x: x0.to_vec(),
        d2: d2_0,
        s: T::zero(),
        tangent_x: tx.clone(),
        tangent_p: tp,
        residual: residual0,
        corrector_iterations: 0,
    }];
    if !observer(&points[0]) {
        return Ok(Trace { points, termination: Termination::Observer, folds: 0, d2_scale });
    }

    let mut ds = controls.ds;
    let mut easy_streak = 0;
    let mut folds = 0;
    let mut last_dp_sign: Option<bool> = None;
    let newton_opts = NewtonOptions {
        tol: controls.tol,
        max_iter: 25,
        max_halvings: 30,
        min_value: controls.min_value,
    };

    let termination = loop {
        if points.len() >= controls.max_points {
            break Termination::PointBudget;
        }
        let last = points.last().expect("nonempty");
        let p_last = last.d2 / d2_scale;
        let x_pred: Vec<T> = last.x.iter().zip(&tx).map(|(&a, &t)| a + ds * t).collect();
        let p_pred = p_last + ds * tp;

        let corrected = correct(problem, &metric, &x_pred, p_pred, &tx, tp, d2_scale, controls).filter(|c| {
            let positive = controls
                .min_value
                .is_none_or(|floor| c.x.iter().all(|&v| v >= floor));
            // Reject jumps onto another curve: the secant must stay roughly aligned.
            let sx: Vec<T> = c.x.iter().zip(&last.x).map(|(&a, &b)| a - b).collect();
            let sp = c.p - p_last;
            let len = metric.inner(&sx, sp, &sx, sp).sqrt();
            let cos = metric.inner(&sx, sp, &tx, tp) / len;
            positive && len > T::zero() && cos > T::lit(0.9) && len < T::lit(2.0) * ds
        });

        let Some(c) = corrected else {
            easy_streak = 0;
            if ds <= controls.ds_min {
                break Termination::StepFailure;
            }
            ds = (ds * T::lit(0.5)).max(controls.ds_min);
            continue;
        };

        let mut sx: Vec<T> = c.x.iter().zip(&last.x).map(|(&a, &b)| a - b).collect();
        let mut sp = c.p - p_last;
        let step_len = metric.normalize(&mut sx, &mut sp);
        let s_new = last.s + step_len;
        let d2_new = c.p * d2_scale;

        // Land exactly on a d2 bound when the step crosses it.
        let bound = if d2_new < controls.d2_min {
            Some(controls.d2_min)
        } else if d2_new > controls.d2_max {
            Some(controls.d2_max)
        } else {
            None
        };
        if let Some(target) = bound {
            let theta = (target - last.d2) / (d2_new - last.d2);
            let guess: Vec<T> = last.x.iter().zip(&c.x).map(|(&a, &b)| a + theta * (b - a)).collect();
            let (x_end, rep) = newton_solve(problem, &guess, target, &newton_opts)?;
            let mut ex: Vec<T> = x_end.iter().zip(&last.x).map(|(&a, &b)| a - b).collect();
            let mut ep = target / d2_scale - p_last;
            let len = metric.normalize(&mut ex, &mut ep);
            let pt = RawPoint {
                x: x_end,
                d2: target,
                s: last.s + len,
                tangent_x: ex,
                tangent_p: ep,
                residual: rep.residual_norm,
                corrector_iterations: rep.iterations,
            };
            observer(&pt);
            points.push(pt);
            break Termination::D2Bound;
        }

        let dp_sign = sp > T::zero();
        if let Some(prev) = last_dp_sign {
            if prev != dp_sign {
                folds += 1;
            }
        }
        last_dp_sign = Some(dp_sign);

        let pt = RawPoint {
            x: c.x,
            d2: d2_new,
            s: s_new,
            tangent_x: sx.clone(),
            tangent_p: sp,
            residual: c.residual,
            corrector_iterations: c.iterations,
        };
        tx = sx;
        tp = sp;
        let keep_going = observer(&pt);
        points.push(pt);
        if folds > controls.max_folds {
            break Termination::FoldCount;
        }
        if !keep_going {
            break Termination::Observer;
        }

        if c.iterations <= controls.easy_iterations {
            easy_streak += 1;
            if easy_streak >= 2 {
                ds = (ds * controls.grow).min(controls.ds_max);
                easy_streak = 0;
            }
        } else {
            easy_streak = 0;
        }
    };

    Ok(Trace { points, termination, folds, d2_scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::BandedMatrix;

    /// x² + (d2 - 1)² = 1/4, which folds at d2 = 0.5 and d2 = 1.5.
    struct Circle;

    impl SteadyProblem<f64> for Circle {
        fn dim(&self) -> usize {
            1
        }
        fn residual(&self, x: &[f64], d2: f64, out: &mut [f64]) {
            out[0] = x[0] * x[0] + (d2 - 1.0) * (d2 - 1.0) - 0.25;
        }
        fn jacobian(&self, x: &[f64], _d2: f64) -> BandedMatrix<f64> {
            BandedMatrix::from_fn(1, 0, 0, |_, _| 2.0 * x[0])
        }
        fn d2_derivative(&self, _x: &[f64], d2: f64, out: &mut [f64]) {
            out[0] = 2.0 * (d2 - 1.0);
        }
    }

    #[test]
    fn follows_a_circle_through_its_folds() {
        // start at (x, d2) = (0.5, 1) where the tangent is purely in d2
        let controls = StepControls {
            ds: 0.05,
            ds_max: 0.1,
            d2_min: 1e-3,
            d2_max: 10.0,
            min_value: None,
            max_points: 400,
            max_folds: 1,
            ..StepControls::default()
        };
        let tr = trace(&Circle, &[0.5], 1.0, None, &Orientation::DecreasingD2, &controls, |_| true).unwrap();
        assert_eq!(tr.termination, Termination::FoldCount);
        for p in &tr.points {
            let r = p.x[0] * p.x[0] + (p.d2 - 1.0).powi(2) - 0.25;
            assert!(r.abs() < 1e-10);
        }
        for w in tr.points.windows(2) {
            assert!(w[1].s > w[0].s);
        }
        // passed the fold at d2 = 0.5 and came back up
        let min_d2 = tr.points.iter().map(|p| p.d2).fold(f64::INFINITY, f64::min);
        assert!((min_d2 - 0.5).abs() < 0.01);
        assert!(tr.points.iter().any(|p| p.x[0] < -0.1));
    }

    #[test]
    fn lands_exactly_on_d2_floor() {
        struct Line;
        impl SteadyProblem<f64> for Line {
            fn dim(&self) -> usize {
                1
            }
            fn residual(&self, x: &[f64], d2: f64, out: &mut [f64]) {
                out[0] = x[0] - 2.0 * d2;
            }
            fn jacobian(&self, _x: &[f64], _d2: f64) -> BandedMatrix<f64> {
                BandedMatrix::identity(1)
            }
            fn d2_derivative(&self, _x: &[f64], _d2: f64, out: &mut [f64]) {
                out[0] = -2.0;
            }
        }
        let controls = StepControls { d2_min: 0.3, ds: 0.2, ds_max: 0.5, ..StepControls::default() };
        let tr = trace(&Line, &[2.0], 1.0, None, &Orientation::DecreasingD2, &controls, |_| true).unwrap();
        assert_eq!(tr.termination, Termination::D2Bound);
        let last = tr.points.last().unwrap();
        assert_eq!(last.d2, 0.3);
        assert!((last.x[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rejects_unconverged_seed() {
        let r = trace(&Circle, &[0.7], 1.0, None, &Orientation::DecreasingD2, &StepControls::default(), |_| true);
        assert!(r.is_err());
    }
}
