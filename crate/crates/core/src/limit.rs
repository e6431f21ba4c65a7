//! The scalar field equation `d_eff v'' + ξ* v (v - v*) = 0` reached as the
//! flux strengths grow along a ray `α = γ β`.

use serde::{Deserialize, Serialize};

use crate::continuation::{trace, Branch, Orientation, StepControls, Termination};
use crate::error::{Error, Result};
use crate::mesh::{l2_norm, laplacian, Grid};
use crate::model::{constant_state, ModelParams};
use crate::scalar::{max_abs, Scalar};
use crate::solver::{newton_solve, BandedMatrix, NewtonOptions, SteadyProblem};
use crate::spectral::{limit_coefficients, limiting_critical_d2, FluxRatio, LimitCoefficients, Regime};

fn scalar_field_coefficients<T: Scalar>(params: &ModelParams<T>, gamma: FluxRatio<T>) -> Result<LimitCoefficients<T>> {
    let lc = limit_coefficients(params, gamma)?;
    match lc.regime {
        Regime::ScalarField => Ok(lc),
        Regime::Logistic => Err(Error::Regime(format!(
            "gamma = {gamma} is below A tau*: the limit is the diffusive logistic equation with v = v*"
        ))),
        Regime::Degenerate => Err(Error::Regime(format!("gamma = {gamma} equals A tau*: degenerate limit"))),
    }
}

/// The scalar equation on the system's grid, as a [`SteadyProblem`] in `d2`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarProblem<'a, T> {
    pub coeffs: LimitCoefficients<T>,
    pub grid: &'a Grid<T>,
}

impl<'a, T: Scalar> ScalarProblem<'a, T> {
    pub fn new(params: &ModelParams<T>, gamma: FluxRatio<T>, grid: &'a Grid<T>) -> Result<Self> {
        Ok(ScalarProblem {
            coeffs: scalar_field_coefficients(params, gamma)?,
            grid,
        })
    }
}

impl<T: Scalar> SteadyProblem<T> for ScalarProblem<'_, T> {
    fn dim(&self) -> usize {
        self.grid.n
    }

    fn residual(&self, x: &[T], d2: T, out: &mut [T]) {
        let c = &self.coeffs;
        let d = c.d_eff(d2);
        let lap = laplacian(x, self.grid);
        for i in 0..x.len() {
            out[i] = d * lap[i] + c.xi_star * x[i] * (x[i] - c.v_star);
        }
    }

    fn jacobian(&self, x: &[T], d2: T) -> BandedMatrix<T> {
        let c = &self.coeffs;
        let g = self.grid;
        let d = c.d_eff(d2);
        let n = g.n;
        let mut jac = BandedMatrix::zeros(n, 1, 1);
        let k = d / (g.h * g.h);
        for i in 0..n {
            let w = g.h / g.weight(i);
            let mut diag = c.xi_star * (T::lit(2.0) * x[i] - c.v_star);
            if i > 0 {
                jac.set(i, i - 1, k * w);
                diag = diag - k * w;
            }
            if i + 1 < n {
                jac.set(i, i + 1, k * w);
                diag = diag - k * w;
            }
            jac.set(i, i, diag);
        }
        jac
    }

    fn d2_derivative(&self, x: &[T], _d2: T, out: &mut [T]) {
        let lap = laplacian(x, self.grid);
        for (o, l) in out.iter_mut().zip(lap) {
            *o = self.coeffs.slope * l;
        }
    }
}

/// Discrete residual of the scalar field equation.
pub fn scalar_residual<T: Scalar>(
    v: &[T],
    d2: T,
    params: &ModelParams<T>,
    gamma: FluxRatio<T>,
    grid: &Grid<T>,
) -> Result<Vec<T>> {
    if v.len() != grid.n {
        return Err(Error::SizeMismatch { expected: grid.n, got: v.len() });
    }
    Ok(ScalarProblem::new(params, gamma, grid)?.residual_vec(v, d2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPoint<T> {
    pub d2: T,
    pub s: T,
    pub v: Vec<T>,
    pub sup_v: T,
    pub l2_v: T,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBranch<T> {
    pub id: String,
    pub j: usize,
    /// Sign of the kernel direction; negative is the upper branch.
    pub sign: i8,
    pub onset: T,
    pub points: Vec<ScalarPoint<T>>,
    pub termination: Termination,
    pub fold_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarTraceOptions<T> {
    pub amplitude: T,
    /// Relative detuning below the onset for the first Newton solve.
    pub delta: T,
    pub controls: StepControls<T>,
}

impl<T: Scalar> Default for ScalarTraceOptions<T> {
    fn default() -> Self {
        ScalarTraceOptions {
            amplitude: T::lit(0.05),
            delta: T::lit(0.02),
            controls: StepControls { stability: false, ..StepControls::default() },
        }
    }
}

/// Switches onto `S_∞^{(j)}` at its onset along `sign · Φ_j` and traces it
/// down to `controls.d2_min`.
pub fn trace_scalar_branch<T: Scalar>(
    params: &ModelParams<T>,
    gamma: FluxRatio<T>,
    j: usize,
    sign: i8,
    grid: &Grid<T>,
    opts: &ScalarTraceOptions<T>,
) -> Result<ScalarBranch<T>> {
    let problem = ScalarProblem::new(params, gamma, grid)?;
    let onset = limiting_critical_d2(j, params, gamma)?
        .ok_or_else(|| Error::SwitchFailed { j, reason: "mode has no positive limiting onset".into() })?;
    let c = problem.coeffs;
    let s = if sign < 0 { -opts.amplitude } else { opts.amplitude };
    let guess: Vec<T> = grid.sample_mode(j).iter().map(|&f| c.v_star + s * f).collect();
    let d2 = onset * (T::one() - opts.delta);
    let newton = NewtonOptions {
        tol: opts.controls.tol,
        min_value: opts.controls.min_value,
        ..NewtonOptions::default()
    };
    let (v0, _) = newton_solve(&problem, &guess, d2, &newton).map_err(|e| Error::SwitchFailed {
        j,
        reason: format!("{e}; try a smaller amplitude"),
    })?;
    let spread = v0.iter().fold(T::neg_infinity(), |m, &x| m.max(x)) - v0.iter().fold(T::infinity(), |m, &x| m.min(x));
    if spread <= T::lit(10.0) * opts.controls.tol {
        return Err(Error::SwitchFailed { j, reason: "corrector collapsed to the constant state".into() });
    }
    let tr = trace(&problem, &v0, d2, None, &Orientation::DecreasingD2, &opts.controls, |_| true)?;
    let points = tr
        .points
        .into_iter()
        .map(|p| ScalarPoint {
            d2: p.d2,
            s: p.s,
            sup_v: max_abs(&p.x),
            l2_v: l2_norm(&p.x, grid),
            residual: p.residual,
            v: p.x,
        })
        .collect();
    Ok(ScalarBranch {
        id: format!("S{j}_{}", crate::continuation::side_label(sign)),
        j,
        sign,
        onset,
        points,
        termination: tr.termination,
        fold_count: tr.folds,
    })
}

/// Both sides of `S_∞^{(j)}` for every `j` in `j_list`.
pub fn trace_scalar_branches<T: Scalar>(
    params: &ModelParams<T>,
    gamma: FluxRatio<T>,
    j_list: &[usize],
    grid: &Grid<T>,
    opts: &ScalarTraceOptions<T>,
) -> Result<Vec<ScalarBranch<T>>> {
    scalar_field_coefficients(params, gamma)?;
    let mut out = Vec::new();
    for &j in j_list {
        for sign in [-1, 1] {
            out.push(trace_scalar_branch(params, gamma, j, sign, grid, opts)?);
        }
    }
    Ok(out)
}

/// Newton solve of the scalar equation at `d2`, started from the branch
/// point whose `d2` is closest.
pub fn scalar_point_at<T: Scalar>(
    branch: &ScalarBranch<T>,
    d2: T,
    params: &ModelParams<T>,
    gamma: FluxRatio<T>,
    grid: &Grid<T>,
    tol: T,
) -> Result<Vec<T>> {
    let start = branch
        .points
        .iter()
        .min_by(|a, b| (a.d2 - d2).abs().partial_cmp(&(b.d2 - d2).abs()).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| Error::InvalidParameter("empty scalar branch".into()))?;
    let problem = ScalarProblem::new(params, gamma, grid)?;
    let opts = NewtonOptions { tol, ..NewtonOptions::default() };
    Ok(newton_solve(&problem, &start.v, d2, &opts)?.0)
}

/// A solution of the scalar equation from the shooting method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingProfile<T> {
    /// `v(x_left)`.
    pub eta: T,
    /// Values at the grid nodes.
    pub v: Vec<T>,
}

/// RK4 integration of `v'' = -(ξ/d) v (v - v*)` from `v = η, v' = 0` at the
/// left end; returns nodal values, `v'` at the right end and the number of
/// interior sign changes of `v'`.
fn shoot(eta: f64, k: f64, v_star: f64, h: f64, n: usize, sub: usize) -> (Vec<f64>, f64, usize) {
    let f = |v: f64| -k * v * (v - v_star);
    let dt = h / sub as f64;
    let (mut v, mut w) = (eta, 0.0f64);
    let mut values = Vec::with_capacity(n);
    values.push(v);
    let mut zeros = 0;
    let mut last_sign = 0i8;
    for node in 1..n {
        for _ in 0..sub {
            let (k1v, k1w) = (w, f(v));
            let (k2v, k2w) = (w + 0.5 * dt * k1w, f(v + 0.5 * dt * k1v));
            let (k3v, k3w) = (w + 0.5 * dt * k2w, f(v + 0.5 * dt * k2v));
            let (k4v, k4w) = (w + dt * k3w, f(v + dt * k3v));
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            w += dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            if !v.is_finite() || v.abs() > 1e6 {
                return (values, f64::NAN, zeros);
            }
        }
        if node + 1 < n {
            let sign = if w > 0.0 { 1 } else if w < 0.0 { -1 } else { 0 };
            if sign != 0 {
                if last_sign != 0 && sign != last_sign {
                    zeros += 1;
                }
                last_sign = sign;
            }
        }
        values.push(v);
    }
    (values, w, zeros)
}

/// Solves the scalar equation by shooting on `η = v(x_left)`.
///
/// `upper` selects `η < v*` (otherwise `v* < η < 3v*/2`, the range bounded by
/// the orbit homoclinic to zero). The returned profile has `v'(x_right) = 0`
/// and `j - 1` interior zeros of `v'`. `d2` is converted to `d_eff` through `coeffs`.
pub fn shooting_oracle<T: Scalar>(
    coeffs: &LimitCoefficients<T>,
    d2: T,
    grid: &Grid<T>,
    j: usize,
    upper: bool,
) -> Result<ShootingProfile<T>> {
    if coeffs.regime != Regime::ScalarField {
        return Err(Error::Regime("shooting needs the scalar-field regime".into()));
    }
    if j == 0 {
        return Err(Error::InvalidParameter("node class j must be at least 1".into()));
    }
    let d = coeffs.d_eff(d2).as_f64();
    if !(d > 0.0) {
        return Err(Error::InvalidParameter("effective diffusion must be positive".into()));
    }
    let k = coeffs.xi_star.as_f64() / d;
    let vs = coeffs.v_star.as_f64();
    let (n, h) = (grid.n, grid.h.as_f64());
    let sub = 16;
    let (lo, hi) = if upper { (0.0, vs) } else { (vs, 1.5 * vs) };
    let samples = 2000;
    let eval = |eta: f64| shoot(eta, k, vs, h, n, sub);

    // Bracket a sign change of v'(x_right) between two shots that both have
    // j - 1 interior zeros or whose counts straddle j - 1 and j.
    let target = j - 1;
    let mut prev: Option<(f64, f64, usize)> = None;
    let mut bracket = None;
    for i in 1..samples {
        let t = i as f64 / samples as f64;
        let eta = lo + (hi - lo) * t;
        let (_, slope, zeros) = eval(eta);
        if !slope.is_finite() {
            prev = None;
            continue;
        }
        if let Some((pe, ps, pz)) = prev {
            let counts_ok = pz.min(zeros) == target && pz.max(zeros) <= target + 1;
            if counts_ok && ps * slope <= 0.0 && ps != slope {
                bracket = Some((pe, ps, eta));
                break;
            }
        }
        prev = Some((eta, slope, zeros));
    }
    let (mut a, mut fa, mut b) = bracket.ok_or_else(|| {
        Error::NoSolution(format!("no nonconstant mode-{j} profile at d2 = {d2}: no sign change of v'(x_right)"))
    })?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let (_, fm, _) = eval(m);
        if fm * fa > 0.0 {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let eta = 0.5 * (a + b);
    let (v, _, _) = eval(eta);
    Ok(ShootingProfile {
        eta: T::lit(eta),
        v: v.into_iter().map(T::lit).collect(),
    })
}

/// Distances between two curves in the `(d2, ‖v‖_∞)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchDistance<T> {
    /// `sup_{a ∈ A} dist(a, B)`.
    pub forward: T,
    /// `sup_{b ∈ B} dist(b, A)`.
    pub backward: T,
    pub hausdorff: T,
}

/// Samples per polyline after arclength resampling.
pub const RESAMPLE_POINTS: usize = 512;

fn resample<T: Scalar>(curve: &[(T, T)], m: usize) -> Vec<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.0.as_f64(), p.1.as_f64())).collect();
    if pts.len() == 1 {
        return vec![pts[0]; m];
    }
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        let last = *cum.last().expect("nonempty");
        cum.push(last + (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1));
    }
    let total = *cum.last().expect("nonempty");
    if total == 0.0 {
        return vec![pts[0]; m];
    }
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let target = total * k as f64 / (m - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((target - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push((
            pts[seg].0 + t * (pts[seg + 1].0 - pts[seg].0),
            pts[seg].1 + t * (pts[seg + 1].1 - pts[seg].1),
        ));
    }
    out
}

fn point_to_polyline(p: (f64, f64), line: &[(f64, f64)]) -> f64 {
    if line.len() == 1 {
        return (p.0 - line[0].0).hypot(p.1 - line[0].1);
    }
    line.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between two polylines after arclength resampling.
pub fn polyline_distance<T: Scalar>(a: &[(T, T)], b: &[(T, T)]) -> Result<BranchDistance<T>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("branch distance needs two nonempty curves".into()));
    }
    let ra = resample(a, RESAMPLE_POINTS);
    let rb = resample(b, RESAMPLE_POINTS);
    let forward = ra.iter().map(|&p| point_to_polyline(p, &rb)).fold(0.0, f64::max);
    let backward = rb.iter().map(|&p| point_to_polyline(p, &ra)).fold(0.0, f64::max);
    Ok(BranchDistance {
        forward: T::lit(forward),
        backward: T::lit(backward),
        hausdorff: T::lit(forward.max(backward)),
    })
}

/// Distance between a system branch and a scalar branch in the `(d2, ‖v‖_∞)` plane.
pub fn branch_distance<T: Scalar>(system: &Branch<T>, scalar: &ScalarBranch<T>) -> Result<BranchDistance<T>> {
    let a: Vec<(T, T)> = system.points.iter().map(|p| (p.d2, p.norms.sup_v)).collect();
    let b: Vec<(T, T)> = scalar.points.iter().map(|p| (p.d2, p.sup_v)).collect();
    polyline_distance(&a, &b)
}

/// Keeps the leading part of `curve` with `d2 >= d2_min`, ending on the
/// interpolated crossing when the curve leaves the window.
pub fn clip_polyline<T: Scalar>(curve: &[(T, T)], d2_min: T) -> Vec<(T, T)> {
    let mut out = Vec::new();
    for (k, &(d, y)) in curve.iter().enumerate() {
        if d >= d2_min {
            out.push((d, y));
            continue;
        }
        if k > 0 {
            let (d0, y0) = curve[k - 1];
            let t = (d0 - d2_min) / (d0 - d);
            out.push((d2_min, y0 + t * (y - y0)));
        }
        break;
    }
    out
}

/// Smallest `d2` at which every branch in the list is still present: the
/// largest of the per-branch minima.
pub fn common_window<T: Scalar>(branches: &[&Branch<T>]) -> Option<T> {
    branches
        .iter()
        .map(|b| b.points.iter().map(|p| p.d2).fold(T::infinity(), T::min))
        .reduce(T::max)
}

/// [`branch_distance`] restricted to `d2 >= d2_min` on both curves.
pub fn branch_distance_within<T: Scalar>(
    system: &Branch<T>,
    scalar: &ScalarBranch<T>,
    d2_min: T,
) -> Result<BranchDistance<T>> {
    let a: Vec<(T, T)> = system.points.iter().map(|p| (p.d2, p.norms.sup_v)).collect();
    let b: Vec<(T, T)> = scalar.points.iter().map(|p| (p.d2, p.sup_v)).collect();
    polyline_distance(&clip_polyline(&a, d2_min), &clip_polyline(&b, d2_min))
}

/// Largest ratio defect over the leading part of the branch with `d2 >= d2_min`.
pub fn max_ratio_defect_within<T: Scalar>(branch: &Branch<T>, params: &ModelParams<T>, d2_min: T) -> T {
    let prof = ratio_defect_profile(branch, params);
    branch
        .points
        .iter()
        .zip(prof.per_point)
        .take_while(|(p, _)| p.d2 >= d2_min)
        .fold(T::zero(), |m, (_, r)| m.max(r))
}

/// Normalized ratio defect `‖u - τ* v‖_∞ / ‖v‖_∞` along a system branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDefect<T> {
    pub per_point: Vec<T>,
    pub max: T,
}

pub fn ratio_defect_profile<T: Scalar>(branch: &Branch<T>, params: &ModelParams<T>) -> RatioDefect<T> {
    let tau = constant_state(params).tau_star;
    let per_point: Vec<T> = branch
        .points
        .iter()
        .map(|p| {
            let s = &p.state;
            let num = s.u.iter().zip(&s.v).fold(T::zero(), |m, (&u, &v)| m.max((u - tau * v).abs()));
            let den = max_abs(&s.v);
            if den > T::zero() {
                num / den
            } else {
                T::zero()
            }
        })
        .collect();
    let max = per_point.iter().fold(T::zero(), |m, &x| m.max(x));
    RatioDefect { per_point, max }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (ModelParams<f64>, Grid<f64>) {
        let p = ModelParams::reference(2.0, 1.0, 0.03).unwrap();
        let g = Grid::for_params(n, &p).unwrap();
        (p, g)
    }

    #[test]
    fn clipping_interpolates_the_exit() {
        let c = [(1.0, 0.0), (0.5, 1.0), (0.0, 2.0), (0.5, 3.0)];
        assert_eq!(clip_polyline(&c, 0.25), vec![(1.0, 0.0), (0.5, 1.0), (0.25, 1.5)]);
        assert!(clip_polyline(&c, 2.0).is_empty());
    }

    #[test]
    fn equilibria_have_zero_residual() {
        let (p, g) = setup(51);
        let g2 = FluxRatio::Finite(2.0);
        assert!(max_abs(&scalar_residual(&vec![0.5; 51], 0.03, &p, g2, &g).unwrap()) < 1e-15);
        assert!(max_abs(&scalar_residual(&vec![0.0; 51], 0.03, &p, g2, &g).unwrap()) < 1e-15);
    }

    #[test]
    fn logistic_and_degenerate_regimes_are_refused() {
        let (p, g) = setup(51);
        for gamma in [0.5, 1.0] {
            let r = scalar_residual(&vec![0.5; 51], 0.03, &p, FluxRatio::Finite(gamma), &g);
            assert!(matches!(r, Err(Error::Regime(_))), "gamma = {gamma}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (p, g) = setup(21);
        let prob = ScalarProblem::new(&p, FluxRatio::Finite(2.0), &g).unwrap();
        let x: Vec<f64> = (0..21).map(|i| 0.5 + 0.1 * (i as f64 * 0.7).sin()).collect();
        let jac = prob.jacobian(&x, 0.03);
        for c in 0..21 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += 1e-6;
            xm[c] -= 1e-6;
            let rp = prob.residual_vec(&xp, 0.03);
            let rm = prob.residual_vec(&xm, 0.03);
            for r in 0..21 {
                let fd = (rp[r] - rm[r]) / 2e-6;
                assert!((fd - jac.get(r, c)).abs() < 1e-5 * (1.0 + fd.abs()), "({r},{c})");
            }
        }
    }

    #[test]
    fn shooting_at_equilibrium_is_flat() {
        let (v, slope, zeros) = shoot(0.5, 4.0, 0.5, 0.01, 101, 4);
        assert_eq!(slope, 0.0);
        assert_eq!(zeros, 0);
        assert!(v.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn shooting_finds_nothing_above_onset() {
        let (p, g) = setup(201);
        let lc = limit_coefficients(&p, FluxRatio::Finite(2.0)).unwrap();
        assert!(matches!(shooting_oracle(&lc, 0.06, &g, 1, true), Err(Error::NoSolution(_))));
    }

    #[test]
    fn identical_curves_have_zero_distance() {
        let c: Vec<(f64, f64)> = (0..30).map(|i| (0.001 * i as f64, (i as f64 * 0.1).sin())).collect();
        let d = polyline_distance(&c, &c).unwrap();
        assert!(d.hausdorff < 1e-12);
        let shifted: Vec<(f64, f64)> = c.iter().map(|&(x, y)| (x, y + 0.25)).collect();
        let d = polyline_distance(&c, &shifted).unwrap();
        assert!((d.hausdorff - 0.25).abs() < 1e-3);
    }
}
