//! Conservative finite differences for the steady-state system on a uniform grid.
//!
//! Unknowns are interleaved as `[u_0, v_0, u_1, v_1, ...]`. Node `i` owns the
//! control volume of width `h` (half that at the two endpoints) and the
//! residual is the net flux out of it divided by its width plus the reaction:
//!
//! ```text
//! J_u(i+½) = (d1 + α v̄) (u_{i+1} - u_i)/h - α ū (v_{i+1} - v_i)/h
//! J_v(i+½) = (d2 + β ū) (v_{i+1} - v_i)/h - β v̄ (u_{i+1} - u_i)/h
//! ```
//!
//! with arithmetic midpoint averages `ū`, `v̄` and zero flux through the ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{growth_u, growth_v, ModelParams};
use crate::scalar::{max_abs, Scalar};
use crate::solver::{BandedMatrix, SteadyProblem};
use crate::spectral::eigenfunction_unchecked;

/// Uniform grid with `n` nodes including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub n: usize,
    pub length: T,
    pub x_left: T,
    pub h: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(n: usize, length: T, x_left: T) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("grid needs at least 3 nodes, got {n}")));
        }
        if !(length > T::zero()) {
            return Err(Error::InvalidParameter("grid length must be positive".into()));
        }
        Ok(Grid {
            n,
            length,
            x_left,
            h: length / T::from_usize_lossy(n - 1),
        })
    }

    pub fn for_params(n: usize, p: &ModelParams<T>) -> Result<Self> {
        Self::new(n, p.length, p.x_left)
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        if i + 1 == self.n {
            self.x_left + self.length
        } else {
            self.x_left + T::from_usize_lossy(i) * self.h
        }
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Control-volume width of node `i` (trapezoid weight).
    #[inline]
    pub fn weight(&self, i: usize) -> T {
        if i == 0 || i + 1 == self.n {
            self.h * T::lit(0.5)
        } else {
            self.h
        }
    }

    /// Trapezoid inner product.
    pub fn inner(&self, a: &[T], b: &[T]) -> T {
        a.iter()
            .zip(b)
            .enumerate()
            .fold(T::zero(), |acc, (i, (&x, &y))| acc + self.weight(i) * x * y)
    }

    pub fn integrate(&self, a: &[T]) -> T {
        a.iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &x)| acc + self.weight(i) * x)
    }

    /// Residual tolerance `base · max(1, c) · max(1, (L/200h)²)` for diffusion
    /// coefficients of size `c`.
    ///
    /// Discrete second differences carry rounding errors of order `ε c/h²`, so
    /// a fixed absolute tolerance becomes unreachable on fine grids.
    pub fn residual_tolerance(&self, base: T, c: T) -> T {
        let r = self.length / (T::lit(200.0) * self.h);
        base * c.max(T::one()) * (r * r).max(T::one())
    }

    /// Eigenvalue of `-Δ_h` for the cosine mode `j < n`: `(4/h²) sin²(jπh/(2L))`.
    pub fn laplacian_eigenvalue(&self, j: usize) -> T {
        let s = (T::from_usize_lossy(j) * T::PI() * self.h / (T::lit(2.0) * self.length)).sin();
        T::lit(4.0) * s * s / (self.h * self.h)
    }

    /// Samples the normalized Neumann eigenfunction `Φ_j` at the nodes.
    pub fn sample_mode(&self, j: usize) -> Vec<T> {
        (0..self.n)
            .map(|i| eigenfunction_unchecked(j, self.length, self.x_left, self.x(i)))
            .collect()
    }

    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }
}

/// Nodal values of both species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> StateVector<T> {
    pub fn constant(n: usize, u: T, v: T) -> Self {
        StateVector { u: vec![u; n], v: vec![v; n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Interleaved `[u_0, v_0, u_1, v_1, ...]`.
    pub fn to_flat(&self) -> Vec<T> {
        self.u.iter().zip(&self.v).flat_map(|(&a, &b)| [a, b]).collect()
    }

    pub fn from_flat(x: &[T]) -> Self {
        StateVector {
            u: x.iter().step_by(2).copied().collect(),
            v: x.iter().skip(1).step_by(2).copied().collect(),
        }
    }

    /// Mirror image `x ↦ x_left + x_right - x`.
    pub fn reflected(&self) -> Self {
        StateVector {
            u: self.u.iter().rev().copied().collect(),
            v: self.v.iter().rev().copied().collect(),
        }
    }

    pub fn min_value(&self) -> T {
        self.u.iter().chain(&self.v).fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// `max |a - b|` over both components.
    pub fn sup_distance(&self, other: &Self) -> T {
        let du = self.u.iter().zip(&other.u).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        self.v.iter().zip(&other.v).fold(du, |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub(crate) fn check(&self, grid: &Grid<T>) -> Result<()> {
        for len in [self.u.len(), self.v.len()] {
            if len != grid.n {
                return Err(Error::SizeMismatch { expected: grid.n, got: len });
            }
        }
        Ok(())
    }
}

/// Norms used for diagrams and a priori audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms<T> {
    pub l2_u: T,
    pub l2_v: T,
    pub sup_u: T,
    pub sup_v: T,
    pub h1_u: T,
    pub h1_v: T,
}

/// Trapezoid `L²` norms, nodal sup norms and forward-difference `H¹` seminorms.
pub fn norms<T: Scalar>(state: &StateVector<T>, grid: &Grid<T>) -> Norms<T> {
    Norms {
        l2_u: l2_norm(&state.u, grid),
        l2_v: l2_norm(&state.v, grid),
        sup_u: max_abs(&state.u),
        sup_v: max_abs(&state.v),
        h1_u: h1_seminorm(&state.u, grid),
        h1_v: h1_seminorm(&state.v, grid),
    }
}

pub fn l2_norm<T: Scalar>(a: &[T], grid: &Grid<T>) -> T {
    grid.inner(a, a).sqrt()
}

pub fn h1_seminorm<T: Scalar>(a: &[T], grid: &Grid<T>) -> T {
    let s = a.windows(2).fold(T::zero(), |acc, w| {
        let d = (w[1] - w[0]) / grid.h;
        acc + d * d * grid.h
    });
    s.sqrt()
}

/// Conservative Neumann Laplacian `Δ_h a`.
pub fn laplacian<T: Scalar>(a: &[T], grid: &Grid<T>) -> Vec<T> {
    let n = grid.n;
    let mut out = vec![T::zero(); n];
    for e in 0..n - 1 {
        let flux = (a[e + 1] - a[e]) / grid.h;
        out[e] = out[e] + flux;
        out[e + 1] = out[e + 1] - flux;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = *o / grid.weight(i);
    }
    out
}

/// The steady-state system as a [`SteadyProblem`] over interleaved unknowns.
#[derive(Debug, Clone, Copy)]
pub struct SystemProblem<'a, T> {
    pub params: &'a ModelParams<T>,
    pub grid: &'a Grid<T>,
}

impl<'a, T: Scalar> SystemProblem<'a, T> {
    pub fn new(params: &'a ModelParams<T>, grid: &'a Grid<T>) -> Self {
        SystemProblem { params, grid }
    }
}

/// Lower and upper bandwidth of the interleaved Jacobian.
pub const SYSTEM_BANDWIDTH: usize = 3;

impl<T: Scalar> SteadyProblem<T> for SystemProblem<'_, T> {
    fn dim(&self) -> usize {
        2 * self.grid.n
    }

    fn residual(&self, x: &[T], d2: T, out: &mut [T]) {
        let p = self.params;
        let g = self.grid;
        let n = g.n;
        let half = T::lit(0.5);
        for i in 0..n {
            let (u, v) = (x[2 * i], x[2 * i + 1]);
            out[2 * i] = u * growth_u(u, v, p);
            out[2 * i + 1] = v * growth_v(u, v, p);
        }
        for e in 0..n - 1 {
            let (ul, vl, ur, vr) = (x[2 * e], x[2 * e + 1], x[2 * e + 2], x[2 * e + 3]);
            let um = half * (ul + ur);
            let vm = half * (vl + vr);
            let du = (ur - ul) / g.h;
            let dv = (vr - vl) / g.h;
            let fu = (p.d1 + p.alpha * vm) * du - p.alpha * um * dv;
            let fv = (d2 + p.beta * um) * dv - p.beta * vm * du;
            let wl = g.weight(e);
            let wr = g.weight(e + 1);
            out[2 * e] = out[2 * e] + fu / wl;
            out[2 * e + 1] = out[2 * e + 1] + fv / wl;
            out[2 * e + 2] = out[2 * e + 2] - fu / wr;
            out[2 * e + 3] = out[2 * e + 3] - fv / wr;
        }
    }

    fn jacobian(&self, x: &[T], d2: T) -> BandedMatrix<T> {
        let p = self.params;
        let g = self.grid;
        let n = g.n;
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let mut jac = BandedMatrix::zeros(2 * n, SYSTEM_BANDWIDTH, SYSTEM_BANDWIDTH);
        for i in 0..n {
            let (u, v) = (x[2 * i], x[2 * i + 1]);
            jac.add(2 * i, 2 * i, p.a1 - two * p.b1 * u + p.c1 * v);
            jac.add(2 * i, 2 * i + 1, p.c1 * u);
            jac.add(2 * i + 1, 2 * i, p.b2 * v);
            jac.add(2 * i + 1, 2 * i + 1, -p.a2 + p.b2 * u - two * p.c2 * v);
        }
        let inv_h = T::one() / g.h;
        for e in 0..n - 1 {
            let (ul, vl, ur, vr) = (x[2 * e], x[2 * e + 1], x[2 * e + 2], x[2 * e + 3]);
            let um = half * (ul + ur);
            let vm = half * (vl + vr);
            let du = (ur - ul) * inv_h;
            let dv = (vr - vl) * inv_h;
            let cu = p.d1 + p.alpha * vm;
            let cv = d2 + p.beta * um;
            // edge flux derivatives w.r.t. (u_l, v_l, u_r, v_r)
            let dfu = [
                -cu * inv_h - half * p.alpha * dv,
                half * p.alpha * du + p.alpha * um * inv_h,
                cu * inv_h - half * p.alpha * dv,
                half * p.alpha * du - p.alpha * um * inv_h,
            ];
            let dfv = [
                half * p.beta * dv + p.beta * vm * inv_h,
                -cv * inv_h - half * p.beta * du,
                half * p.beta * dv - p.beta * vm * inv_h,
                cv * inv_h - half * p.beta * du,
            ];
            let cols = [2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3];
            let wl = g.weight(e);
            let wr = g.weight(e + 1);
            for k in 0..4 {
                jac.add(2 * e, cols[k], dfu[k] / wl);
                jac.add(2 * e + 1, cols[k], dfv[k] / wl);
                jac.add(2 * e + 2, cols[k], -dfu[k] / wr);
                jac.add(2 * e + 3, cols[k], -dfv[k] / wr);
            }
        }
        jac
    }

    fn d2_derivative(&self, x: &[T], _d2: T, out: &mut [T]) {
        let v: Vec<T> = x.iter().skip(1).step_by(2).copied().collect();
        let lap = laplacian(&v, self.grid);
        for i in 0..self.grid.n {
            out[2 * i] = T::zero();
            out[2 * i + 1] = lap[i];
        }
    }
}

/// Residual of the discrete steady-state system, interleaved.
pub fn assemble_residual<T: Scalar>(
    state: &StateVector<T>,
    d2: T,
    params: &ModelParams<T>,
    grid: &Grid<T>,
) -> Result<Vec<T>> {
    state.check(grid)?;
    Ok(SystemProblem::new(params, grid).residual_vec(&state.to_flat(), d2))
}

/// Exact Jacobian of [`assemble_residual`] (block-tridiagonal, bandwidth 3).
pub fn assemble_jacobian<T: Scalar>(
    state: &StateVector<T>,
    d2: T,
    params: &ModelParams<T>,
    grid: &Grid<T>,
) -> Result<BandedMatrix<T>> {
    state.check(grid)?;
    Ok(SystemProblem::new(params, grid).jacobian(&state.to_flat(), d2))
}

/// `∂F/∂d2`: the discrete Laplacian of `v` in the `v` rows, zero elsewhere.
pub fn d2_derivative<T: Scalar>(state: &StateVector<T>, grid: &Grid<T>) -> Result<Vec<T>> {
    state.check(grid)?;
    let lap = laplacian(&state.v, grid);
    Ok(lap.into_iter().flat_map(|l| [T::zero(), l]).collect())
}

/// Piecewise-linear interpolation of `state` onto `fine`.
pub fn prolong<T: Scalar>(state: &StateVector<T>, coarse: &Grid<T>, fine: &Grid<T>) -> Result<StateVector<T>> {
    state.check(coarse)?;
    Ok(StateVector {
        u: prolong_values(&state.u, coarse, fine)?,
        v: prolong_values(&state.v, coarse, fine)?,
    })
}

pub fn prolong_values<T: Scalar>(a: &[T], coarse: &Grid<T>, fine: &Grid<T>) -> Result<Vec<T>> {
    if a.len() != coarse.n {
        return Err(Error::SizeMismatch { expected: coarse.n, got: a.len() });
    }
    let tol = T::lit(1e-12) * (T::one() + coarse.length.abs());
    if fine.x_left < coarse.x_left - tol || fine.x(fine.n - 1) > coarse.x(coarse.n - 1) + tol {
        return Err(Error::Domain("fine grid extends beyond the coarse domain".into()));
    }
    Ok((0..fine.n)
        .map(|i| {
            let s = ((fine.x(i) - coarse.x_left) / coarse.h).max(T::zero());
            let k = s.floor().to_usize().unwrap_or(0).min(coarse.n - 2);
            let t = (s - T::from_usize_lossy(k)).min(T::one());
            a[k] * (T::one() - t) + a[k + 1] * t
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{constant_state, reaction};
    use crate::spectral::{critical_d2, kernel_ratios};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (ModelParams<f64>, Grid<f64>) {
        let p = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        let g = Grid::for_params(n, &p).unwrap();
        (p, g)
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector<f64> {
        StateVector {
            u: (0..n).map(|_| rng.random_range(0.1..1.5)).collect(),
            v: (0..n).map(|_| rng.random_range(0.1..1.5)).collect(),
        }
    }

    #[test]
    fn constant_state_has_zero_residual() {
        let (p, g) = setup(41);
        let c = constant_state(&p);
        let s = StateVector::constant(g.n, c.u_star, c.v_star);
        let r = assemble_residual(&s, 0.03, &p, &g).unwrap();
        assert!(max_abs(&r) < 1e-15);
        assert!(max_abs(&d2_derivative(&s, &g).unwrap()) == 0.0);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let (p, g) = setup(11);
        let s = StateVector::constant(10, 0.5, 0.5);
        assert!(matches!(assemble_residual(&s, 0.03, &p, &g), Err(Error::SizeMismatch { .. })));
        assert!(assemble_jacobian(&s, 0.03, &p, &g).is_err());
    }

    #[test]
    fn weighted_residual_sum_equals_reaction_quadrature() {
        let (p, g) = setup(33);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_state(&mut rng, g.n);
        let r = assemble_residual(&s, 0.03, &p, &g).unwrap();
        let st = StateVector::from_flat(&r);
        let (f, gg): (Vec<f64>, Vec<f64>) = s.u.iter().zip(&s.v).map(|(&u, &v)| reaction(u, v, &p)).unzip();
        assert!((g.integrate(&st.u) - g.integrate(&f)).abs() < 1e-11);
        assert!((g.integrate(&st.v) - g.integrate(&gg)).abs() < 1e-11);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let (p, g) = setup(15);
        let prob = SystemProblem::new(&p, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x = random_state(&mut rng, g.n).to_flat();
            let jac = prob.jacobian(&x, 0.03);
            let eps = 1e-4;
            for k in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += eps;
                xm[k] -= eps;
                let rp = prob.residual_vec(&xp, 0.03);
                let rm = prob.residual_vec(&xm, 0.03);
                for i in 0..x.len() {
                    let fd = (rp[i] - rm[i]) / (2.0 * eps);
                    let an = jac.get(i, k);
                    assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "({i},{k}): {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn zero_flux_decouples_species_except_through_reaction() {
        let (p, g) = setup(9);
        let q = p.with_flux(0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(&mut rng, g.n);
        let jac = assemble_jacobian(&s, 0.03, &q, &g).unwrap();
        for i in 0..g.n {
            for j in 0..g.n {
                if i != j {
                    assert_eq!(jac.get(2 * i, 2 * j + 1), 0.0);
                    assert_eq!(jac.get(2 * i + 1, 2 * j), 0.0);
                }
            }
        }
    }

    #[test]
    fn d2_derivative_matches_difference_and_is_linear() {
        let (p, g) = setup(21);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_state(&mut rng, g.n);
        let d = d2_derivative(&s, &g).unwrap();
        let rp = assemble_residual(&s, 0.031, &p, &g).unwrap();
        let rm = assemble_residual(&s, 0.029, &p, &g).unwrap();
        for i in 0..d.len() {
            assert!(((rp[i] - rm[i]) / 0.002 - d[i]).abs() <= 1e-8 * d[i].abs().max(1.0));
        }
        let doubled = StateVector { u: s.u.clone(), v: s.v.iter().map(|x| 2.0 * x).collect() };
        let d2x = d2_derivative(&doubled, &g).unwrap();
        for i in 0..d.len() {
            assert!((d2x[i] - 2.0 * d[i]).abs() < 1e-9 * d[i].abs().max(1.0));
        }
    }

    #[test]
    fn discrete_kernel_residual_is_second_order() {
        // at the analytic critical value the Jacobian annihilates (Φ_1, κ_1 Φ_1) up to O(h²)
        let p = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        let c = constant_state(&p);
        let d = critical_d2(1, &p).unwrap();
        let (kappa, _) = kernel_ratios(1, &p);
        let mut errs = Vec::new();
        for n in [51, 101, 201] {
            let g = Grid::for_params(n, &p).unwrap();
            let s = StateVector::constant(n, c.u_star, c.v_star);
            let jac = assemble_jacobian(&s, d, &p, &g).unwrap();
            let phi = g.sample_mode(1);
            let dir = StateVector { u: phi.clone(), v: phi.iter().map(|x| kappa * x).collect() };
            let r = jac.mul_vec(&dir.to_flat());
            errs.push(max_abs(&r));
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.5 && ratio < 4.5, "{errs:?}");
        }
    }

    #[test]
    fn kernel_perturbation_residual_scaling() {
        let p = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        let c = constant_state(&p);
        let d = critical_d2(1, &p).unwrap();
        let (kappa, _) = kernel_ratios(1, &p);
        let g = Grid::for_params(801, &p).unwrap();
        let phi = g.sample_mode(1);
        let res = |eps: f64| {
            let s = StateVector {
                u: phi.iter().map(|x| c.u_star + eps * x).collect(),
                v: phi.iter().map(|x| c.v_star + eps * kappa * x).collect(),
            };
            max_abs(&assemble_residual(&s, d, &p, &g).unwrap())
        };
        // quadratic in ε once ε h² is negligible
        let r1 = res(1e-2);
        let r2 = res(5e-3);
        assert!((r1 / r2 - 4.0).abs() < 0.2, "{r1} {r2}");
    }

    #[test]
    fn manufactured_solution_truncation_is_second_order() {
        let p = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        let d2 = 0.03;
        let pi = std::f64::consts::PI;
        // u = 0.5 + 0.1 cos(π(x+½)), v = 0.5 + 0.2 cos(π(x+½)) and the continuous operator applied to them
        let exact = |x: f64| {
            let c = (pi * (x + 0.5)).cos();
            let (u, v) = (0.5 + 0.1 * c, 0.5 + 0.2 * c);
            let (uxx, vxx) = (-0.1 * pi * pi * c, -0.2 * pi * pi * c);
            // ∂x[(d1 + α v) u_x - α u v_x] = (d1 + α v) u_xx - α u v_xx
            let lu = (p.d1 + p.alpha * v) * uxx - p.alpha * u * vxx;
            let lv = (d2 + p.beta * u) * vxx - p.beta * v * uxx;
            let (f, g) = reaction(u, v, &p);
            (u, v, lu + f, lv + g)
        };
        let mut errs = Vec::new();
        for n in [41, 81, 161] {
            let g = Grid::for_params(n, &p).unwrap();
            let xs = g.nodes();
            let s = StateVector {
                u: xs.iter().map(|&x| exact(x).0).collect(),
                v: xs.iter().map(|&x| exact(x).1).collect(),
            };
            let r = StateVector::from_flat(&assemble_residual(&s, d2, &p, &g).unwrap());
            let mut e: f64 = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let (_, _, ru, rv) = exact(x);
                e = e.max((r.u[i] - ru).abs()).max((r.v[i] - rv).abs());
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn norms_of_simple_profiles() {
        let (_, g) = setup(1001);
        let s = StateVector::constant(g.n, 0.7, -0.3);
        let nm = norms(&s, &g);
        assert!((nm.l2_u - 0.7).abs() < 1e-12 && (nm.l2_v - 0.3).abs() < 1e-12);
        assert_eq!(nm.h1_u, 0.0);
        let phi = g.sample_mode(1);
        assert!((l2_norm(&phi, &g) - 1.0).abs() < 1e-4);
        let s = StateVector { u: phi.clone(), v: phi.iter().map(|x| -2.0 * x).collect() };
        let nm = norms(&s, &g);
        assert_eq!(nm.sup_u, max_abs(&phi));
        assert_eq!(nm.sup_v, 2.0 * max_abs(&phi));
    }

    #[test]
    fn prolongation_properties() {
        let (p, coarse) = setup(101);
        let fine = Grid::for_params(201, &p).unwrap();
        let c = StateVector::constant(101, 0.5, 0.25);
        let f = prolong(&c, &coarse, &fine).unwrap();
        assert!(f.u.iter().all(|&x| x == 0.5) && f.v.iter().all(|&x| x == 0.25));

        let lin = StateVector { u: coarse.sample(|x| 2.0 * x + 1.0), v: coarse.sample(|x| -x) };
        let f = prolong(&lin, &coarse, &fine).unwrap();
        for (i, &x) in fine.nodes().iter().enumerate() {
            assert!((f.u[i] - (2.0 * x + 1.0)).abs() < 1e-13);
            assert!((f.v[i] + x).abs() < 1e-13);
        }

        let mut errs = Vec::new();
        for (nc, nf) in [(51, 101), (101, 201), (201, 401)] {
            let gc = Grid::for_params(nc, &p).unwrap();
            let gf = Grid::for_params(nf, &p).unwrap();
            let s = StateVector { u: gc.sample_mode(1), v: gc.sample_mode(1) };
            let f = prolong(&s, &gc, &gf).unwrap();
            let e: Vec<f64> = f.u.iter().zip(gf.sample_mode(1)).map(|(a, b)| a - b).collect();
            errs.push(l2_norm(&e, &gf));
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]) > 3.5);
        }

        let wide = Grid::new(201, 2.0, -1.0).unwrap();
        assert!(prolong(&c, &coarse, &wide).is_err());
    }

    #[test]
    fn discrete_laplacian_eigenpairs() {
        let (_, g) = setup(65);
        for j in [1usize, 2, 5] {
            let phi: Vec<f64> = (0..g.n)
                .map(|i| (j as f64 * std::f64::consts::PI * i as f64 / (g.n - 1) as f64).cos())
                .collect();
            let lap = laplacian(&phi, &g);
            let lam = g.laplacian_eigenvalue(j);
            for i in 0..g.n {
                assert!((lap[i] + lam * phi[i]).abs() < 1e-8 * lam);
            }
        }
    }
}
