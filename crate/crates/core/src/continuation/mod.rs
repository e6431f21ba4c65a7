//! Bifurcations from the constant state, branch switching and branch tracing.

pub mod arclength;
mod stability;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use arclength::{tangent_at, trace, Orientation, RawPoint, StepControls, Termination, Trace};
pub use stability::{
    stability_index, unstable_count_dense, unstable_count_shifted, DENSE_NODE_LIMIT, GROWTH_THRESHOLD,
};

use crate::error::{Error, Result};
use crate::mesh::{assemble_jacobian, norms, Grid, Norms, StateVector, SystemProblem};
use crate::model::{constant_state, ModelParams};
use crate::scalar::{max_abs, Scalar};
use crate::solver::{newton_solve, NewtonOptions};
use crate::spectral::{critical_d2, kernel_ratios, mode_block};

/// A certified point on a solution branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint<T> {
    pub d2: T,
    pub state: StateVector<T>,
    pub s: T,
    pub norms: Norms<T>,
    /// `‖u - τ* v‖_∞`.
    pub ratio_defect: T,
    /// Number of growing modes; `None` when not computed or not certified.
    pub stability_index: Option<usize>,
    /// Direction of the curve in interleaved state coordinates.
    pub tangent: Vec<T>,
    pub tangent_d2: T,
    /// Sup-norm residual of the steady system.
    pub residual: T,
}

impl<T: Scalar> BranchPoint<T> {
    /// Builds a point from a converged state, filling in derived measures.
    pub fn from_state(
        state: StateVector<T>,
        d2: T,
        params: &ModelParams<T>,
        grid: &Grid<T>,
        with_stability: bool,
    ) -> Result<Self> {
        let residual = max_abs(&crate::mesh::assemble_residual(&state, d2, params, grid)?);
        let tau = constant_state(params).tau_star;
        let ratio_defect = state
            .u
            .iter()
            .zip(&state.v)
            .fold(T::zero(), |m, (&u, &v)| m.max((u - tau * v).abs()));
        let stability_index = if with_stability {
            stability_index(&state, d2, params, grid)
        } else {
            None
        };
        Ok(BranchPoint {
            d2,
            norms: norms(&state, grid),
            s: T::zero(),
            ratio_defect,
            stability_index,
            tangent: Vec::new(),
            tangent_d2: T::zero(),
            residual,
            state,
        })
    }

    /// Signed projection `⟨u - u*, Φ_j⟩_h`.
    pub fn amplitude(&self, j: usize, params: &ModelParams<T>, grid: &Grid<T>) -> T {
        mode_amplitude(&self.state, j, params, grid)
    }
}

pub fn mode_amplitude<T: Scalar>(state: &StateVector<T>, j: usize, params: &ModelParams<T>, grid: &Grid<T>) -> T {
    let c = constant_state(params);
    let du: Vec<T> = state.u.iter().map(|&u| u - c.u_star).collect();
    grid.inner(&du, &grid.sample_mode(j))
}

/// Newton tolerance for the system on `grid`: `1e-10`, scaled up for fine
/// grids and strong fluxes.
pub fn default_tolerance<T: Scalar>(params: &ModelParams<T>, grid: &Grid<T>) -> T {
    grid.residual_tolerance(T::lit(1e-10), params.alpha + params.beta)
}

/// Where a branch comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Trivial,
    /// Born at `d_*^{(j)}` along `sign · (Φ_j, κ_j Φ_j)`.
    Bifurcation { j: usize, sign: i8 },
    /// A branch of the limiting scalar equation.
    Limit { j: usize, sign: i8 },
}

impl Origin {
    pub fn mode(&self) -> Option<usize> {
        match *self {
            Origin::Trivial => None,
            Origin::Bifurcation { j, .. } | Origin::Limit { j, .. } => Some(j),
        }
    }
}

/// Side label used in branch ids: the negative kernel direction starts with
/// `v(x_left) < v*` and is called the upper branch.
pub fn side_label(sign: i8) -> &'static str {
    if sign < 0 {
        "upper"
    } else {
        "lower"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch<T> {
    pub id: String,
    pub origin: Origin,
    pub points: Vec<BranchPoint<T>>,
    pub termination: Termination,
    pub fold_count: usize,
}

/// Count of modes `1 ≤ j ≤ j_max` with `det A_j(d2) < 0`, per sampled `d2`.
pub fn trivial_branch_stability<T: Scalar>(params: &ModelParams<T>, d2_values: &[T], j_max: usize) -> Vec<(T, usize)> {
    d2_values
        .iter()
        .map(|&d2| {
            let count = (1..=j_max).filter(|&j| mode_block(j, d2, params).det < T::zero()).count();
            (d2, count)
        })
        .collect()
}

/// An analytic bifurcation point with its discrete counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bifurcation<T> {
    pub j: usize,
    pub d_star: T,
    /// Root of `det J_h(u*, v*; d2)` bracketing `d_star`, when one was found.
    pub discrete: Option<T>,
    /// `|discrete - d_star|`.
    pub gap: Option<T>,
}

fn constant_jacobian_sign<T: Scalar>(d2: T, params: &ModelParams<T>, grid: &Grid<T>) -> Option<T> {
    let c = constant_state(params);
    let s = StateVector::constant(grid.n, c.u_star, c.v_star);
    let jac = assemble_jacobian(&s, d2, params, grid).ok()?;
    jac.factor().ok().map(|lu| lu.det_sign())
}

/// Analytic `d_*^{(j)}` inside `(lo, hi)`, sorted descending, each checked
/// against a sign change of the discrete Jacobian determinant when `grid` is given.
pub fn detect_bifurcations<T: Scalar>(
    params: &ModelParams<T>,
    range: (T, T),
    j_max: usize,
    grid: Option<&Grid<T>>,
) -> Vec<Bifurcation<T>> {
    let (lo, hi) = range;
    let mut found: Vec<(usize, T)> = (1..=j_max)
        .filter_map(|j| critical_d2(j, params).map(|d| (j, d)))
        .filter(|&(_, d)| d > lo && d < hi)
        .collect();
    found.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));

    let all: Vec<T> = (1..=j_max).filter_map(|j| critical_d2(j, params)).collect();
    found
        .iter()
        .map(|&(j, d_star)| {
            let discrete = grid.and_then(|g| {
                // Bracket half-width: 5%, shrunk to stay clear of neighbouring roots.
                let mut w = T::lit(0.05) * d_star;
                for &other in &all {
                    if other != d_star {
                        w = w.min((other - d_star).abs() * T::lit(0.5));
                    }
                }
                bisect_det(d_star - w, d_star + w, params, g)
            });
            Bifurcation {
                j,
                d_star,
                discrete,
                gap: discrete.map(|d| (d - d_star).abs()),
            }
        })
        .collect()
}

fn bisect_det<T: Scalar>(mut a: T, mut b: T, params: &ModelParams<T>, grid: &Grid<T>) -> Option<T> {
    if !(a > T::zero()) {
        return None;
    }
    let sa = constant_jacobian_sign(a, params, grid)?;
    let sb = constant_jacobian_sign(b, params, grid)?;
    if sa == sb {
        return None;
    }
    for _ in 0..200 {
        let m = (a + b) * T::lit(0.5);
        if m <= a || m >= b {
            break;
        }
        match constant_jacobian_sign(m, params, grid) {
            Some(sm) if sm == sa => a = m,
            Some(_) => b = m,
            // exactly singular: m is the root
            None => return Some(m),
        }
    }
    Some((a + b) * T::lit(0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchOptions<T> {
    /// Relative detuning: Newton runs at `d_*^{(j)} (1 - delta)`.
    pub delta: T,
    pub newton: NewtonOptions<T>,
    pub with_stability: bool,
}

impl<T: Scalar> Default for SwitchOptions<T> {
    fn default() -> Self {
        SwitchOptions {
            delta: T::lit(0.02),
            newton: NewtonOptions::default(),
            with_stability: true,
        }
    }
}

/// `(u*, v*) + sign · amplitude · (Φ_j, κ_j Φ_j)` on the grid.
pub fn kernel_predictor<T: Scalar>(
    j: usize,
    sign: i8,
    amplitude: T,
    params: &ModelParams<T>,
    grid: &Grid<T>,
) -> StateVector<T> {
    let c = constant_state(params);
    let (kappa, _) = kernel_ratios(j, params);
    let phi = grid.sample_mode(j);
    let s = if sign < 0 { -amplitude } else { amplitude };
    StateVector {
        u: phi.iter().map(|&f| c.u_star + s * f).collect(),
        v: phi.iter().map(|&f| c.v_star + s * kappa * f).collect(),
    }
}

/// Leaves the constant state at `d_*^{(j)}` along `sign` times the kernel.
pub fn switch_branch<T: Scalar>(
    j: usize,
    sign: i8,
    amplitude: T,
    params: &ModelParams<T>,
    grid: &Grid<T>,
    opts: &SwitchOptions<T>,
) -> Result<BranchPoint<T>> {
    if !(amplitude > T::zero()) {
        return Err(Error::InvalidParameter("switch amplitude must be positive".into()));
    }
    if sign == 0 {
        return Err(Error::InvalidParameter("switch sign must be +1 or -1".into()));
    }
    let d_star = critical_d2(j, params).ok_or_else(|| Error::SwitchFailed {
        j,
        reason: "(alpha, beta) is outside the destabilizing region of this mode".into(),
    })?;
    let d2 = d_star * (T::one() - opts.delta);
    let guess = kernel_predictor(j, sign, amplitude, params, grid);
    let problem = SystemProblem::new(params, grid);
    let (x, _) = newton_solve(&problem, &guess.to_flat(), d2, &opts.newton).map_err(|e| Error::SwitchFailed {
        j,
        reason: format!("{e}; try a smaller amplitude"),
    })?;
    let state = StateVector::from_flat(&x);
    let (lo, hi) = state.u.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &u| (a.min(u), b.max(u)));
    if hi - lo <= T::lit(10.0) * opts.newton.tol {
        return Err(Error::SwitchFailed {
            j,
            reason: "corrector collapsed to the constant state".into(),
        });
    }
    if !(state.min_value() > T::zero()) {
        return Err(Error::SwitchFailed {
            j,
            reason: "corrected state is not positive".into(),
        });
    }
    BranchPoint::from_state(state, d2, params, grid, opts.with_stability)
}

/// Traces the branch through `seed`, starting in the direction `orientation`.
pub fn continue_branch<T: Scalar>(
    seed: &BranchPoint<T>,
    id: impl Into<String>,
    origin: Origin,
    params: &ModelParams<T>,
    grid: &Grid<T>,
    controls: &StepControls<T>,
    orientation: &Orientation<T>,
) -> Result<Branch<T>> {
    seed.state.check(grid)?;
    let problem = SystemProblem::new(params, grid);
    let tr = trace(&problem, &seed.state.to_flat(), seed.d2, None, orientation, controls, |_| true)?;
    let scale = tr.d2_scale;
    let points = tr
        .points
        .into_iter()
        .map(|rp| {
            let mut bp = BranchPoint::from_state(StateVector::from_flat(&rp.x), rp.d2, params, grid, controls.stability)?;
            bp.s = rp.s;
            bp.tangent = rp.tangent_x;
            bp.tangent_d2 = rp.tangent_p * scale;
            bp.residual = rp.residual;
            Ok(bp)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Branch {
        id: id.into(),
        origin,
        points,
        termination: tr.termination,
        fold_count: tr.folds,
    })
}

/// Sign changes of the discrete derivative of `v` between interior midpoints,
/// ignoring differences below `1e-8 ‖v‖_∞`.
pub fn node_count<T: Scalar>(state: &StateVector<T>, grid: &Grid<T>) -> Result<usize> {
    state.check(grid)?;
    let floor = T::lit(1e-8) * max_abs(&state.v);
    let diffs: Vec<T> = state.v.windows(2).map(|w| w[1] - w[0]).collect();
    let mut last: Option<bool> = None;
    let mut changes = 0;
    for d in diffs {
        if d.abs() <= floor {
            continue;
        }
        let pos = d > T::zero();
        if let Some(prev) = last {
            if prev != pos {
                changes += 1;
            }
        }
        last = Some(pos);
    }
    if last.is_none() {
        return Err(Error::Undefined("v is constant to within the noise floor".into()));
    }
    Ok(changes)
}

/// Smallest eigenpair of the discrete Jacobian at the constant state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck<T> {
    pub j: usize,
    pub d2: T,
    pub eigenvalue: T,
    /// `|⟨e, k⟩| / (|e| |k|)` against the sampled `(Φ_j, κ_j Φ_j)`.
    pub alignment: T,
}

/// Inverse iteration at `(u*, v*)` and `d2 = d_*^{(j)}`.
pub fn kernel_check<T: Scalar>(j: usize, params: &ModelParams<T>, grid: &Grid<T>) -> Result<KernelCheck<T>> {
    let d2 = critical_d2(j, params).ok_or_else(|| Error::InvalidParameter(format!("mode {j} has no critical value")))?;
    let c = constant_state(params);
    let s = StateVector::constant(grid.n, c.u_star, c.v_star);
    let jac = assemble_jacobian(&s, d2, params, grid)?;
    let lu = jac.factor()?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut x: Vec<T> = (0..2 * grid.n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect();
    let normalize = |x: &mut Vec<T>| {
        let n = x.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        x.iter_mut().for_each(|v| *v = *v / n);
    };
    normalize(&mut x);
    let mut mu = T::zero();
    for _ in 0..100 {
        let mut y = lu.solve(&x);
        normalize(&mut y);
        let jy = jac.mul_vec(&y);
        let new_mu = y.iter().zip(&jy).fold(T::zero(), |a, (&p, &q)| a + p * q);
        let res = jy.iter().zip(&y).fold(T::zero(), |m, (&p, &q)| m.max((p - new_mu * q).abs()));
        x = y;
        mu = new_mu;
        if res <= T::lit(1e-12) * jac.norm_inf() {
            break;
        }
    }
    let k = kernel_predictor(j, 1, T::one(), params, grid);
    let kvec: Vec<T> = k
        .u
        .iter()
        .zip(&k.v)
        .flat_map(|(&u, &v)| [u - c.u_star, v - c.v_star])
        .collect();
    let kk = kvec.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let ek = x.iter().zip(&kvec).fold(T::zero(), |a, (&p, &q)| a + p * q);
    Ok(KernelCheck {
        j,
        d2,
        eigenvalue: mu,
        alignment: ek.abs() / kk,
    })
}

/// The bifurcation point recovered from a traced branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetEstimate<T> {
    pub j: usize,
    /// Extrapolated `d2` at zero amplitude.
    pub d2: T,
    /// `(amplitude, d2)` samples used by the fit.
    pub samples: Vec<(T, T)>,
}

/// Least-squares polynomial in the amplitude through `samples`, evaluated at 0.
pub fn extrapolate_onset<T: Scalar>(samples: &[(T, T)], degree: usize) -> Result<T> {
    if samples.len() <= degree {
        return Err(Error::InvalidParameter(format!(
            "{} samples cannot determine a degree-{degree} fit",
            samples.len()
        )));
    }
    let scale = samples.iter().fold(0.0f64, |m, s| m.max(s.0.as_f64().abs()));
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter("all samples have zero amplitude".into()));
    }
    let d_ref = samples[0].1.as_f64();
    let a = DMatrix::from_fn(samples.len(), degree + 1, |r, c| (samples[r].0.as_f64() / scale).powi(c as i32));
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1.as_f64() - d_ref));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(T::lit(d_ref + coef[0]))
}

/// Recovers the onset of the branch through `seed` by tracing it through the
/// bifurcation point towards the opposite amplitude and fitting `d2(a)`.
pub fn estimate_onset<T: Scalar>(
    seed: &BranchPoint<T>,
    j: usize,
    params: &ModelParams<T>,
    grid: &Grid<T>,
    tol: T,
) -> Result<OnsetEstimate<T>> {
    let a0 = seed.amplitude(j, params, grid);
    if a0 == T::zero() {
        return Err(Error::InvalidParameter("seed has zero amplitude".into()));
    }
    let (kappa, _) = kernel_ratios(j, params);
    let span = a0.abs() * ((T::one() + kappa * kappa) * T::lit(0.5)).sqrt();
    let ds = span / T::lit(20.0);
    let controls = StepControls {
        ds,
        ds_min: ds / T::lit(256.0),
        ds_max: ds,
        grow: T::one(),
        tol,
        max_points: 400,
        max_folds: 2,
        d2_min: seed.d2 * T::lit(0.5),
        d2_max: seed.d2 * T::lit(2.0),
        min_value: Some(T::zero()),
        stability: false,
        ..StepControls::default()
    };
    let phi = grid.sample_mode(j);
    let toward = if a0 > T::zero() { -T::one() } else { T::one() };
    let w: Vec<T> = phi.iter().flat_map(|&f| [toward * f, T::zero()]).collect();
    let problem = SystemProblem::new(params, grid);
    let mut samples = Vec::new();
    let limit = a0.abs();
    let tr = trace(
        &problem,
        &seed.state.to_flat(),
        seed.d2,
        None,
        &Orientation::Along(w, T::zero()),
        &controls,
        |rp| {
            let a = mode_amplitude(&StateVector::from_flat(&rp.x), j, params, grid);
            if a.abs() <= limit * T::lit(1.0001) {
                samples.push((a, rp.d2));
            }
            // stop once well past the bifurcation on the opposite side
            !(a * toward > limit)
        },
    )?;
    let crossed = samples.iter().any(|s| s.0 * a0 < T::zero());
    if tr.termination != Termination::Observer || !crossed {
        return Err(Error::NoSolution(format!(
            "branch of mode {j} did not pass through the constant state (termination {})",
            tr.termination
        )));
    }
    let d2 = extrapolate_onset(&samples, 6)?;
    Ok(OnsetEstimate { j, d2, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(d2: f64) -> ModelParams<f64> {
        ModelParams::reference(2.0, 1.0, d2).unwrap()
    }

    #[test]
    fn trivial_profile_matches_table() {
        let p = reference(0.02);
        let prof = trivial_branch_stability(&p, &[0.05, 0.02, 0.007], 10);
        assert_eq!(prof, vec![(0.05, 0), (0.02, 1), (0.007, 2)]);
    }

    #[test]
    fn detection_sorted_descending_with_discrete_roots() {
        let p = reference(0.02);
        let g = Grid::for_params(201, &p).unwrap();
        let found = detect_bifurcations(&p, (0.001, 0.1), 10, Some(&g));
        let js: Vec<usize> = found.iter().map(|b| b.j).collect();
        // d_*^(4) ≈ 0.00109 also lies inside the range
        assert_eq!(js, vec![1, 2, 3, 4]);
        for (b, want) in found.iter().zip([0.035565, 0.009664, 0.003407, 0.001090]) {
            assert!((b.d_star - want).abs() < 5e-6, "{b:?}");
            // the discrete root is d_* with λ_j replaced by the grid eigenvalue
            let lam_h = g.laplacian_eigenvalue(b.j);
            let oracle = crate::spectral::critical_d2_with_lambda(lam_h, &p).unwrap();
            assert!((b.discrete.unwrap() - oracle).abs() < 1e-9 * oracle, "{b:?} vs {oracle}");
        }
    }

    #[test]
    fn no_flux_no_bifurcations() {
        let p = ModelParams::reference(0.0, 0.0, 0.02).unwrap();
        assert!(detect_bifurcations(&p, (0.001, 0.1), 10, None).is_empty());
    }

    #[test]
    fn node_count_of_cosines() {
        let g = Grid::new(201, 1.0, -0.5).unwrap();
        for (k, want) in [(1.0, 0), (2.0, 1), (3.0, 2)] {
            let v = g.sample(|x| 1.0 + 0.3 * (k * std::f64::consts::PI * (x + 0.5)).cos());
            let s = StateVector { u: v.clone(), v };
            assert_eq!(node_count(&s, &g).unwrap(), want);
        }
        let v2 = g.sample(|x| (2.0 * std::f64::consts::PI * x).cos());
        assert_eq!(node_count(&StateVector { u: v2.clone(), v: v2 }, &g).unwrap(), 1);
        let flat = StateVector::constant(201, 0.5, 0.5);
        assert!(matches!(node_count(&flat, &g), Err(Error::Undefined(_))));
    }

    #[test]
    fn polynomial_extrapolation_is_exact_for_quartics() {
        let samples: Vec<(f64, f64)> = (-6..=6)
            .map(|k| {
                let a = 0.01 * k as f64;
                (a, 0.03 - 2.0 * a * a + 0.5 * a.powi(3) + 7.0 * a.powi(4))
            })
            .collect();
        assert!((extrapolate_onset(&samples, 4).unwrap() - 0.03).abs() < 1e-14);
    }
}
